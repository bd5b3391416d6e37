use std::sync::OnceLock;

use fockop::domain::Rect;
use fockop::kernel::{default_quadrature, project, KernelModel};
use fockop::lattice::build_lattice;
use fockop::quadrature::QuadratureGrid;
use fockop::symbols::Symbol;
use fockop::toeplitz::{assemble_toeplitz, eigenvalues_desc, quadratic_form, schatten_sum};
use fockop::transforms::{berezin_scalar, BerezinMaps};
use fockop::weights::{RadiusField, Weight};
use fockop::{CMatrix, C64};
use proptest::prelude::*;

const K: usize = 24;

fn gaussian() -> &'static (KernelModel, QuadratureGrid) {
    static CELL: OnceLock<(KernelModel, QuadratureGrid)> = OnceLock::new();
    CELL.get_or_init(|| {
        let w = Weight::gaussian(1.0).unwrap();
        let q = default_quadrature(&w, K).unwrap();
        (KernelModel::build(&w, K, &q).unwrap(), q)
    })
}

fn toeplitz(g: &Symbol) -> CMatrix {
    let (model, quad) = gaussian();
    assemble_toeplitz(model, g, quad).unwrap().matrix
}

fn bump(a: f64) -> Symbol {
    Symbol::parse(&format!("scalar:exp(-{a}*r^2)"), 1).unwrap()
}

// Smooth non-radial PSD 2x2 symbol.
fn tilted(a: f64, b: f64) -> Symbol {
    Symbol::custom(format!("tilted:{a},{b}"), 2, move |z, out| {
        let s = (-a * z.norm_sqr()).exp();
        let c = b * (z.re * 0.7).sin() * s;
        out[0] = C64::new(s, 0.0);
        out[1] = C64::new(c, 0.3 * c);
        out[2] = C64::new(c, -0.3 * c);
        out[3] = C64::new(s * (1.0 + b * b) + 0.1, 0.0);
    })
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn toeplitz_is_linear_in_the_symbol(a in 0.2f64..2.0, b in 0.2f64..2.0, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let g = tilted(a, 0.5);
        let h = tilted(b, 0.8);
        let combo = g.scaled(s).unwrap().sum(&h.scaled(t).unwrap()).unwrap();
        let lhs = toeplitz(&combo);
        let rhs = toeplitz(&g) * C64::new(s, 0.0) + toeplitz(&h) * C64::new(t, 0.0);
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-12 * (1.0 + s + t) * 10.0);
    }

    #[test]
    fn larger_symbol_gives_larger_operator(r1 in 0.3f64..2.0, dr in 0.1f64..1.5) {
        let small = Symbol::parse(&format!("scalar:chi_disk({r1})"), 1).unwrap();
        let large = Symbol::parse(&format!("scalar:chi_disk({})", r1 + dr), 1).unwrap();
        let diff = toeplitz(&large) - toeplitz(&small);
        let ev = eigenvalues_desc(&diff);
        prop_assert!(*ev.last().unwrap() > -1e-10);
    }

    #[test]
    fn quadratic_form_matches_direct_integral(a in 0.3f64..1.5, seed in 0u64..1000) {
        let (model, quad) = gaussian();
        let g = tilted(a, 0.6);
        let t = assemble_toeplitz(model, &g, quad).unwrap();
        let v: Vec<C64> = (0..2 * K)
            .map(|i| {
                let x = ((seed as f64 + 1.0) * (i as f64 + 0.5)).sin();
                C64::new(x, (x * 3.1).cos()) * 0.8f64.powi(i as i32 / 2)
            })
            .collect();
        let form = quadratic_form(&t, &v);
        let mut direct = 0.0;
        let mut buf = [C64::new(0.0, 0.0); 4];
        for (w, q) in quad.nodes() {
            let f = model.basis_at(w);
            let mut val = [C64::new(0.0, 0.0); 2];
            for k in 0..K {
                for m in 0..2 {
                    val[m] += v[k * 2 + m] * f[k];
                }
            }
            g.eval_into(w, &mut buf);
            let mut gf = C64::new(0.0, 0.0);
            for n in 0..2 {
                for m in 0..2 {
                    gf += val[n].conj() * buf[n * 2 + m] * val[m];
                }
            }
            direct += q * gf.re * (-2.0 * model.weight().phi(w)).exp();
        }
        prop_assert!((form - direct).abs() < 1e-9 * (1.0 + direct.abs()), "{form} vs {direct}");
    }

    #[test]
    fn schatten_norm_decreases_in_p(a in 0.3f64..3.0, p in 0.5f64..3.0, dp in 0.1f64..2.0) {
        let ev = eigenvalues_desc(&toeplitz(&bump(a)));
        let norm = |p: f64| schatten_sum(&ev, p).powf(1.0 / p);
        prop_assert!(norm(p) >= norm(p + dp) * (1.0 - 1e-12));
        prop_assert!(norm(p + dp) >= ev[0] * (1.0 - 1e-12));
    }

    #[test]
    fn berezin_of_constant_is_constant(c in 0.0f64..10.0, x in -2.5f64..2.5, y in -2.5f64..2.5) {
        let (model, quad) = gaussian();
        let g = Symbol::identity(1).scaled(c).unwrap();
        let v = berezin_scalar(model, &g, C64::new(x, y), quad).unwrap();
        prop_assert!((v - c).abs() < 1e-9 * (1.0 + c));
    }

    #[test]
    fn berezin_routes_agree(a in 0.3f64..1.5, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let (model, quad) = gaussian();
        let g = tilted(a, 0.4);
        let maps = BerezinMaps::new(model, &g, quad).unwrap();
        let z = C64::new(x, y);
        let direct = berezin_scalar(model, &g, z, quad).unwrap();
        prop_assert!((maps.scalar(z) - direct).abs() < 1e-10 * (1.0 + direct));
    }

    #[test]
    fn projection_reproduces_polynomials(c in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let (model, quad) = gaussian();
        let mut coeffs = vec![C64::new(0.0, 0.0); K];
        for (i, pair) in c.chunks(2).enumerate() {
            coeffs[i * 3] = C64::new(pair[0], pair[1]);
        }
        let samples: Vec<C64> = quad.nodes().map(|(w, _)| model.synthesize(&coeffs, w)).collect();
        let back = project(model, &samples, 1, quad).unwrap();
        let err = coeffs.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-11);
    }

    #[test]
    fn rho_is_one_lipschitz(a2 in 0.1f64..1.0, a4 in 0.0f64..0.5,
                            x in -4.0f64..4.0, y in -4.0f64..4.0, dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
        let field = RadiusField::new(Weight::radial_poly(a2, a4).unwrap());
        let z = C64::new(x, y);
        let w = C64::new(x + dx, y + dy);
        let gap = (field.rho(z).unwrap() - field.rho(w).unwrap()).abs();
        prop_assert!(gap <= (z - w).norm() * (1.0 + 1e-9) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn built_lattices_cover_and_pack(delta in 0.2f64..0.49, half in 1.0f64..2.5, a4 in 0.0f64..0.2) {
        let field = RadiusField::new(Weight::radial_poly(0.5, a4).unwrap());
        let lat = build_lattice(&field, &Rect::centered(half), delta, 121).unwrap();
        prop_assert_eq!(lat.coverage_holes(), 0);
        prop_assert_eq!(lat.packing_violations(), 0);
    }
}

#[test]
fn leading_eigenvalues_stable_under_basis_doubling() {
    let w = Weight::gaussian(1.0).unwrap();
    let mut spectra = Vec::new();
    for k in [32, 64] {
        let q = default_quadrature(&w, k).unwrap();
        let model = KernelModel::build(&w, k, &q).unwrap();
        let g = Symbol::parse("diag:exp(-r^2/2),chi_disk(1.5)", 2).unwrap();
        spectra.push(eigenvalues_desc(&assemble_toeplitz(&model, &g, &q).unwrap().matrix));
    }
    for i in 0..16 {
        assert!((spectra[0][i] - spectra[1][i]).abs() < 1e-4, "index {i}");
    }
}

#[test]
fn trace_bounded_across_truncations() {
    let w = Weight::gaussian(1.0).unwrap();
    let g = Symbol::parse("scalar:exp(-r^2)", 1).unwrap();
    let mut traces = Vec::new();
    for k in [16, 32, 64] {
        let q = default_quadrature(&w, k).unwrap();
        let model = KernelModel::build(&w, k, &q).unwrap();
        let ev = eigenvalues_desc(&assemble_toeplitz(&model, &g, &q).unwrap().matrix);
        traces.push(schatten_sum(&ev, 1.0));
    }
    // partial sums of sum_k 2^{-(k+1)}
    for (t, k) in traces.iter().zip([16, 32, 64]) {
        assert!((t - (1.0 - 0.5f64.powi(k))).abs() < 1e-10);
    }
}
