//! Galerkin matrices of vectorial Toeplitz operators `T_G` and of the
//! Carleson embedding form, with their spectra.

use std::io::{BufRead, Write};

use nalgebra::SymmetricEigen;

use crate::kernel::KernelModel;
use crate::quadrature::QuadratureGrid;
use crate::symbols::Symbol;
use crate::{CMatrix, Error, Result, C64};

/// Largest accepted `|T - T^*|`, relative to `max(1, max |T|)`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Singular values below this count as numerically zero for the tail index.
pub const TAIL_THRESHOLD: f64 = 1e-6;

/// Galerkin matrix of `T_G` in the basis `f_k e_m`, row index `k d + m`:
/// `entry[(k,m),(r,n)] = int <G e_m, e_n> f_k conj(f_r) e^{-2 phi} dA`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzMatrix {
    pub matrix: CMatrix,
    pub basis_size: usize,
    pub dimension: usize,
    pub weight_id: String,
    pub symbol_id: String,
    pub quad_id: String,
}

impl ToeplitzMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Block entry `(k, m), (r, n)`.
    pub fn entry(&self, k: usize, m: usize, r: usize, n: usize) -> C64 {
        let d = self.dimension;
        self.matrix[(k * d + m, r * d + n)]
    }

    /// Writes the header `K_basis d` followed by one line per row of
    /// whitespace-separated real and imaginary parts.
    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{} {}", self.basis_size, self.dimension)?;
        for i in 0..self.size() {
            let mut line = String::new();
            for j in 0..self.size() {
                let v = self.matrix[(i, j)];
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:.17e} {:.17e}", v.re, v.im));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads the format of [`ToeplitzMatrix::write_text`]; metadata ids are
    /// left empty.
    pub fn read_text(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty matrix file".into()))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [basis_size, dimension] = dims[..] else {
            return Err(Error::Format(format!("bad header {header:?}")));
        };
        let n = basis_size * dimension;
        let mut matrix = CMatrix::zeros(n, n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing row {i}")))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Format(format!("bad number {t:?} in row {i}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != 2 * n {
                return Err(Error::Format(format!(
                    "row {i} has {} numbers, expected {}",
                    vals.len(),
                    2 * n
                )));
            }
            for j in 0..n {
                matrix[(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
            }
        }
        Ok(Self {
            matrix,
            basis_size,
            dimension,
            weight_id: String::new(),
            symbol_id: String::new(),
            quad_id: String::new(),
        })
    }
}

pub fn quad_id(quad: &QuadratureGrid) -> String {
    format!("polar:{}x{}:R{:.6}", quad.n_radial(), quad.n_angular(), quad.r_max())
}

/// `max |M - M^*|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).camax()
}

fn symmetrized(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn check_hermitian(m: CMatrix) -> Result<CMatrix> {
    let dev = hermitian_deviation(&m);
    if !(dev <= HERMITIAN_TOL * m.camax().max(1.0)) {
        return Err(Error::AssemblyNotHermitian { deviation: dev });
    }
    Ok(symmetrized(m))
}

/// Radial grid split at the jumps of `g`.
pub fn quadrature_for(g: &Symbol, quad: &QuadratureGrid) -> Result<QuadratureGrid> {
    quad.split_at(&g.breakpoints())
}

/// Assembles `T_G` by the ring-wise Fourier route of [`KernelModel::galerkin`].
pub fn assemble_toeplitz(model: &KernelModel, g: &Symbol, quad: &QuadratureGrid) -> Result<ToeplitzMatrix> {
    let q = quadrature_for(g, quad)?;
    let raw = model.galerkin(&q, g.dimension(), |w, out| g.eval_into(w, out));
    finish(model, g, quad, raw)
}

/// Assembles `T_G` by summing over every quadrature node.
pub fn assemble_toeplitz_direct(model: &KernelModel, g: &Symbol, quad: &QuadratureGrid) -> Result<ToeplitzMatrix> {
    let q = quadrature_for(g, quad)?;
    let raw = model.galerkin_direct(&q, g.dimension(), |w, out| g.eval_into(w, out));
    finish(model, g, quad, raw)
}

fn finish(model: &KernelModel, g: &Symbol, quad: &QuadratureGrid, raw: CMatrix) -> Result<ToeplitzMatrix> {
    if raw.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Check {
            check: "toeplitz assembly",
            detail: format!("non-finite entry for symbol {}", g.id()),
        });
    }
    Ok(ToeplitzMatrix {
        matrix: check_hermitian(raw)?,
        basis_size: model.basis_size(),
        dimension: g.dimension(),
        weight_id: model.weight().id().to_string(),
        symbol_id: g.id().to_string(),
        quad_id: quad_id(quad),
    })
}

/// `M[k, r] = int f_k conj(f_r) ||G|| e^{-2 phi} dA`, the scalar block of
/// the Galerkin form of `||I_G f||^2` (the full form is `M (x) I_d`).
pub fn carleson_matrix(model: &KernelModel, g: &Symbol, quad: &QuadratureGrid) -> Result<CMatrix> {
    let q = quadrature_for(g, quad)?;
    let raw = model.galerkin(&q, 1, |w, out| out[0] = C64::new(g.op_norm(w), 0.0));
    check_hermitian(raw)
}

/// `||I_G||^2`, the largest eigenvalue of the Carleson form.
pub fn carleson_norm(model: &KernelModel, g: &Symbol, quad: &QuadratureGrid) -> Result<f64> {
    let m = carleson_matrix(model, g, quad)?;
    Ok(eigenvalues_desc(&m).first().copied().unwrap_or(0.0))
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eigenvalues_desc(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchattenValue {
    pub p: f64,
    /// `sum sigma_i^p`.
    pub sum: f64,
    /// `(sum sigma_i^p)^{1/p}`.
    pub norm: f64,
    /// Set for `p < 1`, where the value is only a quasi-norm.
    pub quasi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub operator_norm: f64,
    /// Descending; equal to the eigenvalues since `T_G` is positive.
    pub singular_values: Vec<f64>,
    pub min_eigenvalue: f64,
    pub schatten: Vec<SchattenValue>,
    /// `||I_G||^2`, when computed.
    pub carleson_norm: Option<f64>,
    /// Smallest index with `sigma_i < 1e-6`.
    pub tail_index: Option<usize>,
}

impl SpectralReport {
    pub fn schatten_at(&self, p: f64) -> Option<&SchattenValue> {
        self.schatten.iter().find(|s| s.p == p)
    }

    /// `||I_G||` itself.
    pub fn carleson_operator_norm(&self) -> Option<f64> {
        self.carleson_norm.map(f64::sqrt)
    }
}

/// Schatten sums `sum sigma^p` over a spectrum, with `p > 0`.
pub fn schatten_sum(singular_values: &[f64], p: f64) -> f64 {
    singular_values.iter().map(|s| s.max(0.0).powf(p)).sum()
}

pub fn spectral_report(t: &ToeplitzMatrix, p_set: &[f64]) -> Result<SpectralReport> {
    if let Some(p) = p_set.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(Error::param(
            "p",
            format!("Schatten exponent must be positive and finite, got {p}"),
        ));
    }
    let ev = eigenvalues_desc(&t.matrix);
    let min_eigenvalue = ev.last().copied().unwrap_or(0.0);
    if min_eigenvalue < -1e-8 * ev.first().copied().unwrap_or(1.0).max(1.0) {
        return Err(Error::Check {
            check: "toeplitz positivity",
            detail: format!("minimum eigenvalue {min_eigenvalue:.3e} for {}", t.symbol_id),
        });
    }
    // Positive operator: rounding noise below zero is clamped.
    let sv: Vec<f64> = ev.iter().map(|v| v.max(0.0)).collect();
    let schatten = p_set
        .iter()
        .map(|&p| {
            let sum = schatten_sum(&sv, p);
            SchattenValue {
                p,
                sum,
                norm: sum.powf(1.0 / p),
                quasi: p < 1.0,
            }
        })
        .collect();
    Ok(SpectralReport {
        operator_norm: sv.first().copied().unwrap_or(0.0),
        tail_index: sv.iter().position(|&s| s < TAIL_THRESHOLD),
        singular_values: sv,
        min_eigenvalue,
        schatten,
        carleson_norm: None,
    })
}

/// Spectral report including the Carleson norm of the same symbol.
pub fn full_report(
    model: &KernelModel,
    g: &Symbol,
    quad: &QuadratureGrid,
    p_set: &[f64],
) -> Result<(ToeplitzMatrix, SpectralReport)> {
    let t = assemble_toeplitz(model, g, quad)?;
    let mut rep = spectral_report(&t, p_set)?;
    rep.carleson_norm = Some(carleson_norm(model, g, quad)?);
    Ok((t, rep))
}

/// `<T v, v>` for a coefficient vector indexed `k d + m`.
pub fn quadratic_form(t: &ToeplitzMatrix, v: &[C64]) -> f64 {
    let x = nalgebra::DVector::from_column_slice(v);
    // entry[(k,m),(r,n)] pairs coefficient (k,m) of f with conj of (r,n) of f.
    (x.transpose() * &t.matrix * x.map(|c| c.conj()))[(0, 0)].re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::default_quadrature;
    use crate::weights::Weight;

    fn setup(k: usize) -> (KernelModel, QuadratureGrid) {
        let w = Weight::gaussian(1.0).unwrap();
        let q = default_quadrature(&w, k).unwrap();
        (KernelModel::build(&w, k, &q).unwrap(), q)
    }

    /// Lower regularised incomplete gamma `gamma(k+1, x) / k!` via the series.
    fn reg_lower_gamma(k: usize, x: f64) -> f64 {
        // 1 - e^{-x} sum_{j<=k} x^j / j!
        let mut term = 1.0;
        let mut s = 1.0;
        for j in 1..=k {
            term *= x / j as f64;
            s += term;
        }
        1.0 - (-x).exp() * s
    }

    #[test]
    fn identity_is_identity() {
        let (m, q) = setup(32);
        let t = assemble_toeplitz(&m, &Symbol::identity(2), &q).unwrap();
        assert!((&t.matrix - CMatrix::identity(64, 64)).camax() < 1e-8);
        let rep = spectral_report(&t, &[1.0, 2.0]).unwrap();
        assert!((rep.operator_norm - 1.0).abs() < 1e-8);
        assert!(rep.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-8));
        assert_eq!(rep.tail_index, None);
    }

    #[test]
    fn gaussian_symbol_diagonal() {
        let (m, q) = setup(64);
        let g = Symbol::parse("scalar:exp(-r^2)", 1).unwrap();
        let t = assemble_toeplitz(&m, &g, &q).unwrap();
        for k in 0..64 {
            for r in 0..64 {
                let want = if k == r { 0.5f64.powi(k as i32 + 1) } else { 0.0 };
                assert!((t.entry(k, 0, r, 0) - C64::new(want, 0.0)).norm() < 1e-10, "({k},{r})");
            }
        }
        let rep = spectral_report(&t, &[1.0]).unwrap();
        assert!((rep.schatten[0].norm - 1.0).abs() < 1e-10);
        assert_eq!(rep.tail_index, Some(19));
        assert!((carleson_norm(&m, &g, &q).unwrap() - 0.5).abs() < 1e-10);

        let g2 = Symbol::parse("scalar:exp(-r^2)", 2).unwrap();
        let t2 = assemble_toeplitz(&m, &g2, &q).unwrap();
        let rep2 = spectral_report(&t2, &[1.0]).unwrap();
        assert!((rep2.schatten[0].norm - 2.0).abs() < 1e-9);
    }

    #[test]
    fn indicator_symbol_matches_incomplete_gamma() {
        let (m, q) = setup(64);
        let g = Symbol::parse("scalar:chi_disk(1)", 1).unwrap();
        let t = assemble_toeplitz(&m, &g, &q).unwrap();
        assert!((t.entry(0, 0, 0, 0).re - 0.632_120_558_828_557_7).abs() < 1e-12);
        for k in 0..30 {
            let want = reg_lower_gamma(k, 1.0);
            assert!(
                (t.entry(k, 0, k, 0).re - want).abs() < 1e-8 * want.max(1e-300) + 1e-14,
                "k={k}"
            );
        }
        let off = (0..64)
            .flat_map(|k| (0..64).map(move |r| (k, r)))
            .filter(|(k, r)| k != r)
            .map(|(k, r)| t.entry(k, 0, r, 0).norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-8);
    }

    #[test]
    fn fast_route_matches_direct_for_projector() {
        let (m, q) = setup(16);
        let q = QuadratureGrid::new(q.r_max(), 80, 64).unwrap();
        let g = Symbol::parse("rotating-projector:3", 2).unwrap();
        let a = assemble_toeplitz(&m, &g, &q).unwrap();
        let b = assemble_toeplitz_direct(&m, &g, &q).unwrap();
        assert!((&a.matrix - &b.matrix).camax() < 1e-12);
    }

    #[test]
    fn carleson_homogeneous() {
        let (m, q) = setup(24);
        let g = Symbol::parse("diag:exp(-r^2),chi_disk(1)", 2).unwrap();
        let a = carleson_norm(&m, &g, &q).unwrap();
        let b = carleson_norm(&m, &g.scaled(3.7).unwrap(), &q).unwrap();
        assert!((b - 3.7 * a).abs() < 1e-12 * b);
        assert!((carleson_norm(&m, &Symbol::identity(1), &q).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn text_round_trip() {
        let (m, q) = setup(8);
        let g = Symbol::parse("rotating-projector:3", 2).unwrap();
        let t = assemble_toeplitz(&m, &g, &q).unwrap();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let back = ToeplitzMatrix::read_text(&buf[..]).unwrap();
        assert_eq!(back.matrix, t.matrix);
        assert_eq!((back.basis_size, back.dimension), (8, 2));
        assert!(ToeplitzMatrix::read_text(&b"2 1\n1 0 0 0\n"[..]).is_err());
    }

    #[test]
    fn bad_exponent_rejected() {
        let (m, q) = setup(4);
        let t = assemble_toeplitz(&m, &Symbol::identity(1), &q).unwrap();
        assert!(spectral_report(&t, &[0.0]).is_err());
        assert!(spectral_report(&t, &[-1.0]).is_err());
        let r = spectral_report(&t, &[0.5]).unwrap();
        assert!(r.schatten[0].quasi);
    }

    #[test]
    fn quadratic_form_matches_integral() {
        let (m, q) = setup(12);
        let g = Symbol::parse("diag:exp(-r^2),1+x^2", 2).unwrap();
        let t = assemble_toeplitz(&m, &g, &q).unwrap();
        let v: Vec<C64> = (0..24)
            .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()) / (1.0 + i as f64))
            .collect();
        // int <G f, f> e^{-2 phi} with f = sum v[k d + m] f_k e_m
        let mut direct = 0.0;
        let mut buf = [C64::new(0.0, 0.0); 4];
        for (w, wq) in q.nodes() {
            let f = m.basis_at(w);
            let mut fv = [C64::new(0.0, 0.0); 2];
            for k in 0..12 {
                for c in 0..2 {
                    fv[c] += v[k * 2 + c] * f[k];
                }
            }
            g.eval_into(w, &mut buf);
            let mut s = C64::new(0.0, 0.0);
            for n in 0..2 {
                for mm in 0..2 {
                    s += buf[n * 2 + mm] * fv[mm] * fv[n].conj();
                }
            }
            direct += wq * s.re * (-w.norm_sqr()).exp();
        }
        assert!((quadratic_form(&t, &v) - direct).abs() < 1e-10 * direct.abs());
    }
}
