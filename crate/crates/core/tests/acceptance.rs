//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use fockop::config::RunConfig;
use fockop::domain::Rect;
use fockop::equivalence::{
    boundedness_report, compactness_report, schatten_quantities, schatten_report, Setup, SetupParams, Verdict,
};
use fockop::kernel::{default_quadrature, project, reconstruct, KernelModel};
use fockop::lattice::{build_lattice, classes_separated, diagnostics, partition_lattice};
use fockop::run::{run, Command};
use fockop::symbols::{default_gallery, Symbol};
use fockop::toeplitz::{assemble_toeplitz, eigenvalues_desc, hermitian_deviation, quadrature_for, schatten_sum};
use fockop::transforms::berezin_scalar;
use fockop::weights::{RadiusField, Weight};
use fockop::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), fockop::Error>;

fn gaussian_model() -> (KernelModel, fockop::quadrature::QuadratureGrid) {
    let w = Weight::gaussian(1.0).unwrap();
    let quad = default_quadrature(&w, 64).unwrap();
    let model = KernelModel::build(&w, 64, &quad).unwrap();
    (model, quad)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

// gamma(k+1, 1) / k! = 1 - e^{-1} sum_{j<=k} 1/j!
fn lower_gamma_ratio(k: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=k {
        term /= j as f64;
        sum += term;
    }
    1.0 - (-1.0f64).exp() * sum
}

fn gaussian_oracles() -> Outcome {
    let field = RadiusField::new(Weight::gaussian(1.0)?);
    let mut rho_err = 0.0f64;
    for z in Rect::centered(3.0).grid(21, 21).points() {
        rho_err = rho_err.max((field.rho(z)? - 0.5f64.sqrt()).abs());
    }
    let (model, _) = gaussian_model();
    let k11 = model.kernel(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).re;
    let k_err = (k11 - E / PI).abs() / (E / PI);
    let moments = model.moments();
    let m_err = (0..=40)
        .map(|k| (moments[k] - PI * factorial(k)).abs() / (PI * factorial(k)))
        .fold(0.0, f64::max);
    Ok((
        rho_err < 1e-9 && k_err < 1e-8 && m_err < 1e-8,
        format!("rho err {rho_err:.1e}, K(1,1) rel err {k_err:.1e}, moment rel err {m_err:.1e}"),
    ))
}

fn diagonal_oracles() -> Outcome {
    let (model, quad) = gaussian_model();
    let g = Symbol::parse("scalar:exp(-r^2)", 1)?;
    let ev = eigenvalues_desc(&assemble_toeplitz(&model, &g, &quad)?.matrix);
    let e_err = (0..=40)
        .map(|k| (ev[k] - 0.5f64.powi(k as i32 + 1)).abs())
        .fold(0.0, f64::max);
    let s1 = schatten_sum(&ev, 1.0);
    let chi = Symbol::parse("scalar:chi_disk(1)", 1)?;
    let ev = eigenvalues_desc(&assemble_toeplitz(&model, &chi, &quad)?.matrix);
    let c_err = (0..ev.len())
        .map(|k| (ev[k] - lower_gamma_ratio(k)).abs())
        .fold(0.0, f64::max);
    Ok((
        e_err < 1e-8 && (s1 - 1.0).abs() < 1e-8 && c_err < 1e-6,
        format!("exp eigen err {e_err:.1e}, trace {s1:.12}, chi eigen err {c_err:.1e}"),
    ))
}

fn berezin_closed_form() -> Outcome {
    let (model, quad) = gaussian_model();
    let g = Symbol::parse("scalar:exp(-r^2)", 1)?;
    let mut worst = 0.0f64;
    for x in [0.0, 1.0, 2.0] {
        let z = C64::new(x, 0.0);
        let exact = 0.5 * (-x * x / 2.0).exp();
        let v = berezin_scalar(&model, &g, z, &quad)?;
        worst = worst.max((v - exact).abs() / exact);
    }
    Ok((worst < 1e-5, format!("max rel err {worst:.1e} at z in {{0, 1, 2}}")))
}

fn bounded_consistency(setup: &Setup, gallery: &[Symbol]) -> Outcome {
    let rep = boundedness_report(setup, gallery)?;
    let mut ok = rep.consistent();
    let mut worst = 0.0f64;
    let mut identity_ok = true;
    for row in &rep.rows {
        let all_finite = row.finite.iter().all(|&f| f);
        let none_finite = row.finite.iter().all(|&f| !f);
        ok &= if row.decay.is_bounded() {
            all_finite
        } else {
            none_finite
        };
        if row.decay.is_bounded() {
            worst = worst.max(row.ratio_stability());
            ok &= row.stable();
        }
        if row.symbol == "identity" {
            identity_ok = row.quantities.as_array().iter().all(|q| (0.98..=1.02).contains(q));
        }
    }
    ok &= identity_ok;
    Ok((
        ok,
        format!(
            "{} symbols, worst ratio change {:.1}%, family ratio {:.3}, identity in [0.98, 1.02]: {identity_ok}",
            rep.rows.len(),
            100.0 * worst,
            rep.family_ratio
        ),
    ))
}

fn compact_consistency(setup: &Setup, gallery: &[Symbol]) -> Outcome {
    let rep = compactness_report(setup, gallery)?;
    let mixed = rep.rows.iter().filter(|r| r.verdict == Verdict::Inconsistent).count();
    let compact = rep.rows.iter().filter(|r| r.verdict == Verdict::Consistent).count();
    Ok((
        rep.consistent() && mixed == 0,
        format!(
            "{compact} compact, {} non-compact, {mixed} mixed",
            rep.rows.len() - compact - mixed
        ),
    ))
}

fn schatten_consistency(setup: &Setup, gallery: &[Symbol]) -> Outcome {
    let p_set = [0.5, 1.0, 2.0];
    let rep = schatten_report(setup, gallery, &p_set)?;
    let disagree = rep.rows.iter().filter(|r| r.verdict == Verdict::Inconsistent).count();
    let g = Symbol::parse("scalar:exp(-r^2)", 1)?;
    let base = &schatten_quantities(setup, &g, &[1.0])?[0];
    let fine = &schatten_quantities(&setup.refined_lattice()?, &g, &[1.0])?[0];
    let r0 = base.lattice_sum / base.schatten_sum;
    let r1 = fine.lattice_sum / fine.schatten_sum;
    let change = (r1 - r0).abs() / r0;
    let side = (base.schatten_sum - 1.0).abs();
    Ok((
        disagree == 0 && rep.consistent() && side < 1e-6 && change <= 0.2,
        format!(
            "{disagree} disagreeing rows, trace of exp symbol 1 - {side:.1e}, lattice/trace ratio {r0:.4} -> {r1:.4} ({:.1}%)",
            100.0 * change
        ),
    ))
}

fn structural_invariants(gallery: &[Symbol]) -> Outcome {
    let (model, quad) = gaussian_model();
    let mut herm = 0.0f64;
    let mut min_ev = f64::INFINITY;
    for g in gallery {
        let q = quadrature_for(g, &quad)?;
        let raw = model.galerkin(&q, g.dimension(), |w, out| g.eval_into(w, out));
        herm = herm.max(hermitian_deviation(&raw));
        let t = assemble_toeplitz(&model, g, &quad)?;
        min_ev = min_ev.min(*eigenvalues_desc(&t.matrix).last().unwrap());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let coeffs: Vec<C64> = (0..2 * model.basis_size())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let once = reconstruct(&model, &coeffs, 2, &quad);
    let again = project(&model, &once, 2, &quad)?;
    let idem = coeffs
        .iter()
        .zip(&again)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let mut lipschitz = 0;
    for id in ["gaussian:1", "radial-poly:0.5,0.25"] {
        let field = RadiusField::new(Weight::parse(id)?);
        for _ in 0..1000 {
            let z = C64::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let w = z + C64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
            if (field.rho(z)? - field.rho(w)?).abs() > (z - w).norm() * (1.0 + 1e-9) {
                lipschitz += 1;
            }
        }
    }

    let field = RadiusField::new(Weight::gaussian(1.0)?);
    let rect = Rect::centered(3.0);
    let (mut holes, mut packing, mut partition) = (0, 0, 0);
    for delta in [0.25, 0.45] {
        let lat = build_lattice(&field, &rect, delta, 201)?;
        holes += lat.coverage_holes();
        packing += lat.packing_violations();
        let n = diagnostics(&lat, &field, 1.0)?.overlap_n;
        for r in [2.0, 4.0] {
            let part = partition_lattice(&lat, &field, r, n)?;
            if !part.within_bound().unwrap_or(false) || !classes_separated(&lat.points, &field, &part)? {
                partition += 1;
            }
        }
    }
    Ok((
        herm < 1e-10 && min_ev > -1e-8 && idem < 1e-10 && lipschitz == 0 && holes == 0 && packing == 0 && partition == 0,
        format!(
            "hermitian dev {herm:.1e}, min eigenvalue {min_ev:.1e}, idempotence {idem:.1e}, lipschitz violations {lipschitz}, holes {holes}, packing {packing}, partition violations {partition}"
        ),
    ))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, std::fs::read(&path).unwrap());
        }
    }
    out
}

fn suite(threads: usize, dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, fockop::Error> {
    let mut all = BTreeMap::new();
    for cmd in Command::ALL {
        let sub = dir.join(cmd.name());
        let cfg = RunConfig {
            threads,
            output: sub.clone(),
            ..RunConfig::default()
        };
        run(cmd, &cfg)?;
        for (name, bytes) in csv_files(&sub) {
            all.insert(format!("{}/{name}", cmd.name()), bytes);
        }
    }
    Ok(all)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir()?;
    let a = suite(1, &tmp.path().join("a"))?;
    let b = suite(3, &tmp.path().join("b"))?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let same_set = a.len() == b.len();
    Ok((
        same_set && differing.is_empty() && !a.is_empty(),
        format!(
            "{} CSV files compared across 1 and 3 threads, {} differ",
            a.len(),
            differing.len()
        ),
    ))
}

fn main() -> ExitCode {
    let gallery = default_gallery();
    let setup = Setup::new(SetupParams::gaussian()).expect("default setup");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("gaussian oracles", Box::new(gaussian_oracles)),
        ("diagonal toeplitz oracles", Box::new(diagonal_oracles)),
        ("berezin closed form", Box::new(berezin_closed_form)),
        (
            "boundedness equivalence",
            Box::new(|| bounded_consistency(&setup, &gallery)),
        ),
        (
            "compactness equivalence",
            Box::new(|| compact_consistency(&setup, &gallery)),
        ),
        (
            "schatten class equivalence",
            Box::new(|| schatten_consistency(&setup, &gallery)),
        ),
        ("structural invariants", Box::new(|| structural_invariants(&gallery))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
