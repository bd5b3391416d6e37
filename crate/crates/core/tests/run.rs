use std::fs;
use std::path::Path;

use fockop::config::RunConfig;
use fockop::equivalence::{comparison_constant, star_constant, Setup, SetupParams};
use fockop::run::{run, Command};
use fockop::symbols::Symbol;
use fockop::toeplitz::ToeplitzMatrix;
use fockop::Error;

fn config(dir: &Path, extra: &str) -> RunConfig {
    let text = format!("output = \"{}\"\n{extra}", dir.display().to_string().replace('\\', "/"));
    RunConfig::from_toml(&text).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn parse(values: &[String]) -> Vec<f64> {
    values.iter().map(|v| v.parse().unwrap()).collect()
}

#[test]
fn weight_info_reports_constant_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(Command::WeightInfo, &config(tmp.path(), "[report]\nsvg = false\n")).unwrap();
    assert!(out.failed_check.is_none());
    let rho = parse(&column(&tmp.path().join("rho.csv"), "rho"));
    assert_eq!(rho.len(), 41 * 41);
    assert!(rho
        .iter()
        .all(|r| (r - 0.70711).abs() < 1e-5 && (r - 0.5f64.sqrt()).abs() < 1e-9));
    assert!(!tmp.path().join("rho.svg").exists());
}

#[test]
fn toeplitz_diagonal_halves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "[symbols]\nlist = [\"scalar:exp(-r^2)\"]\n[kernel]\nbasis_size = 32\n",
    );
    run(Command::Toeplitz, &cfg).unwrap();
    let diag = parse(&column(&tmp.path().join("diagonal_scalar_exp_r_2.csv"), "re"));
    for (k, v) in diag.iter().take(3).enumerate() {
        assert!((v - 0.5f64.powi(k as i32 + 1)).abs() < 1e-12, "{k}: {v}");
    }
    let text = fs::read(tmp.path().join("toeplitz_scalar_exp_r_2.txt")).unwrap();
    let t = ToeplitzMatrix::read_text(text.as_slice()).unwrap();
    assert_eq!(t.size(), 32);
    assert!((t.entry(2, 0, 2, 0).re - 0.125).abs() < 1e-12);
}

#[test]
fn bounded_identity_row_is_normalized() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "[symbols]\nlist = [\"identity@2\"]\n[kernel]\nbasis_size = 32\ngrid = 9\n[domain]\nx_min = -2.0\nx_max = 2.0\ny_min = -2.0\ny_max = 2.0\n",
    );
    let out = run(Command::EquivBounded, &cfg).unwrap();
    assert!(out.failed_check.is_none(), "{}", out.summary);
    let path = tmp.path().join("bounded.csv");
    for name in [
        "toeplitz_norm",
        "berezin_sup",
        "averaging_sup",
        "lattice_sup",
        "carleson",
    ] {
        let v = parse(&column(&path, name))[0];
        assert!((0.98..=1.02).contains(&v), "{name} = {v}");
    }
    assert_eq!(column(&path, "verdict"), ["consistent"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "[symbols]\nlist = [\"rotating-projector:3\", \"scalar:chi_disk(1)\"]\n[kernel]\nbasis_size = 24\n";
    for cmd in [Command::Lattice, Command::Toeplitz, Command::Transforms] {
        let a = tmp.path().join(format!("{}-a", cmd.name()));
        let b = tmp.path().join(format!("{}-b", cmd.name()));
        let mut cfg = config(&a, extra);
        cfg.threads = 1;
        let first = run(cmd, &cfg).unwrap();
        cfg.output = b.clone();
        cfg.threads = 2;
        let second = run(cmd, &cfg).unwrap();
        assert_eq!(first.files.len(), second.files.len());
        for f in &first.files {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(f).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
        }
    }
}

#[test]
fn lattice_import_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    run(Command::Lattice, &config(&first, "")).unwrap();
    let second = tmp.path().join("second");
    let cfg = config(
        &second,
        &format!("[lattice]\nimport = \"{}\"\n", first.join("lattice.csv").display()),
    );
    let out = run(Command::Lattice, &cfg).unwrap();
    assert!(out.failed_check.is_none());
    assert_eq!(
        fs::read(first.join("lattice.csv")).unwrap(),
        fs::read(second.join("lattice.csv")).unwrap()
    );
    for name in ["count", "overlap_n", "beta", "coverage_holes", "packing_violations"] {
        assert_eq!(
            column(&first.join("lattice_diagnostics.csv"), name),
            column(&second.join("lattice_diagnostics.csv"), name)
        );
    }
}

#[test]
fn config_errors_are_located() {
    match RunConfig::from_toml("threads = 1\n[kernel]\nbasis = 3\n") {
        Err(Error::Config(msg)) => assert!(msg.starts_with("line 3"), "{msg}"),
        other => panic!("{other:?}"),
    }
    match RunConfig::from_toml("[lattice]\ndelta = 0.7\n") {
        Err(e @ Error::Config(_)) => {
            assert!(e.to_string().contains("lattice.delta"));
            assert_eq!(e.exit_code(), 2);
        }
        other => panic!("{other:?}"),
    }
    let bad_symbol = RunConfig::from_toml("[symbols]\nlist = [\"scalar:exp(\"]\n").and_then(|c| c.symbols());
    assert_eq!(bad_symbol.unwrap_err().exit_code(), 2);
}

#[test]
fn empirical_constants_are_finite_and_stable() {
    let mut p = SetupParams::gaussian();
    p.basis_size = 32;
    p.grid_n = 11;
    let setup = Setup::new(p).unwrap();
    let g = Symbol::parse("scalar:(1+r^2)^(-3)", 1).unwrap();
    let c0 = comparison_constant(&setup, &g).unwrap();
    let c1 = comparison_constant(&setup.refined_quadrature().unwrap(), &g).unwrap();
    assert!(c0.is_finite() && c0 > 1.0);
    assert!((c1 - c0).abs() <= 0.2 * c0);
    let star = star_constant(&setup, &g, 12, 8).unwrap();
    assert!(star.is_finite() && star > 0.0);
}
