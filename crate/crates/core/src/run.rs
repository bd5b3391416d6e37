//! Subcommands of the command line tool: each builds what it needs from a
//! [`RunConfig`], writes CSV (and optionally SVG) files into the output
//! directory and returns a text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::equivalence::{
    boundedness_report, compactness_report, comparison_constant, schatten_report, star_constant, Setup, QUANTITY_NAMES,
    SCHATTEN_NAMES,
};
use crate::export::{disks_svg, heatmap_svg, line_plot_svg, num, slug, Series, Table};
use crate::kernel::{default_quadrature, verify_kernel_estimates, KernelModel};
use crate::lattice::{build_lattice_scan, classes_separated, diagnostics, partition_lattice, Lattice};
use crate::quadrature::{DiskRule, QuadratureGrid};
use crate::symbols::Symbol;
use crate::toeplitz::full_report;
use crate::transforms::{transform_surface, BerezinMaps};
use crate::weights::{check_admissibility, RadiusField};
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    WeightInfo,
    Lattice,
    KernelCheck,
    Toeplitz,
    Transforms,
    EquivBounded,
    EquivCompact,
    EquivSchatten,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::WeightInfo,
        Command::Lattice,
        Command::KernelCheck,
        Command::Toeplitz,
        Command::Transforms,
        Command::EquivBounded,
        Command::EquivCompact,
        Command::EquivSchatten,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::WeightInfo => "weight-info",
            Command::Lattice => "lattice",
            Command::KernelCheck => "kernel-check",
            Command::Toeplitz => "toeplitz",
            Command::Transforms => "transforms",
            Command::EquivBounded => "equiv-bounded",
            Command::EquivCompact => "equiv-compact",
            Command::EquivSchatten => "equiv-schatten",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Unknown {
                kind: "subcommand",
                name: name.into(),
            })
    }
}

/// Files written and a human-readable summary. `failed_check` names a
/// consistency check that did not pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub failed_check: Option<String>,
}

struct Out<'a> {
    dir: &'a Path,
    svg: bool,
    outcome: Outcome,
}

impl Out<'_> {
    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.dir.join(name);
        t.write(&p)?;
        self.outcome.files.push(p);
        Ok(())
    }

    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, content)?;
        self.outcome.files.push(p);
        Ok(())
    }

    fn svg(&mut self, name: &str, content: impl FnOnce() -> String) -> Result<()> {
        if self.svg {
            self.text(name, &content())?;
        }
        Ok(())
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.outcome.summary.push_str(s.as_ref());
        self.outcome.summary.push('\n');
    }

    fn fail(&mut self, check: impl Into<String>) {
        let c = check.into();
        if self.outcome.failed_check.is_none() {
            self.outcome.failed_check = Some(c);
        }
    }
}

/// Runs a subcommand on a pool of `cfg.threads` workers.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut out = Out {
            dir: &dir,
            svg: cfg.report.svg,
            outcome: Outcome::default(),
        };
        match cmd {
            Command::WeightInfo => weight_info(cfg, &mut out)?,
            Command::Lattice => lattice(cfg, &mut out)?,
            Command::KernelCheck => kernel_check(cfg, &mut out)?,
            Command::Toeplitz => toeplitz(cfg, &mut out)?,
            Command::Transforms => transforms(cfg, &mut out)?,
            Command::EquivBounded => equiv_bounded(cfg, &mut out)?,
            Command::EquivCompact => equiv_compact(cfg, &mut out)?,
            Command::EquivSchatten => equiv_schatten(cfg, &mut out)?,
        }
        Ok(out.outcome)
    })
}

/// Configured symbols, each checked for Hermitian PSD values on a coarse
/// grid of the box.
fn checked_symbols(cfg: &RunConfig) -> Result<Vec<Symbol>> {
    let symbols = cfg.symbols()?;
    let pts = cfg.rect().grid(9, 9).points();
    for g in &symbols {
        for &z in &pts {
            g.validate_at(z)?;
        }
    }
    Ok(symbols)
}

fn flag(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn weight_info(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let weight = cfg.weight()?;
    let rect = cfg.rect();
    let rep = check_admissibility(&weight, &rect, cfg.weight.probe_c)?;
    let field = RadiusField::new(weight.clone());
    let summary = field.summary(&rect, 21)?;

    let mut t = Table::new([
        "weight",
        "inf_sup_laplacian",
        "reverse_holder_constant",
        "eigenvalue_ratio",
        "probe_c",
        "min_laplacian",
        "positive_laplacian",
        "reverse_holder",
        "comparable_eigenvalues",
        "rho_sup",
        "rho_inf",
        "growth_a",
        "growth_b",
    ]);
    t.push([
        weight.id().to_string(),
        num(rep.inf_sup_laplacian),
        num(rep.reverse_holder_constant),
        num(rep.eigenvalue_ratio),
        num(rep.probe_c),
        num(rep.min_laplacian),
        flag(rep.verdict.positive_laplacian).into(),
        flag(rep.verdict.reverse_holder).into(),
        flag(rep.verdict.comparable_eigenvalues).into(),
        num(summary.sup_bound),
        num(summary.inf),
        num(summary.growth_a),
        num(summary.growth_b),
    ]);
    out.table("admissibility.csv", &t)?;

    let n = cfg.report.heatmap;
    let grid = rect.grid(n, n);
    let pts = grid.points();
    let rho: Vec<f64> = pts.par_iter().map(|&z| field.rho(z)).collect::<Result<_>>()?;
    let mut t = Table::new(["x", "y", "rho"]);
    for (z, r) in pts.iter().zip(&rho) {
        t.push([num(z.re), num(z.im), num(*r)]);
    }
    out.table("rho.csv", &t)?;
    out.svg("rho.svg", || {
        heatmap_svg(&format!("rho for {}", weight.id()), &rect, n, n, &rho)
    })?;

    out.line(format!("weight {}", weight.id()));
    out.line(format!(
        "admissible: {} (laplacian {}, reverse-Hoelder {}, eigenvalues {})",
        rep.verdict.all(),
        flag(rep.verdict.positive_laplacian),
        flag(rep.verdict.reverse_holder),
        flag(rep.verdict.comparable_eigenvalues)
    ));
    out.line(format!("inf sup laplacian {:.6}", rep.inf_sup_laplacian));
    out.line(format!("reverse-Hoelder constant {:.6}", rep.reverse_holder_constant));
    out.line(format!("rho in [{:.6}, {:.6}]", summary.inf, summary.sup_bound));
    Ok(())
}

fn load_lattice(cfg: &RunConfig, field: &RadiusField) -> Result<Lattice> {
    match cfg.lattice_import() {
        Some(path) => {
            let f = fs::File::open(&path)
                .map_err(|e| Error::Config(format!("cannot read lattice {}: {e}", path.display())))?;
            Lattice::read_csv(f, field, cfg.rect(), cfg.delta(), cfg.lattice.probe)
        }
        None => build_lattice_scan(
            field,
            &cfg.rect(),
            cfg.delta(),
            cfg.lattice.probe,
            cfg.lattice.scan_divisor,
        ),
    }
}

fn lattice(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let field = RadiusField::new(cfg.weight()?);
    let lat = load_lattice(cfg, &field)?;
    let diag = diagnostics(&lat, &field, cfg.lattice.overlap_m)?;

    let mut buf = Vec::new();
    lat.write_csv(&mut buf)?;
    out.text(
        "lattice.csv",
        &String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?,
    )?;

    let mut t = Table::new([
        "count",
        "greedy_count",
        "delta",
        "m",
        "overlap_n",
        "m1",
        "m2",
        "beta",
        "coverage_holes",
        "packing_violations",
    ]);
    t.push([
        diag.count.to_string(),
        lat.greedy_count.to_string(),
        num(lat.delta),
        num(diag.m),
        diag.overlap_n.to_string(),
        num(diag.m1),
        num(diag.m2),
        num(diag.beta),
        diag.coverage_holes.to_string(),
        diag.packing_violations.to_string(),
    ]);
    out.table("lattice_diagnostics.csv", &t)?;

    let mut t = Table::new(["r", "m1", "m2"]);
    for d in &diag.dilations {
        t.push([num(d.r), num(d.m1), num(d.m2)]);
    }
    out.table("dilations.csv", &t)?;

    let base_n = if cfg.lattice.overlap_m == 1.0 {
        diag.overlap_n
    } else {
        diagnostics(&lat, &field, 1.0)?.overlap_n
    };
    let mut t = Table::new(["r", "classes", "max_degree", "bound", "within_bound", "separated"]);
    let mut partitions_ok = true;
    for &r in &cfg.lattice.partition_r {
        let p = partition_lattice(&lat, &field, r, base_n)?;
        let sep = classes_separated(&lat.points, &field, &p)?;
        let within = p.within_bound().unwrap_or(false);
        partitions_ok &= sep && within;
        t.push([
            num(r),
            p.m_r.to_string(),
            p.max_degree.to_string(),
            num(p.bound.unwrap_or(f64::NAN)),
            flag(within).into(),
            flag(sep).into(),
        ]);
        out.line(format!(
            "R = {r}: {} classes (bound {:.1}), separated: {sep}",
            p.m_r,
            p.bound.unwrap_or(f64::NAN)
        ));
    }
    out.table("partition.csv", &t)?;
    let radii: Vec<f64> = lat.rho.iter().map(|r| r * lat.delta).collect();
    out.svg("lattice.svg", || {
        disks_svg(
            &format!("{} lattice points, delta = {}", lat.len(), lat.delta),
            &lat.rect,
            &lat.points,
            &radii,
        )
    })?;

    out.line(format!(
        "{} points ({} greedy), delta {}",
        lat.len(),
        lat.greedy_count,
        lat.delta
    ));
    out.line(format!("overlap N = {} at m = {}", diag.overlap_n, diag.m));
    out.line(format!(
        "m1 = {:.4}, m2 = {:.4}, beta = {:.4}",
        diag.m1, diag.m2, diag.beta
    ));
    out.line(format!(
        "coverage holes {}, packing violations {}",
        diag.coverage_holes, diag.packing_violations
    ));
    if diag.coverage_holes > 0 {
        out.fail("lattice covering");
    }
    if diag.packing_violations > 0 {
        out.fail("lattice packing");
    }
    if !partitions_ok {
        out.fail("lattice partition");
    }
    Ok(())
}

fn model_and_quad(cfg: &RunConfig) -> Result<(KernelModel, QuadratureGrid)> {
    let weight = cfg.weight()?;
    let k = &cfg.kernel;
    let base = default_quadrature(&weight, k.basis_size)?;
    let quad = QuadratureGrid::new(k.r_max.unwrap_or(base.r_max()), k.n_radial, k.n_angular)?;
    let model = KernelModel::build(&weight, k.basis_size, &quad)?;
    Ok((model, quad))
}

fn kernel_check(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let (model, quad) = model_and_quad(cfg)?;
    let field = RadiusField::new(model.weight().clone());
    let gram = model.gram(&quad);
    let gram_dev = (&gram - CMatrix::identity(gram.nrows(), gram.ncols())).camax();
    let guard = (0.8 * model.r_max()).min(model.trusted_radius());
    let n = cfg.kernel.grid;
    let all = cfg.rect().grid(n, n).points();
    let inside: Vec<_> = all.iter().copied().filter(|z| z.norm() <= guard).collect();
    if inside.is_empty() {
        return Err(Error::param(
            "domain",
            format!("no grid point inside the kernel guard band {guard:.3}"),
        ));
    }
    let rep = verify_kernel_estimates(&model, &field, &inside, &quad, cfg.lattice.alpha)?;

    let mut t = Table::new(["k", "log_moment", "moment"]);
    for (k, lm) in model.log_moments().iter().enumerate() {
        t.push([k.to_string(), num(*lm), num(lm.exp())]);
    }
    out.table("kernel_moments.csv", &t)?;

    let mut t = Table::new(["quantity", "min", "max"]);
    for (name, r) in [
        ("norm_ratio", rep.norm_ratio),
        ("local_ratio", rep.local_ratio),
        ("integral_ratio_p1", rep.integral_ratio_p1),
        ("integral_ratio_p2", rep.integral_ratio_p2),
    ] {
        t.push([name.to_string(), num(r.min), num(r.max)]);
    }
    t.push(["epsilon".to_string(), num(rep.epsilon), num(rep.epsilon)]);
    t.push(["gram_deviation".to_string(), num(gram_dev), num(gram_dev)]);
    out.table("kernel_estimates.csv", &t)?;

    let hn = cfg.report.heatmap;
    let rect = cfg.rect();
    let pts = rect.grid(hn, hn).points();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|&z| {
            let rho = field.rho(z)?;
            Ok(model.kernel(z, z).re * (-2.0 * model.weight().phi(z)).exp() * rho * rho)
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(["x", "y", "normalized_diagonal", "trusted"]);
    for (z, v) in pts.iter().zip(&vals) {
        t.push([num(z.re), num(z.im), num(*v), (z.norm() <= guard).to_string()]);
    }
    out.table("kernel_heatmap.csv", &t)?;
    out.svg("kernel_heatmap.svg", || {
        heatmap_svg("K(z,z) exp(-2 phi) rho^2", &rect, hn, hn, &vals)
    })?;

    out.line(format!(
        "basis {} (requested {}), R_max {:.4}, trusted radius {:.4}",
        model.basis_size(),
        cfg.kernel.basis_size,
        model.r_max(),
        model.trusted_radius()
    ));
    for w in model.warnings() {
        out.line(format!("warning: {w}"));
    }
    out.line(format!("gram deviation {gram_dev:.3e}"));
    out.line(format!(
        "{} of {} grid points inside the guard band {guard:.3}",
        inside.len(),
        all.len()
    ));
    out.line(format!(
        "norm ratio [{:.6}, {:.6}], local ratio [{:.6}, {:.6}]",
        rep.norm_ratio.min, rep.norm_ratio.max, rep.local_ratio.min, rep.local_ratio.max
    ));
    out.line(format!(
        "p=1 ratio [{:.6}, {:.6}], p=2 ratio [{:.6}, {:.6}], epsilon {:.4}",
        rep.integral_ratio_p1.min,
        rep.integral_ratio_p1.max,
        rep.integral_ratio_p2.min,
        rep.integral_ratio_p2.max,
        rep.epsilon
    ));
    if gram_dev > 1e-8 {
        out.fail("kernel gram");
    }
    Ok(())
}

fn toeplitz(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let (model, quad) = model_and_quad(cfg)?;
    let symbols = checked_symbols(cfg)?;
    let p_set = &cfg.report.p_set;
    let mut header: Vec<String> = [
        "symbol",
        "d",
        "basis_size",
        "operator_norm",
        "min_eigenvalue",
        "carleson_norm_sq",
        "carleson_norm",
        "tail_index",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for p in p_set {
        header.push(format!("schatten_norm_p{p}"));
        header.push(format!("schatten_sum_p{p}"));
    }
    let mut summary = Table::new(header);
    let mut series = Vec::new();
    for g in &symbols {
        let (t, rep) = full_report(&model, g, &quad, p_set)?;
        let s = slug(g.id());
        let mut buf = Vec::new();
        t.write_text(&mut buf)?;
        out.text(
            &format!("toeplitz_{s}.txt"),
            &String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?,
        )?;

        let mut diag = Table::new(["index", "k", "m", "re", "im"]);
        for i in 0..t.size() {
            let v = t.matrix[(i, i)];
            diag.push([
                i.to_string(),
                (i / t.dimension).to_string(),
                (i % t.dimension).to_string(),
                num(v.re),
                num(v.im),
            ]);
        }
        out.table(&format!("diagonal_{s}.csv"), &diag)?;

        let mut spec = Table::new(["index", "sigma"]);
        for (i, v) in rep.singular_values.iter().enumerate() {
            spec.push([i.to_string(), num(*v)]);
        }
        out.table(&format!("spectrum_{s}.csv"), &spec)?;

        let mut row = vec![
            g.id().to_string(),
            g.dimension().to_string(),
            t.basis_size.to_string(),
            num(rep.operator_norm),
            num(rep.min_eigenvalue),
            num(rep.carleson_norm.unwrap_or(f64::NAN)),
            num(rep.carleson_operator_norm().unwrap_or(f64::NAN)),
            rep.tail_index.map(|i| i.to_string()).unwrap_or_else(|| "none".into()),
        ];
        for sv in &rep.schatten {
            row.push(num(sv.norm));
            row.push(num(sv.sum));
        }
        summary.push(row);
        series.push(Series {
            label: g.id().to_string(),
            points: rep
                .singular_values
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64, *v))
                .collect(),
        });
        out.line(format!(
            "{:<32} norm {:.6e}  carleson {:.6e}  tail {}",
            g.id(),
            rep.operator_norm,
            rep.carleson_norm.unwrap_or(f64::NAN),
            rep.tail_index.map(|i| i.to_string()).unwrap_or_else(|| "none".into())
        ));
    }
    out.table("spectral.csv", &summary)?;
    out.svg("sigma_spectra.svg", || line_plot_svg("singular values", &series, true))?;
    Ok(())
}

fn transforms(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let (model, quad) = model_and_quad(cfg)?;
    let field = RadiusField::new(model.weight().clone());
    let disk = DiskRule::new(cfg.kernel.disk_radial, cfg.kernel.disk_angular);
    let rect = cfg.rect();
    let n = cfg.kernel.grid;
    let pts = rect.grid(n, n).points();
    for g in &checked_symbols(cfg)? {
        let maps = BerezinMaps::new(&model, g, &quad)?;
        let s = transform_surface(&maps, &field, g, &pts, cfg.delta(), &disk)?;
        let mut t = Table::new(["x", "y", "berezin", "averaging", "berezin_op_norm", "averaging_trace"]);
        for i in 0..pts.len() {
            t.push([
                num(pts[i].re),
                num(pts[i].im),
                num(s.berezin[i]),
                num(s.averaging[i]),
                num(s.berezin_op_norm[i]),
                num(s.averaging_trace[i]),
            ]);
        }
        let sl = slug(g.id());
        out.table(&format!("surface_{sl}.csv"), &t)?;
        out.svg(&format!("berezin_{sl}.svg"), || {
            heatmap_svg(&format!("Berezin transform of {}", g.id()), &rect, n, n, &s.berezin)
        })?;
        out.svg(&format!("averaging_{sl}.svg"), || {
            heatmap_svg(&format!("averaging function of {}", g.id()), &rect, n, n, &s.averaging)
        })?;
        out.line(format!(
            "{:<32} sup berezin {:.6e}  sup averaging {:.6e}  averaging/berezin <= {:.4}",
            g.id(),
            s.sup_berezin(),
            s.sup_averaging(),
            crate::transforms::comparison_constant(&s)
        ));
    }
    Ok(())
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let setup = Setup::new(cfg.setup_params()?)?;
    if cfg.lattice_import().is_some() {
        let lattice = load_lattice(cfg, &setup.field)?;
        return Ok(Setup { lattice, ..setup });
    }
    Ok(setup)
}

fn equiv_bounded(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let setup = setup(cfg)?;
    let symbols = checked_symbols(cfg)?;
    let rep = boundedness_report(&setup, &symbols)?;
    let mut header = vec!["symbol".to_string(), "decay".to_string()];
    header.extend(QUANTITY_NAMES.iter().map(|s| s.to_string()));
    header.extend(QUANTITY_NAMES.iter().map(|s| format!("growth_{s}")));
    header.extend(
        [
            "max_ratio",
            "ratio_quadrature",
            "ratio_delta",
            "ratio_box",
            "norm_constant",
            "comparison_constant",
            "star_constant",
            "verdict",
        ]
        .map(String::from),
    );
    let mut t = Table::new(header);
    let mut summary = Table::new(["symbol", "q1", "q2", "q3", "q4", "q5", "ratio", "verdict"]);
    for (row, g) in rep.rows.iter().zip(&symbols) {
        let cmp = comparison_constant(&setup, g)?;
        let star = star_constant(&setup, g, 20, 16)?;
        let mut r = vec![row.symbol.clone(), row.decay.to_string()];
        r.extend(row.quantities.as_array().map(num));
        r.extend(row.growth.map(num));
        r.extend([
            num(row.max_ratio),
            num(row.refined_ratios[0]),
            num(row.refined_ratios[1]),
            num(row.refined_ratios[2]),
            num(row.norm_constant),
            num(cmp),
            num(star),
            row.verdict.as_str().to_string(),
        ]);
        t.push(r);
        let q = row.quantities.as_array();
        summary.push([
            row.symbol.clone(),
            format!("{:.5}", q[0]),
            format!("{:.5}", q[1]),
            format!("{:.5}", q[2]),
            format!("{:.5}", q[3]),
            format!("{:.5}", q[4]),
            format!("{:.4}", row.max_ratio),
            row.verdict.as_str().to_string(),
        ]);
    }
    out.table("bounded.csv", &t)?;
    out.line(summary.render());
    out.line(format!(
        "family ratio {:.4}; refined (quadrature, delta/2, box+1) {:.4} {:.4} {:.4}; stable: {}",
        rep.family_ratio,
        rep.family_refined[0],
        rep.family_refined[1],
        rep.family_refined[2],
        rep.family_stable()
    ));
    if !rep.consistent() {
        out.fail("boundedness equivalence");
    }
    Ok(())
}

fn equiv_compact(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let setup = setup(cfg)?;
    let symbols = checked_symbols(cfg)?;
    let rep = compactness_report(&setup, &symbols)?;
    let mut rings = Table::new(["symbol", "radius", "berezin", "averaging"]);
    let mut t = Table::new([
        "symbol",
        "decay",
        "berezin_origin",
        "averaging_origin",
        "berezin_outer",
        "averaging_outer",
        "lattice_tail",
        "sigma_tail",
        "tail_index",
        "berezin_decays",
        "averaging_decays",
        "lattice_decays",
        "sigma_decays",
        "verdict",
    ]);
    let mut ring_series = Vec::new();
    let mut sigma_series = Vec::new();
    for row in &rep.rows {
        let p = &row.profile;
        rings.push([
            row.symbol.clone(),
            num(0.0),
            num(p.berezin_origin),
            num(p.averaging_origin),
        ]);
        for i in 0..p.radii.len() {
            rings.push([
                row.symbol.clone(),
                num(p.radii[i]),
                num(p.berezin[i]),
                num(p.averaging[i]),
            ]);
        }
        let last = p.radii.len() - 1;
        t.push([
            row.symbol.clone(),
            row.decay.to_string(),
            num(p.berezin_origin),
            num(p.averaging_origin),
            num(p.berezin[last]),
            num(p.averaging[last]),
            num(row.lattice_tail),
            num(row.sigma_tail),
            row.tail_index.map(|i| i.to_string()).unwrap_or_else(|| "none".into()),
            row.decays[0].to_string(),
            row.decays[1].to_string(),
            row.decays[2].to_string(),
            row.decays[3].to_string(),
            row.verdict.as_str().to_string(),
        ]);
        let mut pts = vec![(0.0, p.berezin_origin / p.berezin_origin.max(f64::MIN_POSITIVE))];
        pts.extend(
            p.radii
                .iter()
                .zip(&p.berezin)
                .map(|(r, v)| (*r, v / p.berezin_origin.max(f64::MIN_POSITIVE))),
        );
        ring_series.push(Series {
            label: row.symbol.clone(),
            points: pts,
        });
        sigma_series.push(Series {
            label: row.symbol.clone(),
            points: row
                .singular_values
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64, *v))
                .collect(),
        });
        out.line(format!(
            "{:<32} decays (berezin, averaging, lattice, sigma) {:?} -> {}",
            row.symbol,
            row.decays,
            row.verdict.as_str()
        ));
    }
    out.table("compact_rings.csv", &rings)?;
    out.table("compact.csv", &t)?;
    out.svg("ring_profiles.svg", || {
        line_plot_svg("Berezin transform on rings / value at 0", &ring_series, true)
    })?;
    out.svg("sigma_spectra.svg", || {
        line_plot_svg("singular values", &sigma_series, true)
    })?;
    if !rep.consistent() {
        out.fail("compactness equivalence");
    }
    Ok(())
}

fn equiv_schatten(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let setup = setup(cfg)?;
    let symbols = checked_symbols(cfg)?;
    let rep = schatten_report(&setup, &symbols, &cfg.report.p_set)?;
    let mut header = vec!["symbol".to_string(), "decay".to_string(), "p".to_string()];
    header.extend(SCHATTEN_NAMES.iter().map(|s| s.to_string()));
    header.extend(SCHATTEN_NAMES.iter().map(|s| format!("growth_{s}")));
    header.extend(["max_ratio", "ratio_quadrature", "ratio_lattice", "ratio_box", "verdict"].map(String::from));
    let mut t = Table::new(header);
    let mut summary = String::new();
    for row in &rep.rows {
        let mut r = vec![row.symbol.clone(), row.decay.to_string(), num(row.quantities.p)];
        r.extend(row.quantities.as_array().map(num));
        r.extend(row.growth.map(num));
        r.extend([
            num(row.max_ratio),
            num(row.refined_ratios[0]),
            num(row.refined_ratios[1]),
            num(row.refined_ratios[2]),
            row.verdict.as_str().to_string(),
        ]);
        t.push(r);
        let _ = writeln!(
            summary,
            "{:<32} p={:<4} finite {:?} ratio {:.3} -> {}{}",
            row.symbol,
            row.quantities.p,
            row.finite,
            row.max_ratio,
            row.verdict.as_str(),
            if row.schatten_consistent() { "" } else { " (unstable)" }
        );
    }
    out.table("schatten.csv", &t)?;
    out.line(summary.trim_end());
    if !rep.consistent() {
        out.fail("schatten equivalence");
    }
    Ok(())
}
