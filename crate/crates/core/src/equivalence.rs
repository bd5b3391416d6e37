//! Side-by-side evaluation of the equivalent characterisations of bounded,
//! compact and Schatten class Toeplitz operators on a symbol family.
//!
//! Every verdict is a consistency check on truncations: a quantity counts as
//! finite when it changes by at most [`GROWTH_TOL`] as the truncation grows
//! (basis size `K/2 -> K` for Galerkin quantities, box `+1` on every side for
//! grid and lattice quantities).

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{cell_centers, ring, Rect};
use crate::kernel::{default_quadrature, KernelModel, DEFAULT_ANGULAR_NODES, DEFAULT_BASIS_SIZE, DEFAULT_RADIAL_NODES};
use crate::lattice::{build_lattice_scan, Lattice, DEFAULT_PROBE, DEFAULT_SCAN_DIVISOR};
use crate::quadrature::{DiskRule, QuadratureGrid};
use crate::symbols::Symbol;
use crate::toeplitz::{assemble_toeplitz, eigenvalues_desc, schatten_sum};
use crate::transforms::{averages, averaging_scalar, sorted_eigen, BerezinMaps};
use crate::weights::{RadiusField, Weight};
use crate::{Error, Result, C64};

/// Largest relative change still counted as "finite" or "stable".
pub const GROWTH_TOL: f64 = 0.2;
/// Decay threshold relative to the value at the origin.
pub const DECAY_TOL: f64 = 1e-3;
pub const COMPACT_RINGS: [f64; 4] = [2.0, 3.0, 4.0, 5.0];
pub const RING_SAMPLES: usize = 16;

#[derive(Debug, Clone)]
pub struct SetupParams {
    pub weight: Weight,
    pub rect: Rect,
    pub delta: f64,
    pub alpha: f64,
    pub basis_size: usize,
    pub n_radial: usize,
    pub n_angular: usize,
    /// `R_max` of the quadrature; `None` picks it from the weight.
    pub r_max: Option<f64>,
    pub disk_radial: usize,
    pub disk_angular: usize,
    pub probe: usize,
    pub scan_divisor: f64,
    /// Transform grid points per side.
    pub grid_n: usize,
    pub seed: u64,
}

impl SetupParams {
    pub fn gaussian() -> Self {
        let alpha = 0.5;
        Self {
            weight: Weight::gaussian(1.0).expect("valid weight"),
            rect: Rect::centered(3.0),
            delta: default_delta(alpha),
            alpha,
            basis_size: DEFAULT_BASIS_SIZE,
            n_radial: DEFAULT_RADIAL_NODES,
            n_angular: DEFAULT_ANGULAR_NODES,
            r_max: None,
            disk_radial: 24,
            disk_angular: 48,
            probe: DEFAULT_PROBE,
            scan_divisor: DEFAULT_SCAN_DIVISOR,
            grid_n: 25,
            seed: 0,
        }
    }
}

/// `min(1/2, alpha) * 0.9`.
pub fn default_delta(alpha: f64) -> f64 {
    0.5f64.min(alpha) * 0.9
}

/// Weight, model, quadrature and lattice shared by all symbols of a run.
pub struct Setup {
    pub params: SetupParams,
    pub field: Arc<RadiusField>,
    pub quad: QuadratureGrid,
    pub model: KernelModel,
    pub disk: DiskRule,
    pub lattice: Lattice,
}

impl std::fmt::Debug for Setup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Setup")
            .field("params", &self.params)
            .field("basis_size", &self.model.basis_size())
            .field("lattice", &self.lattice.len())
            .finish()
    }
}

impl Setup {
    pub fn new(params: SetupParams) -> Result<Self> {
        let field = Arc::new(RadiusField::new(params.weight.clone()));
        Self::with_field(params, field)
    }

    fn with_field(params: SetupParams, field: Arc<RadiusField>) -> Result<Self> {
        if !(params.delta > 0.0 && params.delta < 0.5f64.min(params.alpha)) {
            return Err(Error::param(
                "delta",
                format!(
                    "must lie in (0, min(1/2, alpha)) = (0, {}), got {}",
                    0.5f64.min(params.alpha),
                    params.delta
                ),
            ));
        }
        if params.grid_n < 2 {
            return Err(Error::param("grid_n", "need at least 2 points per side"));
        }
        let base = default_quadrature(&params.weight, params.basis_size)?;
        let quad = QuadratureGrid::new(params.r_max.unwrap_or(base.r_max()), params.n_radial, params.n_angular)?;
        let model = KernelModel::build(&params.weight, params.basis_size, &quad)?;
        let disk = DiskRule::new(params.disk_radial, params.disk_angular);
        let lattice = build_lattice_scan(&field, &params.rect, params.delta, params.probe, params.scan_divisor)?;
        Ok(Self {
            params,
            field,
            quad,
            model,
            disk,
            lattice,
        })
    }

    fn variant(&self, change: impl FnOnce(&mut SetupParams)) -> Result<Self> {
        let mut p = self.params.clone();
        change(&mut p);
        Self::with_field(p, self.field.clone())
    }

    /// Quadrature and disk nodes doubled.
    pub fn refined_quadrature(&self) -> Result<Self> {
        self.variant(|p| {
            p.n_radial *= 2;
            p.n_angular *= 2;
            p.disk_radial *= 2;
            p.disk_angular *= 2;
        })
    }

    pub fn halved_delta(&self) -> Result<Self> {
        self.variant(|p| p.delta *= 0.5)
    }

    /// Box grown by `margin` on every side, keeping the grid spacing.
    pub fn grown(&self, margin: f64) -> Result<Self> {
        let old = self.params.rect;
        self.variant(|p| {
            p.rect = old.grown(margin);
            let scale = p.rect.width() / old.width();
            p.grid_n = ((p.grid_n - 1) as f64 * scale).round() as usize + 1;
        })
    }

    pub fn with_basis(&self, basis_size: usize) -> Result<Self> {
        self.variant(|p| p.basis_size = basis_size)
    }

    /// Same `delta`, lattice scan and probe grids twice as fine.
    pub fn refined_lattice(&self) -> Result<Self> {
        self.variant(|p| {
            p.scan_divisor *= 2.0;
            p.probe = 2 * p.probe - 1;
        })
    }

    pub fn grid_points(&self) -> Vec<C64> {
        self.params.rect.grid(self.params.grid_n, self.params.grid_n).points()
    }
}

fn relative_change(base: f64, other: f64) -> f64 {
    if base == other {
        return 0.0;
    }
    ((other - base) / base.abs().max(f64::MIN_POSITIVE)).abs()
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn max_pairwise_ratio(q: &[f64]) -> f64 {
    let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// The five quantities of the boundedness characterisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundednessQuantities {
    /// `||T_G||` on the truncation.
    pub toeplitz_norm: f64,
    /// `sup G~` over the transform grid.
    pub berezin_sup: f64,
    /// `sup G^_delta` over the transform grid.
    pub averaging_sup: f64,
    /// `sup G^_delta(z_k)` over the lattice.
    pub lattice_sup: f64,
    /// `||I_G||^2`.
    pub carleson: f64,
}

impl BoundednessQuantities {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.toeplitz_norm,
            self.berezin_sup,
            self.averaging_sup,
            self.lattice_sup,
            self.carleson,
        ]
    }

    pub fn max_ratio(&self) -> f64 {
        max_pairwise_ratio(&self.as_array())
    }
}

pub const QUANTITY_NAMES: [&str; 5] = [
    "toeplitz_norm",
    "berezin_sup",
    "averaging_sup",
    "lattice_sup",
    "carleson",
];

fn galerkin_part(setup: &Setup, g: &Symbol) -> Result<(BerezinMaps, f64, f64)> {
    let maps = BerezinMaps::new(&setup.model, g, &setup.quad)?;
    let q1 = eigenvalues_desc(&maps.toeplitz().matrix)[0];
    let q5 = eigenvalues_desc(maps.carleson())[0];
    Ok((maps, q1, q5))
}

fn averaging_sups(setup: &Setup, g: &Symbol) -> Result<(f64, f64)> {
    let delta = setup.params.delta;
    let on = |pts: &[C64]| -> Result<f64> {
        let v: Vec<f64> = pts
            .par_iter()
            .map(|&z| averaging_scalar(&setup.field, g, z, delta, &setup.disk))
            .collect::<Result<_>>()?;
        Ok(sup(v))
    };
    Ok((on(&setup.grid_points())?, on(&setup.lattice.points)?))
}

fn berezin_sup(setup: &Setup, maps: &BerezinMaps) -> f64 {
    let pts = setup.grid_points();
    sup(pts.par_iter().map(|&z| maps.scalar(z)).collect::<Vec<_>>())
}

pub fn boundedness_quantities(setup: &Setup, g: &Symbol) -> Result<BoundednessQuantities> {
    let (maps, q1, q5) = galerkin_part(setup, g)?;
    let (q3, q4) = averaging_sups(setup, g)?;
    Ok(BoundednessQuantities {
        toeplitz_norm: q1,
        berezin_sup: berezin_sup(setup, &maps),
        averaging_sup: q3,
        lattice_sup: q4,
        carleson: q5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// All sides finite (bounded case) or all decaying (compact case).
    Consistent,
    /// All sides diverge together, or none decays.
    JointlyNegative,
    /// The sides disagree.
    Inconsistent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::JointlyNegative => "jointly-negative",
            Verdict::Inconsistent => "inconsistent",
        }
    }
}

fn joint_verdict(flags: &[bool]) -> Verdict {
    if flags.iter().all(|&f| f) {
        Verdict::Consistent
    } else if flags.iter().all(|&f| !f) {
        Verdict::JointlyNegative
    } else {
        Verdict::Inconsistent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessRow {
    pub symbol: String,
    pub decay: crate::symbols::Decay,
    pub quantities: BoundednessQuantities,
    /// Relative change of each quantity under truncation growth.
    pub growth: [f64; 5],
    pub finite: [bool; 5],
    pub max_ratio: f64,
    /// Max ratio under (quadrature doubled, delta halved, box grown).
    pub refined_ratios: [f64; 3],
    /// `q1 / q2`, the empirical norm-equivalence constant.
    pub norm_constant: f64,
    pub verdict: Verdict,
}

impl BoundednessRow {
    pub fn ratio_stability(&self) -> f64 {
        self.refined_ratios
            .iter()
            .map(|r| relative_change(self.max_ratio, *r))
            .fold(0.0, f64::max)
    }

    pub fn stable(&self) -> bool {
        self.ratio_stability() <= GROWTH_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    pub rows: Vec<BoundednessRow>,
    /// Max pairwise ratio over the bounded symbols of the family.
    pub family_ratio: f64,
    pub family_refined: [f64; 3],
}

impl BoundednessReport {
    pub fn family_stable(&self) -> bool {
        self.family_refined
            .iter()
            .all(|r| relative_change(self.family_ratio, *r) <= GROWTH_TOL)
    }

    /// Finiteness agrees across the five quantities and with the decay tag.
    pub fn consistent(&self) -> bool {
        self.rows.iter().all(|r| match r.verdict {
            Verdict::Consistent => r.decay.is_bounded(),
            Verdict::JointlyNegative => !r.decay.is_bounded(),
            Verdict::Inconsistent => false,
        }) && self.family_stable()
    }
}

pub fn boundedness_report(setup: &Setup, symbols: &[Symbol]) -> Result<BoundednessReport> {
    let half = setup.with_basis((setup.params.basis_size / 2).max(1))?;
    let refined = setup.refined_quadrature()?;
    let halved = setup.halved_delta()?;
    let grown = setup.grown(1.0)?;
    let mut rows = Vec::with_capacity(symbols.len());
    for g in symbols {
        let (maps, q1, q5) = galerkin_part(setup, g)?;
        let (q3, q4) = averaging_sups(setup, g)?;
        let q = BoundednessQuantities {
            toeplitz_norm: q1,
            berezin_sup: berezin_sup(setup, &maps),
            averaging_sup: q3,
            lattice_sup: q4,
            carleson: q5,
        };
        let (_, h1, h5) = galerkin_part(&half, g)?;
        let (g3, g4) = averaging_sups(&grown, g)?;
        let gq = BoundednessQuantities {
            toeplitz_norm: q1,
            berezin_sup: berezin_sup(&grown, &maps),
            averaging_sup: g3,
            lattice_sup: g4,
            carleson: q5,
        };
        let growth = [
            relative_change(h1, q1),
            relative_change(q.berezin_sup, gq.berezin_sup),
            relative_change(q3, g3),
            relative_change(q4, g4),
            relative_change(h5, q5),
        ];
        let finite = growth.map(|v| v <= GROWTH_TOL);

        let rq = boundedness_quantities(&refined, g)?;
        let (d3, d4) = averaging_sups(&halved, g)?;
        let dq = BoundednessQuantities {
            averaging_sup: d3,
            lattice_sup: d4,
            ..q
        };
        let verdict = joint_verdict(&finite);
        rows.push(BoundednessRow {
            symbol: g.id().to_string(),
            decay: g.decay(),
            max_ratio: q.max_ratio(),
            refined_ratios: [rq.max_ratio(), dq.max_ratio(), gq.max_ratio()],
            norm_constant: q1 / q.berezin_sup,
            quantities: q,
            growth,
            finite,
            verdict,
        });
    }
    let bounded: Vec<&BoundednessRow> = rows.iter().filter(|r| r.verdict == Verdict::Consistent).collect();
    let family_ratio = sup(bounded.iter().map(|r| r.max_ratio));
    let family_refined = [0, 1, 2].map(|i| sup(bounded.iter().map(|r| r.refined_ratios[i])));
    Ok(BoundednessReport {
        rows,
        family_ratio,
        family_refined,
    })
}

/// Ring profile: sup over `RING_SAMPLES` points of each ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RingProfile {
    pub radii: Vec<f64>,
    pub berezin: Vec<f64>,
    pub averaging: Vec<f64>,
    pub berezin_origin: f64,
    pub averaging_origin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessRow {
    pub symbol: String,
    pub decay: crate::symbols::Decay,
    pub profile: RingProfile,
    /// Sup of `G^_delta(z_k)` over lattice points with `|z_k| >= 5`.
    pub lattice_tail: f64,
    pub singular_values: Vec<f64>,
    /// `sigma_{K d / 2} / sigma_1`.
    pub sigma_tail: f64,
    /// Smallest index with `sigma_i < 1e-6`.
    pub tail_index: Option<usize>,
    /// Decay flags of (G~, G^_delta, lattice tail, sigma tail).
    pub decays: [bool; 4],
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessReport {
    pub rows: Vec<CompactnessRow>,
}

impl CompactnessReport {
    pub fn consistent(&self) -> bool {
        self.rows.iter().all(|r| match r.verdict {
            Verdict::Consistent => r.decay.is_vanishing(),
            Verdict::JointlyNegative => !r.decay.is_vanishing(),
            Verdict::Inconsistent => false,
        })
    }
}

fn decays(tail: f64, origin: f64) -> bool {
    tail < DECAY_TOL * origin
}

/// Lattice on the box covering the outermost ring.
pub fn outer_lattice(setup: &Setup) -> Result<Lattice> {
    let half = COMPACT_RINGS[COMPACT_RINGS.len() - 1] + 0.5;
    build_lattice_scan(
        &setup.field,
        &Rect::centered(half),
        setup.params.delta,
        setup.params.probe,
        setup.params.scan_divisor,
    )
}

pub fn compactness_report(setup: &Setup, symbols: &[Symbol]) -> Result<CompactnessReport> {
    let outer = outer_lattice(setup)?;
    let r_out = COMPACT_RINGS[COMPACT_RINGS.len() - 1];
    let tail_points: Vec<C64> = outer.points.iter().copied().filter(|z| z.norm() >= r_out).collect();
    let delta = setup.params.delta;
    let origin = C64::new(0.0, 0.0);
    let mut rows = Vec::with_capacity(symbols.len());
    for g in symbols {
        let maps = BerezinMaps::new(&setup.model, g, &setup.quad)?;
        let avg = |z: C64| averaging_scalar(&setup.field, g, z, delta, &setup.disk);
        let mut profile = RingProfile {
            radii: COMPACT_RINGS.to_vec(),
            berezin: Vec::new(),
            averaging: Vec::new(),
            berezin_origin: maps.scalar(origin),
            averaging_origin: avg(origin)?,
        };
        for &r in &COMPACT_RINGS {
            let pts = ring(r, RING_SAMPLES);
            profile.berezin.push(sup(pts.iter().map(|&z| maps.scalar(z))));
            profile
                .averaging
                .push(sup(pts.iter().map(|&z| avg(z)).collect::<Result<Vec<_>>>()?));
        }
        let lattice_tail = sup(tail_points.par_iter().map(|&z| avg(z)).collect::<Result<Vec<_>>>()?);
        let sv: Vec<f64> = eigenvalues_desc(&maps.toeplitz().matrix)
            .iter()
            .map(|v| v.max(0.0))
            .collect();
        let mid = sv.len() / 2;
        let sigma_tail = if sv[0] > 0.0 { sv[mid] / sv[0] } else { 0.0 };
        let last = COMPACT_RINGS.len() - 1;
        let flags = [
            decays(profile.berezin[last], profile.berezin_origin),
            decays(profile.averaging[last], profile.averaging_origin),
            decays(lattice_tail, profile.averaging_origin),
            sigma_tail < DECAY_TOL,
        ];
        rows.push(CompactnessRow {
            symbol: g.id().to_string(),
            decay: g.decay(),
            lattice_tail,
            tail_index: sv.iter().position(|&s| s < crate::toeplitz::TAIL_THRESHOLD),
            singular_values: sv,
            sigma_tail,
            decays: flags,
            verdict: joint_verdict(&flags),
            profile,
        });
    }
    Ok(CompactnessReport { rows })
}

/// The four sides of the Schatten class characterisation at one exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchattenQuantities {
    pub p: f64,
    /// `int sum_m <G~^op e_m, e_m>^p rho^{-2} dA` over the box.
    pub berezin_integral: f64,
    /// Same with `G^op_delta`.
    pub averaging_integral: f64,
    /// `sum_{j,m} <G^op_delta(z_j) e_m^j, e_m^j>^p` over the lattice.
    pub lattice_sum: f64,
    /// `sum sigma_i^p` on the truncation.
    pub schatten_sum: f64,
}

impl SchattenQuantities {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.berezin_integral,
            self.averaging_integral,
            self.lattice_sum,
            self.schatten_sum,
        ]
    }

    pub fn max_ratio(&self) -> f64 {
        max_pairwise_ratio(&self.as_array())
    }
}

pub const SCHATTEN_NAMES: [&str; 4] = ["berezin_integral", "averaging_integral", "lattice_sum", "schatten_sum"];

fn check_exponents(p_set: &[f64]) -> Result<()> {
    if p_set.is_empty() {
        return Err(Error::param("p_set", "empty"));
    }
    if let Some(p) = p_set.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    Ok(())
}

/// Per-cell data of the grid integrals.
struct CellData {
    weight: f64,
    berezin_diag: Vec<f64>,
    averaging_eig: Vec<f64>,
}

fn cell_data(setup: &Setup, g: &Symbol, maps: &BerezinMaps) -> Result<Vec<CellData>> {
    let (centers, area) = cell_centers(&setup.params.rect, setup.params.grid_n);
    let delta = setup.params.delta;
    centers
        .par_iter()
        .map(|&z| {
            let rho = setup.field.rho(z)?;
            let (_, avg) = averages(&setup.field, g, z, delta, &setup.disk)?;
            let (eig, vecs) = sorted_eigen(&avg);
            let b = maps.operator(z);
            let berezin_diag = (0..vecs.ncols())
                .map(|m| {
                    let v = vecs.column(m);
                    (v.adjoint() * &b * v)[(0, 0)].re
                })
                .collect();
            Ok(CellData {
                weight: area / (rho * rho),
                berezin_diag,
                averaging_eig: eig,
            })
        })
        .collect()
}

fn lattice_eigs(setup: &Setup, g: &Symbol) -> Result<Vec<Vec<f64>>> {
    let delta = setup.params.delta;
    setup
        .lattice
        .points
        .par_iter()
        .map(|&z| {
            let (_, avg) = averages(&setup.field, g, z, delta, &setup.disk)?;
            Ok(sorted_eigen(&avg).0)
        })
        .collect()
}

fn pos_pow(v: f64, p: f64) -> f64 {
    v.max(0.0).powf(p)
}

/// All four sides for each exponent.
pub fn schatten_quantities(setup: &Setup, g: &Symbol, p_set: &[f64]) -> Result<Vec<SchattenQuantities>> {
    check_exponents(p_set)?;
    let maps = BerezinMaps::new(&setup.model, g, &setup.quad)?;
    let cells = cell_data(setup, g, &maps)?;
    let lat = lattice_eigs(setup, g)?;
    let sv = eigenvalues_desc(&maps.toeplitz().matrix);
    Ok(p_set
        .iter()
        .map(|&p| SchattenQuantities {
            p,
            berezin_integral: cells
                .iter()
                .map(|c| c.weight * c.berezin_diag.iter().map(|&v| pos_pow(v, p)).sum::<f64>())
                .sum(),
            averaging_integral: cells
                .iter()
                .map(|c| c.weight * c.averaging_eig.iter().map(|&v| pos_pow(v, p)).sum::<f64>())
                .sum(),
            lattice_sum: lat.iter().map(|e| e.iter().map(|&v| pos_pow(v, p)).sum::<f64>()).sum(),
            schatten_sum: schatten_sum(&sv, p),
        })
        .collect())
}

/// `S_4` with the standard basis in place of the eigenbasis.
pub fn lattice_sum_standard_basis(setup: &Setup, g: &Symbol, p: f64) -> Result<f64> {
    let delta = setup.params.delta;
    let mut total = 0.0;
    for &z in &setup.lattice.points {
        let (_, avg) = averages(&setup.field, g, z, delta, &setup.disk)?;
        total += (0..avg.nrows()).map(|m| pos_pow(avg[(m, m)].re, p)).sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchattenRow {
    pub symbol: String,
    pub decay: crate::symbols::Decay,
    pub quantities: SchattenQuantities,
    pub growth: [f64; 4],
    pub finite: [bool; 4],
    pub max_ratio: f64,
    /// Max ratio under (quadrature doubled, lattice refined, box grown).
    pub refined_ratios: [f64; 3],
    pub verdict: Verdict,
}

impl SchattenRow {
    pub fn ratio_stability(&self) -> f64 {
        self.refined_ratios
            .iter()
            .map(|r| relative_change(self.max_ratio, *r))
            .fold(0.0, f64::max)
    }

    /// Jointly finite with stable ratios, or jointly divergent.
    pub fn schatten_consistent(&self) -> bool {
        match self.verdict {
            Verdict::Consistent => self.ratio_stability() <= GROWTH_TOL,
            Verdict::JointlyNegative => true,
            Verdict::Inconsistent => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchattenReport {
    pub rows: Vec<SchattenRow>,
}

impl SchattenReport {
    pub fn consistent(&self) -> bool {
        self.rows.iter().all(SchattenRow::schatten_consistent)
    }
}

pub fn schatten_report(setup: &Setup, symbols: &[Symbol], p_set: &[f64]) -> Result<SchattenReport> {
    check_exponents(p_set)?;
    let half = setup.with_basis((setup.params.basis_size / 2).max(1))?;
    let grown = setup.grown(1.0)?;
    let refined = setup.refined_quadrature()?;
    let lattice_fine = setup.refined_lattice()?;
    let mut rows = Vec::new();
    for g in symbols {
        let base = schatten_quantities(setup, g, p_set)?;
        let h = schatten_quantities(&half, g, p_set)?;
        let gr = schatten_quantities(&grown, g, p_set)?;
        let rf = schatten_quantities(&refined, g, p_set)?;
        let lf = lattice_eigs(&lattice_fine, g)?;
        for (i, q) in base.iter().enumerate() {
            let p = q.p;
            let growth = [
                relative_change(q.berezin_integral, gr[i].berezin_integral),
                relative_change(q.averaging_integral, gr[i].averaging_integral),
                relative_change(q.lattice_sum, gr[i].lattice_sum),
                relative_change(h[i].schatten_sum, q.schatten_sum),
            ];
            let finite = growth.map(|v| v <= GROWTH_TOL);
            let lq = SchattenQuantities {
                lattice_sum: lf.iter().map(|e| e.iter().map(|&v| pos_pow(v, p)).sum::<f64>()).sum(),
                ..*q
            };
            rows.push(SchattenRow {
                symbol: g.id().to_string(),
                decay: g.decay(),
                quantities: *q,
                growth,
                finite,
                max_ratio: q.max_ratio(),
                refined_ratios: [rf[i].max_ratio(), lq.max_ratio(), gr[i].max_ratio()],
                verdict: joint_verdict(&finite),
            });
        }
    }
    Ok(SchattenReport { rows })
}

/// Empirical constant `C` in `||T_G f||^2 <= C int |f|^2 e^{-2 phi} (G^_delta)^2 dA`
/// over random `f` with `n_low` leading coefficients per component.
pub fn star_constant(setup: &Setup, g: &Symbol, samples: usize, n_low: usize) -> Result<f64> {
    let d = g.dimension();
    let kb = setup.model.basis_size();
    let n_low = n_low.min(kb);
    let t = assemble_toeplitz(&setup.model, g, &setup.quad)?;
    // Coarse grid, enough for entire functions of degree below n_low.
    let low = default_quadrature(&setup.params.weight, n_low)?;
    let quad = QuadratureGrid::new(low.r_max(), 100, 64.max(2 * n_low))?;
    let disk = DiskRule::new(12, 24);
    let delta = setup.params.delta;
    let nodes: Vec<(C64, f64)> = quad.nodes().collect();
    let avg: Vec<f64> = nodes
        .par_iter()
        .map(|&(w, _)| averaging_scalar(&setup.field, g, w, delta, &disk))
        .collect::<Result<_>>()?;
    let basis: Vec<Vec<C64>> = nodes.iter().map(|&(w, _)| setup.model.basis_at(w)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(setup.params.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut v = vec![C64::new(0.0, 0.0); kb * d];
        for c in v.iter_mut().take(n_low * d) {
            *c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let x = DVector::from_column_slice(&v);
        let lhs = (t.matrix.transpose() * x).norm_squared();
        let mut rhs = 0.0;
        for (i, &(w, q)) in nodes.iter().enumerate() {
            let mut norm2 = 0.0;
            for m in 0..d {
                let val: C64 = (0..n_low).map(|k| v[k * d + m] * basis[i][k]).sum();
                norm2 += val.norm_sqr();
            }
            rhs += q * norm2 * (-2.0 * setup.params.weight.phi(w)).exp() * avg[i] * avg[i];
        }
        worst = worst.max(lhs / rhs);
    }
    Ok(worst)
}

/// `sup G^_delta / G~` over the transform grid.
pub fn comparison_constant(setup: &Setup, g: &Symbol) -> Result<f64> {
    let maps = BerezinMaps::new(&setup.model, g, &setup.quad)?;
    let delta = setup.params.delta;
    let pts = setup.grid_points();
    let ratios: Vec<f64> = pts
        .par_iter()
        .map(|&z| {
            let a = averaging_scalar(&setup.field, g, z, delta, &setup.disk)?;
            let b = maps.scalar(z);
            Ok(if a > 1e-300 { a / b } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok(sup(ratios))
}
