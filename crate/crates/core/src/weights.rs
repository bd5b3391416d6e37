//! Admissible weights, the radius function `rho` and the quasi-metric built
//! from it.
//!
//! The Laplacian is the Euclidean one, `d^2/dx^2 + d^2/dy^2`, so that
//! `Delta(|z|^2 / 2) = 2` and `Delta(|z|^4) = 16 |z|^2`. Only one complex
//! dimension is supported by the quadrature.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::domain::Rect;
use crate::quadrature::DiskRule;
use crate::{Error, Result, C64};

/// Angles and radii of the polar sample used to estimate `sup` over a disc.
const SUP_ANGLES: usize = 32;
const SUP_RADII: usize = 16;
/// Bisection steps of the radius solver once a bracket is found.
const BISECTION_STEPS: usize = 60;
/// Bracketing gives up beyond `2^BRACKET_LIMIT` in either direction.
const BRACKET_LIMIT: i32 = 60;

type ScalarFn = dyn Fn(C64) -> f64 + Send + Sync;

/// Dispatch tag: closed forms are used where the kind provides them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// `phi = m |z|^2 / 2`.
    Gaussian { m: f64 },
    /// `phi = a2 |z|^2 + a4 |z|^4`.
    RadialPoly { a2: f64, a4: f64 },
    /// User supplied; `radial` enables the diagonal kernel fast path.
    Custom { radial: bool },
}

#[derive(Clone)]
struct CustomParts {
    phi: Arc<ScalarFn>,
    laplacian: Arc<ScalarFn>,
}

/// A weight `phi` together with its Laplacian.
#[derive(Clone)]
pub struct Weight {
    id: String,
    dimension: usize,
    kind: WeightKind,
    custom: Option<CustomParts>,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("id", &self.id)
            .field("dimension", &self.dimension)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Weight {
    pub fn gaussian(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::param("gaussian:m", format!("must be positive, got {m}")));
        }
        Ok(Self {
            id: format!("gaussian:{m}"),
            dimension: 1,
            kind: WeightKind::Gaussian { m },
            custom: None,
        })
    }

    pub fn radial_poly(a2: f64, a4: f64) -> Result<Self> {
        if !(a2.is_finite() && a4.is_finite()) || a2 < 0.0 || a4 < 0.0 || a2 + a4 == 0.0 {
            return Err(Error::param(
                "radial-poly",
                format!("coefficients must be nonnegative and not both zero, got {a2},{a4}"),
            ));
        }
        Ok(Self {
            id: format!("radial-poly:{a2},{a4}"),
            dimension: 1,
            kind: WeightKind::RadialPoly { a2, a4 },
            custom: None,
        })
    }

    /// Weight given by closures for `phi` and its Laplacian.
    pub fn custom(
        id: impl Into<String>,
        phi: impl Fn(C64) -> f64 + Send + Sync + 'static,
        laplacian: impl Fn(C64) -> f64 + Send + Sync + 'static,
        radial: bool,
    ) -> Self {
        Self {
            id: id.into(),
            dimension: 1,
            kind: WeightKind::Custom { radial },
            custom: Some(CustomParts {
                phi: Arc::new(phi),
                laplacian: Arc::new(laplacian),
            }),
        }
    }

    /// Parses a gallery id: `gaussian:m` or `radial-poly:a2,a4`.
    /// Custom weights come from [`Weight::from_csv`].
    pub fn parse(id: &str) -> Result<Self> {
        let (name, args) = id.split_once(':').unwrap_or((id, ""));
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("weight `{id}`: {e}")))
                })
                .collect()
        };
        match name.trim() {
            "gaussian" => {
                let v = if args.trim().is_empty() { vec![1.0] } else { nums(args)? };
                match v.as_slice() {
                    [m] => Self::gaussian(*m),
                    _ => Err(Error::Config(format!("weight `{id}`: expected gaussian:m"))),
                }
            }
            "radial-poly" => match nums(args)?.as_slice() {
                [a2, a4] => Self::radial_poly(*a2, *a4),
                _ => Err(Error::Config(format!("weight `{id}`: expected radial-poly:a2,a4"))),
            },
            other => Err(Error::Unknown {
                kind: "weight",
                name: other.to_string(),
            }),
        }
    }

    /// Custom weight sampled on a regular grid, CSV columns `x,y,phi`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let id = format!("custom:{}", path.as_ref().display());
        Self::from_csv_reader(id, file)
    }

    pub fn from_csv_reader(id: impl Into<String>, reader: impl Read) -> Result<Self> {
        let sampled = SampledWeight::read(reader)?;
        let s1 = Arc::new(sampled);
        let s2 = Arc::clone(&s1);
        Ok(Self::custom(id, move |z| s1.phi(z), move |z| s2.laplacian(z), false))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn is_radial(&self) -> bool {
        match self.kind {
            WeightKind::Gaussian { .. } | WeightKind::RadialPoly { .. } => true,
            WeightKind::Custom { radial } => radial,
        }
    }

    pub fn phi(&self, z: C64) -> f64 {
        match self.kind {
            WeightKind::Gaussian { m } => 0.5 * m * z.norm_sqr(),
            WeightKind::RadialPoly { a2, a4 } => {
                let s = z.norm_sqr();
                a2 * s + a4 * s * s
            }
            WeightKind::Custom { .. } => (self.custom.as_ref().expect("custom parts").phi)(z),
        }
    }

    pub fn laplacian(&self, z: C64) -> f64 {
        match self.kind {
            WeightKind::Gaussian { m } => 2.0 * m,
            WeightKind::RadialPoly { a2, a4 } => 4.0 * a2 + 16.0 * a4 * z.norm_sqr(),
            WeightKind::Custom { .. } => (self.custom.as_ref().expect("custom parts").laplacian)(z),
        }
    }

    /// Estimate of `sup_{D(z, r)} Delta phi`.
    ///
    /// Closed forms for the built-in kinds; otherwise the maximum over a
    /// polar sample of 32 angles x 16 radii plus the centre, which is a lower
    /// bound of the true supremum.
    pub fn disk_sup_laplacian(&self, z: C64, r: f64) -> f64 {
        match self.kind {
            WeightKind::Gaussian { m } => 2.0 * m,
            WeightKind::RadialPoly { a2, a4 } => {
                let t = z.norm() + r;
                4.0 * a2 + 16.0 * a4 * t * t
            }
            WeightKind::Custom { .. } => self.sampled_disk_sup(z, r),
        }
    }

    /// The polar-sample estimate, regardless of kind.
    pub fn sampled_disk_sup(&self, z: C64, r: f64) -> f64 {
        let mut best = self.laplacian(z);
        for i in 1..=SUP_RADII {
            let s = r * i as f64 / SUP_RADII as f64;
            for j in 0..SUP_ANGLES {
                let w = z + C64::from_polar(s, TAU * j as f64 / SUP_ANGLES as f64);
                let v = self.laplacian(w);
                if v > best || v.is_nan() {
                    best = v;
                }
            }
        }
        best
    }

    /// Five-point finite-difference Laplacian of `phi` with step `h`.
    pub fn fd_laplacian(&self, z: C64, h: f64) -> f64 {
        let c = self.phi(z);
        let sum = self.phi(z + C64::new(h, 0.0))
            + self.phi(z - C64::new(h, 0.0))
            + self.phi(z + C64::new(0.0, h))
            + self.phi(z - C64::new(0.0, h));
        (sum - 4.0 * c) / (h * h)
    }

    /// Largest relative disagreement between the finite-difference and the
    /// declared Laplacian over the given points (absolute below scale 1).
    pub fn laplacian_consistency(&self, points: &[C64]) -> f64 {
        points
            .iter()
            .map(|&z| {
                let a = self.laplacian(z);
                let h = 1e-3 * (1.0 + z.norm());
                let b = self.fd_laplacian(z, h);
                (a - b).abs() / a.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `sup_{D(z,r)} Delta phi` divided by the mean of `Delta phi` on the
    /// same disc. Infinite (or NaN) when the mean vanishes.
    pub fn reverse_holder_ratio(&self, z: C64, r: f64, disk: &DiskRule) -> f64 {
        let sup = self.disk_sup_laplacian(z, r);
        let mean = disk.average(z, r, |w| self.laplacian(w));
        sup / mean
    }
}

/// Regular grid samples of `phi` with a finite-difference Laplacian.
#[derive(Debug, Clone)]
struct SampledWeight {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    phi: Vec<f64>,
    lap: Vec<f64>,
}

impl SampledWeight {
    fn read(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Format(format!("weight CSV lacks column `{name}`")))
        };
        let (cx, cy, cp) = (col("x")?, col("y")?, col("phi")?);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("weight CSV row {}: bad number", line + 2)))
            };
            rows.push((get(cx)?, get(cy)?, get(cp)?));
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let (nx, ny) = (xs.len(), ys.len());
        if nx < 3 || ny < 3 || nx * ny != rows.len() {
            return Err(Error::Format(format!(
                "weight CSV must be a full regular grid of at least 3x3 (got {} rows, {nx} x values, {ny} y values)",
                rows.len()
            )));
        }
        let dx = (xs[nx - 1] - xs[0]) / (nx - 1) as f64;
        let dy = (ys[ny - 1] - ys[0]) / (ny - 1) as f64;
        let mut phi = vec![f64::NAN; nx * ny];
        for (x, y, p) in rows {
            let ix = ((x - xs[0]) / dx).round() as usize;
            let iy = ((y - ys[0]) / dy).round() as usize;
            if ix >= nx || iy >= ny || ((xs[0] + ix as f64 * dx) - x).abs() > 1e-6 * dx.max(1.0) {
                return Err(Error::Format(format!("weight CSV grid is not uniform near ({x}, {y})")));
            }
            phi[iy * nx + ix] = p;
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("weight CSV has missing or non-finite samples".into()));
        }
        let mut lap = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let cx = ix.clamp(1, nx - 2);
                let cy = iy.clamp(1, ny - 2);
                let at = |i: usize, j: usize| phi[j * nx + i];
                let dxx = (at(cx + 1, cy) - 2.0 * at(cx, cy) + at(cx - 1, cy)) / (dx * dx);
                let dyy = (at(cx, cy + 1) - 2.0 * at(cx, cy) + at(cx, cy - 1)) / (dy * dy);
                lap[iy * nx + ix] = dxx + dyy;
            }
        }
        Ok(Self {
            x0: xs[0],
            y0: ys[0],
            dx,
            dy,
            nx,
            ny,
            phi,
            lap,
        })
    }

    fn bilinear(&self, values: &[f64], z: C64) -> f64 {
        let fx = (z.re - self.x0) / self.dx;
        let fy = (z.im - self.y0) / self.dy;
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > (self.nx - 1) as f64 + eps || fy > (self.ny - 1) as f64 + eps {
            return f64::NAN;
        }
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let tx = (fx - ix as f64).clamp(0.0, 1.0);
        let ty = (fy - iy as f64).clamp(0.0, 1.0);
        let at = |i: usize, j: usize| values[j * self.nx + i];
        (1.0 - ty) * ((1.0 - tx) * at(ix, iy) + tx * at(ix + 1, iy))
            + ty * ((1.0 - tx) * at(ix, iy + 1) + tx * at(ix + 1, iy + 1))
    }

    fn phi(&self, z: C64) -> f64 {
        self.bilinear(&self.phi, z)
    }

    fn laplacian(&self, z: C64) -> f64 {
        self.bilinear(&self.lap, z)
    }
}

/// Pass/fail per admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdicts {
    pub positive_laplacian: bool,
    pub reverse_holder: bool,
    pub comparable_eigenvalues: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.positive_laplacian && self.reverse_holder && self.comparable_eigenvalues
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// `inf_z sup_{D(z, c)} Delta phi` over the probe grid.
    pub inf_sup_laplacian: f64,
    /// Largest `sup / mean` of `Delta phi` over probed discs.
    pub reverse_holder_constant: f64,
    /// Always 1 in one complex dimension.
    pub eigenvalue_ratio: f64,
    pub probe_c: f64,
    /// Smallest sampled Laplacian (subharmonicity proxy).
    pub min_laplacian: f64,
    pub verdict: Verdicts,
}

/// Reverse-Hoelder radii probed by [`check_admissibility`].
pub const REVERSE_HOLDER_RADII: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
/// Probe grid side used by [`check_admissibility`].
pub const ADMISSIBILITY_GRID: usize = 41;

pub fn check_admissibility(weight: &Weight, rect: &Rect, probe_c: f64) -> Result<AdmissibilityReport> {
    if !rect.is_valid() {
        return Err(Error::param("box", "empty or non-finite box"));
    }
    if !(probe_c.is_finite() && probe_c > 0.0) {
        return Err(Error::param("probe_c", format!("must be positive, got {probe_c}")));
    }
    let grid = rect.grid(ADMISSIBILITY_GRID, ADMISSIBILITY_GRID);
    let disk = DiskRule::default();
    let mut inf_sup = f64::INFINITY;
    let mut rh = 0.0f64;
    let mut min_lap = f64::INFINITY;
    for z in grid.points() {
        let phi = weight.phi(z);
        if !phi.is_finite() {
            return Err(Error::NonFinite {
                what: "phi",
                x: z.re,
                y: z.im,
            });
        }
        let lap = weight.laplacian(z);
        if !lap.is_finite() {
            return Err(Error::NonFinite {
                what: "laplacian",
                x: z.re,
                y: z.im,
            });
        }
        min_lap = min_lap.min(lap);
        inf_sup = inf_sup.min(weight.disk_sup_laplacian(z, probe_c));
        for &r in &REVERSE_HOLDER_RADII {
            let ratio = weight.reverse_holder_ratio(z, r, &disk);
            if ratio.is_nan() {
                rh = f64::INFINITY;
            } else {
                rh = rh.max(ratio);
            }
        }
    }
    Ok(AdmissibilityReport {
        inf_sup_laplacian: inf_sup,
        reverse_holder_constant: rh,
        eigenvalue_ratio: 1.0,
        probe_c,
        min_laplacian: min_lap,
        verdict: Verdicts {
            positive_laplacian: inf_sup > 0.0,
            reverse_holder: rh.is_finite(),
            comparable_eigenvalues: true,
        },
    })
}

/// How [`RadiusField::rho_distance`] measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMode {
    /// `|z - w| / rho(z)`.
    Proxy,
    /// Left-endpoint sum of `int |dz| / rho` along the segment with the given
    /// number of pieces, minimised over the two traversal directions.
    Path { subdivisions: usize },
}

/// Empirical constants of the radius function over a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSummary {
    /// Largest sampled `rho`.
    pub sup_bound: f64,
    /// Smallest sampled `rho`.
    pub inf: f64,
    /// `rho(z) >~ |z|^{-A}` fitted for `|z| > 1`.
    pub growth_a: f64,
    /// `rho(z) <~ |z|^{B}` fitted for `|z| > 1`.
    pub growth_b: f64,
}

/// The radius function of a weight with a thread-safe memo table.
pub struct RadiusField {
    weight: Weight,
    memo: Mutex<HashMap<(u64, u64), f64>>,
}

impl fmt::Debug for RadiusField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadiusField").field("weight", &self.weight).finish()
    }
}

impl Clone for RadiusField {
    fn clone(&self) -> Self {
        Self::new(self.weight.clone())
    }
}

impl RadiusField {
    pub fn new(weight: Weight) -> Self {
        Self {
            weight,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    /// `rho(z) = sup { r > 0 : r^2 sup_{D(z,r)} Delta phi <= 1 }`.
    pub fn rho(&self, z: C64) -> Result<f64> {
        if let WeightKind::Gaussian { m } = self.weight.kind {
            return Ok((2.0 * m).sqrt().recip());
        }
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.memo.lock().expect("memo poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.solve_radius(z)?;
        self.memo.lock().expect("memo poisoned").insert(key, v);
        Ok(v)
    }

    /// `rho` for points already known to be valid; panics otherwise.
    pub fn rho_unchecked(&self, z: C64) -> f64 {
        self.rho(z).expect("radius function undefined")
    }

    /// The generic solver, bypassing closed forms and the memo table.
    ///
    /// Brackets the crossing of `g(r) = r^2 sup_{D(z,r)} Delta phi` with 1 by
    /// doubling or halving from `r = 1`, then bisects.
    pub fn solve_radius(&self, z: C64) -> Result<f64> {
        let g = |r: f64| r * r * self.weight.disk_sup_laplacian(z, r);
        let g1 = g(1.0);
        if !g1.is_finite() {
            return Err(Error::NonFinite {
                what: "laplacian",
                x: z.re,
                y: z.im,
            });
        }
        let (mut lo, mut hi) = if g1 <= 1.0 {
            let mut lo = 1.0;
            let mut k = 0;
            loop {
                let hi = 2.0 * lo;
                let v = g(hi);
                if v.is_nan() {
                    return Err(Error::NonFinite {
                        what: "laplacian",
                        x: z.re,
                        y: z.im,
                    });
                }
                if v > 1.0 {
                    break (lo, hi);
                }
                lo = hi;
                k += 1;
                if k > BRACKET_LIMIT {
                    return Err(Error::RadiusUnbounded { x: z.re, y: z.im });
                }
            }
        } else {
            let mut hi = 1.0;
            let mut k = 0;
            loop {
                let lo = 0.5 * hi;
                if g(lo) <= 1.0 {
                    break (lo, hi);
                }
                hi = lo;
                k += 1;
                if k > BRACKET_LIMIT {
                    return Err(Error::param(
                        "weight",
                        format!("Laplacian too large near {z}: no admissible radius"),
                    ));
                }
            }
        };
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if g(mid) <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    pub fn rho_distance(&self, z: C64, w: C64, mode: DistanceMode) -> Result<f64> {
        let d = (z - w).norm();
        if d == 0.0 {
            return Ok(0.0);
        }
        match mode {
            DistanceMode::Proxy => Ok(d / self.rho(z)?),
            DistanceMode::Path { subdivisions } => {
                let s = subdivisions.max(1);
                let step = d / s as f64;
                let along = |a: C64, b: C64| -> Result<f64> {
                    let mut total = 0.0;
                    for i in 0..s {
                        let p = a + (b - a) * (i as f64 / s as f64);
                        total += step / self.rho(p)?;
                    }
                    Ok(total)
                };
                Ok(along(z, w)?.min(along(w, z)?))
            }
        }
    }

    /// `mu(D(z, r)) = r^2 sup_{D(z,r)} Delta phi`.
    pub fn doubling_measure(&self, z: C64, r: f64) -> f64 {
        r * r * self.weight.disk_sup_laplacian(z, r)
    }

    /// Sup bound and growth exponents sampled on an `n x n` grid of the box.
    pub fn summary(&self, rect: &Rect, n: usize) -> Result<RadiusSummary> {
        let pts = rect.grid(n, n).points();
        let mut sup: f64 = 0.0;
        let mut inf = f64::INFINITY;
        let mut fit = Vec::new();
        for &z in &pts {
            let r = self.rho(z)?;
            sup = sup.max(r);
            inf = inf.min(r);
            if z.norm() > 1.0 {
                fit.push((z.norm().ln(), r.ln()));
            }
        }
        let slope = least_squares_slope(&fit).unwrap_or(0.0);
        Ok(RadiusSummary {
            sup_bound: sup,
            inf,
            growth_a: (-slope).max(0.0),
            growth_b: slope.max(0.0),
        })
    }
}

/// Slope of the least-squares line through `(x, y)` pairs.
pub(crate) fn least_squares_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Area of `D^r(z)` given `rho(z)`.
pub fn disk_area(r: f64, rho: f64) -> f64 {
    PI * (r * rho).powi(2)
}
