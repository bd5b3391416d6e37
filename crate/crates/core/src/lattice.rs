//! `delta`-lattices adapted to the radius function, overlap diagnostics and
//! partitions into separated subsequences.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};

use crate::domain::{ProbeGrid, Rect};
use crate::weights::RadiusField;
use crate::{Error, Result, C64};

/// Candidates must keep `|c - z_k| >= SEPARATION * delta * rho(z_k)` from
/// every accepted point.
pub const SEPARATION: f64 = 1.5;
pub const DEFAULT_PROBE: usize = 201;
pub const DEFAULT_SCAN_DIVISOR: f64 = 5.0;
/// Radii at which the dilation constants are sampled, besides `delta`.
pub const DILATION_RADII: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Uniform bucket grid over the plane.
#[derive(Debug, Clone)]
struct Buckets {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl Buckets {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            map: HashMap::new(),
        }
    }

    fn key(&self, z: C64) -> (i64, i64) {
        ((z.re / self.cell).floor() as i64, (z.im / self.cell).floor() as i64)
    }

    fn insert(&mut self, z: C64, index: usize) {
        let k = self.key(z);
        self.map.entry(k).or_default().push(index);
    }

    /// Indices stored within `radius` cells' reach of `z`, in no fixed order.
    fn near(&self, z: C64, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let reach = (radius / self.cell).ceil() as i64;
        let (cx, cy) = self.key(z);
        (cx - reach..=cx + reach).flat_map(move |i| {
            (cy - reach..=cy + reach).flat_map(move |j| self.map.get(&(i, j)).into_iter().flatten().copied())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub points: Vec<C64>,
    pub rho: Vec<f64>,
    pub delta: f64,
    pub rect: Rect,
    /// Probe resolution per side used for covering and packing checks.
    pub probe: usize,
    /// Points accepted by the greedy scan; the rest were coverage repairs.
    pub greedy_count: usize,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn probe_grid(&self) -> ProbeGrid {
        self.rect.grid(self.probe, self.probe)
    }

    fn buckets(&self, scale: f64) -> (Buckets, f64) {
        let max_r = scale * self.delta * self.rho.iter().copied().fold(0.0, f64::max);
        let mut b = Buckets::new(max_r.max(1e-9));
        for (i, &z) in self.points.iter().enumerate() {
            b.insert(z, i);
        }
        (b, max_r)
    }

    /// Number of disks `D(z_k, m delta rho(z_k))` containing each probe point.
    pub fn multiplicities(&self, m: f64) -> Vec<usize> {
        let (b, reach) = self.buckets(m);
        self.probe_grid()
            .points()
            .iter()
            .map(|&p| {
                b.near(p, reach)
                    .filter(|&k| (p - self.points[k]).norm() < m * self.delta * self.rho[k])
                    .count()
            })
            .collect()
    }

    /// Probe points outside every `D^delta(z_k)`.
    pub fn coverage_holes(&self) -> usize {
        self.multiplicities(1.0).iter().filter(|&&c| c == 0).count()
    }

    /// Probe points inside two or more `D^{delta/5}(z_k)`.
    pub fn packing_violations(&self) -> usize {
        self.multiplicities(0.2).iter().filter(|&&c| c >= 2).count()
    }

    /// Same lattice without point `index`.
    pub fn without(&self, index: usize) -> Lattice {
        let mut l = self.clone();
        l.points.remove(index);
        l.rho.remove(index);
        l.greedy_count = l.greedy_count.min(l.points.len());
        l
    }

    /// Writes `index,x,y,rho` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "x", "y", "rho"]).map_err(csv_err)?;
        for (i, (z, r)) in self.points.iter().zip(&self.rho).enumerate() {
            w.write_record([
                i.to_string(),
                format!("{:.17e}", z.re),
                format!("{:.17e}", z.im),
                format!("{:.17e}", r),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`Lattice::write_csv`], checking the `rho`
    /// column against `field`.
    pub fn read_csv(input: impl Read, field: &RadiusField, rect: Rect, delta: f64, probe: usize) -> Result<Lattice> {
        check_delta(delta)?;
        let mut r = csv::Reader::from_reader(input);
        let mut points = Vec::new();
        let mut rho = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 4 {
                return Err(Error::Format(format!("row {}: expected 4 columns", line + 1)));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("row {}: bad number {:?}", line + 1, &rec[i])))
            };
            let index: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad index", line + 1)))?;
            if index != line {
                return Err(Error::Format(format!("row {}: index {index} out of order", line + 1)));
            }
            let z = C64::new(num(1)?, num(2)?);
            let stored = num(3)?;
            let fresh = field.rho(z)?;
            if (stored - fresh).abs() > 1e-9 * fresh {
                return Err(Error::Format(format!(
                    "row {}: rho {stored} disagrees with the weight ({fresh})",
                    line + 1
                )));
            }
            points.push(z);
            rho.push(fresh);
        }
        check_distinct(&points)?;
        Ok(Lattice {
            greedy_count: points.len(),
            points,
            rho,
            delta,
            rect,
            probe,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Greedy `delta`-lattice on `rect`.
///
/// A row-major scan grid of spacing `(delta / 5) min rho` is walked and a
/// candidate is accepted when it keeps distance `1.5 delta rho(z_k)` from
/// every accepted `z_k`. Connected groups of uncovered probe points are then
/// patched, in probe order, by inserting the group's probe point nearest to
/// its centroid until every probe point is covered.
pub fn build_lattice(field: &RadiusField, rect: &Rect, delta: f64, probe: usize) -> Result<Lattice> {
    build_lattice_scan(field, rect, delta, probe, DEFAULT_SCAN_DIVISOR)
}

/// [`build_lattice`] with scan spacing `(delta / scan_divisor) min rho`.
pub fn build_lattice_scan(
    field: &RadiusField,
    rect: &Rect,
    delta: f64,
    probe: usize,
    scan_divisor: f64,
) -> Result<Lattice> {
    check_delta(delta)?;
    if !(scan_divisor >= 1.0) {
        return Err(Error::param("scan_divisor", "must be at least 1"));
    }
    if !rect.is_valid() {
        return Err(Error::param("box", "empty or non-finite rectangle"));
    }
    if probe < 2 {
        return Err(Error::param("probe", "need at least 2 probe points per side"));
    }
    let probe_grid = rect.grid(probe, probe);
    let probe_points = probe_grid.points();
    let probe_rho: Vec<f64> = probe_points.iter().map(|&p| field.rho(p)).collect::<Result<_>>()?;
    let min_rho = probe_rho.iter().copied().fold(f64::INFINITY, f64::min);
    let max_rho = probe_rho.iter().copied().fold(0.0, f64::max);

    let spacing = delta / scan_divisor * min_rho;
    let nx = (rect.width() / spacing).floor() as usize + 1;
    let ny = (rect.height() / spacing).floor() as usize + 1;
    // rho is 1-Lipschitz, so points of the box have rho below this bound.
    let rho_bound = max_rho + 2.0 * probe_grid.dx().max(probe_grid.dy());
    let reach = SEPARATION * delta * rho_bound;
    let mut buckets = Buckets::new(reach);
    let mut points: Vec<C64> = Vec::new();
    let mut rho: Vec<f64> = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let c = C64::new(rect.x_min + ix as f64 * spacing, rect.y_min + iy as f64 * spacing);
            let blocked = buckets
                .near(c, reach)
                .any(|k| (c - points[k]).norm() < SEPARATION * delta * rho[k]);
            if !blocked {
                buckets.insert(c, points.len());
                rho.push(field.rho(c)?);
                points.push(c);
            }
        }
    }
    let greedy_count = points.len();

    // Coverage repair.
    let cover_reach = delta * rho_bound.max(rho.iter().copied().fold(0.0, f64::max));
    let mut cover_buckets = Buckets::new(cover_reach);
    for (i, &z) in points.iter().enumerate() {
        cover_buckets.insert(z, i);
    }
    let covered_by = |p: C64, points: &[C64], rho: &[f64], b: &Buckets| {
        b.near(p, cover_reach).any(|k| (p - points[k]).norm() < delta * rho[k])
    };
    let mut covered: Vec<bool> = probe_points
        .iter()
        .map(|&p| covered_by(p, &points, &rho, &cover_buckets))
        .collect();
    let n = probe;
    let mut cursor = 0;
    while let Some(start) = (cursor..covered.len()).find(|&i| !covered[i]) {
        cursor = start;
        // Flood fill the uncovered component containing `start`.
        let mut comp = Vec::new();
        let mut seen = HashMap::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start, ());
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (ix, iy) = (i % n, i / n);
            let mut nb = Vec::with_capacity(4);
            if ix > 0 {
                nb.push(i - 1);
            }
            if ix + 1 < n {
                nb.push(i + 1);
            }
            if iy > 0 {
                nb.push(i - n);
            }
            if iy + 1 < n {
                nb.push(i + n);
            }
            for j in nb {
                if !covered[j] && seen.insert(j, ()).is_none() {
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        let centroid = comp.iter().map(|&i| probe_points[i]).sum::<C64>() / comp.len() as f64;
        let pick = comp
            .iter()
            .copied()
            .min_by(|&a, &b| {
                (probe_points[a] - centroid)
                    .norm()
                    .total_cmp(&(probe_points[b] - centroid).norm())
                    .then(a.cmp(&b))
            })
            .expect("component is non-empty");
        let c = probe_points[pick];
        let rc = field.rho(c)?;
        if delta * rc > cover_reach {
            return Err(Error::Check {
                check: "lattice repair",
                detail: format!("radius {rc} exceeds the bucket bound"),
            });
        }
        cover_buckets.insert(c, points.len());
        points.push(c);
        rho.push(rc);
        // The new disk can also reach neighbouring uncovered components.
        for (i, p) in probe_points.iter().enumerate() {
            if !covered[i] && (p - c).norm() < delta * rc {
                covered[i] = true;
            }
        }
    }

    Ok(Lattice {
        points,
        rho,
        delta,
        rect: *rect,
        probe,
        greedy_count,
    })
}

/// Dilation constants at one radius `r`: for `w in D^r(z)`,
/// `D^r(w) subset D^{m1 r}(z)` and `D^r(z) subset D^{m2 r}(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dilation {
    pub r: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDiagnostics {
    pub count: usize,
    /// Multiplier `m` applied to the disk radii.
    pub m: f64,
    /// Largest number of disks `D^{m delta}(z_k)` sharing a probe point.
    pub overlap_n: usize,
    /// Dilation constants at `r = delta`.
    pub m1: f64,
    pub m2: f64,
    /// `max_r (m1(r) + m2(r))` over the sampled radii.
    pub beta: f64,
    pub dilations: Vec<Dilation>,
    pub coverage_holes: usize,
    pub packing_violations: usize,
}

/// Overlap count and empirical dilation constants.
pub fn diagnostics(lat: &Lattice, field: &RadiusField, m: f64) -> Result<LatticeDiagnostics> {
    if !(m >= 1.0) {
        return Err(Error::param("m", format!("must be at least 1, got {m}")));
    }
    let overlap_n = lat.multiplicities(m).into_iter().max().unwrap_or(0);
    let mut radii: Vec<f64> = DILATION_RADII.to_vec();
    radii.push(lat.delta);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let samples = lat.rect.grid(11, 11).points();
    let mut dilations = Vec::with_capacity(radii.len());
    for &r in &radii {
        let (mut m1, mut m2) = (1.0f64, 1.0f64);
        for &z in &samples {
            let rz = field.rho(z)?;
            for frac in [0.5, 0.9, 0.999] {
                for a in 0..8 {
                    let w = z + C64::from_polar(frac * r * rz, std::f64::consts::TAU * a as f64 / 8.0);
                    let rw = field.rho(w)?;
                    let dist = (z - w).norm();
                    m1 = m1.max((dist + r * rw) / (r * rz));
                    m2 = m2.max((dist + r * rz) / (r * rw));
                }
            }
        }
        dilations.push(Dilation { r, m1, m2 });
    }
    let at_delta = dilations
        .iter()
        .find(|d| d.r == lat.delta)
        .copied()
        .expect("delta is sampled");
    let beta = dilations.iter().map(|d| d.m1 + d.m2).fold(0.0, f64::max);
    Ok(LatticeDiagnostics {
        count: lat.len(),
        m,
        overlap_n,
        m1: at_delta.m1,
        m2: at_delta.m2,
        beta,
        dilations,
        coverage_holes: lat.coverage_holes(),
        packing_violations: lat.packing_violations(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedPartition {
    pub classes: Vec<Vec<usize>>,
    pub r: f64,
    pub m_r: usize,
    pub max_degree: usize,
    /// `36 R^4 delta^{-2} N_delta` when the points form a lattice.
    pub bound: Option<f64>,
}

impl SeparatedPartition {
    pub fn within_bound(&self) -> Option<bool> {
        self.bound.map(|b| self.m_r as f64 <= b)
    }
}

fn check_distinct(points: &[C64]) -> Result<()> {
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (i, z) in points.iter().enumerate() {
        let key = ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits());
        if let Some(&first) = seen.get(&key) {
            return Err(Error::DuplicatePoint { first, second: i });
        }
        seen.insert(key, i);
    }
    Ok(())
}

/// Close-graph adjacency: `|z_j - z_k| < R min(rho_j, rho_k)`.
fn close_graph(points: &[C64], rho: &[f64], r: f64) -> Vec<Vec<usize>> {
    let reach = r * rho.iter().copied().fold(0.0, f64::max);
    let mut b = Buckets::new(reach.max(1e-9));
    for (i, &z) in points.iter().enumerate() {
        b.insert(z, i);
    }
    points
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let mut nb: Vec<usize> = b
                .near(z, reach)
                .filter(|&k| k != j && (z - points[k]).norm() < r * rho[j].min(rho[k]))
                .collect();
            nb.sort_unstable();
            nb
        })
        .collect()
}

/// Greedy colouring of the close graph in index order.
pub fn partition_separated(points: &[C64], field: &RadiusField, r: f64) -> Result<SeparatedPartition> {
    if !(r > 1.0) {
        return Err(Error::param("R", format!("must exceed 1, got {r}")));
    }
    check_distinct(points)?;
    let rho: Vec<f64> = points.iter().map(|&z| field.rho(z)).collect::<Result<_>>()?;
    let adj = close_graph(points, &rho, r);
    let mut color = vec![usize::MAX; points.len()];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for j in 0..points.len() {
        let used: Vec<usize> = adj[j].iter().map(|&k| color[k]).filter(|&c| c != usize::MAX).collect();
        let c = (0..).find(|c| !used.contains(c)).expect("unbounded range");
        color[j] = c;
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(j);
    }
    Ok(SeparatedPartition {
        m_r: classes.len(),
        classes,
        r,
        max_degree: adj.iter().map(Vec::len).max().unwrap_or(0),
        bound: None,
    })
}

/// Partition of a lattice, recording the counting bound `36 R^4 delta^{-2} N`.
pub fn partition_lattice(lat: &Lattice, field: &RadiusField, r: f64, overlap_n: usize) -> Result<SeparatedPartition> {
    let mut p = partition_separated(&lat.points, field, r)?;
    p.bound = Some(36.0 * r.powi(4) * lat.delta.powi(-2) * overlap_n as f64);
    Ok(p)
}

/// Checks the separation predicate of every class.
pub fn classes_separated(points: &[C64], field: &RadiusField, part: &SeparatedPartition) -> Result<bool> {
    for class in &part.classes {
        for (a, &j) in class.iter().enumerate() {
            for &k in &class[a + 1..] {
                let bound = part.r * field.rho(points[j])?.min(field.rho(points[k])?);
                if (points[j] - points[k]).norm() < bound {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
