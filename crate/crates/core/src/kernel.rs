//! Truncated orthonormal basis of the Fock space `F^2_phi(C)`, the
//! reproducing kernel, kernel norms and the orthogonal projection.
//!
//! Functions are expanded in scaled monomials `u_k(z) = z^k / sqrt(g_k)`
//! with `g_k = int |z|^{2k} e^{-2 phi} dA`. For radial weights the monomials
//! are already orthogonal and `f_k = u_k`. Otherwise the Gram matrix of the
//! `u_k` is Cholesky-factored, `S = L L^*`, and `f = L^{-1} u`.
//!
//! The vector-valued kernel is `K(z, w) I_d` and is never materialised.

use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::quadrature::{DiskRule, QuadratureGrid};
use crate::weights::{least_squares_slope, DistanceMode, RadiusField, Weight};
use crate::{CMatrix, Error, Result, C64};

/// Log-drop of the heaviest radial moment integrand at the truncation radius.
const TAIL_LOG_DROP: f64 = 40.0;
/// Relative size of the last kernel term that still counts as converged.
const TRUST_TOLERANCE: f64 = 1e-10;
/// Smallest acceptable Cholesky pivot of the normalised Gram matrix.
const MIN_PIVOT: f64 = 1e-12;

pub const DEFAULT_BASIS_SIZE: usize = 64;
pub const DEFAULT_RADIAL_NODES: usize = 200;
pub const DEFAULT_ANGULAR_NODES: usize = 128;

#[derive(Debug, Clone)]
pub struct KernelModel {
    weight: Weight,
    basis_size: usize,
    log_moments: Vec<f64>,
    /// `sqrt(g_{k-1} / g_k)`, with `step[0] = 1 / sqrt(g_0)`.
    step: Vec<f64>,
    /// Lower-triangular change of basis, absent for radial weights.
    coeffs: Option<CMatrix>,
    r_max: f64,
    conditioning: Option<f64>,
    warnings: Vec<String>,
}

/// Kernel value with a flag raised when an argument lies beyond `R_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: C64,
    pub extrapolated: bool,
}

/// `phi` minimised over the angular nodes of one ring.
fn ring_reference(weight: &Weight, r: f64, quad: &QuadratureGrid) -> f64 {
    if weight.is_radial() {
        return weight.phi(C64::new(r, 0.0));
    }
    (0..quad.n_angular())
        .map(|l| weight.phi(C64::from_polar(r, quad.angle(l))))
        .fold(f64::INFINITY, f64::min)
}

/// Truncation radius for `basis_size` monomials: the heaviest moment
/// integrand `r^{2K-1} e^{-2 phi}` has dropped by `e^{-40}` from its peak.
pub fn suggest_r_max(weight: &Weight, basis_size: usize) -> f64 {
    let k = basis_size.max(1) as f64;
    let phi_min = |r: f64| {
        if weight.is_radial() {
            weight.phi(C64::new(r, 0.0))
        } else {
            (0..16)
                .map(|l| weight.phi(C64::from_polar(r, TAU * l as f64 / 16.0)))
                .fold(f64::INFINITY, f64::min)
        }
    };
    let log_integrand = |r: f64| (2.0 * k - 1.0) * r.ln() - 2.0 * phi_min(r);
    let mut r = 1e-2;
    let mut peak = f64::NEG_INFINITY;
    let mut peak_r = r;
    while r < 1e4 {
        let v = log_integrand(r);
        if v.is_nan() {
            break;
        }
        if v > peak {
            peak = v;
            peak_r = r;
        } else if v < peak - TAIL_LOG_DROP && r > peak_r {
            return r;
        }
        r += 2e-3 * (1.0 + r);
    }
    r
}

/// Model, quadrature and default grid sizes for a weight.
pub fn default_quadrature(weight: &Weight, basis_size: usize) -> Result<QuadratureGrid> {
    let n_theta = DEFAULT_ANGULAR_NODES.max(2 * basis_size);
    QuadratureGrid::new(suggest_r_max(weight, basis_size), DEFAULT_RADIAL_NODES, n_theta)
}

impl KernelModel {
    pub fn build(weight: &Weight, basis_size: usize, quad: &QuadratureGrid) -> Result<Self> {
        build_kernel_model(weight, basis_size, quad)
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `g_k` (equal to the moments `h_k` for radial weights).
    pub fn moments(&self) -> Vec<f64> {
        self.log_moments.iter().map(|v| v.exp()).collect()
    }

    pub fn log_moments(&self) -> &[f64] {
        &self.log_moments
    }

    pub fn is_diagonal(&self) -> bool {
        self.coeffs.is_none()
    }

    /// Squared ratio of the extreme Cholesky pivots (non-radial weights).
    pub fn conditioning(&self) -> Option<f64> {
        self.conditioning
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Scaled monomials `u_k(z)`, `k < basis_size`.
    pub fn monomials_at(&self, z: C64) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.basis_size);
        let mut cur = C64::new(self.step[0], 0.0);
        out.push(cur);
        for k in 1..self.basis_size {
            cur = cur * z * self.step[k];
            out.push(cur);
        }
        out
    }

    /// Orthonormal basis values `f_k(z)`.
    pub fn basis_at(&self, z: C64) -> Vec<C64> {
        let u = self.monomials_at(z);
        match &self.coeffs {
            None => u,
            Some(c) => (0..self.basis_size)
                .map(|j| (0..=j).map(|k| c[(j, k)] * u[k]).sum())
                .collect(),
        }
    }

    /// Value at `z` of `sum_k coeffs[k] f_k`.
    pub fn synthesize(&self, coeffs: &[C64], z: C64) -> C64 {
        self.basis_at(z).iter().zip(coeffs).map(|(f, c)| f * c).sum()
    }

    /// Truncated kernel `K(z, w) = sum_k f_k(z) conj(f_k(w))`.
    pub fn kernel(&self, z: C64, w: C64) -> C64 {
        let a = self.basis_at(z);
        let b = self.basis_at(w);
        kernel_from_values(&a, &b)
    }

    /// Largest radius on which the truncated kernel diagonal has converged.
    pub fn trusted_radius(&self) -> f64 {
        let mut r: f64 = 0.0;
        let step = 0.01;
        loop {
            let next = r + step;
            let u = self.monomials_at(C64::new(next, 0.0));
            let total: f64 = u.iter().map(|v| v.norm_sqr()).sum();
            let tail = u.last().map(|v| v.norm_sqr()).unwrap_or(0.0);
            if !(tail <= TRUST_TOLERANCE * total) || next > self.r_max {
                return r;
            }
            r = next;
        }
    }

    /// Galerkin matrix of a `d x d` matrix-valued function `H` in the
    /// orthonormal basis:
    /// `E[(k,m),(l,n)] = int H(w)[n][m] f_k(w) conj(f_l(w)) e^{-2 phi(w)} dA`,
    /// row index `k d + m`.
    ///
    /// `fill(w, out)` writes `H(w)[n][m]` into `out[n * d + m]`.
    ///
    /// The quadrature is summed ring by ring: the angular sum is an exact
    /// discrete Fourier transform of `H` on the ring, after which every entry
    /// is a single radial sum. This equals the plain node-by-node sum up to
    /// rounding.
    pub fn galerkin<F>(&self, quad: &QuadratureGrid, d: usize, fill: F) -> CMatrix
    where
        F: Fn(C64, &mut [C64]) + Sync,
    {
        let kb = self.basis_size;
        let n_theta = quad.n_angular();
        let dim = kb * d;
        let dw = quad.angular_weight();
        let twiddle: Vec<C64> = (0..n_theta)
            .map(|t| C64::from_polar(1.0, TAU * t as f64 / n_theta as f64))
            .collect();
        let n_freq = 2 * kb - 1;

        let mut out = CMatrix::zeros(dim, dim);
        let mut samples = vec![C64::new(0.0, 0.0); n_theta * d * d];
        let mut spectrum = vec![C64::new(0.0, 0.0); n_freq * d * d];
        let mut b = vec![0.0; kb];
        for &(r, wr) in quad.radial() {
            let phi_ref = ring_reference(&self.weight, r, quad);
            for l in 0..n_theta {
                let w = C64::from_polar(r, quad.angle(l));
                let slot = &mut samples[l * d * d..(l + 1) * d * d];
                fill(w, slot);
                if !self.weight.is_radial() {
                    let factor = (-2.0 * (self.weight.phi(w) - phi_ref)).exp();
                    slot.iter_mut().for_each(|v| *v *= factor);
                }
            }
            // spectrum[nu + kb - 1] = dw * sum_l e^{i nu theta_l} H_l
            for (fi, nu) in (-(kb as isize - 1)..kb as isize).enumerate() {
                let dst = &mut spectrum[fi * d * d..(fi + 1) * d * d];
                dst.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                for l in 0..n_theta {
                    let t = (nu * l as isize).rem_euclid(n_theta as isize) as usize;
                    let tw = twiddle[t] * dw;
                    let src = &samples[l * d * d..(l + 1) * d * d];
                    for (a, s) in dst.iter_mut().zip(src) {
                        *a += tw * s;
                    }
                }
            }
            // b_k = sqrt(w r) r^k e^{-phi_ref} / sqrt(g_k)
            let ln_r = r.ln();
            let base = 0.5 * (wr * r).ln() - phi_ref;
            for (k, bk) in b.iter_mut().enumerate() {
                *bk = (base + k as f64 * ln_r - 0.5 * self.log_moments[k]).exp();
            }
            for k in 0..kb {
                for l in 0..kb {
                    let coef = b[k] * b[l];
                    if coef == 0.0 {
                        continue;
                    }
                    let fi = (k as isize - l as isize + kb as isize - 1) as usize;
                    let spec = &spectrum[fi * d * d..(fi + 1) * d * d];
                    for m in 0..d {
                        for n in 0..d {
                            out[(k * d + m, l * d + n)] += spec[n * d + m] * coef;
                        }
                    }
                }
            }
        }
        match &self.coeffs {
            None => out,
            Some(c) => {
                let big = kron_identity(c, d);
                &big * out * big.adjoint()
            }
        }
    }

    /// Reference route for [`KernelModel::galerkin`]: the plain node sum.
    pub fn galerkin_direct<F>(&self, quad: &QuadratureGrid, d: usize, fill: F) -> CMatrix
    where
        F: Fn(C64, &mut [C64]),
    {
        let dim = self.basis_size * d;
        let mut out = CMatrix::zeros(dim, dim);
        let mut h = vec![C64::new(0.0, 0.0); d * d];
        for (w, q) in quad.nodes() {
            let mass = q * (-2.0 * self.weight.phi(w)).exp();
            if mass == 0.0 {
                continue;
            }
            fill(w, &mut h);
            let f = self.basis_at(w);
            for k in 0..self.basis_size {
                for l in 0..self.basis_size {
                    let fk = f[k] * f[l].conj() * mass;
                    for m in 0..d {
                        for n in 0..d {
                            out[(k * d + m, l * d + n)] += fk * h[n * d + m];
                        }
                    }
                }
            }
        }
        out
    }

    /// Gram matrix of the orthonormal basis under the quadrature.
    pub fn gram(&self, quad: &QuadratureGrid) -> CMatrix {
        self.galerkin(quad, 1, |_, out| out[0] = C64::new(1.0, 0.0))
    }
}

pub(crate) fn kernel_from_values(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// `C (x) I_d` for a `K x K` matrix `C`.
fn kron_identity(c: &CMatrix, d: usize) -> CMatrix {
    if d == 1 {
        return c.clone();
    }
    let k = c.nrows();
    let mut out = CMatrix::zeros(k * d, k * d);
    for i in 0..k {
        for j in 0..k {
            for m in 0..d {
                out[(i * d + m, j * d + m)] = c[(i, j)];
            }
        }
    }
    out
}

/// Builds the truncated orthonormal basis.
///
/// Radial weights take the diagonal fast path with moments computed by the
/// radial rule. Other weights are orthonormalised over the full grid; the
/// basis is shortened if the Gram matrix loses definiteness. Moments whose
/// integrand has not decayed at `R_max` also shorten the basis.
pub fn build_kernel_model(weight: &Weight, basis_size: usize, quad: &QuadratureGrid) -> Result<KernelModel> {
    if basis_size == 0 {
        return Err(Error::param("basis_size", "must be at least 1"));
    }
    let mut warnings = Vec::new();
    if quad.n_angular() < 2 * basis_size {
        warnings.push(format!(
            "{} angular nodes cannot separate {} monomials exactly",
            quad.n_angular(),
            basis_size
        ));
    }
    let r_out = quad.radial().last().map(|p| p.0).unwrap_or(quad.r_max());

    let mut log_moments = Vec::with_capacity(basis_size);
    for k in 0..basis_size {
        let (lm, tail_ok) = if weight.is_radial() {
            radial_log_moment(weight, k, quad)
        } else {
            node_log_moment(weight, k, quad)?
        };
        if !lm.is_finite() || !tail_ok {
            warnings.push(format!(
                "moment {k} is not resolved inside R_max = {:.3} (outer node {r_out:.3}); basis reduced to {k}",
                quad.r_max()
            ));
            break;
        }
        log_moments.push(lm);
    }
    if log_moments.is_empty() {
        return Err(Error::param("weight", "no moment is finite: weight too light"));
    }
    let step = step_table(&log_moments);
    let mut model = KernelModel {
        weight: weight.clone(),
        basis_size: log_moments.len(),
        log_moments,
        step,
        coeffs: None,
        r_max: quad.r_max(),
        conditioning: None,
        warnings,
    };
    if !weight.is_radial() {
        orthonormalize(&mut model, quad)?;
    }
    Ok(model)
}

fn step_table(log_moments: &[f64]) -> Vec<f64> {
    let mut step = Vec::with_capacity(log_moments.len());
    step.push((-0.5 * log_moments[0]).exp());
    for k in 1..log_moments.len() {
        step.push((0.5 * (log_moments[k - 1] - log_moments[k])).exp());
    }
    step
}

/// `ln g_k = ln 2 pi int r^{2k+1} e^{-2 phi(r)} dr` and whether the
/// integrand is negligible at the outermost node.
fn radial_log_moment(weight: &Weight, k: usize, quad: &QuadratureGrid) -> (f64, bool) {
    let terms: Vec<f64> = quad
        .radial()
        .iter()
        .map(|&(r, w)| w.ln() + (2 * k + 1) as f64 * r.ln() - 2.0 * weight.phi(C64::new(r, 0.0)))
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    let tail = terms.last().copied().unwrap_or(f64::NEG_INFINITY) - max;
    (TAU.ln() + max + sum.ln(), tail < -25.0)
}

fn node_log_moment(weight: &Weight, k: usize, quad: &QuadratureGrid) -> Result<(f64, bool)> {
    let mut terms = Vec::with_capacity(quad.len());
    for (w, q) in quad.nodes() {
        let phi = weight.phi(w);
        if !phi.is_finite() {
            return Err(Error::NonFinite {
                what: "phi",
                x: w.re,
                y: w.im,
            });
        }
        terms.push(q.ln() + 2.0 * k as f64 * w.norm().ln() - 2.0 * phi);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    let n = quad.n_angular();
    let outer = terms[terms.len() - n..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((max + sum.ln(), outer - max < -25.0))
}

fn orthonormalize(model: &mut KernelModel, quad: &QuadratureGrid) -> Result<()> {
    let s = model.galerkin(quad, 1, |_, out| out[0] = C64::new(1.0, 0.0));
    let n = s.nrows();
    let mut l = CMatrix::zeros(n, n);
    let mut pivots = Vec::with_capacity(n);
    let mut keep = n;
    'outer: for j in 0..n {
        let mut diag = s[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > MIN_PIVOT) {
            keep = j;
            break 'outer;
        }
        let djj = diag.sqrt();
        pivots.push(djj);
        l[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / djj;
        }
    }
    if keep == 0 {
        return Err(Error::Check {
            check: "orthonormalization",
            detail: "Gram matrix is not positive definite".into(),
        });
    }
    if keep < n {
        model.warnings.push(format!(
            "Gram matrix lost definiteness at index {keep}; basis reduced from {n}"
        ));
        model.basis_size = keep;
        model.log_moments.truncate(keep);
        model.step.truncate(keep);
    }
    let lk = l.view((0, 0), (keep, keep)).into_owned();
    let c = invert_lower(&lk);
    let max = pivots[..keep].iter().copied().fold(0.0, f64::max);
    let min = pivots[..keep].iter().copied().fold(f64::INFINITY, f64::min);
    model.conditioning = Some((max / min).powi(2));
    model.coeffs = Some(c);
    Ok(())
}

fn invert_lower(l: &CMatrix) -> CMatrix {
    let n = l.nrows();
    let mut inv = CMatrix::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = l[(col, col)].inv();
        for i in (col + 1)..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in col..i {
                acc += l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -acc / l[(i, i)];
        }
    }
    inv
}

/// Kernel value with an extrapolation flag.
pub fn eval_kernel(model: &KernelModel, z: C64, w: C64) -> KernelValue {
    KernelValue {
        value: model.kernel(z, w),
        extrapolated: z.norm() > model.r_max || w.norm() > model.r_max,
    }
}

/// `||K_z||_{F^p_phi}`: closed form for `p = 2`, quadrature otherwise,
/// node supremum of `|K_z| e^{-phi}` for `p = inf`.
pub fn kernel_norm(model: &KernelModel, z: C64, p: f64, quad: &QuadratureGrid) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    if p == 2.0 {
        return Ok(model.kernel(z, z).re.max(0.0).sqrt());
    }
    let fz = model.basis_at(z);
    let weight = model.weight();
    if p.is_infinite() {
        let mut best: f64 = 0.0;
        for (w, _) in quad.nodes() {
            let v = kernel_from_values(&model.basis_at(w), &fz).norm() * (-weight.phi(w)).exp();
            best = best.max(v);
        }
        return Ok(best);
    }
    let mut total = 0.0;
    for (w, q) in quad.nodes() {
        let v = kernel_from_values(&model.basis_at(w), &fz).norm() * (-weight.phi(w)).exp();
        total += q * v.powf(p);
    }
    Ok(total.powf(1.0 / p))
}

/// Coefficients `<f, f_k>` of node samples of a `d`-vector valued function.
///
/// `samples[i * d + m]` is component `m` at node `i`; the result is indexed
/// `k * d + m`.
pub fn project(model: &KernelModel, samples: &[C64], d: usize, quad: &QuadratureGrid) -> Result<Vec<C64>> {
    if samples.len() != quad.len() * d {
        return Err(Error::param(
            "samples",
            format!("expected {} values, got {}", quad.len() * d, samples.len()),
        ));
    }
    if samples.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::param("samples", "non-finite sample"));
    }
    let kb = model.basis_size();
    let mut out = vec![C64::new(0.0, 0.0); kb * d];
    for (i, (w, q)) in quad.nodes().enumerate() {
        let mass = q * (-2.0 * model.weight().phi(w)).exp();
        if mass == 0.0 {
            continue;
        }
        let f = model.basis_at(w);
        for k in 0..kb {
            let fk = f[k].conj() * mass;
            for m in 0..d {
                out[k * d + m] += samples[i * d + m] * fk;
            }
        }
    }
    Ok(out)
}

/// Node samples of `sum_{k,m} c[k d + m] f_k e_m`, laid out as in [`project`].
pub fn reconstruct(model: &KernelModel, coeffs: &[C64], d: usize, quad: &QuadratureGrid) -> Vec<C64> {
    let kb = model.basis_size();
    let mut out = vec![C64::new(0.0, 0.0); quad.len() * d];
    for (i, (w, _)) in quad.nodes().enumerate() {
        let f = model.basis_at(w);
        for k in 0..kb {
            for m in 0..d {
                out[i * d + m] += coeffs[k * d + m] * f[k];
            }
        }
    }
    out
}

/// Min and max of a ratio over a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut r = Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for v in values {
            r.min = r.min.min(v);
            r.max = r.max.max(v);
        }
        r
    }

    /// `max / min`, the two-sided comparability constant.
    pub fn spread(&self) -> f64 {
        self.max / self.min
    }
}

/// Empirical constants of the two-sided kernel estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimateReport {
    /// `||K_z||_2 e^{-phi(z)} rho(z)`.
    pub norm_ratio: Range,
    /// `|k_z(w)|^2 e^{-2 phi(w)} rho(z)^2` for `w` in `D^alpha(z)`.
    pub local_ratio: Range,
    /// `int |K_z|^p e^{-p phi} dA / (e^{p phi(z)} rho(z)^{2(1-p)})`, `p = 1`.
    pub integral_ratio_p1: Range,
    /// Same with `p = 2`.
    pub integral_ratio_p2: Range,
    /// Fitted exponential decay rate of `|K(z,w)| e^{-phi(z)-phi(w)} rho(z) rho(w)` in `d_rho`.
    pub epsilon: f64,
    pub alpha: f64,
}

/// Evaluates the kernel estimates over `grid`, which must lie inside the
/// guard band `min(0.8 R_max, trusted radius)`.
pub fn verify_kernel_estimates(
    model: &KernelModel,
    field: &RadiusField,
    grid: &[C64],
    quad: &QuadratureGrid,
    alpha: f64,
) -> Result<KernelEstimateReport> {
    let guard = (0.8 * model.r_max()).min(model.trusted_radius());
    if let Some(z) = grid.iter().find(|z| z.norm() > guard) {
        return Err(Error::param(
            "grid",
            format!("point {z} outside the guard band |z| <= {guard:.3}"),
        ));
    }
    let weight = model.weight();
    let disk = DiskRule::new(6, 12);
    let mut norm = Vec::new();
    let mut local = Vec::new();
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    let mut decay = Vec::new();
    for &z in grid {
        let rho = field.rho(z)?;
        let fz = model.basis_at(z);
        let kzz = kernel_from_values(&fz, &fz).re;
        let phi_z = weight.phi(z);
        norm.push(kzz.sqrt() * (-phi_z).exp() * rho);
        for (w, _) in disk.nodes(z, alpha * rho) {
            let k = kernel_from_values(&model.basis_at(w), &fz).norm_sqr();
            local.push(k / kzz * (-2.0 * weight.phi(w)).exp() * rho * rho);
        }
        let (mut s1, mut s2) = (0.0, 0.0);
        for (w, q) in quad.nodes() {
            let v = kernel_from_values(&model.basis_at(w), &fz).norm() * (-weight.phi(w)).exp();
            s1 += q * v;
            s2 += q * v * v;
        }
        p1.push(s1 / phi_z.exp());
        p2.push(s2 / (2.0 * phi_z).exp() * rho * rho);
        for t in [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
            for a in 0..4 {
                let w = z + C64::from_polar(t * rho, TAU * a as f64 / 4.0 + 0.3);
                if w.norm() > guard {
                    continue;
                }
                let k = model.kernel(z, w).norm();
                let y = k.ln() - phi_z - weight.phi(w) + rho.ln() + field.rho(w)?.ln();
                let x = field.rho_distance(z, w, DistanceMode::Proxy)?;
                if y.is_finite() {
                    decay.push((x, y));
                }
            }
        }
    }
    let epsilon = least_squares_slope(&decay).map(|s| -s).unwrap_or(f64::NAN);
    Ok(KernelEstimateReport {
        norm_ratio: Range::of(norm),
        local_ratio: Range::of(local),
        integral_ratio_p1: Range::of(p1),
        integral_ratio_p2: Range::of(p2),
        epsilon,
        alpha,
    })
}

/// Dense copy of the change of basis (identity for radial weights).
pub fn basis_change(model: &KernelModel) -> CMatrix {
    match &model.coeffs {
        Some(c) => c.clone(),
        None => DMatrix::identity(model.basis_size, model.basis_size),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn gaussian_model(k: usize) -> (KernelModel, QuadratureGrid) {
        let w = Weight::gaussian(1.0).unwrap();
        let q = default_quadrature(&w, k).unwrap();
        (KernelModel::build(&w, k, &q).unwrap(), q)
    }

    fn ln_factorial(k: usize) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn gaussian_moments_are_pi_factorial() {
        let (m, _) = gaussian_model(64);
        assert!(m.is_diagonal());
        for (k, lm) in m.log_moments().iter().enumerate().take(41) {
            let exact = PI.ln() + ln_factorial(k);
            assert!(((lm - exact).exp() - 1.0).abs() < 1e-10, "k={k}");
        }
        assert!((m.moments()[0] - PI).abs() < 1e-12);
        assert!((m.basis_at(C64::new(0.0, 0.0))[0].re - PI.sqrt().recip()).abs() < 1e-14);
    }

    #[test]
    fn quartic_moments_match_gamma_closed_form() {
        // int |z|^{2k} e^{-2|z|^4} dA = pi Gamma((k+1)/2) / (2 * 2^{(k+1)/2})
        let w = Weight::radial_poly(0.0, 1.0).unwrap();
        let q = default_quadrature(&w, 24).unwrap();
        let m = KernelModel::build(&w, 24, &q).unwrap();
        let gamma_half = |n: usize| -> f64 {
            // Gamma(n / 2)
            if n % 2 == 0 {
                (1..n / 2).map(|i| i as f64).product()
            } else {
                let mut v = PI.sqrt();
                let mut x = 0.5;
                while x < n as f64 / 2.0 - 0.25 {
                    v *= x;
                    x += 1.0;
                }
                v
            }
        };
        for (k, h) in m.moments().iter().enumerate() {
            let exact = PI * gamma_half(k + 1) / (2.0 * 2f64.powf((k + 1) as f64 / 2.0));
            assert!((h / exact - 1.0).abs() < 1e-10, "k={k}: {h} vs {exact}");
        }
    }

    #[test]
    fn gaussian_kernel_values() {
        let (m, q) = gaussian_model(64);
        let one = C64::new(1.0, 0.0);
        assert!((m.kernel(one, one).re - E / PI).abs() < 1e-12);
        for z in [C64::new(0.3, 2.0), C64::new(-4.0, 1.0)] {
            let v = m.kernel(z, C64::new(0.0, 0.0));
            assert!((v - C64::new(1.0 / PI, 0.0)).norm() < 1e-14);
        }
        let (a, b) = (C64::new(0.4, -1.1), C64::new(-2.0, 0.7));
        assert_eq!(m.kernel(a, b), m.kernel(b, a).conj());
        assert!(eval_kernel(&m, C64::new(50.0, 0.0), one).extrapolated);
        assert!((kernel_norm(&m, C64::new(0.0, 0.0), 2.0, &q).unwrap() - PI.sqrt().recip()).abs() < 1e-14);
        assert!((kernel_norm(&m, one, 2.0, &q).unwrap() - (E / PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kernel_norm_general_p_consistent_with_two() {
        let (m, q) = gaussian_model(32);
        let z = C64::new(0.5, -0.25);
        let closed = kernel_norm(&m, z, 2.0, &q).unwrap();
        let quad: f64 = {
            let fz = m.basis_at(z);
            q.nodes()
                .map(|(w, wq)| {
                    wq * kernel_from_values(&m.basis_at(w), &fz).norm_sqr() * (-2.0 * m.weight().phi(w)).exp()
                })
                .sum::<f64>()
                .sqrt()
        };
        assert!((closed - quad).abs() < 1e-10 * closed);
        // ||K_z||_1 = 2 e^{|z|^2 / 2} for the Gaussian weight
        let l1 = kernel_norm(&m, z, 1.0, &q).unwrap();
        assert!((l1 / (2.0 * (0.5 * z.norm_sqr()).exp()) - 1.0).abs() < 1e-8);
        // ||K_z||_inf = e^{|z|^2/2} / pi, attained at w = z
        let linf = kernel_norm(&m, C64::new(0.0, 0.0), f64::INFINITY, &q).unwrap();
        assert!((linf - 1.0 / PI).abs() < 1e-3);
        assert!(kernel_norm(&m, z, 0.0, &q).is_err());
    }

    #[test]
    fn gram_is_identity() {
        let (m, q) = gaussian_model(64);
        let g = m.gram(&q);
        let dev = (&g - CMatrix::identity(64, 64)).camax();
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn fast_and_direct_galerkin_agree() {
        let w = Weight::gaussian(1.0).unwrap();
        let q = QuadratureGrid::new(suggest_r_max(&w, 12), 60, 32).unwrap();
        let m = KernelModel::build(&w, 12, &q).unwrap();
        let fill = |z: C64, out: &mut [C64]| {
            out[0] = C64::new((-z.norm_sqr()).exp(), 0.0);
            out[1] = C64::new(0.3 * z.re, 0.1 * z.im);
            out[2] = out[1].conj();
            out[3] = C64::new(1.0 + z.im * z.im, 0.0);
        };
        let a = m.galerkin(&q, 2, fill);
        let b = m.galerkin_direct(&q, 2, fill);
        assert!((&a - &b).camax() < 1e-12, "{}", (&a - &b).camax());
    }

    #[test]
    fn non_radial_weight_matches_twisted_gaussian_kernel() {
        // phi = |z|^2/2 + 0.1 Re(z^2): K(z,w) = e^{0.1 z^2 + 0.1 conj(w)^2} e^{z conj(w)} / pi
        let w = Weight::custom("twisted", |z| 0.5 * z.norm_sqr() + 0.1 * (z * z).re, |_| 2.0, false);
        let k = 40;
        let q = QuadratureGrid::new(suggest_r_max(&w, k), 200, 128).unwrap();
        let m = KernelModel::build(&w, k, &q).unwrap();
        assert!(!m.is_diagonal());
        assert_eq!(m.basis_size(), k, "{:?}", m.warnings());
        let g = m.gram(&q);
        assert!((&g - CMatrix::identity(k, k)).camax() < 1e-8);
        for (z, wv) in [
            (C64::new(1.0, 0.0), C64::new(1.0, 0.0)),
            (C64::new(0.3, -0.5), C64::new(-0.2, 0.4)),
        ] {
            let exact = (0.1 * z * z + 0.1 * wv.conj() * wv.conj() + z * wv.conj()).exp() / PI;
            let got = m.kernel(z, wv);
            assert!((got - exact).norm() < 1e-8 * exact.norm(), "{got} vs {exact}");
        }
        assert!(m.conditioning().unwrap() >= 1.0);
    }

    #[test]
    fn projection_examples() {
        let (m, q) = gaussian_model(32);
        let samples: Vec<C64> = q.nodes().map(|(w, _)| m.basis_at(w)[3]).collect();
        let c = project(&m, &samples, 1, &q).unwrap();
        for (k, v) in c.iter().enumerate() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((v - C64::new(want, 0.0)).norm() < 1e-8, "k={k}: {v}");
        }
        // conj(z) is orthogonal to every holomorphic monomial
        let holo: Vec<C64> = q.nodes().map(|(w, _)| w * w.exp()).collect();
        let pert: Vec<C64> = q.nodes().map(|(w, _)| w * w.exp() + w.conj()).collect();
        let a = project(&m, &holo, 1, &q).unwrap();
        let b = project(&m, &pert, 1, &q).unwrap();
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        // <z e^z, f_k> = sqrt(pi k!) / (k-1)!
        for k in 1..10usize {
            let lf = ln_factorial(k);
            let want = (0.5 * (PI.ln() + lf) - ln_factorial(k - 1)).exp();
            assert!((a[k].re - want).abs() < 1e-9 * want, "k={k}");
        }
        // idempotence
        let back = reconstruct(&m, &b, 1, &q);
        let again = project(&m, &back, 1, &q).unwrap();
        let dev = again.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn vector_projection_is_coordinatewise() {
        let (m, q) = gaussian_model(16);
        let mut samples = Vec::new();
        for (w, _) in q.nodes() {
            let f = m.basis_at(w);
            samples.push(f[1] * 2.0);
            samples.push(f[4] + w.conj());
        }
        let c = project(&m, &samples, 2, &q).unwrap();
        assert!((c[2] - C64::new(2.0, 0.0)).norm() < 1e-9);
        assert!((c[4 * 2 + 1] - C64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(project(&m, &samples[1..], 2, &q).is_err());
    }

    #[test]
    fn trusted_radius_grows_with_basis() {
        let (m32, _) = gaussian_model(32);
        let (m64, _) = gaussian_model(64);
        assert!(m64.trusted_radius() > m32.trusted_radius());
        assert!(m64.trusted_radius() > 5.0);
    }

    #[test]
    fn light_weight_reduces_basis() {
        let w = Weight::gaussian(1.0).unwrap();
        let q = QuadratureGrid::new(7.0, 100, 128).unwrap();
        let m = KernelModel::build(&w, 64, &q).unwrap();
        assert!(m.basis_size() < 64);
        assert!(!m.warnings().is_empty());
    }

    #[test]
    fn gaussian_estimate_ratios() {
        let (m, q) = gaussian_model(64);
        let field = RadiusField::new(Weight::gaussian(1.0).unwrap());
        let grid = crate::domain::Rect::centered(2.0).grid(5, 5).points();
        let rep = verify_kernel_estimates(&m, &field, &grid, &q, 0.5).unwrap();
        let want = PI.sqrt().recip() * 0.5f64.sqrt();
        assert!(rep.norm_ratio.spread() <= 1.0 + 1e-6);
        assert!((rep.norm_ratio.min - want).abs() < 1e-9);
        // |k_z(w)|^2 e^{-2phi(w)} = e^{-|w-z|^2} / pi, times rho^2 = 1/2
        let rho2 = 0.5;
        assert!(rep.local_ratio.max <= rho2 / PI * (1.0 + 1e-8));
        assert!(rep.local_ratio.min >= rho2 / PI * (-(0.5f64 * 0.5 * rho2)).exp() * (1.0 - 1e-8));
        assert!((rep.integral_ratio_p1.min - 2.0).abs() < 1e-6 && (rep.integral_ratio_p1.max - 2.0).abs() < 1e-6);
        assert!((rep.integral_ratio_p2.min - 0.5 / PI).abs() < 1e-9);
        assert!(rep.epsilon > 0.0);
        assert!(verify_kernel_estimates(&m, &field, &[C64::new(30.0, 0.0)], &q, 0.5).is_err());
    }
}
