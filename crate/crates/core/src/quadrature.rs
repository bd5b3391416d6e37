//! Polar quadrature on discs centred at the origin and on small discs
//! `D(z, s)`.
//!
//! Radial integration uses composite Gauss-Legendre panels; angular
//! integration uses the periodic trapezoidal rule, which is exact for
//! trigonometric polynomials of degree below the number of angles.

use std::f64::consts::TAU;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::{Error, Result, C64};

/// Minimum number of radial nodes placed on a panel between breakpoints.
const MIN_PANEL_NODES: usize = 48;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let mut pairs = GaussLegendre::new(n).into_node_weight_pairs().into_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Tensor polar grid on the disc `|w| <= r_max`.
///
/// Node `(j, l)` sits at `r_j e^{i theta_l}` with weight
/// `w_j r_j (2 pi / n_theta)`, i.e. the Jacobian is folded into the weight.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    r_max: f64,
    n_radial: usize,
    n_angular: usize,
    breakpoints: Vec<f64>,
    radial: Vec<(f64, f64)>,
}

impl QuadratureGrid {
    pub fn new(r_max: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        Self::with_breakpoints(r_max, n_radial, n_angular, &[])
    }

    /// Grid whose radial panels are split at the given radii, so that
    /// integrands jumping across circles `|w| = b` are integrated panelwise.
    pub fn with_breakpoints(r_max: f64, n_radial: usize, n_angular: usize, breakpoints: &[f64]) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::param("r_max", format!("must be positive, got {r_max}")));
        }
        if n_radial < 2 || n_angular < 2 {
            return Err(Error::param(
                "quadrature",
                format!("need at least 2 radial and 2 angular nodes, got {n_radial}x{n_angular}"),
            ));
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|b| b.is_finite() && *b > 1e-12 && *b < r_max * (1.0 - 1e-12))
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(&cuts);
        edges.push(r_max);

        let mut radial = Vec::new();
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let share = ((n_radial as f64) * (b - a) / r_max).round() as usize;
            let count = if edges.len() == 2 {
                n_radial
            } else {
                share.max(MIN_PANEL_NODES)
            };
            radial.extend(gauss_legendre_on(count, a, b));
        }

        Ok(Self {
            r_max,
            n_radial,
            n_angular,
            breakpoints: cuts,
            radial,
        })
    }

    /// Same grid with every node count doubled.
    pub fn refined(&self) -> Result<Self> {
        Self::with_breakpoints(self.r_max, 2 * self.n_radial, 2 * self.n_angular, &self.breakpoints)
    }

    /// Same grid with extra radial breakpoints merged in.
    pub fn split_at(&self, extra: &[f64]) -> Result<Self> {
        if extra.is_empty() {
            return Ok(self.clone());
        }
        let mut all = self.breakpoints.clone();
        all.extend_from_slice(extra);
        Self::with_breakpoints(self.r_max, self.n_radial, self.n_angular, &all)
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Radial nodes and Gauss-Legendre weights (without the Jacobian `r`).
    pub fn radial(&self) -> &[(f64, f64)] {
        &self.radial
    }

    pub fn angle(&self, l: usize) -> f64 {
        TAU * l as f64 / self.n_angular as f64
    }

    pub fn angular_weight(&self) -> f64 {
        TAU / self.n_angular as f64
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.n_angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node `index = j * n_angular + l` and its area weight.
    pub fn node(&self, index: usize) -> (C64, f64) {
        let j = index / self.n_angular;
        let l = index % self.n_angular;
        let (r, w) = self.radial[j];
        (C64::from_polar(r, self.angle(l)), w * r * self.angular_weight())
    }

    pub fn nodes(&self) -> impl Iterator<Item = (C64, f64)> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Integral of a radial profile `f(r)` over the disc, `2 pi int f(r) r dr`.
    pub fn integrate_radial(&self, f: impl Fn(f64) -> f64) -> f64 {
        TAU * self.radial.iter().map(|&(r, w)| w * r * f(r)).sum::<f64>()
    }

    /// Integral over the disc of an arbitrary function.
    pub fn integrate(&self, f: impl Fn(C64) -> f64) -> f64 {
        self.nodes().map(|(z, q)| q * f(z)).sum()
    }
}

/// Product rule for small discs `D(z, s)`: Gauss-Legendre in the radius,
/// trapezoidal in the angle.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskRule {
    radial: Vec<(f64, f64)>,
    n_angular: usize,
}

impl DiskRule {
    pub fn new(n_radial: usize, n_angular: usize) -> Self {
        Self {
            radial: gauss_legendre_on(n_radial.max(1), 0.0, 1.0),
            n_angular: n_angular.max(1),
        }
    }

    pub fn n_radial(&self) -> usize {
        self.radial.len()
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn refined(&self) -> Self {
        Self::new(2 * self.radial.len(), 2 * self.n_angular)
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.n_angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes of `D(center, radius)` with weights summing to `pi radius^2`.
    pub fn nodes(&self, center: C64, radius: f64) -> impl Iterator<Item = (C64, f64)> + '_ {
        let dtheta = TAU / self.n_angular as f64;
        self.radial.iter().flat_map(move |&(t, w)| {
            let s = radius * t;
            let weight = w * t * radius * radius * dtheta;
            (0..self.n_angular).map(move |l| (center + C64::from_polar(s, dtheta * l as f64), weight))
        })
    }

    /// Mean value of `f` over `D(center, radius)`.
    pub fn average(&self, center: C64, radius: f64, f: impl Fn(C64) -> f64) -> f64 {
        let total: f64 = self.nodes(center, radius).map(|(w, q)| q * f(w)).sum();
        total / (std::f64::consts::PI * radius * radius)
    }
}

impl Default for DiskRule {
    fn default() -> Self {
        Self::new(24, 48)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre_on(5, 0.0, 2.0);
        let v: f64 = rule.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_mass_on_polar_grid() {
        let q = QuadratureGrid::new(12.0, 200, 16).unwrap();
        let v = q.integrate(|z| (-z.norm_sqr()).exp());
        assert!((v - PI).abs() < 1e-12 * PI);
    }

    #[test]
    fn breakpoints_resolve_indicator() {
        let q = QuadratureGrid::with_breakpoints(10.0, 200, 8, &[1.0]).unwrap();
        let v = q.integrate_radial(|r| if r < 1.0 { 1.0 } else { 0.0 });
        assert!((v - PI).abs() < 1e-12);
        assert_eq!(q.breakpoints(), &[1.0]);
    }

    #[test]
    fn disk_rule_area_and_quadratic_mean() {
        let d = DiskRule::default();
        let c = C64::new(0.3, -1.2);
        assert!((d.average(c, 0.7, |_| 1.0) - 1.0).abs() < 1e-13);
        // mean of |w - c|^2 over D(c, s) is s^2 / 2
        let m = d.average(c, 0.7, |w| (w - c).norm_sqr());
        assert!((m - 0.245).abs() < 1e-13);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(QuadratureGrid::new(0.0, 10, 10).is_err());
        assert!(QuadratureGrid::new(1.0, 1, 10).is_err());
    }
}
