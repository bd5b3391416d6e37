//! Berezin transforms and averaging functions of a symbol, scalar and
//! operator-valued, and the eigenbasis of the averaged operator.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::kernel::{kernel_from_values, KernelModel};
use crate::quadrature::{DiskRule, QuadratureGrid};
use crate::symbols::{hermitian_norm, Symbol};
use crate::toeplitz::{assemble_toeplitz, carleson_matrix, quadrature_for, ToeplitzMatrix};
use crate::weights::RadiusField;
use crate::{CMatrix, Result, C64};

/// `G~(z) = int |k_z(w)|^2 e^{-2 phi(w)} ||G(w)|| dA(w)` by direct quadrature.
pub fn berezin_scalar(model: &KernelModel, g: &Symbol, z: C64, quad: &QuadratureGrid) -> Result<f64> {
    let q = quadrature_for(g, quad)?;
    let fz = model.basis_at(z);
    let kzz = kernel_from_values(&fz, &fz).re;
    let mut total = 0.0;
    for (w, wq) in q.nodes() {
        let k = kernel_from_values(&model.basis_at(w), &fz).norm_sqr();
        let norm = g.op_norm(w);
        if norm != 0.0 {
            total += wq * k * (-2.0 * model.weight().phi(w)).exp() * norm;
        }
    }
    Ok(total / kzz)
}

/// `G~^op(z) = int |k_z(w)|^2 e^{-2 phi(w)} G(w) dA(w)` by direct quadrature.
pub fn berezin_operator(model: &KernelModel, g: &Symbol, z: C64, quad: &QuadratureGrid) -> Result<CMatrix> {
    let q = quadrature_for(g, quad)?;
    let d = g.dimension();
    let fz = model.basis_at(z);
    let kzz = kernel_from_values(&fz, &fz).re;
    let mut buf = vec![C64::new(0.0, 0.0); d * d];
    let mut acc = vec![C64::new(0.0, 0.0); d * d];
    for (w, wq) in q.nodes() {
        let k = kernel_from_values(&model.basis_at(w), &fz).norm_sqr();
        let mass = wq * k * (-2.0 * model.weight().phi(w)).exp() / kzz;
        if mass == 0.0 {
            continue;
        }
        g.eval_into(w, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b * mass;
        }
    }
    Ok(hermitian_part(CMatrix::from_fn(d, d, |n, m| acc[n * d + m])))
}

/// `G^_r(z)`: mean of `||G||` over `D(z, r rho(z))`.
pub fn averaging_scalar(field: &RadiusField, g: &Symbol, z: C64, delta: f64, disk: &DiskRule) -> Result<f64> {
    check_delta(delta)?;
    let rho = field.rho(z)?;
    Ok(disk.average(z, delta * rho, |w| g.op_norm(w)))
}

/// `G^op_r(z)`: entrywise mean of `G` over `D(z, r rho(z))`.
pub fn averaging_operator(field: &RadiusField, g: &Symbol, z: C64, delta: f64, disk: &DiskRule) -> Result<CMatrix> {
    check_delta(delta)?;
    let rho = field.rho(z)?;
    Ok(average_matrix(g, z, delta * rho, disk))
}

fn average_matrix(g: &Symbol, z: C64, radius: f64, disk: &DiskRule) -> CMatrix {
    let d = g.dimension();
    let mut buf = vec![C64::new(0.0, 0.0); d * d];
    let mut acc = vec![C64::new(0.0, 0.0); d * d];
    for (w, q) in disk.nodes(z, radius) {
        g.eval_into(w, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b * q;
        }
    }
    let area = std::f64::consts::PI * radius * radius;
    hermitian_part(CMatrix::from_fn(d, d, |n, m| acc[n * d + m] / area))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(crate::Error::param("delta", format!("must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

fn hermitian_part(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Both averages at once: `(G^_r(z), G^op_r(z))`.
pub fn averages(field: &RadiusField, g: &Symbol, z: C64, delta: f64, disk: &DiskRule) -> Result<(f64, CMatrix)> {
    check_delta(delta)?;
    let rho = field.rho(z)?;
    let r = delta * rho;
    Ok((disk.average(z, r, |w| g.op_norm(w)), average_matrix(g, z, r, disk)))
}

/// Berezin transforms read off the Galerkin matrices.
///
/// Expanding `|K(w,z)|^2` in the basis turns the transform into the
/// quadratic form `G~^op(z)_{nm} = sum conj(f_k(z)) f_r(z) entry[(k,m),(r,n)] / K(z,z)`,
/// which agrees with [`berezin_operator`] because both use the same
/// truncated kernel and quadrature.
#[derive(Debug, Clone)]
pub struct BerezinMaps {
    model: KernelModel,
    toeplitz: ToeplitzMatrix,
    carleson: CMatrix,
}

impl BerezinMaps {
    pub fn new(model: &KernelModel, g: &Symbol, quad: &QuadratureGrid) -> Result<Self> {
        Ok(Self {
            model: model.clone(),
            toeplitz: assemble_toeplitz(model, g, quad)?,
            carleson: carleson_matrix(model, g, quad)?,
        })
    }

    /// Reuses an already assembled Toeplitz matrix.
    pub fn with_toeplitz(model: &KernelModel, g: &Symbol, quad: &QuadratureGrid, t: ToeplitzMatrix) -> Result<Self> {
        Ok(Self {
            model: model.clone(),
            carleson: carleson_matrix(model, g, quad)?,
            toeplitz: t,
        })
    }

    pub fn toeplitz(&self) -> &ToeplitzMatrix {
        &self.toeplitz
    }

    pub fn carleson(&self) -> &CMatrix {
        &self.carleson
    }

    pub fn scalar(&self, z: C64) -> f64 {
        let f = self.model.basis_at(z);
        let kzz = kernel_from_values(&f, &f).re;
        let kb = f.len();
        let mut total = C64::new(0.0, 0.0);
        for k in 0..kb {
            let mut row = C64::new(0.0, 0.0);
            for r in 0..kb {
                row += self.carleson[(k, r)] * f[r];
            }
            total += f[k].conj() * row;
        }
        total.re / kzz
    }

    pub fn operator(&self, z: C64) -> CMatrix {
        let f = self.model.basis_at(z);
        let kzz = kernel_from_values(&f, &f).re;
        let d = self.toeplitz.dimension;
        let kb = f.len();
        let t = &self.toeplitz.matrix;
        let mut out = CMatrix::zeros(d, d);
        for n in 0..d {
            for m in 0..d {
                let mut total = C64::new(0.0, 0.0);
                for k in 0..kb {
                    let mut row = C64::new(0.0, 0.0);
                    for r in 0..kb {
                        row += t[(k * d + m, r * d + n)] * f[r];
                    }
                    total += f[k].conj() * row;
                }
                out[(n, m)] = total / kzz;
            }
        }
        hermitian_part(out)
    }
}

/// Operator norm of a small Hermitian matrix.
pub fn matrix_norm(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let buf: Vec<C64> = (0..d * d).map(|i| m[(i / d, i % d)]).collect();
    hermitian_norm(&buf, d)
}

/// Eigen-decomposition with eigenvalues descending and each eigenvector's
/// first non-negligible component made real and positive.
pub fn sorted_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let d = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let lead = v
            .iter()
            .find(|c| c.norm() > 1e-12)
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = lead.conj() / lead.norm();
        for r in 0..d {
            vectors[(r, col)] = v[r] * phase;
        }
    }
    (values, vectors)
}

/// Eigen-decompositions of `G^op_delta(z_j)` over a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenbasisField {
    pub points: Vec<C64>,
    pub averages: Vec<CMatrix>,
    pub eigenvalues: Vec<Vec<f64>>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: Vec<CMatrix>,
}

impl EigenbasisField {
    /// `<A e_m, e_m>` for the eigenbasis at point `j`.
    pub fn diagonal_in_basis(&self, j: usize, a: &CMatrix) -> Vec<f64> {
        let e = &self.eigenvectors[j];
        (0..e.ncols())
            .map(|m| {
                let v = e.column(m);
                (v.adjoint() * a * v)[(0, 0)].re
            })
            .collect()
    }
}

pub fn eigenbasis_at(
    field: &RadiusField,
    g: &Symbol,
    points: &[C64],
    delta: f64,
    disk: &DiskRule,
) -> Result<EigenbasisField> {
    let averages: Vec<CMatrix> = points
        .par_iter()
        .map(|&z| averaging_operator(field, g, z, delta, disk))
        .collect::<Result<_>>()?;
    let (eigenvalues, eigenvectors) = averages.iter().map(sorted_eigen).unzip();
    Ok(EigenbasisField {
        points: points.to_vec(),
        averages,
        eigenvalues,
        eigenvectors,
    })
}

/// Transform values on a set of points: the columns of the surface export.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSurface {
    pub points: Vec<C64>,
    pub berezin: Vec<f64>,
    pub averaging: Vec<f64>,
    pub berezin_op_norm: Vec<f64>,
    pub averaging_trace: Vec<f64>,
}

impl TransformSurface {
    pub fn sup_berezin(&self) -> f64 {
        self.berezin.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_averaging(&self) -> f64 {
        self.averaging.iter().copied().fold(0.0, f64::max)
    }
}

/// Evaluates all four surface columns, in parallel but in point order.
pub fn transform_surface(
    maps: &BerezinMaps,
    field: &RadiusField,
    g: &Symbol,
    points: &[C64],
    delta: f64,
    disk: &DiskRule,
) -> Result<TransformSurface> {
    let rows: Vec<(f64, f64, f64, f64)> = points
        .par_iter()
        .map(|&z| {
            let (avg, avg_op) = averages(field, g, z, delta, disk)?;
            let op = maps.operator(z);
            Ok((maps.scalar(z), avg, matrix_norm(&op), avg_op.trace().re))
        })
        .collect::<Result<_>>()?;
    let mut s = TransformSurface {
        points: points.to_vec(),
        berezin: Vec::with_capacity(rows.len()),
        averaging: Vec::with_capacity(rows.len()),
        berezin_op_norm: Vec::with_capacity(rows.len()),
        averaging_trace: Vec::with_capacity(rows.len()),
    };
    for (a, b, c, d) in rows {
        s.berezin.push(a);
        s.averaging.push(b);
        s.berezin_op_norm.push(c);
        s.averaging_trace.push(d);
    }
    Ok(s)
}

/// Sup over points of `G^_delta(z) / G~(z)`, skipping points where both vanish.
pub fn comparison_constant(surface: &TransformSurface) -> f64 {
    surface
        .averaging
        .iter()
        .zip(&surface.berezin)
        .filter(|(a, _)| **a > 1e-300)
        .map(|(a, b)| a / b)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::default_quadrature;
    use crate::weights::Weight;
    use std::f64::consts::FRAC_PI_3;

    fn setup() -> (KernelModel, QuadratureGrid, RadiusField) {
        let w = Weight::gaussian(1.0).unwrap();
        let q = default_quadrature(&w, 64).unwrap();
        (KernelModel::build(&w, 64, &q).unwrap(), q, RadiusField::new(w))
    }

    #[test]
    fn berezin_examples() {
        let (m, q, _) = setup();
        let id = Symbol::identity(2);
        for z in [C64::new(0.0, 0.0), C64::new(1.5, -2.0)] {
            assert!((berezin_scalar(&m, &id, z, &q).unwrap() - 1.0).abs() < 1e-6);
            assert!((berezin_operator(&m, &id, z, &q).unwrap() - CMatrix::identity(2, 2)).camax() < 1e-6);
        }
        let g = Symbol::parse("scalar:exp(-r^2)", 1).unwrap();
        assert!((berezin_scalar(&m, &g, C64::new(0.0, 0.0), &q).unwrap() - 0.5).abs() < 1e-10);
        let v = berezin_scalar(&m, &g, C64::new(1.0, 0.0), &q).unwrap();
        assert!((v - 0.5 * (-0.5f64).exp()).abs() < 1e-10);
        let g2 = Symbol::parse("scalar:exp(-r^2)", 2).unwrap();
        let op = berezin_operator(&m, &g2, C64::new(0.0, 0.0), &q).unwrap();
        assert!((op - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).camax() < 1e-10);
    }

    #[test]
    fn averaging_examples() {
        let (_, _, field) = setup();
        let disk = DiskRule::default();
        let id = Symbol::identity(1);
        assert!((averaging_scalar(&field, &id, C64::new(2.0, 1.0), 0.45, &disk).unwrap() - 1.0).abs() < 1e-12);
        let g = Symbol::parse("scalar:exp(-r^2)", 1).unwrap();
        let a: f64 = 0.5 / 2f64.sqrt();
        let want = (1.0 - (-a * a).exp()) / (a * a);
        let got = averaging_scalar(&field, &g, C64::new(0.0, 0.0), 0.5, &disk).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} {want}");
        assert!((want - 0.94003).abs() < 1e-5);
        let chi = Symbol::parse("scalar:chi_disk(3)", 1).unwrap();
        assert!((averaging_scalar(&field, &chi, C64::new(1.0, 0.0), 0.5, &disk).unwrap() - 1.0).abs() < 1e-12);
        assert!(averaging_scalar(&field, &chi, C64::new(1.0, 0.0), 0.0, &disk).is_err());
        assert!(averaging_scalar(&field, &chi, C64::new(1.0, 0.0), 1.5, &disk).is_err());
    }

    #[test]
    fn diagonal_symbols_give_diagonal_transforms() {
        let (m, q, field) = setup();
        let disk = DiskRule::default();
        let g = Symbol::parse("diag:exp(-r^2),chi_disk(1)", 2).unwrap();
        let g1 = Symbol::parse("scalar:exp(-r^2)", 1).unwrap();
        let g2 = Symbol::parse("scalar:chi_disk(1)", 1).unwrap();
        let z = C64::new(0.6, 0.2);
        let op = berezin_operator(&m, &g, z, &q).unwrap();
        assert!((op[(0, 0)].re - berezin_scalar(&m, &g1, z, &q).unwrap()).abs() < 1e-12);
        assert!((op[(1, 1)].re - berezin_scalar(&m, &g2, z, &q).unwrap()).abs() < 1e-12);
        assert!(op[(0, 1)].norm() < 1e-15);
        let avg = averaging_operator(&field, &g, z, 0.45, &disk).unwrap();
        assert!((avg[(0, 0)].re - averaging_scalar(&field, &g1, z, 0.45, &disk).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn matrix_route_matches_direct_quadrature() {
        let (m, q, _) = setup();
        let g = Symbol::parse("rotating-projector:3", 2).unwrap();
        let maps = BerezinMaps::new(&m, &g, &q).unwrap();
        for z in [C64::new(0.0, 0.0), C64::new(1.2, -0.7), C64::new(-2.5, 1.0)] {
            let a = maps.operator(z);
            let b = berezin_operator(&m, &g, z, &q).unwrap();
            assert!((&a - &b).camax() < 1e-10, "{}", (&a - &b).camax());
            assert!((maps.scalar(z) - berezin_scalar(&m, &g, z, &q).unwrap()).abs() < 1e-10);
        }
        let chi = Symbol::parse("scalar:chi_disk(1)", 1).unwrap();
        let maps = BerezinMaps::new(&m, &chi, &q).unwrap();
        let z = C64::new(0.8, 0.1);
        assert!((maps.scalar(z) - berezin_scalar(&m, &chi, z, &q).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn eigenbasis_examples() {
        let (_, _, field) = setup();
        let disk = DiskRule::default();
        let g = Symbol::parse("diag:2*exp(-r^2),exp(-r^2)", 2).unwrap();
        let pts = [C64::new(0.0, 0.0), C64::new(1.0, 1.0), C64::new(-2.0, 0.5)];
        let eb = eigenbasis_at(&field, &g, &pts, 0.45, &disk).unwrap();
        for e in &eb.eigenvectors {
            assert!((e - CMatrix::identity(2, 2)).camax() < 1e-12);
        }
        let p = Symbol::parse("rotating-projector:3", 2).unwrap();
        let z = C64::from_polar(FRAC_PI_3, 0.4);
        let eb = eigenbasis_at(&field, &p, &[z], 0.45, &disk).unwrap();
        let top = eb.eigenvectors[0].column(0);
        // independent dense solve of the same average
        let avg = averaging_operator(&field, &p, z, 0.45, &disk).unwrap();
        let dense = SymmetricEigen::new(avg.clone());
        let imax = if dense.eigenvalues[0] > dense.eigenvalues[1] {
            0
        } else {
            1
        };
        let dv = dense.eigenvectors.column(imax);
        assert!(((top.adjoint() * dv)[(0, 0)].norm() - 1.0).abs() < 1e-10);
        let (s, c) = FRAC_PI_3.sin_cos();
        let align = (top[0] * c + top[1] * s).norm();
        assert!((align - 1.0).abs() < 1e-3, "{align}");
        for (j, vals) in eb.eigenvalues.iter().enumerate() {
            let e = &eb.eigenvectors[j];
            for (mm, lam) in vals.iter().enumerate() {
                let v = e.column(mm).into_owned();
                assert!((&eb.averages[j] * &v - &v * C64::new(*lam, 0.0)).camax() < 1e-8);
            }
            assert!((e.adjoint() * e - CMatrix::identity(2, 2)).camax() < 1e-10);
        }
    }
}
