//! Positive semidefinite matrix-valued symbols `G: C -> C^{d x d}`.
//!
//! Gallery ids:
//!
//! * `identity`
//! * `scalar:<expr>`, the scalar function times `I_d`
//! * `diag:<expr>,<expr>,...`, one entry per dimension
//! * `rotating-projector:<scale>`, `scale` times the projector onto
//!   `(cos|z|, sin|z|)` (`d = 2`)
//! * `matrix:<a11>,<a12>;<a21>,<a22>`, real symmetric entries
//!
//! Expressions use the grammar of [`crate::expr`].

use std::fmt;
use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::expr::Expr;
use crate::{CMatrix, Error, Result, C64};

/// Tolerance on `|G - G^*|` accepted by [`Symbol::validate_at`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted by [`Symbol::validate_at`].
pub const PSD_TOL: f64 = -1e-10;

/// Asymptotic behaviour of `||G(z)||`, inferred by sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decay {
    /// Grows without bound.
    Unbounded,
    /// Bounded, not vanishing at infinity.
    Bounded,
    /// Tends to zero.
    Vanishing,
    /// Tends to zero faster than `|z|^{-2}`.
    Integrable,
}

impl Decay {
    pub fn is_bounded(self) -> bool {
        self != Decay::Unbounded
    }

    pub fn is_vanishing(self) -> bool {
        matches!(self, Decay::Vanishing | Decay::Integrable)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decay::Unbounded => "unbounded",
            Decay::Bounded => "bounded",
            Decay::Vanishing => "vanishing",
            Decay::Integrable => "integrable",
        }
    }
}

impl fmt::Display for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone)]
enum Kind {
    Identity,
    Scalar(Expr),
    Diag(Vec<Expr>),
    RotatingProjector(f64),
    Matrix(Vec<Expr>),
    Scaled(f64, Arc<Symbol>),
    Sum(Arc<Symbol>, Arc<Symbol>),
    Custom(Arc<dyn Fn(C64, &mut [C64]) + Send + Sync>),
}

/// A matrix-valued symbol with its gallery id and decay tag.
#[derive(Clone)]
pub struct Symbol {
    id: String,
    dimension: usize,
    kind: Kind,
    decay: Decay,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("id", &self.id)
            .field("dimension", &self.dimension)
            .field("decay", &self.decay)
            .finish()
    }
}

fn unknown(name: &str) -> Error {
    Error::Unknown {
        kind: "symbol",
        name: name.to_string(),
    }
}

impl Symbol {
    /// Parses a gallery id. `dimension` applies to `identity` and `scalar:`
    /// and must match the entry count of the other kinds.
    pub fn parse(id: &str, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("d", "must be at least 1"));
        }
        let id = id.trim();
        let (name, args) = id.split_once(':').unwrap_or((id, ""));
        let kind = match name.trim() {
            "identity" if args.is_empty() => Kind::Identity,
            "scalar" => Kind::Scalar(Expr::parse(args)?),
            "diag" => Kind::Diag(args.split(',').map(Expr::parse).collect::<Result<_>>()?),
            "rotating-projector" => {
                let scale: f64 = if args.trim().is_empty() {
                    1.0
                } else {
                    args.trim()
                        .parse()
                        .map_err(|_| Error::param("scale", format!("not a number: {args:?}")))?
                };
                if !(scale >= 0.0) || !scale.is_finite() {
                    return Err(Error::param("scale", "must be finite and nonnegative"));
                }
                Kind::RotatingProjector(scale)
            }
            "matrix" => {
                let rows: Vec<&str> = args.split(';').collect();
                let mut entries = Vec::new();
                for row in &rows {
                    let cols: Vec<&str> = row.split(',').collect();
                    if cols.len() != rows.len() {
                        return Err(Error::param("matrix", "entries must form a square matrix"));
                    }
                    for c in cols {
                        entries.push(Expr::parse(c)?);
                    }
                }
                Kind::Matrix(entries)
            }
            _ => return Err(unknown(id)),
        };
        let natural = match &kind {
            Kind::Diag(v) => Some(v.len()),
            Kind::RotatingProjector(_) => Some(2),
            Kind::Matrix(v) => Some((v.len() as f64).sqrt().round() as usize),
            _ => None,
        };
        if let Some(n) = natural {
            if n != dimension {
                return Err(Error::param(
                    "d",
                    format!("symbol {id:?} has dimension {n}, configured {dimension}"),
                ));
            }
        }
        Ok(Self::finish(id.to_string(), dimension, kind))
    }

    pub fn identity(dimension: usize) -> Self {
        Self::finish("identity".into(), dimension, Kind::Identity)
    }

    /// Symbol given by a closure writing `G(z)[n][m]` to `out[n * d + m]`.
    /// The caller is responsible for positivity.
    pub fn custom(
        id: impl Into<String>,
        dimension: usize,
        fill: impl Fn(C64, &mut [C64]) + Send + Sync + 'static,
    ) -> Self {
        Self::finish(id.into(), dimension, Kind::Custom(Arc::new(fill)))
    }

    /// `c G` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::param("c", "scale must be finite and nonnegative"));
        }
        let id = format!("{c}*({})", self.id);
        Ok(Self::finish(
            id,
            self.dimension,
            Kind::Scaled(c, Arc::new(self.clone())),
        ))
    }

    /// `G_1 + G_2`.
    pub fn sum(&self, other: &Symbol) -> Result<Self> {
        if self.dimension != other.dimension {
            return Err(Error::param("d", "summands differ in dimension"));
        }
        let id = format!("({})+({})", self.id, other.id);
        Ok(Self::finish(
            id,
            self.dimension,
            Kind::Sum(Arc::new(self.clone()), Arc::new(other.clone())),
        ))
    }

    fn finish(id: String, dimension: usize, kind: Kind) -> Self {
        let mut s = Self {
            id,
            dimension,
            kind,
            decay: Decay::Bounded,
        };
        s.decay = s.infer_decay();
        s
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn decay(&self) -> Decay {
        self.decay
    }

    /// Writes `G(z)[n][m]` into `out[n * d + m]`.
    pub fn eval_into(&self, z: C64, out: &mut [C64]) {
        let d = self.dimension;
        let zero = C64::new(0.0, 0.0);
        match &self.kind {
            Kind::Identity => {
                out.iter_mut().for_each(|v| *v = zero);
                for m in 0..d {
                    out[m * d + m] = C64::new(1.0, 0.0);
                }
            }
            Kind::Scalar(e) => {
                out.iter_mut().for_each(|v| *v = zero);
                let g = e.eval(z);
                for m in 0..d {
                    out[m * d + m] = C64::new(g, 0.0);
                }
            }
            Kind::Diag(es) => {
                out.iter_mut().for_each(|v| *v = zero);
                for (m, e) in es.iter().enumerate() {
                    out[m * d + m] = C64::new(e.eval(z), 0.0);
                }
            }
            Kind::RotatingProjector(scale) => {
                let (s, c) = z.norm().sin_cos();
                out[0] = C64::new(scale * c * c, 0.0);
                out[1] = C64::new(scale * c * s, 0.0);
                out[2] = out[1];
                out[3] = C64::new(scale * s * s, 0.0);
            }
            Kind::Matrix(es) => {
                for (v, e) in out.iter_mut().zip(es) {
                    *v = C64::new(e.eval(z), 0.0);
                }
            }
            Kind::Scaled(c, inner) => {
                inner.eval_into(z, out);
                out.iter_mut().for_each(|v| *v *= *c);
            }
            Kind::Sum(a, b) => {
                a.eval_into(z, out);
                let mut tmp = vec![zero; d * d];
                b.eval_into(z, &mut tmp);
                for (v, t) in out.iter_mut().zip(tmp) {
                    *v += t;
                }
            }
            Kind::Custom(f) => f(z, out),
        }
    }

    /// `G(z)` as a matrix with `(row n, column m)` entry `<G e_m, e_n>`.
    pub fn eval(&self, z: C64) -> CMatrix {
        let d = self.dimension;
        let mut buf = vec![C64::new(0.0, 0.0); d * d];
        self.eval_into(z, &mut buf);
        CMatrix::from_fn(d, d, |n, m| buf[n * d + m])
    }

    /// `||G(z)||`, the largest eigenvalue.
    pub fn op_norm(&self, z: C64) -> f64 {
        let d = self.dimension;
        match &self.kind {
            Kind::Identity => 1.0,
            Kind::Scalar(e) => e.eval(z).abs(),
            Kind::Diag(es) => es.iter().map(|e| e.eval(z).abs()).fold(0.0, f64::max),
            Kind::RotatingProjector(s) => *s,
            _ => {
                let mut buf = vec![C64::new(0.0, 0.0); d * d];
                self.eval_into(z, &mut buf);
                hermitian_norm(&buf, d)
            }
        }
    }

    /// Rejects `G(z)` that is not Hermitian or not positive semidefinite.
    pub fn validate_at(&self, z: C64) -> Result<()> {
        let g = self.eval(z);
        let asym = (&g - g.adjoint()).camax();
        if !(asym <= HERMITIAN_TOL * (1.0 + g.camax())) {
            return Err(Error::NotHermitian {
                asymmetry: asym,
                x: z.re,
                y: z.im,
            });
        }
        if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "symbol",
                x: z.re,
                y: z.im,
            });
        }
        let min = SymmetricEigen::new(g).eigenvalues.min();
        if min < PSD_TOL {
            return Err(Error::Check {
                check: "symbol positivity",
                detail: format!("{} has eigenvalue {min:.3e} at {z}", self.id),
            });
        }
        Ok(())
    }

    /// Radii where the symbol jumps, used to split radial quadrature panels.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match &self.kind {
            Kind::Scalar(e) => e.breakpoints(),
            Kind::Diag(es) | Kind::Matrix(es) => es.iter().flat_map(|e| e.breakpoints()).collect(),
            Kind::Scaled(_, s) => s.breakpoints(),
            Kind::Sum(a, b) => {
                let mut v = a.breakpoints();
                v.extend(b.breakpoints());
                v
            }
            _ => Vec::new(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// True when `G(z)` depends on `z` only through `|z|`.
    pub fn is_radial(&self) -> bool {
        match &self.kind {
            Kind::Identity | Kind::RotatingProjector(_) => true,
            Kind::Scalar(e) => e.is_radial(),
            Kind::Diag(es) | Kind::Matrix(es) => es.iter().all(Expr::is_radial),
            Kind::Scaled(_, s) => s.is_radial(),
            Kind::Sum(a, b) => a.is_radial() && b.is_radial(),
            Kind::Custom(_) => false,
        }
    }

    /// True when `G` is a scalar function times the identity.
    pub fn is_scalar(&self) -> bool {
        match &self.kind {
            Kind::Identity | Kind::Scalar(_) => true,
            Kind::Scaled(_, s) => s.is_scalar(),
            Kind::Sum(a, b) => a.is_scalar() && b.is_scalar(),
            _ => self.dimension == 1,
        }
    }

    /// Samples `||G||` near the origin and on rings of radius 30 and 60;
    /// vanishing means a clear decrease between the two rings.
    fn infer_decay(&self) -> Decay {
        let ring_max = |r: f64| {
            (0..16)
                .map(|l| self.op_norm(C64::from_polar(r, std::f64::consts::TAU * l as f64 / 16.0)))
                .fold(0.0, f64::max)
        };
        let near = [0.0, 0.5, 1.0].iter().map(|&r| ring_max(r)).fold(0.0, f64::max);
        let (s30, s60) = (ring_max(30.0), ring_max(60.0));
        let top = near.max(s30).max(s60);
        if !s60.is_finite() || (s60 > 2.0 * s30 && s30 > 2.0 * near) {
            Decay::Unbounded
        } else if top == 0.0 || (s60 <= 0.6 * s30 && s30 <= 0.1 * near) || s60 <= 1e-12 * top {
            if s60 * 3600.0 <= 1e-3 * top {
                Decay::Integrable
            } else {
                Decay::Vanishing
            }
        } else {
            Decay::Bounded
        }
    }
}

/// Largest eigenvalue of a Hermitian matrix stored as `buf[n * d + m]`.
pub(crate) fn hermitian_norm(buf: &[C64], d: usize) -> f64 {
    match d {
        1 => buf[0].re.abs(),
        2 => {
            let (a, c) = (buf[0].re, buf[3].re);
            let b = buf[1].norm();
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            (mean + rad).abs().max((mean - rad).abs())
        }
        _ => {
            let m = CMatrix::from_fn(d, d, |n, k| buf[n * d + k]);
            let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            SymmetricEigen::new(m)
                .eigenvalues
                .iter()
                .fold(0.0, |acc: f64, v| acc.max(v.abs()))
        }
    }
}

/// Pointwise operator norm of a gallery symbol.
pub fn op_norm_pointwise(g: &Symbol, z: C64) -> Result<f64> {
    g.validate_at(z)?;
    Ok(g.op_norm(z))
}

/// Gallery lookup by id.
pub fn gallery(name: &str, d: usize) -> Result<Symbol> {
    Symbol::parse(name, d)
}

/// The default eight-symbol experiment family with its dimensions.
pub const DEFAULT_GALLERY: [(&str, usize); 8] = [
    ("identity", 2),
    ("scalar:5", 1),
    ("scalar:exp(-r^2)", 1),
    ("scalar:chi_disk(1)", 1),
    ("scalar:(1+r^2)^(-3)", 1),
    ("diag:exp(-r^2),chi_disk(1)", 2),
    ("rotating-projector:3", 2),
    ("scalar:r^2", 1),
];

pub fn default_gallery() -> Vec<Symbol> {
    DEFAULT_GALLERY
        .iter()
        .map(|(id, d)| Symbol::parse(id, *d).expect("gallery ids parse"))
        .collect()
}
