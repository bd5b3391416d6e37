//! Numerical laboratory for vectorial Toeplitz operators on weighted Fock
//! spaces of one complex variable.
//!
//! The crate is organised bottom-up:
//!
//! * [`weights`]: admissible weights, the radius function `rho` and the
//!   associated quasi-metric.
//! * [`lattice`]: `delta`-lattices adapted to `rho`, overlap diagnostics and
//!   separated partitions.
//! * [`kernel`]: a truncated orthonormal basis of the Fock space, the
//!   reproducing kernel and the orthogonal projection.
//! * [`symbols`]: positive matrix-valued symbols.
//! * [`transforms`]: Berezin transforms and averaging functions.
//! * [`toeplitz`]: Galerkin matrices of Toeplitz operators and their spectra.
//! * [`equivalence`]: the harness comparing all characterisations.
//! * [`config`] and [`run`]: the configuration-driven front end used by the
//!   command line tool.

pub mod config;
pub mod domain;
pub mod equivalence;
mod error;
pub mod export;
pub mod expr;
pub mod kernel;
pub mod lattice;
pub mod quadrature;
pub mod run;
pub mod symbols;
pub mod toeplitz;
pub mod transforms;
pub mod weights;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix used for symbols, transforms and Galerkin matrices.
pub type CMatrix = nalgebra::DMatrix<C64>;
