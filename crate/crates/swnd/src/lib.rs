//! Seiberg-Witten systems in every dimension n >= 3 on flat tori.
//!
//! The crate has three layers:
//!
//! * exact multilinear algebra: Gaussian-rational scalars, Clifford
//!   representations with diagonal chirality, forms acting on spinors
//!   ([`scalar`], [`mat`], [`clifford`], [`spinor`]);
//! * the dimension-dependent operator tables: perturbed Dirac operators,
//!   curvature equations, Weitzenboeck remainders, principal symbols and
//!   indices ([`system`], [`weitz`], [`symbol`], [`example5d`]);
//! * flat-torus spectral calculus and the variational solver for the
//!   eight-dimensional equations ([`torus`], [`energy`]).
//!
//! Everything is deterministic: seeded ChaCha streams, ordered maps, no
//! threads. Exact claims are tested in Gaussian-rational arithmetic; floating
//! point enters only where square roots or SVDs are unavoidable.

pub mod clifford;
pub mod energy;
pub mod example5d;
pub mod mat;
pub mod report;
pub mod scalar;
pub mod spinor;
pub mod state;
pub mod symbol;
pub mod system;
pub mod torus;
pub mod weitz;

pub use clifford::{CliffordRep, FormValue};
pub use mat::CMat;
pub use scalar::{GaussianRational, Scalar};
pub use state::{SwState, SwSystem};
pub use system::{DimCase, Family};


/// Tolerances used across the verification batteries, with the reasoning
/// that fixed them. Exact-arithmetic checks do not consult these.
pub mod tol {
    /// Floating-point Clifford relations: entries are exact in {0, +-1, +-i},
    /// products of <= 9 such matrices stay within a few ulps.
    pub const CLIFFORD: f64 = 1e-12;
    /// Weitzenboeck defect on band-limited fields: all terms are computed on
    /// alias-free grids, so the identity holds to quadrature roundoff.
    pub const WEITZ: f64 = 1e-8;
    /// Closed-form curvature-term expressions versus the assembled operator.
    pub const QBETA: f64 = 1e-11;
    /// Clifford action of d(gamma) and d*(gamma) versus the symmetrized
    /// derivative sums, pointwise on band-limited form fields.
    pub const EXT_DERIV: f64 = 1e-9;
    /// Pointwise unitarity of the perturbed spin connection.
    pub const UNITARITY: f64 = 1e-10;
    /// Smallest admissible singular value of the principal symbol on unit
    /// covectors; the exact lower bound for the first-order blocks is |xi|.
    pub const SYMBOL_MIN: f64 = 1e-6;
    /// Exact symbol identities (form block squares to 4|xi|^2).
    pub const SYMBOL_EXACT: f64 = 1e-9;
    /// Five-dimensional example battery, paths involving sqrt(2).
    pub const EXAMPLE5D: f64 = 1e-14;
    /// Energy identity, relative defect on random band-1 states.
    pub const ENERGY_REL: f64 = 1e-8;
    /// Gauge invariance of energy and residual norms.
    pub const GAUGE: f64 = 1e-10;
    /// Solver acceptance: energy at the returned state.
    pub const SOLVE_ENERGY: f64 = 1e-6;
    /// Solver acceptance: individual equation residual norms.
    pub const SOLVE_RESIDUAL: f64 = 1e-3;
    /// Finite-difference gradient cross-check (central differences).
    pub const GRAD_FD: f64 = 1e-5;
    /// Laplacian identity for the curvature-to-form reconstruction.
    pub const DELTA_BETA: f64 = 1e-9;
}
