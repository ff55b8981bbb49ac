//! Vortex ground states of the Klein-Gordon-Maxwell-Proca system.
//!
//! The library computes cylindrically symmetric vortex solutions
//! `psi(t,x) = e^{i(l*theta - omega*t)} u(r,z)` of the coupled system
//!
//! ```text
//!   -Δu + [m² - (ω - qφ)²] u + |l∇θ - qA|² u = f(u)
//!   -Δφ + μ²φ = q(ω - qφ) u²
//!   ∇×∇×A + μ²A = q(l∇θ - qA) u²
//! ```
//!
//! by solving the φ- and A-equations exactly for each matter profile `u`
//! (gauge reduction), then minimizing the reduced energy on its Nehari
//! manifold or locating the mountain-pass point of the two-variable
//! functional. Under the azimuthal ansatz `A = a(r,z)∇θ` the vector gauge
//! equation collapses to a scalar elliptic problem, so every inner solve is
//! a symmetric positive definite system on the cylindrical half-plane.
//!
//! Modules follow the pipeline:
//!
//! * [`grid`] — cell-centered `(r,z)` grid, axisymmetric quadrature, and the
//!   three sparse elliptic operators,
//! * [`model`] — physical parameters, power-law nonlinearities, and the
//!   admissibility certificates,
//! * [`linsolve`] — preconditioned conjugate gradients,
//! * [`reduction`] — the reduced fields `φ_u`, `a_u` and their derivative
//!   fields, with the exact discrete energy identities,
//! * [`functional`] — reduced energy, gradient, Nehari and constraint
//!   diagnostics, fiber maps,
//! * [`optimizer`] — Nehari projection, ground-state descent, mountain-pass
//!   search, axial recentering,
//! * [`continuation`] — the μ → 0 sweep,
//! * [`oracle`] — brute-force 3D Cartesian cross-checks of the scalar
//!   reduction,
//! * [`verify`] — the invariant suite binding all identity and bound checks.
//!
//! Hot loops (quadrature, matrix-vector products, assembly) run on rayon
//! when the default `parallel` feature is enabled and fall back to
//! sequential loops otherwise; both paths reduce over fixed chunks in a
//! fixed order, so results are bit-identical either way.

pub mod continuation;
pub mod functional;
pub mod grid;
pub mod kernels;
pub mod linsolve;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod reduction;
pub mod verify;

pub use grid::{build_grid, integrate_cyl, integrate_inv_r, CylGrid, ScalarField, SparseOperator};
pub use model::{check_assumptions, energy_coefficient_certificates, Nonlinearity, PhysParams};

/// Errors shared across the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("linear solver stalled after {iterations} iterations (relative residual {residual:.3e})")]
    SolveFailure { iterations: usize, residual: f64 },
    #[error("no Nehari sign change in t ∈ [{lo:.3e}, {hi:.3e}]: {detail}")]
    NehariBracket { lo: f64, hi: f64, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
