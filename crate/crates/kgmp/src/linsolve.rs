//! Conjugate gradients with Jacobi preconditioning for the SPD systems
//! produced by the grid module.
//!
//! Every inner solve of the pipeline is symmetric positive definite by
//! construction, so PCG is the only iterative method here. Iteration order
//! and reductions are fixed, making solves bit-reproducible.

use crate::grid::SparseOperator;
use crate::kernels;
use crate::{Error, Result};
use serde::Serialize;

/// Default relative residual target. The reduction identities checked by the
/// verifier need linear-solver error far below discretization error.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Anything that can act as an SPD operator for [`spd_solve`].
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_to(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal, used as the Jacobi preconditioner.
    fn diag(&self) -> &[f64];
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn apply_to(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
    fn diag(&self) -> &[f64] {
        self.diagonal()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_rel_residual: f64,
    pub method: &'static str,
}

/// Solve `A x = b` to relative residual `tol`, starting from zero.
pub fn spd_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let x0 = vec![0.0; b.len()];
    spd_solve_from(a, b, x0, tol, max_iter)
}

/// Solve `A x = b` starting from the given guess (warm start).
pub fn spd_solve_from<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParams(format!("solver tolerance must lie in (0,1), got {tol}")));
    }
    let b_norm = kernels::norm_sq(b).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, final_rel_residual: 0.0, method: "pcg" }));
    }

    let mut x = x0;
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }

    let inv_diag: Vec<f64> = a.diag().iter().map(|d| 1.0 / d).collect();

    let mut ax = vec![0.0; n];
    a.apply_to(&x, &mut ax);
    let mut r = vec![0.0; n];
    kernels::fill_indexed(&mut r, |k| b[k] - ax[k]);

    let mut z: Vec<f64> = vec![0.0; n];
    kernels::fill_indexed(&mut z, |k| inv_diag[k] * r[k]);
    let mut p = z.clone();
    let mut rz = kernels::dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut rel = kernels::norm_sq(&r).sqrt() / b_norm;
    let mut iterations = 0;
    while rel > tol && iterations < max_iter {
        a.apply_to(&p, &mut ap);
        let pap = kernels::dot(&p, &ap);
        if !(pap > 0.0) {
            // Not SPD or numerically exhausted.
            return Err(Error::SolveFailure { iterations, residual: rel });
        }
        let alpha = rz / pap;
        kernels::axpy(&mut x, alpha, &p);
        kernels::axpy(&mut r, -alpha, &ap);
        iterations += 1;
        rel = kernels::norm_sq(&r).sqrt() / b_norm;
        if rel <= tol {
            break;
        }
        kernels::fill_indexed(&mut z, |k| inv_diag[k] * r[k]);
        let rz_new = kernels::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        kernels::xpby(&mut p, beta, &z);
    }

    let stats = SolveStats { iterations, final_rel_residual: rel, method: "pcg" };
    if rel > tol {
        return Err(Error::SolveFailure { iterations, residual: rel });
    }
    Ok((x, stats))
}
