//! The gauge reduction: for a fixed matter profile `u`, solve the
//! electrostatic and azimuthal gauge equations exactly and cache the energy
//! integrals the reduced functional is built from.
//!
//! Discrete weak systems (all SPD, `W` the quadrature weights):
//!
//! ```text
//!   (G_cyl + (μ² + q²u²) W_cyl) φ  = q ω u² W_cyl
//!   (G_inv + (μ² + q²u²) W_inv) a  = q l u² W_inv
//! ```
//!
//! plus the derivative fields `ψ = Φ'(u)[u]/2` and `Ψ̂ = 𝒜'(u)[u]/2`
//! appearing in the second-derivative diagnostics:
//!
//! ```text
//!   (G_cyl + (μ² + q²u²) W_cyl) ψ  = q (ω - qφ) u² W_cyl
//!   (G_inv + (μ² + q²u²) W_inv) Ψ̂ = q (l - qa) u² W_inv
//! ```
//!
//! Because the forms are exactly symmetric, the energy balances
//! (electrostatic and gauge), the duality identities for `ψ` and `Ψ̂`, and
//! the sign/ordering bounds all hold to linear-solver tolerance; the cheap
//! balance residuals are recomputed on every reduction and kept in the
//! state.

use crate::grid::{
    assemble_gauge_operator, assemble_phi_operator, grad_energy_cyl, grad_energy_gauge,
    integrate_cyl, integrate_inv_r, CylGrid, ScalarField,
};
use crate::kernels;
use crate::linsolve::{spd_solve_from, SolveStats, DEFAULT_TOL};
use crate::model::PhysParams;
use crate::Result;
use serde::Serialize;

/// Relative discrepancy with a symmetric denominator.
pub(crate) fn rel_residual(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Energy integrals of a reduced triple `(u, φ_u, a_u)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReductionEnergies {
    /// `‖∇u‖²`
    pub u_grad: f64,
    /// `‖u‖₂²`
    pub u_l2: f64,
    /// `∫ u²/r²`
    pub u_inv_r2: f64,
    /// `‖∇φ‖²`
    pub phi_grad: f64,
    /// `‖φ‖₂²`
    pub phi_l2: f64,
    /// `‖∇×A‖²` in scalar form
    pub gauge_curl: f64,
    /// `‖A‖₂² = ∫ a²/r²`
    pub gauge_l2: f64,
    /// `∫ φ u²`
    pub int_phi_u2: f64,
    /// `∫ φ² u²`
    pub int_phi2_u2: f64,
    /// `∫ ∇θ·A u² = ∫ a u²/r²`
    pub int_a_u2: f64,
    /// `∫ |A|² u² = ∫ a² u²/r²`
    pub int_a2_u2: f64,
}

/// Residuals of the exact discrete energy identities (zero up to solver
/// tolerance by symmetry of the weak forms; larger values indicate an
/// assembly bug).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BalanceResiduals {
    /// `‖∇φ‖² + μ²‖φ‖² = q∫(ω-qφ)φu²`
    pub electrostatic: f64,
    /// `‖∇×A‖² + μ²‖A‖² = q∫(l∇θ-qA)·A u²`
    pub gauge: f64,
    /// `‖∇×A‖² + μ²‖A‖² + ∫|l∇θ-qA|²u² = l²∫u²/r² - lq∫∇θ·A u²`
    pub gauge_decomposition: f64,
}

/// Reduced triple with cached energies and solver statistics.
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub u: ScalarField,
    pub phi: ScalarField,
    /// Azimuthal amplitude `a` of `A_u = a ∇θ`.
    pub gauge: ScalarField,
    pub energies: ReductionEnergies,
    pub balances: BalanceResiduals,
    pub phi_stats: SolveStats,
    pub gauge_stats: SolveStats,
}

fn weighted_rhs(g: &CylGrid, coeff: impl Fn(usize) -> f64 + Sync, cyl: bool) -> Vec<f64> {
    let nr = g.nr();
    let mut b = vec![0.0; g.len()];
    kernels::fill_indexed(&mut b, |k| {
        let w = if cyl { g.w_cyl(k % nr) } else { g.w_inv(k % nr) };
        coeff(k) * w
    });
    b
}

/// Electrostatic potential `φ_u`: unique solution of the second equation.
pub fn solve_phi(g: &CylGrid, p: &PhysParams, u: &ScalarField) -> Result<ScalarField> {
    Ok(solve_phi_from(g, p, u, None)?.0)
}

/// `φ_u` with an optional warm start.
pub fn solve_phi_from(
    g: &CylGrid,
    p: &PhysParams,
    u: &ScalarField,
    guess: Option<Vec<f64>>,
) -> Result<(ScalarField, SolveStats)> {
    let op = assemble_phi_operator(g, p, u)?;
    let uu = u.as_slice();
    let b = weighted_rhs(g, |k| p.q * p.omega * uu[k] * uu[k], true);
    let x0 = guess.unwrap_or_else(|| vec![0.0; g.len()]);
    let (x, stats) = spd_solve_from(&op, &b, x0, DEFAULT_TOL, 10 * g.len())?;
    Ok((ScalarField::from_vec(g, x)?, stats))
}

/// Azimuthal gauge amplitude `a_u`: unique solution of the reduced third
/// equation.
pub fn solve_gauge(g: &CylGrid, p: &PhysParams, u: &ScalarField) -> Result<ScalarField> {
    Ok(solve_gauge_from(g, p, u, None)?.0)
}

/// `a_u` with an optional warm start.
pub fn solve_gauge_from(
    g: &CylGrid,
    p: &PhysParams,
    u: &ScalarField,
    guess: Option<Vec<f64>>,
) -> Result<(ScalarField, SolveStats)> {
    let op = assemble_gauge_operator(g, p, u)?;
    let uu = u.as_slice();
    let ell = p.ell as f64;
    let b = weighted_rhs(g, |k| p.q * ell * uu[k] * uu[k], false);
    let x0 = guess.unwrap_or_else(|| vec![0.0; g.len()]);
    let (x, stats) = spd_solve_from(&op, &b, x0, DEFAULT_TOL, 10 * g.len())?;
    Ok((ScalarField::from_vec(g, x)?, stats))
}

/// Derivative field `ψ_u = Φ'(u)[u]/2`, solving
/// `(-Δ + μ² + q²u²) ψ = q(ω - qφ) u²`. Requires `phi = φ_u`.
pub fn solve_psi(g: &CylGrid, p: &PhysParams, u: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
    let op = assemble_phi_operator(g, p, u)?;
    let uu = u.as_slice();
    let ph = phi.as_slice();
    let b = weighted_rhs(g, |k| p.q * (p.omega - p.q * ph[k]) * uu[k] * uu[k], true);
    let (x, _) = spd_solve_from(&op, &b, vec![0.0; g.len()], DEFAULT_TOL, 10 * g.len())?;
    ScalarField::from_vec(g, x)
}

/// Derivative amplitude `Ψ̂_u` with `𝒜'(u)[u]/2 = Ψ̂ ∇θ`, solving the gauge
/// system with right-hand side `q(l - qa) u²`. Requires `a = a_u`.
pub fn solve_gauge_prime(
    g: &CylGrid,
    p: &PhysParams,
    u: &ScalarField,
    a: &ScalarField,
) -> Result<ScalarField> {
    let op = assemble_gauge_operator(g, p, u)?;
    let uu = u.as_slice();
    let av = a.as_slice();
    let ell = p.ell as f64;
    let b = weighted_rhs(g, |k| p.q * (ell - p.q * av[k]) * uu[k] * uu[k], false);
    let (x, _) = spd_solve_from(&op, &b, vec![0.0; g.len()], DEFAULT_TOL, 10 * g.len())?;
    ScalarField::from_vec(g, x)
}

fn cache_energies(
    g: &CylGrid,
    u: &ScalarField,
    phi: &ScalarField,
    a: &ScalarField,
) -> Result<ReductionEnergies> {
    let u2 = u.mul(u);
    let e = ReductionEnergies {
        u_grad: grad_energy_cyl(g, u)?,
        u_l2: integrate_cyl(g, &u2)?,
        u_inv_r2: integrate_inv_r(g, &u2)?,
        phi_grad: grad_energy_cyl(g, phi)?,
        phi_l2: integrate_cyl(g, &phi.mul(phi))?,
        gauge_curl: grad_energy_gauge(g, a)?,
        gauge_l2: integrate_inv_r(g, &a.mul(a))?,
        int_phi_u2: integrate_cyl(g, &phi.mul(&u2))?,
        int_phi2_u2: integrate_cyl(g, &phi.mul(phi).mul(&u2))?,
        int_a_u2: integrate_inv_r(g, &a.mul(&u2))?,
        int_a2_u2: integrate_inv_r(g, &a.mul(a).mul(&u2))?,
    };
    Ok(e)
}

fn balance_residuals(p: &PhysParams, e: &ReductionEnergies) -> BalanceResiduals {
    let mu2 = p.mu * p.mu;
    let ell = p.ell as f64;
    let electro_lhs = e.phi_grad + mu2 * e.phi_l2;
    let electro_rhs = p.q * (p.omega * e.int_phi_u2 - p.q * e.int_phi2_u2);
    let gauge_lhs = e.gauge_curl + mu2 * e.gauge_l2;
    let gauge_rhs = p.q * (ell * e.int_a_u2 - p.q * e.int_a2_u2);
    let coupling = ell * ell * e.u_inv_r2 - 2.0 * ell * p.q * e.int_a_u2 + p.q * p.q * e.int_a2_u2;
    let decomp_lhs = gauge_lhs + coupling;
    let decomp_rhs = ell * ell * e.u_inv_r2 - ell * p.q * e.int_a_u2;
    BalanceResiduals {
        electrostatic: rel_residual(electro_lhs, electro_rhs),
        gauge: rel_residual(gauge_lhs, gauge_rhs),
        gauge_decomposition: rel_residual(decomp_lhs, decomp_rhs),
    }
}

/// Solve both reduced fields for `u` and cache all energy integrals.
pub fn reduce(g: &CylGrid, p: &PhysParams, u: &ScalarField) -> Result<ReducedState> {
    reduce_with_guess(g, p, u, None, None)
}

/// [`reduce`] with warm starts for the two inner solves.
pub fn reduce_with_guess(
    g: &CylGrid,
    p: &PhysParams,
    u: &ScalarField,
    phi_guess: Option<Vec<f64>>,
    a_guess: Option<Vec<f64>>,
) -> Result<ReducedState> {
    let (phi, phi_stats) = solve_phi_from(g, p, u, phi_guess)?;
    let (a, gauge_stats) = solve_gauge_from(g, p, u, a_guess)?;
    let energies = cache_energies(g, u, &phi, &a)?;
    let balances = balance_residuals(p, &energies);
    Ok(ReducedState {
        u: u.clone(),
        phi,
        gauge: a,
        energies,
        balances,
        phi_stats,
        gauge_stats,
    })
}

/// Pointwise bound slacks of a reduced state (discrete maximum principle).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundSlacks {
    /// Violation of `0 ≤ φ ≤ ω/q`, relative to `ω/q`.
    pub phi_range: f64,
    /// Violation of `0 ≤ a/l ≤ 1/q` (sign-adjusted for `l < 0`), relative to `|l|/q`.
    pub gauge_range: f64,
    /// Violation of `‖∇φ‖² + μ²‖φ‖² ≤ ω²‖u‖₂²`, relative.
    pub phi_energy_bound: f64,
    /// Worst violation of the ordering `0 ≤ q²∫|A|²u² ≤ lq∫∇θ·Au² ≤ l²∫u²/r²`, relative.
    pub gauge_chain: f64,
}

pub fn bound_slacks(p: &PhysParams, rs: &ReducedState) -> BoundSlacks {
    let e = &rs.energies;
    let ell = p.ell as f64;

    let phi_range = if p.q > 0.0 {
        let cap = p.omega.abs() / p.q;
        let mut v: f64 = 0.0;
        for &x in rs.phi.as_slice() {
            // For ω < 0 the bound flips sign with φ.
            let xn = if p.omega >= 0.0 { x } else { -x };
            v = v.max(-xn).max(xn - cap);
        }
        v / cap
    } else {
        rs.phi.max_abs()
    };

    let gauge_range = if p.q > 0.0 {
        let cap = ell.abs() / p.q;
        let mut v: f64 = 0.0;
        for &x in rs.gauge.as_slice() {
            let xn = if ell >= 0.0 { x } else { -x };
            v = v.max(-xn).max(xn - cap);
        }
        v / cap
    } else {
        rs.gauge.max_abs()
    };

    let lhs = e.phi_grad + p.mu * p.mu * e.phi_l2;
    let rhs = p.omega * p.omega * e.u_l2;
    let phi_energy_bound = if rhs > 0.0 { ((lhs - rhs) / rhs).max(0.0) } else { lhs.max(0.0) };

    let q2a2 = p.q * p.q * e.int_a2_u2;
    let lqa = ell * p.q * e.int_a_u2;
    let cap = ell * ell * e.u_inv_r2;
    let scale = cap.max(1e-300);
    let gauge_chain = [(0.0 - q2a2), (q2a2 - lqa), (lqa - cap)]
        .into_iter()
        .fold(0.0f64, |m, v| m.max(v / scale))
        .max(0.0);

    BoundSlacks { phi_range, gauge_range, phi_energy_bound, gauge_chain }
}

/// Residual of `ω∫ψu² = ∫(ω-qφ)φu²` (duality of the electrostatic pair).
pub fn psi_duality_residual(
    g: &CylGrid,
    p: &PhysParams,
    u: &ScalarField,
    phi: &ScalarField,
    psi: &ScalarField,
) -> Result<f64> {
    let u2 = u.mul(u);
    let lhs = p.omega * integrate_cyl(g, &psi.mul(&u2))?;
    let rhs = integrate_cyl(g, &phi.mul(&u2))? * p.omega
        - p.q * integrate_cyl(g, &phi.mul(phi).mul(&u2))?;
    Ok(rel_residual(lhs, rhs))
}

/// Residual of `l∫∇θ·Ψu² = ∫(l∇θ-qA)·Au²` (duality of the gauge pair).
pub fn gauge_prime_duality_residual(
    g: &CylGrid,
    p: &PhysParams,
    u: &ScalarField,
    a: &ScalarField,
    psi_hat: &ScalarField,
) -> Result<f64> {
    let ell = p.ell as f64;
    let u2 = u.mul(u);
    let lhs = ell * integrate_inv_r(g, &psi_hat.mul(&u2))?;
    let rhs = ell * integrate_inv_r(g, &a.mul(&u2))? - p.q * integrate_inv_r(g, &a.mul(a).mul(&u2))?;
    Ok(rel_residual(lhs, rhs))
}

/// `q∫(l∇θ-qA)·Ψu²`, nonnegative up to solver tolerance.
pub fn gauge_prime_positivity(
    g: &CylGrid,
    p: &PhysParams,
    u: &ScalarField,
    a: &ScalarField,
    psi_hat: &ScalarField,
) -> Result<f64> {
    let ell = p.ell as f64;
    let u2 = u.mul(u);
    let v = ell * integrate_inv_r(g, &psi_hat.mul(&u2))?
        - p.q * integrate_inv_r(g, &a.mul(psi_hat).mul(&u2))?;
    Ok(p.q * v)
}
