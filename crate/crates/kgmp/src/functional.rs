//! The action `I`, the reduced energies `J` and `𝒥`, the reduced gradient,
//! and the Nehari/constraint diagnostics.
//!
//! With both reduced fields substituted, the energy of a matter profile is
//!
//! ```text
//!   𝒥(u) = ½‖∇u‖² + (m²-ω²)/2 ‖u‖² + l²/2 ∫u²/r²
//!          + qω/2 ∫φ_u u² - lq/2 ∫a_u u²/r² - ∫F(u)
//! ```
//!
//! and because the reduced fields are stationary points of `I` in their own
//! slots, the derivative of `𝒥` needs no differentiation of the reduction
//! maps:
//!
//! ```text
//!   𝒥'(u)[v] = ∫∇u·∇v + [m² - (ω-qφ_u)²] uv + (l-qa_u)² uv/r² - f(u)v .
//! ```
//!
//! The second fiber derivative (used to certify the natural constraint)
//! additionally needs the derivative fields `ψ_u`, `Ψ̂_u`.

use crate::grid::{
    self, assemble_h1_operator, grad_energy_cyl, grad_energy_gauge, integrate_cyl, integrate_inv_r,
    CylGrid, ScalarField, SparseOperator,
};
use crate::kernels;
use crate::linsolve::{spd_solve_from, DEFAULT_TOL};
use crate::model::{Nonlinearity, PhysParams};
use crate::reduction::{self, ReducedState};
use crate::Result;
use serde::Serialize;

/// Term-by-term decomposition of the reduced energy `𝒥`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    /// `½‖∇u‖²`
    pub kinetic: f64,
    /// `(m²-ω²)/2 ‖u‖²`
    pub mass: f64,
    /// `l²/2 ∫u²/r²`
    pub vortex: f64,
    /// `qω/2 ∫φ_u u²`
    pub electrostatic: f64,
    /// `-lq/2 ∫a_u u²/r²`
    pub gauge: f64,
    /// `-∫F(u)`
    pub potential: f64,
    /// Sum of the six terms.
    pub total: f64,
}

/// `∫ F(u) dx`.
pub fn potential_integral(g: &CylGrid, n: &Nonlinearity, u: &ScalarField) -> Result<f64> {
    integrate_cyl(g, &u.map(|s| n.potential(s)))
}

/// `∫ f(u) u dx`.
pub fn nonlinearity_pairing(g: &CylGrid, n: &Nonlinearity, u: &ScalarField) -> Result<f64> {
    integrate_cyl(g, &u.map(|s| n.f(s) * s))
}

/// `∫ ∂_s f(u) u² dx`.
pub fn nonlinearity_curvature(g: &CylGrid, n: &Nonlinearity, u: &ScalarField) -> Result<f64> {
    integrate_cyl(g, &u.map(|s| n.df(s) * s * s))
}

/// Evaluate `𝒥` on a reduced state, term by term.
pub fn eval_reduced(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    rs: &ReducedState,
) -> Result<EnergyBreakdown> {
    let e = &rs.energies;
    let ell = p.ell as f64;
    let kinetic = 0.5 * e.u_grad;
    let mass = 0.5 * p.mass_gap() * e.u_l2;
    let vortex = 0.5 * ell * ell * e.u_inv_r2;
    let electrostatic = 0.5 * p.q * p.omega * e.int_phi_u2;
    let gauge = -0.5 * ell * p.q * e.int_a_u2;
    let potential = -potential_integral(g, n, &rs.u)?;
    let total = kinetic + mass + vortex + electrostatic + gauge + potential;
    Ok(EnergyBreakdown { kinetic, mass, vortex, electrostatic, gauge, potential, total })
}

/// The action `I(u, φ, a∇θ)` at arbitrary (not necessarily reduced) fields.
pub fn eval_action(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    u: &ScalarField,
    phi: &ScalarField,
    a: &ScalarField,
) -> Result<f64> {
    let mu2 = p.mu * p.mu;
    let ell = p.ell as f64;
    let u2 = u.mul(u);

    let matter = 0.5 * grad_energy_cyl(g, u)? + 0.5 * p.m * p.m * integrate_cyl(g, &u2)?;
    let electro = 0.5 * (grad_energy_cyl(g, phi)? + mu2 * integrate_cyl(g, &phi.mul(phi))?);
    let gauge = 0.5 * (grad_energy_gauge(g, a)? + mu2 * integrate_inv_r(g, &a.mul(a))?);

    let av = a.as_slice();
    let coupling_a =
        0.5 * integrate_inv_r(g, &u2.map_indexed(|k, v| (ell - p.q * av[k]).powi(2) * v))?;
    let ph = phi.as_slice();
    let coupling_phi =
        0.5 * integrate_cyl(g, &u2.map_indexed(|k, v| (p.omega - p.q * ph[k]).powi(2) * v))?;

    Ok(matter - electro + gauge + coupling_a - coupling_phi - potential_integral(g, n, u)?)
}

impl ScalarField {
    /// Pointwise map with node index (used for coupled integrands).
    pub fn map_indexed<F: Fn(usize, f64) -> f64 + Sync>(&self, f: F) -> Self {
        let mut out = self.clone();
        let src = self.as_slice().to_vec();
        kernels::fill_indexed(out.as_mut_slice(), |k| f(k, src[k]));
        out
    }
}

/// Residual and Sobolev gradient of `𝒥` at a reduced state.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// Weighted residual `ρ` with `⟨ρ, v⟩ = 𝒥'(u)[v]` for grid fields `v`.
    pub residual: ScalarField,
    /// `Ĥ¹`-preconditioned gradient `A_{Ĥ¹}⁻¹ ρ`.
    pub sobolev: ScalarField,
    /// Dual norm `√(ρᵀ A_{Ĥ¹}⁻¹ ρ)` — the mesh-independent stationarity measure.
    pub dual_norm: f64,
}

/// Weighted residual `ρ` of `𝒥` at the reduced state: no linear solve, pure
/// quadrature. `a` may be overridden to get the frozen-gauge residual
/// `∂_u J(u, a)` used by the mountain-pass loop.
pub fn residual_field(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    grad_op: &SparseOperator,
    u: &ScalarField,
    phi: &ScalarField,
    a: &ScalarField,
) -> ScalarField {
    let nr = g.nr();
    let ell = p.ell as f64;
    let uu = u.as_slice();
    let ph = phi.as_slice();
    let av = a.as_slice();
    let lap = grad_op.apply(uu);
    let m2 = p.m * p.m;
    let mut rho = vec![0.0; g.len()];
    kernels::fill_indexed_compute(&mut rho, |k| {
        let i = k % nr;
        let pot = m2 - (p.omega - p.q * ph[k]).powi(2);
        let vortex = (ell - p.q * av[k]).powi(2);
        lap[k] + pot * uu[k] * g.w_cyl(i) + vortex * uu[k] * g.w_inv(i) - n.f(uu[k]) * g.w_cyl(i)
    });
    ScalarField::from_vec(g, rho).expect("residual matches grid")
}

/// Gradient of `𝒥` with caller-supplied operators (hot path).
pub fn grad_reduced_with(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    rs: &ReducedState,
    grad_op: &SparseOperator,
    h1: &SparseOperator,
    sobolev_guess: Option<Vec<f64>>,
) -> Result<Gradient> {
    let rho = residual_field(g, p, n, grad_op, &rs.u, &rs.phi, &rs.gauge);
    let x0 = sobolev_guess.unwrap_or_else(|| vec![0.0; g.len()]);
    let (sob, _) = spd_solve_from(h1, rho.as_slice(), x0, DEFAULT_TOL, 10 * g.len())?;
    let dual_sq = kernels::dot(rho.as_slice(), &sob);
    Ok(Gradient {
        residual: rho,
        sobolev: ScalarField::from_vec(g, sob)?,
        dual_norm: dual_sq.max(0.0).sqrt(),
    })
}

/// Gradient of `𝒥` at a reduced state (assembles operators internally).
pub fn grad_reduced(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    rs: &ReducedState,
) -> Result<Gradient> {
    let grad_op = grid::assemble_grad_cyl(g);
    let h1 = assemble_h1_operator(g, p)?;
    grad_reduced_with(g, p, n, rs, &grad_op, &h1, None)
}

/// Nehari and two-variable constraint diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NehariDiagnostics {
    /// `N = 𝒥'(u)[u]`.
    pub n_value: f64,
    /// `∂_u(𝒥'(u)[u])[u]` — negative on the natural-constraint route.
    pub n_second: f64,
    /// Dual norm of `𝒥'(u)`.
    pub grad_dual_norm: f64,
    /// `∂_u J(u, a)[u]` at the state's own gauge field.
    pub m_residual_u: f64,
    /// `∂_A J(u, a)[a]`.
    pub m_residual_gauge: f64,
}

/// `𝒥'(u)[u]` from cached integrals plus the nonlinearity pairing.
pub fn nehari_value(g: &CylGrid, p: &PhysParams, n: &Nonlinearity, rs: &ReducedState) -> Result<f64> {
    let e = &rs.energies;
    let ell = p.ell as f64;
    let pot = p.m * p.m * e.u_l2 - p.omega * p.omega * e.u_l2 + 2.0 * p.q * p.omega * e.int_phi_u2
        - p.q * p.q * e.int_phi2_u2;
    let vortex = ell * ell * e.u_inv_r2 - 2.0 * ell * p.q * e.int_a_u2 + p.q * p.q * e.int_a2_u2;
    Ok(e.u_grad + pot + vortex - nonlinearity_pairing(g, n, &rs.u)?)
}

/// `∂_A J(u, a)[a]` for an arbitrary gauge amplitude `a` (zero at `a = a_u`).
pub fn gauge_stationarity(g: &CylGrid, p: &PhysParams, u: &ScalarField, a: &ScalarField) -> Result<f64> {
    let mu2 = p.mu * p.mu;
    let ell = p.ell as f64;
    let u2 = u.mul(u);
    Ok(grad_energy_gauge(g, a)? + mu2 * integrate_inv_r(g, &a.mul(a))?
        + p.q * p.q * integrate_inv_r(g, &a.mul(a).mul(&u2))?
        - p.q * ell * integrate_inv_r(g, &a.mul(&u2))?)
}

/// Full diagnostics; `psi` and `gauge_prime` come from the reduction module.
pub fn nehari_quantities(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    rs: &ReducedState,
    psi: &ScalarField,
    gauge_prime: &ScalarField,
) -> Result<NehariDiagnostics> {
    let e = &rs.energies;
    let ell = p.ell as f64;
    let u2 = rs.u.mul(&rs.u);

    let n_value = nehari_value(g, p, n, rs)?;

    // ∂_u(𝒥'(u)[u])[u] = 2‖∇u‖² + 2∫[m²-(ω-qφ)²]u² + 2∫(l-qa)²u²/r²
    //   - 4q∫(l-qa)Ψ̂u²/r² + 4q∫(ω-qφ)ψu² - ∫f(u)u - ∫∂_sf(u)u².
    let pot = p.m * p.m * e.u_l2 - p.omega * p.omega * e.u_l2 + 2.0 * p.q * p.omega * e.int_phi_u2
        - p.q * p.q * e.int_phi2_u2;
    let vortex = ell * ell * e.u_inv_r2 - 2.0 * ell * p.q * e.int_a_u2 + p.q * p.q * e.int_a2_u2;
    let psih_pair = ell * integrate_inv_r(g, &gauge_prime.mul(&u2))?
        - p.q * integrate_inv_r(g, &rs.gauge.mul(gauge_prime).mul(&u2))?;
    let psi_pair = p.omega * integrate_cyl(g, &psi.mul(&u2))?
        - p.q * integrate_cyl(g, &rs.phi.mul(psi).mul(&u2))?;
    let n_second = 2.0 * (e.u_grad + pot + vortex) - 4.0 * p.q * psih_pair + 4.0 * p.q * psi_pair
        - nonlinearity_pairing(g, n, &rs.u)?
        - nonlinearity_curvature(g, n, &rs.u)?;

    let grad = grad_reduced(g, p, n, rs)?;
    let m_residual_gauge = gauge_stationarity(g, p, &rs.u, &rs.gauge)?;

    Ok(NehariDiagnostics {
        n_value,
        n_second,
        grad_dual_norm: grad.dual_norm,
        m_residual_u: n_value,
        m_residual_gauge,
    })
}

/// `g(t) = 𝒥'(tu)[tu]/t²` with both reduced fields re-solved at `tu` — the
/// sign function whose root is the Nehari projection time.
pub fn nehari_fiber_value(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    u: &ScalarField,
    t: f64,
) -> Result<f64> {
    let rs = reduction::reduce(g, p, &u.scaled(t))?;
    Ok(nehari_value(g, p, n, &rs)? / (t * t))
}

/// One point of the fiber map at frozen gauge field: returns
/// `(j(t), j̄(t)) = (J(tu, a), j'(t)/t³)` with `φ_{tu}` re-solved.
pub fn mountain_pass_fiber(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    u: &ScalarField,
    a_fixed: &ScalarField,
    t: f64,
) -> Result<(f64, f64)> {
    let ut = u.scaled(t);
    let phi_t = reduction::solve_phi(g, p, &ut)?;
    let j = eval_action(g, p, n, &ut, &phi_t, a_fixed)?;
    let jbar = fiber_slope(g, p, n, u, a_fixed, &phi_t, t)?;
    Ok((j, jbar))
}

/// `j̄(t) = j'(t)/t³` given the already-solved `φ_{tu}`.
pub(crate) fn fiber_slope(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    u: &ScalarField,
    a_fixed: &ScalarField,
    phi_t: &ScalarField,
    t: f64,
) -> Result<f64> {
    let ell = p.ell as f64;
    let u2 = u.mul(u);
    let av = a_fixed.as_slice();
    let coupling = integrate_inv_r(g, &u2.map_indexed(|k, v| (ell - p.q * av[k]).powi(2) * v))?;
    let quad = grad_energy_cyl(g, u)? + p.mass_gap() * integrate_cyl(g, &u2)? + coupling;
    let phi_term = 2.0 * p.q * p.omega * integrate_cyl(g, &phi_t.mul(&u2))?
        - p.q * p.q * integrate_cyl(g, &phi_t.mul(phi_t).mul(&u2))?;
    let f_term = integrate_cyl(g, &u.map_indexed(|k, v| n.f(t * v) * u.as_slice()[k]))?;
    let jprime = t * quad + t * phi_term - f_term;
    Ok(jprime / (t * t * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, h1_norm_sq};
    use crate::model::Nonlinearity;
    use crate::reduction::reduce;
    use rand::{Rng, SeedableRng};

    fn setup() -> (CylGrid, PhysParams, Nonlinearity, ScalarField) {
        let g = build_grid(32, 48, 6.0, 6.0).unwrap();
        let p = PhysParams::new(1.0, 0.5, 0.5, 1, 1.0).unwrap();
        let n = Nonlinearity::pure_power(3.0).unwrap();
        let u = ScalarField::from_fn(&g, |r, z| 1.3 * r * (-(r * r) - z * z).exp());
        (g, p, n, u)
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let (g, p, n, _) = setup();
        let rs = reduce(&g, &p, &ScalarField::zeros(&g)).unwrap();
        let e = eval_reduced(&g, &p, &n, &rs).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(
            eval_action(&g, &p, &n, &rs.u, &rs.phi, &rs.gauge).unwrap(),
            0.0
        );
    }

    #[test]
    fn breakdown_sums_to_total() {
        let (g, p, n, u) = setup();
        let rs = reduce(&g, &p, &u).unwrap();
        let e = eval_reduced(&g, &p, &n, &rs).unwrap();
        let sum = e.kinetic + e.mass + e.vortex + e.electrostatic + e.gauge + e.potential;
        assert!((sum - e.total).abs() <= 1e-12 * e.total.abs().max(1.0));
    }

    #[test]
    fn decoupled_energy_is_h1_minus_lp() {
        let (g, mut p, _, u) = setup();
        p.q = 0.0;
        let n = Nonlinearity::pure_power(4.0).unwrap();
        let rs = reduce(&g, &p, &u).unwrap();
        let e = eval_reduced(&g, &p, &n, &rs).unwrap();
        let hn = h1_norm_sq(&g, &p, &u).unwrap();
        let lp = integrate_cyl(&g, &u.map(|s| s.abs().powi(4))).unwrap();
        let expect = 0.5 * hn - lp / 4.0;
        assert!((e.total - expect).abs() <= 1e-10 * expect.abs().max(1.0));
    }

    #[test]
    fn reduced_equals_action_at_reduced_fields() {
        let (g, p, n, u) = setup();
        let rs = reduce(&g, &p, &u).unwrap();
        let e = eval_reduced(&g, &p, &n, &rs).unwrap();
        let i = eval_action(&g, &p, &n, &rs.u, &rs.phi, &rs.gauge).unwrap();
        assert!((e.total - i).abs() <= 1e-10 * e.total.abs().max(1.0), "{} vs {}", e.total, i);
    }

    #[test]
    fn reduced_phi_maximizes_action_in_phi() {
        let (g, p, n, u) = setup();
        let rs = reduce(&g, &p, &u).unwrap();
        let base = eval_action(&g, &p, &n, &rs.u, &rs.phi, &rs.gauge).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let delta = ScalarField::from_fn(&g, |r, z| {
                0.05 * (r - z).sin() * (-(r * r) - z * z).exp() * rng.gen_range(0.5..1.5)
            });
            let mut phi2 = rs.phi.clone();
            kernels::axpy(phi2.as_mut_slice(), 1.0, delta.as_slice());
            let perturbed = eval_action(&g, &p, &n, &rs.u, &phi2, &rs.gauge).unwrap();
            assert!(perturbed <= base + 1e-12 * base.abs().max(1.0), "{perturbed} > {base}");
        }
    }

    #[test]
    fn decoupled_residual_is_h1_apply_minus_forcing() {
        let (g, mut p, n, u) = setup();
        p.q = 0.0;
        let rs = reduce(&g, &p, &u).unwrap();
        let grad_op = grid::assemble_grad_cyl(&g);
        let rho = residual_field(&g, &p, &n, &grad_op, &rs.u, &rs.phi, &rs.gauge);
        let h1 = assemble_h1_operator(&g, &p).unwrap();
        let expect: Vec<f64> = {
            let mut v = h1.apply(u.as_slice());
            for (k, slot) in v.iter_mut().enumerate() {
                *slot -= n.f(u.as_slice()[k]) * g.w_cyl(k % g.nr());
            }
            v
        };
        // Identical up to floating-point association of the diagonal terms.
        let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in rho.as_slice().iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn directional_derivative_matches_finite_differences() {
        let (g, p, n, u) = setup();
        let rs = reduce(&g, &p, &u).unwrap();
        let grad = grad_reduced(&g, &p, &n, &rs).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let h = 1e-4;
        for trial in 0..5 {
            let v = ScalarField::from_fn(&g, |r, z| {
                r * (-(r * r) - z * z).exp() * ((trial as f64 + 1.0) * (r + 0.7 * z)).sin()
                    * rng.gen_range(0.8..1.2)
            });
            let mut up = u.clone();
            kernels::axpy(up.as_mut_slice(), h, v.as_slice());
            let mut um = u.clone();
            kernels::axpy(um.as_mut_slice(), -h, v.as_slice());
            let ep = eval_reduced(&g, &p, &n, &reduce(&g, &p, &up).unwrap()).unwrap().total;
            let em = eval_reduced(&g, &p, &n, &reduce(&g, &p, &um).unwrap()).unwrap().total;
            let fd = (ep - em) / (2.0 * h);
            let pairing = kernels::dot(grad.residual.as_slice(), v.as_slice());
            assert!(
                (fd - pairing).abs() <= 1e-5 * pairing.abs().max(1e-10),
                "fd {fd} vs ⟨ρ,v⟩ {pairing}"
            );
        }
    }

    #[test]
    fn fiber_slope_closed_form_decoupled_quartic() {
        let (g, mut p, _, u) = setup();
        p.q = 0.0;
        let n = Nonlinearity::pure_power(4.0).unwrap();
        let a0 = ScalarField::zeros(&g);
        let q_form = h1_norm_sq(&g, &p, &u).unwrap();
        let l4 = integrate_cyl(&g, &u.map(|s| s.powi(4))).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let (j, jbar) = mountain_pass_fiber(&g, &p, &n, &u, &a0, t).unwrap();
            let j_expect = 0.5 * t * t * q_form - t.powi(4) * l4 / 4.0;
            let jbar_expect = q_form / (t * t) - l4;
            assert!((j - j_expect).abs() <= 1e-10 * j_expect.abs().max(1.0));
            assert!((jbar - jbar_expect).abs() <= 1e-10 * jbar_expect.abs().max(1.0));
        }
    }

    #[test]
    fn fiber_slope_is_nonincreasing_with_quartic_coupling() {
        let (g, p, _, u) = setup();
        let n = Nonlinearity::pure_power(4.0).unwrap();
        let rs = reduce(&g, &p, &u).unwrap();
        let ts = [0.3, 0.6, 1.0, 1.5, 2.2, 3.0];
        let mut prev = f64::INFINITY;
        for &t in &ts {
            let (_, jbar) = mountain_pass_fiber(&g, &p, &n, &u, &rs.gauge, t).unwrap();
            assert!(jbar <= prev + 1e-8, "j̄ increased: {jbar} > {prev}");
            prev = jbar;
        }
    }

    #[test]
    fn nehari_diagnostics_vanish_at_zero() {
        let (g, p, n, _) = setup();
        let u = ScalarField::zeros(&g);
        let rs = reduce(&g, &p, &u).unwrap();
        let psi = ScalarField::zeros(&g);
        let psih = ScalarField::zeros(&g);
        let d = nehari_quantities(&g, &p, &n, &rs, &psi, &psih).unwrap();
        assert_eq!(d.n_value, 0.0);
        assert_eq!(d.n_second, 0.0);
        assert_eq!(d.m_residual_gauge, 0.0);
    }
}
