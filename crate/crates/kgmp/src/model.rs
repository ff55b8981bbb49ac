//! Physical parameters, power-law nonlinearities, and admissibility checks.
//!
//! The matter nonlinearity is a nonnegative combination of subcritical powers
//! `f(s) = Σ c_k |s|^{p_k-2} s` with `p_k ∈ (2,6)`, together with a declared
//! superquadraticity exponent `σ ∈ (2, min p_k]`. The hypothesis battery
//! samples the standing assumptions on `f` over a logarithmic grid (exact for
//! pure powers, a guard for user-supplied sums) and evaluates the frequency
//! admissibility window
//!
//! ```text
//!   m > ω                                   σ ≥ 4
//!   (σ-2) m² - (σ²-4σ+8)/4 · ω² > 0         2 < σ < 4
//! ```
//!
//! which is what makes the Nehari manifold a natural constraint.

use crate::{Error, Result};
use serde::Serialize;

/// Physical constants of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysParams {
    /// Matter mass `m > 0`.
    pub m: f64,
    /// Phase frequency, `0 < ω² < m²`.
    pub omega: f64,
    /// Gauge coupling `q ≥ 0` (`q = 0` decouples the system).
    pub q: f64,
    /// Vortex winding number, nonzero integer.
    pub ell: i32,
    /// Proca mass; `μ = 0` recovers the Maxwell case.
    pub mu: f64,
}

impl PhysParams {
    pub fn new(m: f64, omega: f64, q: f64, ell: i32, mu: f64) -> Result<Self> {
        let p = PhysParams { m, omega, q, ell, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidParams(format!("mass must be positive, got m = {}", self.m)));
        }
        if !(self.omega * self.omega > 0.0) || !(self.omega * self.omega < self.m * self.m) {
            return Err(Error::InvalidParams(format!(
                "standing hypothesis 0 < omega^2 < m^2 violated: omega = {}, m = {}",
                self.omega, self.m
            )));
        }
        if self.ell == 0 {
            return Err(Error::InvalidParams("vortex winding ell must be nonzero".into()));
        }
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(Error::InvalidParams(format!("coupling must be >= 0, got q = {}", self.q)));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParams("mu must be finite".into()));
        }
        Ok(())
    }

    /// `m² - ω²`, the coercivity constant of the matter norm.
    pub fn mass_gap(&self) -> f64 {
        self.m * self.m - self.omega * self.omega
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        PhysParams { mu, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct PowerTerm {
    coeff: f64,
    exponent: f64,
}

/// Nonnegative combination of subcritical powers with declared `σ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nonlinearity {
    terms: Vec<PowerTerm>,
    sigma: f64,
}

impl Nonlinearity {
    /// `f(s) = |s|^{p-2} s`, `σ = p`.
    pub fn pure_power(p: f64) -> Result<Self> {
        Nonlinearity::sum_of_powers(&[(1.0, p)])
    }

    /// `f(s) = Σ c_k |s|^{p_k-2} s` with `σ = min p_k`.
    pub fn sum_of_powers(terms: &[(f64, f64)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParams("nonlinearity needs at least one power term".into()));
        }
        let mut out = Vec::with_capacity(terms.len());
        for &(c, p) in terms {
            if !(p > 2.0) || !(p < 6.0) {
                return Err(Error::InvalidParams(format!("exponents must lie in (2,6), got p = {p}")));
            }
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidParams(format!("coefficients must be >= 0, got c = {c}")));
            }
            out.push(PowerTerm { coeff: c, exponent: p });
        }
        if !out.iter().any(|t| t.coeff > 0.0) {
            return Err(Error::InvalidParams("at least one coefficient must be positive".into()));
        }
        let sigma = out.iter().map(|t| t.exponent).fold(f64::INFINITY, f64::min);
        Ok(Nonlinearity { terms: out, sigma })
    }

    /// Override the declared `σ ∈ (2, min p_k]`.
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        let pmin = self.p_min();
        if !(sigma > 2.0) || sigma > pmin {
            return Err(Error::InvalidParams(format!("sigma must lie in (2, {pmin}], got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn p_min(&self) -> f64 {
        self.terms.iter().map(|t| t.exponent).fold(f64::INFINITY, f64::min)
    }
    pub fn p_max(&self) -> f64 {
        self.terms.iter().map(|t| t.exponent).fold(0.0, f64::max)
    }

    /// Single pure-power exponent, if the family is one term with `c = 1`.
    pub fn as_pure_power(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [t] if t.coeff == 1.0 => Some(t.exponent),
            _ => None,
        }
    }

    #[inline]
    fn pow_abs(s: f64, e: f64) -> f64 {
        // powi fast paths for the common integer exponents.
        if e == 1.0 {
            s.abs()
        } else if e == 2.0 {
            s * s
        } else if e == 3.0 {
            s.abs().powi(3)
        } else {
            s.abs().powf(e)
        }
    }

    /// `f(s) = Σ c_k |s|^{p_k-2} s` (odd in `s`).
    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.coeff * Self::pow_abs(s, t.exponent - 2.0);
        }
        acc * s
    }

    /// `F(s) = ∫₀^s f = Σ c_k |s|^{p_k} / p_k`.
    #[inline]
    pub fn potential(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.coeff * Self::pow_abs(s, t.exponent) / t.exponent;
        }
        acc
    }

    /// `∂_s f(s) = Σ c_k (p_k - 1) |s|^{p_k-2}`.
    #[inline]
    pub fn df(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.coeff * (t.exponent - 1.0) * Self::pow_abs(s, t.exponent - 2.0);
        }
        acc
    }
}

/// Outcome of one sampled hypothesis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    /// Worst (relative) violation magnitude observed over the sample grid.
    pub worst_violation: f64,
}

impl HypothesisCheck {
    fn pass() -> Self {
        HypothesisCheck { holds: true, worst_violation: 0.0 }
    }
}

/// Which existence argument backs the solver for a given model: Nehari
/// minimization on the natural constraint, or the mountain-pass search on
/// the two-variable functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Route {
    NaturalConstraint,
    MountainPass,
}

/// Results of the full hypothesis battery plus frequency admissibility.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub f1: HypothesisCheck,
    pub f2: HypothesisCheck,
    pub f3: HypothesisCheck,
    pub f4: HypothesisCheck,
    pub f5: HypothesisCheck,
    /// Value of the frequency-window certificate (positive = admissible).
    pub admissibility_value: f64,
    pub admissible: bool,
    /// Natural-constraint route admissible: growth/monotonicity hypotheses
    /// plus the frequency window.
    pub natural_constraint: bool,
    /// Mountain-pass route admissible: monotone fiber slope.
    pub mountain_pass: bool,
    pub route: Option<Route>,
}

/// Sample grid: ±61 logarithmic points in `[1e-6, 1e3]`.
fn sample_points() -> Vec<f64> {
    let mut pts = Vec::with_capacity(122);
    for k in 0..61 {
        let s = 1e-6 * 10f64.powf(9.0 * k as f64 / 60.0);
        pts.push(s);
        pts.push(-s);
    }
    pts
}

/// Run the hypothesis battery and select the admissible route.
pub fn check_assumptions(n: &Nonlinearity, p: &PhysParams) -> AssumptionReport {
    let pts = sample_points();
    let pmax = n.p_max();

    // Growth bound |f(s)| ≤ a (1 + |s|^{p-1}) with p the largest declared
    // exponent: for power families the ratio is bounded by construction, so
    // the check reduces to the exponent window (2,6) already enforced at
    // construction plus a sampled sanity bound.
    let mut f1 = HypothesisCheck::pass();
    let a_bound = n.terms.iter().map(|t| t.coeff).sum::<f64>().max(1.0);
    for &s in &pts {
        let ratio = n.f(s).abs() / (1.0 + s.abs().powf(pmax - 1.0));
        if ratio > 10.0 * a_bound {
            f1.holds = false;
            f1.worst_violation = f1.worst_violation.max(ratio / a_bound);
        }
    }

    // f(s)/s → 0 as s → 0.
    let mut f2 = HypothesisCheck::pass();
    let small = n.f(1e-6) / 1e-6;
    if !(small.abs() <= 1e-3) {
        f2.holds = false;
        f2.worst_violation = small.abs();
    }

    // F(s) > 0 off zero.
    let mut f3 = HypothesisCheck::pass();
    for &s in &pts {
        let v = n.potential(s);
        if !(v > 0.0) {
            f3.holds = false;
            f3.worst_violation = f3.worst_violation.max(-v);
        }
    }

    // (σ-1) f(s) s ≤ ∂_s f(s) s².
    let mut f4 = HypothesisCheck::pass();
    for &s in &pts {
        let lhs = (n.sigma - 1.0) * n.f(s) * s;
        let rhs = n.df(s) * s * s;
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        let viol = (lhs - rhs) / scale;
        if viol > 1e-12 {
            f4.holds = false;
            f4.worst_violation = f4.worst_violation.max(viol);
        }
    }

    // f(s)/|s|³ nondecreasing on (0,∞); odd symmetry covers (-∞,0).
    let mut f5 = HypothesisCheck::pass();
    let mut pos: Vec<f64> = pts.iter().copied().filter(|s| *s > 0.0).collect();
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in pos.windows(2) {
        let lo = n.f(w[0]) / w[0].powi(3);
        let hi = n.f(w[1]) / w[1].powi(3);
        let scale = lo.abs().max(hi.abs()).max(1e-300);
        let viol = (lo - hi) / scale;
        if viol > 1e-12 {
            f5.holds = false;
            f5.worst_violation = f5.worst_violation.max(viol);
        }
    }

    let (cert, _) = energy_coefficient_certificates(p, n.sigma);
    let admissible = cert > 0.0;

    let natural_constraint = f1.holds && f2.holds && f3.holds && f4.holds && admissible;
    let mountain_pass = f1.holds && f2.holds && f3.holds && f5.holds;
    let route = if natural_constraint {
        Some(Route::NaturalConstraint)
    } else if mountain_pass {
        Some(Route::MountainPass)
    } else {
        None
    };

    AssumptionReport {
        f1,
        f2,
        f3,
        f4,
        f5,
        admissibility_value: cert,
        admissible,
        natural_constraint,
        mountain_pass,
        route,
    }
}

/// The two lower-bound coefficients of the constrained energy:
/// the natural-constraint certificate and the boundedness-from-below
/// certificate. Both must be positive on the natural-constraint route.
///
/// ```text
///   σ ≥ 4:      both (σ-2)(m²-ω²)
///   2 < σ < 4:  ((σ-2)m² - (σ²-4σ+8)/4·ω²,  (σ-2)m² - σ²/8·ω²)
/// ```
pub fn energy_coefficient_certificates(p: &PhysParams, sigma: f64) -> (f64, f64) {
    let m2 = p.m * p.m;
    let w2 = p.omega * p.omega;
    if sigma >= 4.0 {
        let c = (sigma - 2.0) * (m2 - w2);
        (c, c)
    } else {
        let nc = (sigma - 2.0) * m2 - (sigma * sigma - 4.0 * sigma + 8.0) / 4.0 * w2;
        let below = (sigma - 2.0) * m2 - sigma * sigma / 8.0 * w2;
        (nc, below)
    }
}
