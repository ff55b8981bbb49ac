//! Brute-force 3D Cartesian cross-check of the scalar gauge reduction.
//!
//! On a small cubic grid the electrostatic equation and the componentwise
//! vector gauge equation `-ΔA_c + (μ² + q²u²)A_c = q l (∇θ)_c u²`
//! (valid on the divergence-free azimuthal class, where the curl-curl
//! operator reduces to `-Δ`) are solved without any symmetry assumption.
//! Every term of the action computed from the cylindrical reduction is then
//! compared against its 3D counterpart. The oracle validates the reduction
//! algebra; it is deliberately capped at 33 nodes per axis.

use crate::grid::{CylGrid, ScalarField};
use crate::kernels;
use crate::linsolve::{spd_solve, LinearOperator, SolveStats};
use crate::model::{Nonlinearity, PhysParams};
use crate::reduction::reduce;
use crate::{Error, Result};
use serde::Serialize;

/// Uniform cubic grid whose nodes sit on half-integer multiples of the
/// spacing, so the symmetry axis `x₁ = x₂ = 0` carries no node.
#[derive(Debug, Clone)]
pub struct CartGrid3D {
    n: usize,
    h: f64,
    coords: Vec<f64>,
}

impl CartGrid3D {
    pub fn new(n: usize, half_extent: f64) -> Result<Self> {
        if !(4..=33).contains(&n) {
            return Err(Error::InvalidParams(format!("oracle grid wants 4 ≤ N ≤ 33 per axis, got {n}")));
        }
        if !(half_extent > 0.0) {
            return Err(Error::InvalidParams("half extent must be positive".into()));
        }
        let h = 2.0 * half_extent / n as f64;
        let coords: Vec<f64> = (0..n).map(|k| (k as f64 - (n / 2) as f64 + 0.5) * h).collect();
        debug_assert!(coords.iter().all(|c| c.abs() > 0.25 * h));
        Ok(CartGrid3D { n, h, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
    #[inline]
    fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n + iy) * self.n + ix
    }
    #[inline]
    fn split(&self, k: usize) -> (usize, usize, usize) {
        let ix = k % self.n;
        let iy = (k / self.n) % self.n;
        let iz = k / (self.n * self.n);
        (ix, iy, iz)
    }

    /// Midpoint quadrature `Σ f h³`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let h3 = self.h * self.h * self.h;
        kernels::sum_indexed(f.len(), |k| f[k]) * h3
    }

    /// Face-form Dirichlet energy `∫ |∇f|²` (interior faces plus boundary
    /// half-faces against zero).
    pub fn grad_energy(&self, f: &[f64]) -> f64 {
        let n = self.n;
        let h = self.h;
        kernels::sum_indexed(n * n, |yz| {
            let iy = yz % n;
            let iz = yz / n;
            let mut acc = 0.0;
            for ix in 0..n {
                let k = self.idx(ix, iy, iz);
                let v = f[k];
                if ix + 1 < n {
                    let d = f[k + 1] - v;
                    acc += h * d * d;
                } else {
                    acc += 2.0 * h * v * v;
                }
                if ix == 0 {
                    acc += 2.0 * h * v * v;
                }
                if iy + 1 < n {
                    let d = f[k + n] - v;
                    acc += h * d * d;
                } else {
                    acc += 2.0 * h * v * v;
                }
                if iy == 0 {
                    acc += 2.0 * h * v * v;
                }
                if iz + 1 < n {
                    let d = f[k + n * n] - v;
                    acc += h * d * d;
                } else {
                    acc += 2.0 * h * v * v;
                }
                if iz == 0 {
                    acc += 2.0 * h * v * v;
                }
            }
            acc
        })
    }

    /// Central-difference partial derivative along `axis`, zero-extended.
    pub fn central_diff(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let n = self.n;
        let stride = match axis {
            0 => 1,
            1 => n,
            _ => n * n,
        };
        let mut out = vec![0.0; f.len()];
        kernels::fill_indexed_compute(&mut out, |k| {
            let (ix, iy, iz) = self.split(k);
            let pos = [ix, iy, iz][axis];
            let up = if pos + 1 < n { f[k + stride] } else { 0.0 };
            let dn = if pos > 0 { f[k - stride] } else { 0.0 };
            (up - dn) / (2.0 * self.h)
        });
        out
    }
}

/// How a cylindrical field continues across the axis when lifted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisBehavior {
    /// Vanishes on the axis (matter and gauge amplitudes).
    Vanishing,
    /// Even reflection (regular potentials like φ).
    Even,
}

/// Bilinear interpolation of a cylindrical field onto the 3D grid.
/// Radii beyond the cylindrical domain extend by zero (Dirichlet truncation).
pub fn lift_to_3d(g3: &CartGrid3D, g: &CylGrid, field: &ScalarField, axis: AxisBehavior) -> Vec<f64> {
    let nr = g.nr();
    let nz = g.nz();
    let sample = |i: i64, j: i64| -> f64 {
        if j < 0 || j >= nz as i64 || i >= nr as i64 {
            return 0.0;
        }
        if i < 0 {
            // Ghost node mirrored across the axis.
            return match axis {
                AxisBehavior::Vanishing => -field.get(0, j as usize),
                AxisBehavior::Even => field.get(0, j as usize),
            };
        }
        field.get(i as usize, j as usize)
    };
    let mut out = vec![0.0; g3.len()];
    kernels::fill_indexed_compute(&mut out, |k| {
        let (ix, iy, iz) = g3.split(k);
        let x = g3.coords[ix];
        let y = g3.coords[iy];
        let z = g3.coords[iz];
        let r = x.hypot(y);
        let fr = r / g.dr() - 0.5;
        let fz = (z + g.z_half()) / g.dz() - 0.5;
        let i0 = fr.floor();
        let j0 = fz.floor();
        let a = fr - i0;
        let b = fz - j0;
        let (i0, j0) = (i0 as i64, j0 as i64);
        (1.0 - a) * (1.0 - b) * sample(i0, j0)
            + a * (1.0 - b) * sample(i0 + 1, j0)
            + (1.0 - a) * b * sample(i0, j0 + 1)
            + a * b * sample(i0 + 1, j0 + 1)
    });
    out
}

/// Matrix-free 7-point operator `face-form(-Δ) + mass·h³` with Dirichlet
/// boundary.
struct CartOp<'a> {
    g3: &'a CartGrid3D,
    diag: Vec<f64>,
}

impl<'a> CartOp<'a> {
    fn new(g3: &'a CartGrid3D, mass: &[f64]) -> Self {
        let n = g3.n;
        let h = g3.h;
        let h3 = h * h * h;
        let mut diag = vec![0.0; g3.len()];
        kernels::fill_indexed(&mut diag, |k| {
            let (ix, iy, iz) = g3.split(k);
            let mut d = mass[k] * h3;
            for pos in [ix, iy, iz] {
                d += if pos + 1 < n { h } else { 2.0 * h };
                d += if pos > 0 { h } else { 2.0 * h };
            }
            d
        });
        CartOp { g3, diag }
    }
}

impl LinearOperator for CartOp<'_> {
    fn dim(&self) -> usize {
        self.g3.len()
    }
    fn apply_to(&self, x: &[f64], y: &mut [f64]) {
        let n = self.g3.n;
        let h = self.g3.h;
        let n2 = n * n;
        kernels::fill_indexed_compute(y, |k| {
            let (ix, iy, iz) = self.g3.split(k);
            let mut acc = self.diag[k] * x[k];
            if ix > 0 {
                acc -= h * x[k - 1];
            }
            if ix + 1 < n {
                acc -= h * x[k + 1];
            }
            if iy > 0 {
                acc -= h * x[k - n];
            }
            if iy + 1 < n {
                acc -= h * x[k + n];
            }
            if iz > 0 {
                acc -= h * x[k - n2];
            }
            if iz + 1 < n {
                acc -= h * x[k + n2];
            }
            acc
        });
    }
    fn diag(&self) -> &[f64] {
        &self.diag
    }
}

fn solve_scalar_3d(g3: &CartGrid3D, mass: &[f64], rhs_coeff: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    let op = CartOp::new(g3, mass);
    let h3 = g3.h * g3.h * g3.h;
    let mut b = vec![0.0; g3.len()];
    kernels::fill_indexed(&mut b, |k| rhs_coeff[k] * h3);
    spd_solve(&op, &b, 1e-10, 10 * g3.len())
}

/// 3D electrostatic solve `(-Δ + μ² + q²u²)φ = qωu²`.
pub fn solve_phi_3d(g3: &CartGrid3D, p: &PhysParams, u3: &[f64]) -> Result<Vec<f64>> {
    let mass: Vec<f64> = u3.iter().map(|u| p.mu * p.mu + p.q * p.q * u * u).collect();
    let rhs: Vec<f64> = u3.iter().map(|u| p.q * p.omega * u * u).collect();
    Ok(solve_scalar_3d(g3, &mass, &rhs)?.0)
}

/// The in-plane gauge components and their discrete divergence diagnostics.
#[derive(Debug, Clone)]
pub struct Gauge3D {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    /// `‖∂₁A₁ + ∂₂A₂‖₂ / ‖∇×A‖₂` (central differences).
    pub div_rel: f64,
    /// `∫|∇×A|²` by central differences.
    pub curl_energy_central: f64,
}

/// 3D vector gauge solve: componentwise `(-Δ + μ² + q²u²)A_c = q l (∇θ)_c u²`
/// with `∇θ = (x₂/r², -x₁/r², 0)`.
pub fn solve_gauge_3d(g3: &CartGrid3D, p: &PhysParams, u3: &[f64]) -> Result<Gauge3D> {
    let mass: Vec<f64> = u3.iter().map(|u| p.mu * p.mu + p.q * p.q * u * u).collect();
    let ell = p.ell as f64;
    let n = g3.n;
    let mut rhs1 = vec![0.0; g3.len()];
    let mut rhs2 = vec![0.0; g3.len()];
    for k in 0..g3.len() {
        let ix = k % n;
        let iy = (k / n) % n;
        let x = g3.coords[ix];
        let y = g3.coords[iy];
        let r2 = x * x + y * y;
        rhs1[k] = p.q * ell * (y / r2) * u3[k] * u3[k];
        rhs2[k] = p.q * ell * (-x / r2) * u3[k] * u3[k];
    }
    let (a1, _) = solve_scalar_3d(g3, &mass, &rhs1)?;
    let (a2, _) = solve_scalar_3d(g3, &mass, &rhs2)?;

    let d1a1 = g3.central_diff(&a1, 0);
    let d2a2 = g3.central_diff(&a2, 1);
    let d1a2 = g3.central_diff(&a2, 0);
    let d2a1 = g3.central_diff(&a1, 1);
    let d3a1 = g3.central_diff(&a1, 2);
    let d3a2 = g3.central_diff(&a2, 2);

    let div_sq = g3.integrate(
        &d1a1.iter().zip(&d2a2).map(|(a, b)| (a + b) * (a + b)).collect::<Vec<_>>(),
    );
    let curl_sq = g3.integrate(
        &(0..g3.len())
            .map(|k| {
                let cz = d1a2[k] - d2a1[k];
                d3a1[k] * d3a1[k] + d3a2[k] * d3a2[k] + cz * cz
            })
            .collect::<Vec<_>>(),
    );
    let div_rel = if curl_sq > 0.0 { (div_sq / curl_sq).sqrt() } else { 0.0 };
    Ok(Gauge3D { a1, a2, div_rel, curl_energy_central: curl_sq })
}

/// One compared action term.
#[derive(Debug, Clone, Serialize)]
pub struct TermPair {
    pub name: &'static str,
    pub cylindrical: f64,
    pub cartesian: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyComparison {
    pub terms: Vec<TermPair>,
    pub div_a_rel: f64,
    pub max_rel_diff: f64,
}

fn pair(name: &'static str, cyl: f64, cart: f64) -> TermPair {
    let scale = cyl.abs().max(cart.abs());
    let rel_diff = if scale == 0.0 { 0.0 } else { (cyl - cart).abs() / scale };
    TermPair { name, cylindrical: cyl, cartesian: cart, rel_diff }
}

/// Compute every term of the action through both pipelines and report the
/// per-term agreement.
pub fn compare_energies(
    g3: &CartGrid3D,
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    u: &ScalarField,
) -> Result<EnergyComparison> {
    let rs = reduce(g, p, u)?;
    let e = &rs.energies;
    let ell = p.ell as f64;

    let u3 = lift_to_3d(g3, g, u, AxisBehavior::Vanishing);
    let u3_sq: Vec<f64> = u3.iter().map(|v| v * v).collect();

    let nn = g3.n;
    let inv_r2: Vec<f64> = (0..g3.len())
        .map(|k| {
            let x = g3.coords[k % nn];
            let y = g3.coords[(k / nn) % nn];
            1.0 / (x * x + y * y)
        })
        .collect();

    let mut terms = Vec::new();
    terms.push(pair("kinetic ‖∇u‖²", e.u_grad, g3.grad_energy(&u3)));
    terms.push(pair("mass ‖u‖₂²", e.u_l2, g3.integrate(&u3_sq)));
    terms.push(pair(
        "vortex ∫u²/r²",
        e.u_inv_r2,
        g3.integrate(&u3_sq.iter().zip(&inv_r2).map(|(a, b)| a * b).collect::<Vec<_>>()),
    ));

    let mut div_a_rel = 0.0;
    if p.q > 0.0 {
        let phi3 = solve_phi_3d(g3, p, &u3)?;
        let electro3 =
            p.q * p.omega * g3.integrate(&phi3.iter().zip(&u3_sq).map(|(a, b)| a * b).collect::<Vec<_>>());
        terms.push(pair("electrostatic qω∫φu²", p.q * p.omega * e.int_phi_u2, electro3));

        let gauge3 = solve_gauge_3d(g3, p, &u3)?;
        div_a_rel = gauge3.div_rel;
        // ∇θ·A u² with ∇θ = (y/r², -x/r², 0).
        let coupling3 = g3.integrate(
            &(0..g3.len())
                .map(|k| {
                    let x = g3.coords[k % nn];
                    let y = g3.coords[(k / nn) % nn];
                    let r2 = x * x + y * y;
                    (y * gauge3.a1[k] - x * gauge3.a2[k]) / r2 * u3_sq[k]
                })
                .collect::<Vec<_>>(),
        );
        terms.push(pair("gauge coupling lq∫∇θ·Au²", ell * p.q * e.int_a_u2, ell * p.q * coupling3));

        let mass3 = g3.integrate(
            &gauge3.a1.iter().zip(&gauge3.a2).map(|(a, b)| a * a + b * b).collect::<Vec<_>>(),
        );
        let energy3 = g3.grad_energy(&gauge3.a1) + g3.grad_energy(&gauge3.a2) + p.mu * p.mu * mass3;
        terms.push(pair(
            "gauge energy ‖∇×A‖²+μ²‖A‖²",
            e.gauge_curl + p.mu * p.mu * e.gauge_l2,
            energy3,
        ));
    }

    let pot_cyl = crate::functional::potential_integral(g, n, u)?;
    let pot3 = g3.integrate(&u3.iter().map(|s| n.potential(*s)).collect::<Vec<_>>());
    terms.push(pair("potential ∫F(u)", pot_cyl, pot3));

    let max_rel_diff = terms.iter().fold(0.0f64, |m, t| m.max(t.rel_diff));
    Ok(EnergyComparison { terms, div_a_rel, max_rel_diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn grid_excludes_axis() {
        for n in [16usize, 17, 32, 33] {
            let g3 = CartGrid3D::new(n, 4.0).unwrap();
            for &c in g3.coords() {
                assert!(c != 0.0, "axis node at n = {n}");
            }
        }
        assert!(CartGrid3D::new(34, 4.0).is_err());
        assert!(CartGrid3D::new(2, 4.0).is_err());
    }

    #[test]
    fn lift_reproduces_constants_and_radii() {
        let g = build_grid(64, 64, 6.0, 6.0).unwrap();
        let g3 = CartGrid3D::new(16, 3.0).unwrap();
        let one = ScalarField::from_fn(&g, |_, _| 1.0);
        let lifted = lift_to_3d(&g3, &g, &one, AxisBehavior::Even);
        for v in &lifted {
            assert!((v - 1.0).abs() <= 1e-12);
        }
        let radial = ScalarField::from_fn(&g, |r, _| r);
        let lifted_r = lift_to_3d(&g3, &g, &radial, AxisBehavior::Vanishing);
        for k in 0..g3.len() {
            let (ix, iy, _) = g3.split(k);
            let r = g3.coords()[ix].hypot(g3.coords()[iy]);
            assert!((lifted_r[k] - r).abs() <= g.dr(), "lift(r) = {} vs {}", lifted_r[k], r);
        }
    }

    #[test]
    fn phi_3d_respects_the_potential_bounds() {
        let g = build_grid(64, 128, 3.5, 3.5).unwrap();
        let g3 = CartGrid3D::new(16, 2.5).unwrap();
        let p = PhysParams::new(1.0, 0.5, 1.0, 1, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |r, z| r * (-(r * r) - z * z).exp());
        let u3 = lift_to_3d(&g3, &g, &u, AxisBehavior::Vanishing);
        let phi3 = solve_phi_3d(&g3, &p, &u3).unwrap();
        let cap = p.omega / p.q;
        let mut slack: f64 = 0.0;
        for v in &phi3 {
            slack = slack.max(-v).max(v - cap);
        }
        assert!(slack / cap <= 1e-8, "3D potential bound slack {slack:.3e}");
    }

    #[test]
    fn cross_quadrature_on_gaussian() {
        let g = build_grid(96, 96, 6.0, 6.0).unwrap();
        let g3 = CartGrid3D::new(32, 5.0).unwrap();
        let u = ScalarField::from_fn(&g, |r, z| r * (-(r * r) - z * z).exp());
        let u3 = lift_to_3d(&g3, &g, &u, AxisBehavior::Vanishing);
        let m_cyl = crate::grid::integrate_cyl(&g, &u.mul(&u)).unwrap();
        let m3 = g3.integrate(&u3.iter().map(|v| v * v).collect::<Vec<_>>());
        assert!((m_cyl - m3).abs() <= 0.03 * m_cyl, "{m_cyl} vs {m3}");
    }

    #[test]
    fn lifted_amplitude_curl_energy_matches_cylindrical() {
        // Lift A = a∇θ for an analytic azimuthal amplitude and compare the 3D
        // Dirichlet energy of its components (equal to the curl energy on the
        // divergence-free class) against the cylindrical gauge form.
        let x = 2.8;
        let w2 = 1.3f64 * 1.3;
        let g = build_grid(192, 384, 1.4 * x, 1.4 * x).unwrap();
        let a = ScalarField::from_fn(&g, |r, z| r * r * (-(r * r + z * z) / w2).exp());
        let cyl = crate::grid::grad_energy_gauge(&g, &a).unwrap();
        for nn in [17usize, 33] {
            let g3 = CartGrid3D::new(nn, x).unwrap();
            let a3 = lift_to_3d(&g3, &g, &a, AxisBehavior::Vanishing);
            let n = g3.n();
            let mut a1 = vec![0.0; g3.len()];
            let mut a2 = vec![0.0; g3.len()];
            for k in 0..g3.len() {
                let xx = g3.coords()[k % n];
                let yy = g3.coords()[(k / n) % n];
                let r2 = xx * xx + yy * yy;
                a1[k] = a3[k] * yy / r2;
                a2[k] = -a3[k] * xx / r2;
            }
            let cart = g3.grad_energy(&a1) + g3.grad_energy(&a2);
            let rel = (cart - cyl).abs() / cyl;
            assert!(rel <= 0.02, "N = {nn}: 3D curl energy {cart} vs cylindrical {cyl} ({rel:.4})");
        }
    }

    #[test]
    fn zero_matter_comparison_is_all_zero() {
        let g = build_grid(32, 32, 4.0, 4.0).unwrap();
        let g3 = CartGrid3D::new(12, 3.0).unwrap();
        let p = PhysParams::new(1.0, 0.5, 0.5, 1, 1.0).unwrap();
        let n = Nonlinearity::pure_power(3.0).unwrap();
        let u = ScalarField::zeros(&g);
        let cmp = compare_energies(&g3, &g, &p, &n, &u).unwrap();
        for t in &cmp.terms {
            assert_eq!(t.cylindrical, 0.0);
            assert_eq!(t.cartesian, 0.0);
        }
    }

    #[test]
    fn decoupled_comparison_has_no_field_terms() {
        // The box must sit well inside the cylindrical domain so the lift
        // never zero-extends through the matter profile.
        let g = build_grid(96, 192, 3.5, 3.5).unwrap();
        let g3 = CartGrid3D::new(24, 2.5).unwrap();
        let p = PhysParams::new(1.0, 0.5, 0.0, 1, 1.0).unwrap();
        let n = Nonlinearity::pure_power(3.0).unwrap();
        let w2 = 1.15f64 * 1.15;
        let u = ScalarField::from_fn(&g, |r, z| r * (-(r * r + z * z) / w2).exp());
        let cmp = compare_energies(&g3, &g, &p, &n, &u).unwrap();
        assert_eq!(cmp.terms.len(), 4); // kinetic, mass, vortex, potential
        for t in &cmp.terms {
            assert!(t.rel_diff <= 0.05, "{}: {:?}", t.name, t);
        }
    }
}
