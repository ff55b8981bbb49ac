//! Cell-centered cylindrical grid, axisymmetric quadrature, and the sparse
//! elliptic operators of the reduced system.
//!
//! The half-plane `(0,R) × (-L,L)` is covered by `Nr × Nz` cells whose
//! centers are `r_i = (i+1/2)·dr`, `z_j = -L + (j+1/2)·dz`; the axis `r = 0`
//! is never a node, so the `1/r²` vortex weight and the `1/r` gauge measure
//! stay finite everywhere. Two quadratures are used throughout:
//!
//! * `w_cyl = 2π r dr dz` for volume integrals `∫ h dx`,
//! * `w_inv = 2π dr dz / r` for `∫ h/r² dx` (vortex and gauge terms).
//!
//! All operators are assembled in conservative (weak) form from face
//! transmissibilities, so they are exactly symmetric and the discrete energy
//! identities of the reduction hold to solver tolerance. Fields are stored
//! z-major: index `k = j·Nr + i`.

use crate::kernels;
use crate::model::PhysParams;
use crate::{Error, Result};
use std::f64::consts::PI;

/// Cell-centered tensor grid on the `(r, z)` half-plane.
#[derive(Debug, Clone)]
pub struct CylGrid {
    nr: usize,
    nz: usize,
    r_max: f64,
    z_half: f64,
    dr: f64,
    dz: f64,
    r: Vec<f64>,
    z: Vec<f64>,
    w_cyl_r: Vec<f64>,
    w_inv_r: Vec<f64>,
}

impl CylGrid {
    pub fn nr(&self) -> usize {
        self.nr
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    /// Total number of nodes `Nr·Nz`.
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn z_half(&self) -> f64 {
        self.z_half
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dz(&self) -> f64 {
        self.dz
    }
    /// Radial node positions `r_i = (i+1/2)·dr`.
    pub fn r_coords(&self) -> &[f64] {
        &self.r
    }
    /// Axial node positions `z_j = -L + (j+1/2)·dz`.
    pub fn z_coords(&self) -> &[f64] {
        &self.z
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }
    /// Volume quadrature weight `2π r_i dr dz` of node `(i,j)`.
    #[inline]
    pub fn w_cyl(&self, i: usize) -> f64 {
        self.w_cyl_r[i]
    }
    /// Inverse-radius quadrature weight `2π dr dz / r_i` of node `(i,j)`.
    #[inline]
    pub fn w_inv(&self, i: usize) -> f64 {
        self.w_inv_r[i]
    }

    /// Grid halved in both spacings (doubled resolution, same extents).
    pub fn refined(&self) -> CylGrid {
        build_grid(2 * self.nr, 2 * self.nz, self.r_max, self.z_half).expect("valid refinement")
    }

    pub fn same_shape(&self, f: &ScalarField) -> bool {
        f.nr == self.nr && f.nz == self.nz
    }

    fn check_field(&self, f: &ScalarField) -> Result<()> {
        if self.same_shape(f) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.len(), got: f.data.len() })
        }
    }
}

/// Build the cell-centered grid. Deterministic for fixed inputs.
pub fn build_grid(nr: usize, nz: usize, r_max: f64, z_half: f64) -> Result<CylGrid> {
    if nr < 4 || nz < 4 {
        return Err(Error::InvalidParams(format!("grid needs Nr, Nz >= 4, got {nr} x {nz}")));
    }
    if !(r_max > 0.0) || !(z_half > 0.0) || !r_max.is_finite() || !z_half.is_finite() {
        return Err(Error::InvalidParams(format!("grid extents must be positive, got R={r_max}, L={z_half}")));
    }
    let dr = r_max / nr as f64;
    let dz = 2.0 * z_half / nz as f64;
    let r: Vec<f64> = (0..nr).map(|i| (i as f64 + 0.5) * dr).collect();
    let z: Vec<f64> = (0..nz).map(|j| -z_half + (j as f64 + 0.5) * dz).collect();
    let w_cyl_r: Vec<f64> = r.iter().map(|ri| 2.0 * PI * ri * dr * dz).collect();
    let w_inv_r: Vec<f64> = r.iter().map(|ri| 2.0 * PI * dr * dz / ri).collect();
    Ok(CylGrid { nr, nz, r_max, z_half, dr, dz, r, z, w_cyl_r, w_inv_r })
}

/// Grid sample vector for `u`, `φ`, `ψ` and the azimuthal gauge amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nr: usize,
    nz: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(g: &CylGrid) -> Self {
        ScalarField { nr: g.nr, nz: g.nz, data: vec![0.0; g.len()] }
    }

    /// Sample `f(r, z)` at the nodes.
    pub fn from_fn<F: FnMut(f64, f64) -> f64>(g: &CylGrid, mut f: F) -> Self {
        let mut data = vec![0.0; g.len()];
        for j in 0..g.nz {
            for i in 0..g.nr {
                data[g.idx(i, j)] = f(g.r[i], g.z[j]);
            }
        }
        ScalarField { nr: g.nr, nz: g.nz, data }
    }

    pub fn from_vec(g: &CylGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != g.len() {
            return Err(Error::DimensionMismatch { expected: g.len(), got: data.len() });
        }
        Ok(ScalarField { nr: g.nr, nz: g.nz, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nr + i]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nr + i] = v;
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        kernels::scale(&mut out.data, c);
        out
    }

    /// Pointwise map.
    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Self {
        let mut out = self.clone();
        kernels::fill_indexed(&mut out.data, |k| f(self.data[k]));
        out
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        let mut out = self.clone();
        kernels::fill_indexed(&mut out.data, |k| self.data[k] * other.data[k]);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `∫ field dx` over the truncated cylinder (weight `2π r dr dz`).
pub fn integrate_cyl(g: &CylGrid, field: &ScalarField) -> Result<f64> {
    g.check_field(field)?;
    let nr = g.nr;
    let w = &g.w_cyl_r;
    let data = field.as_slice();
    Ok(kernels::sum_indexed(data.len(), |k| data[k] * w[k % nr]))
}

/// `∫ field/r² dx` (weight `2π dr dz / r`).
pub fn integrate_inv_r(g: &CylGrid, field: &ScalarField) -> Result<f64> {
    g.check_field(field)?;
    let nr = g.nr;
    let w = &g.w_inv_r;
    let data = field.as_slice();
    Ok(kernels::sum_indexed(data.len(), |k| data[k] * w[k % nr]))
}

/// Which radial measure weights the Dirichlet form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Measure {
    /// `2π r dr dz` — the matter and electrostatic operators.
    Cyl,
    /// `2π dr dz / r` — the azimuthal gauge operator.
    InvR,
}

/// Face transmissibilities of the conservative 5-point form for one measure.
///
/// The quadratic form they induce is
/// `Q(u) = Σ_faces t·(u_a - u_b)² + Σ_boundary t_b·u²`,
/// which is the discrete `∫ |∇u|² dμ` with homogeneous Dirichlet data on the
/// boundary faces listed below. For `Cyl` the axis face has zero area
/// (`r = 0`), so no axis term appears: a Neumann and a Dirichlet axis are
/// indistinguishable there, which is exactly right for `φ` (even symmetry)
/// and harmless for `u` (pinned by the `1/r²` vortex weight instead). For
/// `InvR` the axis carries an explicit Dirichlet half-face: gauge amplitudes
/// vanish on the axis.
pub(crate) struct FaceWeights {
    /// Interior radial faces: `rad[i]` couples `(i,j)` and `(i+1,j)`, `i < nr-1`.
    pub rad: Vec<f64>,
    /// Outer wall (`r = R`) Dirichlet half-face, applied at `i = nr-1`.
    pub rad_outer: f64,
    /// Axis (`r = 0`) Dirichlet half-face, applied at `i = 0` (zero for `Cyl`).
    pub rad_axis: f64,
    /// Interior axial faces: `axi[i]` couples `(i,j)` and `(i,j+1)`.
    pub axi: Vec<f64>,
    /// Top/bottom (`z = ±L`) Dirichlet half-faces, applied per radial index.
    pub axi_end: Vec<f64>,
}

impl FaceWeights {
    pub fn new(g: &CylGrid, measure: Measure) -> Self {
        let two_pi = 2.0 * PI;
        let radial_coeff = |r_face: f64| match measure {
            Measure::Cyl => r_face,
            Measure::InvR => 1.0 / r_face,
        };
        let nodal_coeff = |i: usize| match measure {
            Measure::Cyl => g.r[i],
            Measure::InvR => 1.0 / g.r[i],
        };
        let rad: Vec<f64> = (0..g.nr - 1)
            .map(|i| two_pi * radial_coeff((i as f64 + 1.0) * g.dr) * g.dz / g.dr)
            .collect();
        let rad_outer = two_pi * radial_coeff(g.r_max) * g.dz * 2.0 / g.dr;
        // Half-cell flux against the axis value 0; the 1/r weight on the half
        // cell is approximated by its value at the first node.
        let rad_axis = match measure {
            Measure::Cyl => 0.0,
            Measure::InvR => two_pi * (1.0 / g.r[0]) * g.dz * 2.0 / g.dr,
        };
        let axi: Vec<f64> = (0..g.nr).map(|i| two_pi * nodal_coeff(i) * g.dr / g.dz).collect();
        let axi_end: Vec<f64> = (0..g.nr).map(|i| two_pi * nodal_coeff(i) * g.dr * 2.0 / g.dz).collect();
        FaceWeights { rad, rad_outer, rad_axis, axi, axi_end }
    }

    /// Discrete Dirichlet energy `Q(u)` of this face set, row-chunked so the
    /// result is deterministic and identical across thread counts.
    pub fn energy(&self, g: &CylGrid, u: &[f64]) -> f64 {
        let nr = g.nr;
        let nz = g.nz;
        kernels::sum_indexed(nz, |j| {
            let row = &u[j * nr..(j + 1) * nr];
            let mut acc = 0.0;
            for i in 0..nr - 1 {
                let d = row[i + 1] - row[i];
                acc += self.rad[i] * d * d;
            }
            acc += self.rad_outer * row[nr - 1] * row[nr - 1];
            acc += self.rad_axis * row[0] * row[0];
            if j + 1 < nz {
                let next = &u[(j + 1) * nr..(j + 2) * nr];
                for i in 0..nr {
                    let d = next[i] - row[i];
                    acc += self.axi[i] * d * d;
                }
            }
            if j == 0 || j == nz - 1 {
                for i in 0..nr {
                    acc += self.axi_end[i] * row[i] * row[i];
                }
            }
            acc
        })
    }
}

/// Row-compressed symmetric sparse operator with 5-point structure.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    symmetric: bool,
    spd: bool,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn is_spd(&self) -> bool {
        self.spd
    }
    /// Mirrored entries are written from the same face weights, so assembly
    /// is symmetric by construction; [`Self::symmetry_defect`] measures it.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    /// `y ← A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        kernels::fill_indexed_compute(y, |row| {
            let lo = self.row_ptr[row];
            let hi = self.row_ptr[row + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            acc
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.apply(x);
        kernels::dot(x, &y)
    }

    /// Largest relative asymmetry `|A_ij - A_ji| / max|A|` (diagnostic).
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let j = *c as usize;
                if j <= i {
                    continue;
                }
                let (jc, jv) = self.row(j);
                let back = jc
                    .iter()
                    .position(|&cc| cc as usize == i)
                    .map(|p| jv[p])
                    .unwrap_or(0.0);
                worst = worst.max((v - back).abs() / scale);
            }
        }
        worst
    }
}

/// Assemble the 5-point operator of the Dirichlet form `faces` plus a
/// pre-weighted diagonal `mass_diag` (absolute additions per node).
pub(crate) fn assemble_from_faces(g: &CylGrid, faces: &FaceWeights, mass_diag: &[f64]) -> SparseOperator {
    let nr = g.nr;
    let nz = g.nz;
    let n = g.len();
    debug_assert_eq!(mass_diag.len(), n);

    // Row lengths: center + up to 4 neighbors.
    let mut row_ptr = vec![0usize; n + 1];
    for j in 0..nz {
        for i in 0..nr {
            let mut len = 1;
            if j > 0 {
                len += 1;
            }
            if i > 0 {
                len += 1;
            }
            if i + 1 < nr {
                len += 1;
            }
            if j + 1 < nz {
                len += 1;
            }
            row_ptr[j * nr + i + 1] = len;
        }
    }
    for k in 0..n {
        row_ptr[k + 1] += row_ptr[k];
    }
    let nnz = row_ptr[n];
    let mut cols = vec![0u32; nnz];
    let mut vals = vec![0.0f64; nnz];
    let mut diag = vec![0.0f64; n];

    // Rows are independent; fill each row's entries in ascending column order.
    let fill_row = |k: usize, cols: &mut [u32], vals: &mut [f64]| -> f64 {
        let i = k % nr;
        let j = k / nr;
        let mut d = mass_diag[k];
        let mut slot = 0;
        if j > 0 {
            let t = faces.axi[i];
            cols[slot] = (k - nr) as u32;
            vals[slot] = -t;
            d += t;
            slot += 1;
        } else {
            d += faces.axi_end[i];
        }
        if i > 0 {
            let t = faces.rad[i - 1];
            cols[slot] = (k - 1) as u32;
            vals[slot] = -t;
            d += t;
            slot += 1;
        } else {
            d += faces.rad_axis;
        }
        let center_slot = slot;
        cols[slot] = k as u32;
        slot += 1;
        if i + 1 < nr {
            let t = faces.rad[i];
            cols[slot] = (k + 1) as u32;
            vals[slot] = -t;
            d += t;
            slot += 1;
        } else {
            d += faces.rad_outer;
        }
        if j + 1 < nz {
            let t = faces.axi[i];
            cols[slot] = (k + nr) as u32;
            vals[slot] = -t;
            d += t;
            slot += 1;
        } else {
            d += faces.axi_end[i];
        }
        debug_assert_eq!(slot, cols.len());
        vals[center_slot] = d;
        d
    };

    let assemble_seq = |cols: &mut Vec<u32>, vals: &mut Vec<f64>, diag: &mut Vec<f64>| {
        for k in 0..n {
            let lo = row_ptr[k];
            let hi = row_ptr[k + 1];
            diag[k] = fill_row(k, &mut cols[lo..hi], &mut vals[lo..hi]);
        }
    };
    #[cfg(feature = "parallel")]
    if n >= 1 << 15 {
        use rayon::prelude::*;
        // Split the CSR storage into per-row slices up front so rows can be
        // assembled in parallel without aliasing.
        let mut row_slices: Vec<(usize, &mut [u32], &mut [f64])> = Vec::with_capacity(n);
        {
            let mut cols_rest: &mut [u32] = &mut cols;
            let mut vals_rest: &mut [f64] = &mut vals;
            for k in 0..n {
                let len = row_ptr[k + 1] - row_ptr[k];
                let (c_head, c_tail) = cols_rest.split_at_mut(len);
                let (v_head, v_tail) = vals_rest.split_at_mut(len);
                cols_rest = c_tail;
                vals_rest = v_tail;
                row_slices.push((k, c_head, v_head));
            }
        }
        let diags: Vec<(usize, f64)> = row_slices
            .into_par_iter()
            .map(|(k, c, v)| (k, fill_row(k, c, v)))
            .collect();
        for (k, d) in diags {
            diag[k] = d;
        }
    } else {
        assemble_seq(&mut cols, &mut vals, &mut diag);
    }
    #[cfg(not(feature = "parallel"))]
    assemble_seq(&mut cols, &mut vals, &mut diag);

    let spd = diag.iter().all(|d| *d > 0.0);
    SparseOperator { n, row_ptr, cols, vals, diag, symmetric: true, spd }
}

/// Riesz map of the discrete `Ĥ¹` inner product
/// `‖u‖² = ‖∇u‖² + (m²-ω²)‖u‖² + l²∫u²/r²` with Dirichlet data on all sides.
pub fn assemble_h1_operator(g: &CylGrid, p: &PhysParams) -> Result<SparseOperator> {
    let gap = p.mass_gap();
    if !(gap > 0.0) {
        return Err(Error::InvalidParams(format!(
            "Ĥ¹ operator needs 0 < ω² < m², got m²-ω² = {gap}"
        )));
    }
    let faces = FaceWeights::new(g, Measure::Cyl);
    let ell2 = (p.ell as f64) * (p.ell as f64);
    let nr = g.nr;
    let mut mass = vec![0.0; g.len()];
    kernels::fill_indexed(&mut mass, |k| {
        let i = k % nr;
        gap * g.w_cyl_r[i] + ell2 * g.w_inv_r[i]
    });
    Ok(assemble_from_faces(g, &faces, &mass))
}

/// Weak form of `(-Δ + μ² + q²u²)` on the cylinder; Dirichlet outer walls,
/// natural (even) axis.
pub fn assemble_phi_operator(g: &CylGrid, p: &PhysParams, u: &ScalarField) -> Result<SparseOperator> {
    g.check_field(u)?;
    let faces = FaceWeights::new(g, Measure::Cyl);
    let q2 = p.q * p.q;
    let mu2 = p.mu * p.mu;
    let nr = g.nr;
    let uu = u.as_slice();
    let mut mass = vec![0.0; g.len()];
    kernels::fill_indexed(&mut mass, |k| (mu2 + q2 * uu[k] * uu[k]) * g.w_cyl_r[k % nr]);
    Ok(assemble_from_faces(g, &faces, &mass))
}

/// Weak form of the azimuthal gauge operator: quadratic form
/// `2π ∫∫ [|∇a|² + (μ² + q²u²) a²] / r dr dz`, Dirichlet on axis and walls.
pub fn assemble_gauge_operator(g: &CylGrid, p: &PhysParams, u: &ScalarField) -> Result<SparseOperator> {
    g.check_field(u)?;
    let faces = FaceWeights::new(g, Measure::InvR);
    let q2 = p.q * p.q;
    let mu2 = p.mu * p.mu;
    let nr = g.nr;
    let uu = u.as_slice();
    let mut mass = vec![0.0; g.len()];
    kernels::fill_indexed(&mut mass, |k| (mu2 + q2 * uu[k] * uu[k]) * g.w_inv_r[k % nr]);
    Ok(assemble_from_faces(g, &faces, &mass))
}

/// Gradient-only operator of the cylindrical measure (no mass terms); used
/// for residual evaluation.
pub(crate) fn assemble_grad_cyl(g: &CylGrid) -> SparseOperator {
    let faces = FaceWeights::new(g, Measure::Cyl);
    assemble_from_faces(g, &faces, &vec![0.0; g.len()])
}

/// Discrete `‖∇u‖²` with the cylindrical measure (matter/electrostatic form).
pub fn grad_energy_cyl(g: &CylGrid, u: &ScalarField) -> Result<f64> {
    g.check_field(u)?;
    Ok(FaceWeights::new(g, Measure::Cyl).energy(g, u.as_slice()))
}

/// Discrete gauge curl energy `‖∇×(a∇θ)‖² = 2π ∫∫ |∇a|²/r dr dz`.
pub fn grad_energy_gauge(g: &CylGrid, a: &ScalarField) -> Result<f64> {
    g.check_field(a)?;
    Ok(FaceWeights::new(g, Measure::InvR).energy(g, a.as_slice()))
}

/// Ĥ¹ norm squared of `u` (the minimization topology).
pub fn h1_norm_sq(g: &CylGrid, p: &PhysParams, u: &ScalarField) -> Result<f64> {
    let grad = grad_energy_cyl(g, u)?;
    let l2 = integrate_cyl(g, &u.mul(u))?;
    let inv = integrate_inv_r(g, &u.mul(u))?;
    let ell2 = (p.ell as f64) * (p.ell as f64);
    Ok(grad + p.mass_gap() * l2 + ell2 * inv)
}
