//! Fourier-space representation of transverse fields.
//!
//! Fields are stored as samples of the continuous transform
//! `û(k) = (2π)^-2 ∫ u(x) e^{-ik·x} dx` on a uniform, half-cell offset
//! grid. All norms are midpoint quadrature sums over that grid, and the
//! Sobolev norm `H^s` is *defined* as the weighted Fourier norm
//! `‖û‖_{L²_s} = (∫ |û|² (1+|k|²)^s dk)^{1/2}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ParaxialError, Result};

/// Relative tolerance used to decide whether two grids describe the same node set.
const GRID_REL_TOL: f64 = 1e-12;

/// Physical and approximation parameters.
///
/// The longitudinal wavenumber is tied to the frequency (`k_z = ω`), which
/// is what makes the leading-order terms of the multiple-scaling expansion cancel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub omega: f64,
    pub k_z: f64,
    pub epsilon: f64,
    pub z0: f64,
    /// Sobolev index at which the error is measured.
    pub s: u32,
    /// Regularity index of the envelope data.
    pub s_a: u32,
}

impl Params {
    pub fn new(omega: f64, epsilon: f64, z0: f64, s: u32, s_a: u32) -> Result<Self> {
        let params = Self {
            omega,
            k_z: omega,
            epsilon,
            z0,
            s,
            s_a,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(ParaxialError::InvalidParams(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if self.k_z != self.omega {
            return Err(ParaxialError::InvalidParams(format!(
                "k_z must equal omega, got k_z = {} and omega = {}",
                self.k_z, self.omega
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ParaxialError::InvalidParams(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.z0.is_finite() && self.z0 > 0.0) {
            return Err(ParaxialError::InvalidParams(format!(
                "Z0 must be positive, got {}",
                self.z0
            )));
        }
        if self.s_a < self.s.max(4) {
            return Err(ParaxialError::InvalidParams(format!(
                "sA must be ≥ max(4,s), got sA = {} and s = {}",
                self.s_a, self.s
            )));
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let params = Self { epsilon, ..*self };
        params.validate()?;
        Ok(params)
    }

    /// Squared cutoff radius `ω²/2` of the hyperbolic projection.
    pub fn cutoff_sq(&self) -> f64 {
        0.5 * self.omega * self.omega
    }

    /// End of the physical evolution interval, `Z₀/ε²`.
    pub fn z_end(&self) -> f64 {
        self.z0 / (self.epsilon * self.epsilon)
    }
}

/// Resolution policy for [`make_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridPolicy {
    /// Grid cells per unit of the slow wavenumber `K = k/ε`.
    pub cells_per_epsilon: f64,
    /// Half-extent of the physical grid in units of ω.
    pub k_max_factor: f64,
    /// Upper bound on the number of grid nodes.
    pub max_nodes: u64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            cells_per_epsilon: 10.0,
            k_max_factor: 2.0,
            max_nodes: 1 << 24,
        }
    }
}

/// Uniform square grid in wave-vector space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub k_max: f64,
    pub n: usize,
    pub spacing: f64,
    pub offset: bool,
}

impl KGrid {
    /// Half-cell offset grid with `n` nodes per axis covering `[-k_max, k_max]`.
    pub fn new(k_max: f64, n: usize) -> Self {
        Self {
            k_max,
            n,
            spacing: 2.0 * k_max / n as f64,
            offset: true,
        }
    }

    pub fn node(&self, j: usize) -> f64 {
        let shift = if self.offset { 0.5 } else { 0.0 };
        -self.k_max + (j as f64 + shift) * self.spacing
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// The same node indices with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k_max: self.k_max * factor,
            n: self.n,
            spacing: self.spacing * factor,
            offset: self.offset,
        }
    }

    pub fn matches(&self, other: &KGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= GRID_REL_TOL * a.abs().max(b.abs());
        self.n == other.n
            && self.offset == other.offset
            && close(self.k_max, other.k_max)
            && close(self.spacing, other.spacing)
    }

    pub(crate) fn ensure_matches(&self, other: &KGrid) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(ParaxialError::GridMismatch(format!(
                "grid (k_max = {}, n = {}) does not match (k_max = {}, n = {})",
                self.k_max, self.n, other.k_max, other.n
            )))
        }
    }
}

/// Physical-k grid for `params.epsilon` under `policy`.
///
/// The grid is built as `ε ×` a slow grid with spacing `1/cells_per_epsilon`,
/// so [`slow_grid`] recovers the paired slow grid node for node.
pub fn make_grid(params: &Params, policy: &GridPolicy) -> Result<KGrid> {
    let (slow, _) = grid_pair(params, policy)?;
    Ok(slow.scaled(params.epsilon))
}

/// Slow-K grid paired with a physical grid by `K = k/ε`.
pub fn slow_grid(physical: &KGrid, epsilon: f64) -> KGrid {
    physical.scaled(1.0 / epsilon)
}

/// `(slow, physical)` grids for the given parameters.
pub fn grid_pair(params: &Params, policy: &GridPolicy) -> Result<(KGrid, KGrid)> {
    if !(policy.cells_per_epsilon >= 4.0 && policy.cells_per_epsilon.is_finite()) {
        return Err(ParaxialError::InvalidParams(format!(
            "cells_per_epsilon must be ≥ 4, got {}",
            policy.cells_per_epsilon
        )));
    }
    if !(policy.k_max_factor > 0.0 && policy.k_max_factor.is_finite()) {
        return Err(ParaxialError::InvalidParams(format!(
            "k_max_factor must be positive, got {}",
            policy.k_max_factor
        )));
    }
    let slow_spacing = 1.0 / policy.cells_per_epsilon;
    let physical_spacing = params.epsilon * slow_spacing;
    let half_extent = policy.k_max_factor * params.omega;
    let mut n = (2.0 * half_extent / physical_spacing).ceil() as u64;
    n += n % 2;
    let required = n.saturating_mul(n);
    if required > policy.max_nodes {
        return Err(ParaxialError::GridBudget {
            required,
            allowed: policy.max_nodes,
        });
    }
    let n = n as usize;
    let slow = KGrid {
        k_max: 0.5 * n as f64 * slow_spacing,
        n,
        spacing: slow_spacing,
        offset: true,
    };
    let physical = slow.scaled(params.epsilon);
    Ok((slow, physical))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Samples of `û(k)` in physical wave-vector units.
    PhysicalK,
    /// Samples of `ŵ(K)` in slow wave-vector units `K = k/ε`.
    SlowK,
}

/// Complex samples of a continuous Fourier transform, row-major with the
/// first index along `k_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: KGrid,
    pub frame: Frame,
    pub values: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: KGrid, frame: Frame) -> Self {
        Self {
            grid,
            frame,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `f(k_x, k_y)` at every node.
    pub fn from_fn<F>(grid: KGrid, frame: Frame, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let axis = grid.axis();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(axis[idx / grid.n], axis[idx % grid.n]))
            .collect();
        Self { grid, frame, values }
    }

    /// Nodewise map that also sees the node coordinates.
    pub fn map_nodes<F>(&self, f: F) -> Self
    where
        F: Fn(f64, f64, Complex64) -> Complex64 + Sync,
    {
        let axis = self.grid.axis();
        let n = self.grid.n;
        let values = self
            .values
            .par_iter()
            .enumerate()
            .map(|(idx, &v)| f(axis[idx / n], axis[idx % n], v))
            .collect();
        Self {
            grid: self.grid,
            frame: self.frame,
            values,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn ensure_frame(&self, expected: Frame) -> Result<()> {
        if self.frame == expected {
            Ok(())
        } else {
            Err(ParaxialError::FrameMismatch {
                expected,
                found: self.frame,
            })
        }
    }

    /// `self - other` on a shared grid.
    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.ensure_matches(&other.grid)?;
        if self.frame != other.frame {
            return Err(ParaxialError::FrameMismatch {
                expected: self.frame,
                found: other.frame,
            });
        }
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: self.grid,
            frame: self.frame,
            values,
        })
    }

    /// Relabel slow samples `ŵ(K)` as physical samples `ε^-2 ŵ(k/ε)`.
    pub fn to_physical(&self, epsilon: f64) -> Result<SpectralField> {
        self.ensure_frame(Frame::SlowK)?;
        let scale = 1.0 / (epsilon * epsilon);
        Ok(Self {
            grid: self.grid.scaled(epsilon),
            frame: Frame::PhysicalK,
            values: self.values.iter().map(|v| v * scale).collect(),
        })
    }

    /// Inverse of [`SpectralField::to_physical`].
    pub fn to_slow(&self, epsilon: f64) -> Result<SpectralField> {
        self.ensure_frame(Frame::PhysicalK)?;
        let scale = epsilon * epsilon;
        Ok(Self {
            grid: self.grid.scaled(1.0 / epsilon),
            frame: Frame::SlowK,
            values: self.values.iter().map(|v| v * scale).collect(),
        })
    }
}

/// Per-node dispersion data, cutoff, and Sobolev weight.
#[derive(Debug, Clone)]
pub struct ModeData {
    pub grid: KGrid,
    pub omega: f64,
    /// `ω̂² = ω² - |k|²`.
    pub omega_hat_sq: Vec<f64>,
    /// `λ² = |k|² - ω²`; stored as the exact negation of `omega_hat_sq`.
    pub lambda_sq: Vec<f64>,
    /// 1 on `|k|² ≤ ω²/2`, 0 elsewhere.
    pub chi: Vec<f64>,
    /// `(1 + |k|²)^{1/2}`.
    pub rho: Vec<f64>,
}

impl ModeData {
    pub fn k_sq(&self, idx: usize) -> f64 {
        self.lambda_sq[idx] + self.omega * self.omega
    }

    /// Largest value of `ρ^s` on the support of the cutoff.
    pub fn hyperbolic_weight_bound(&self, s: f64) -> f64 {
        (1.0 + 0.5 * self.omega * self.omega).powf(0.5 * s)
    }
}

pub fn mode_data(grid: &KGrid, params: &Params) -> ModeData {
    let omega_sq = params.omega * params.omega;
    let cutoff = params.cutoff_sq();
    let axis = grid.axis();
    let n = grid.n;
    let mut omega_hat_sq = Vec::with_capacity(grid.len());
    let mut lambda_sq = Vec::with_capacity(grid.len());
    let mut chi = Vec::with_capacity(grid.len());
    let mut rho = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let (kx, ky) = (axis[idx / n], axis[idx % n]);
        let k_sq = kx * kx + ky * ky;
        let w2 = omega_sq - k_sq;
        omega_hat_sq.push(w2);
        lambda_sq.push(-w2);
        chi.push(if k_sq <= cutoff { 1.0 } else { 0.0 });
        rho.push((1.0 + k_sq).sqrt());
    }
    ModeData {
        grid: *grid,
        omega: params.omega,
        omega_hat_sq,
        lambda_sq,
        chi,
        rho,
    }
}

fn apply_multiplier(field: &SpectralField, modes: &ModeData, complement: bool) -> Result<SpectralField> {
    field.ensure_frame(Frame::PhysicalK)?;
    field.grid.ensure_matches(&modes.grid)?;
    let values = field
        .values
        .par_iter()
        .zip(modes.chi.par_iter())
        .map(|(v, &chi)| if complement { v * (1.0 - chi) } else { v * chi })
        .collect();
    Ok(SpectralField {
        grid: field.grid,
        frame: field.frame,
        values,
    })
}

/// Hyperbolic projection: multiplies every node by the cutoff `χ`.
pub fn project_hyp(field: &SpectralField, modes: &ModeData) -> Result<SpectralField> {
    apply_multiplier(field, modes, false)
}

/// Elliptic projection `I - P_hyp`.
pub fn project_ell(field: &SpectralField, modes: &ModeData) -> Result<SpectralField> {
    apply_multiplier(field, modes, true)
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Sum of `f(idx)` over all nodes of an `n × n` grid. Rows are reduced in
/// parallel and combined pairwise, so the result does not depend on the
/// thread count.
pub fn grid_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|j| f(i * n + j)).collect();
            pairwise_sum(&row)
        })
        .collect();
    pairwise_sum(&rows)
}

/// Squared `L²_s` norm, `Σ |û|² (1+|k|²)^s Δk²`.
pub fn l2s_norm_sq(field: &SpectralField, s: f64) -> f64 {
    let axis = field.grid.axis();
    let n = field.grid.n;
    let sum = grid_sum(n, |idx| {
        let v = field.values[idx];
        let (kx, ky) = (axis[idx / n], axis[idx % n]);
        v.norm_sqr() * sobolev_weight(kx * kx + ky * ky, s)
    });
    sum * field.grid.cell_area()
}

/// The `H^s` norm of the field, computed on the Fourier side.
///
/// The weight uses the field's own grid coordinates, so the same routine
/// measures physical (`dk`) and slow (`dK`) norms.
pub fn l2s_norm(field: &SpectralField, s: f64) -> f64 {
    l2s_norm_sq(field, s).sqrt()
}

/// `(1 + |k|²)^s`, i.e. `ρ^{2s}`.
pub fn sobolev_weight(k_sq: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        (1.0 + k_sq).powf(s)
    }
}

/// Inverse transform at arbitrary points, `u(x) = Σ û(k) e^{ik·x} Δk²`.
///
/// For slow-frame fields the points are slow coordinates `X`.
pub fn evaluate_physical(field: &SpectralField, points: &[(f64, f64)]) -> Vec<Complex64> {
    let axis = field.grid.axis();
    let n = field.grid.n;
    let area = field.grid.cell_area();
    points
        .par_iter()
        .map(|&(x, y)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, v) in field.values.iter().enumerate() {
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let phase = axis[idx / n] * x + axis[idx % n] * y;
                acc += v * Complex64::from_polar(1.0, phase);
            }
            acc * area
        })
        .collect()
}

/// Inverse transform on the tensor lattice `xs × ys`, returned row-major
/// with the first index along `xs`. Uses the separable factorisation of
/// `e^{ik·x}`; exact zeros are skipped.
pub fn evaluate_lattice(field: &SpectralField, xs: &[f64], ys: &[f64]) -> Vec<Complex64> {
    let axis = field.grid.axis();
    let n = field.grid.n;
    let area = field.grid.cell_area();
    let ey: Vec<Complex64> = axis
        .iter()
        .flat_map(|&k| ys.iter().map(move |&y| Complex64::from_polar(1.0, k * y)))
        .collect();
    let partial: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![Complex64::new(0.0, 0.0); ys.len()];
            for j in 0..n {
                let v = field.values[i * n + j];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let phases = &ey[j * ys.len()..(j + 1) * ys.len()];
                for (acc, e) in row.iter_mut().zip(phases) {
                    *acc += v * e;
                }
            }
            row
        })
        .collect();
    xs.par_iter()
        .flat_map_iter(|&x| {
            let ex: Vec<Complex64> = axis.iter().map(|&k| Complex64::from_polar(1.0, k * x)).collect();
            let partial = &partial;
            (0..ys.len()).map(move |m| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (e, row) in ex.iter().zip(partial.iter()) {
                    acc += e * row[m];
                }
                acc * area
            })
        })
        .collect()
}
