//! The multiple-scaling ansatz `ψ_app(x, z) = e^{ik_z z} w(εx, ε²z)` in Fourier space.
//!
//! With the grid pairing `k = εK`, the transform of the ansatz is the exact
//! relabeling `ψ̂_app(k, z) = ε^-2 ŵ(k/ε, ε²z) e^{ik_z z}`; no interpolation is involved.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ParaxialError, Result};
use crate::propagators::schrodinger_generator;
use crate::spectral::{Frame, KGrid, Params, SpectralField};

/// Parametric envelope data `w|_{Z=0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude · exp(-|X|²/(2σ²))`.
    Gaussian {
        sigma: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// Spectrum `amplitude · (1+|K|²)^{-p/2}`.
    Algebraic {
        p: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl InitialData {
    pub fn gaussian(sigma: f64) -> Self {
        Self::Gaussian { sigma, amplitude: 1.0 }
    }

    pub fn algebraic(p: f64) -> Self {
        Self::Algebraic { p, amplitude: 1.0 }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Self::Gaussian { amplitude, .. } | Self::Algebraic { amplitude, .. } => amplitude,
        }
    }

    /// Checks the family invariants; `s_a` is the regularity the data must have.
    pub fn validate(&self, s_a: u32) -> Result<()> {
        if !self.amplitude().is_finite() {
            return Err(ParaxialError::InvalidData("amplitude must be finite".into()));
        }
        match *self {
            Self::Gaussian { sigma, .. } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(ParaxialError::InvalidData(format!(
                        "sigma must be positive, got {sigma}"
                    )));
                }
            }
            Self::Algebraic { p, .. } => {
                if !(p > s_a as f64 + 1.0) || !p.is_finite() {
                    return Err(ParaxialError::InvalidData(format!(
                        "p must exceed sA+1 = {}, got {p}",
                        s_a + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Closed-form `ŵ₀` at `|K|²`.
    pub fn spectrum(&self, k_sq: f64) -> f64 {
        match *self {
            Self::Gaussian { sigma, amplitude } => {
                let s2 = sigma * sigma;
                amplitude * s2 / (2.0 * PI) * (-0.5 * s2 * k_sq).exp()
            }
            Self::Algebraic { p, amplitude } => amplitude * (1.0 + k_sq).powf(-0.5 * p),
        }
    }

    /// Largest slow-grid spacing that resolves the spectrum, if the family needs one.
    pub fn max_spacing(&self) -> Option<f64> {
        match *self {
            Self::Gaussian { sigma, .. } => Some(1.0 / (8.0 * sigma)),
            Self::Algebraic { .. } => None,
        }
    }
}

/// Samples `ŵ₀` on a slow grid.
pub fn initial_spectrum(data: &InitialData, grid: &KGrid) -> Result<SpectralField> {
    if let Some(limit) = data.max_spacing() {
        if grid.spacing > limit {
            return Err(ParaxialError::UnderResolved {
                spacing: grid.spacing,
                suggested: limit,
            });
        }
    }
    Ok(SpectralField::from_fn(*grid, Frame::SlowK, |kx, ky| {
        Complex64::new(data.spectrum(kx * kx + ky * ky), 0.0)
    }))
}

fn check_pairing(w_hat: &SpectralField, params: &Params, physical: &KGrid) -> Result<()> {
    w_hat.ensure_frame(Frame::SlowK)?;
    let expected = w_hat.grid.scaled(params.epsilon);
    if !expected.matches(physical) {
        return Err(ParaxialError::GridMismatch(format!(
            "physical grid (k_max = {}) is not ε = {} times the slow grid (K_max = {})",
            physical.k_max, params.epsilon, w_hat.grid.k_max
        )));
    }
    Ok(())
}

/// Builds `ε^-2 e^{ik_z z} · g(K)` on the physical grid, where `g` is computed
/// per node from `(|K|², ŵ(K))`.
fn lift<F>(w_hat: &SpectralField, params: &Params, z: f64, physical: &KGrid, g: F) -> Result<SpectralField>
where
    F: Fn(f64, Complex64) -> Complex64 + Sync,
{
    check_pairing(w_hat, params, physical)?;
    let carrier = Complex64::from_polar(1.0 / (params.epsilon * params.epsilon), params.k_z * z);
    let axis = w_hat.grid.axis();
    let n = w_hat.grid.n;
    let values = w_hat
        .values
        .par_iter()
        .enumerate()
        .map(|(idx, &w)| {
            let (kx, ky) = (axis[idx / n], axis[idx % n]);
            carrier * g(kx * kx + ky * ky, w)
        })
        .collect();
    Ok(SpectralField {
        grid: *physical,
        frame: Frame::PhysicalK,
        values,
    })
}

/// `ψ̂_app(k, z)` from `ŵ` already propagated to `Z = ε²z`.
pub fn ansatz_spectrum(w_hat: &SpectralField, params: &Params, z: f64, physical: &KGrid) -> Result<SpectralField> {
    lift(w_hat, params, z, physical, |_, w| w)
}

/// `∂_z ψ̂_app = ε^-2 e^{ik_z z} (ik_z ŵ + ε² ∂_Z ŵ)` with `∂_Z ŵ` from the paraxial equation.
pub fn ansatz_z_derivative(w_hat: &SpectralField, params: &Params, z: f64, physical: &KGrid) -> Result<SpectralField> {
    let (k_z, eps_sq) = (params.k_z, params.epsilon * params.epsilon);
    lift(w_hat, params, z, physical, |k_sq, w| {
        w * Complex64::new(0.0, k_z) + schrodinger_generator(k_sq, k_z) * w * eps_sq
    })
}

/// The chain rule applied twice, grouped by powers of ε:
/// `∂²_z ψ̂_app = ε^-2 e^{ik_z z} (-k_z² ŵ + 2ik_z ε² ∂_Z ŵ + ε⁴ ∂²_Z ŵ)`.
///
/// Returns the three bracketed terms separately as `[order 0, order ε², order ε⁴]`.
fn z_second_derivative_terms(k_sq: f64, k_z: f64, eps_sq: f64, w: Complex64) -> [Complex64; 3] {
    let gen = schrodinger_generator(k_sq, k_z);
    let dz_w = gen * w;
    let dzz_w = gen * dz_w;
    [
        w * -(k_z * k_z),
        dz_w * Complex64::new(0.0, 2.0 * k_z) * eps_sq,
        dzz_w * (eps_sq * eps_sq),
    ]
}

/// `∂²_z ψ̂_app`.
pub fn ansatz_z_second_derivative(
    w_hat: &SpectralField,
    params: &Params,
    z: f64,
    physical: &KGrid,
) -> Result<SpectralField> {
    let (k_z, eps_sq) = (params.k_z, params.epsilon * params.epsilon);
    lift(w_hat, params, z, physical, |k_sq, w| {
        let [a, b, c] = z_second_derivative_terms(k_sq, k_z, eps_sq, w);
        a + b + c
    })
}

/// The Helmholtz operator `(∂²_z + ∂²_x + ∂²_y + ω²)` applied to the ansatz.
///
/// Terms are collected order by order in ε before summing: the `O(1)` group
/// is `(ω² - k_z²) ŵ` and the `O(ε²)` group is `2ik_z ∂_Z ŵ - |K|² ŵ`, the
/// paraxial equation itself.
pub fn helmholtz_operator_on_ansatz(
    w_hat: &SpectralField,
    params: &Params,
    z: f64,
    physical: &KGrid,
) -> Result<SpectralField> {
    let (k_z, eps_sq, omega_sq) = (params.k_z, params.epsilon * params.epsilon, params.omega * params.omega);
    lift(w_hat, params, z, physical, |k_sq, w| {
        let [a, b, c] = z_second_derivative_terms(k_sq, k_z, eps_sq, w);
        // ∂²_x + ∂²_y contributes -|k|² = -ε²|K|².
        let order0 = a + w * omega_sq;
        let order2 = b - w * (eps_sq * k_sq);
        order0 + order2 + c
    })
}

/// `ε⁴ e^{ik_z z} ∂²_Z w` in physical-k samples, with
/// `∂²_Z ŵ = -(|K|⁴/(4k_z²)) ŵ`. No projection is applied.
pub fn residual_spectrum(w_hat: &SpectralField, params: &Params, z: f64, physical: &KGrid) -> Result<SpectralField> {
    let (k_z, eps4) = (params.k_z, params.epsilon.powi(4));
    lift(w_hat, params, z, physical, |k_sq, w| {
        w * (-eps4 * k_sq * k_sq / (4.0 * k_z * k_z))
    })
}

/// Largest nodewise mismatch between the Helmholtz operator applied to the
/// ansatz and [`residual_spectrum`], relative to the largest residual value.
pub fn residual_identity_error(w_hat: &SpectralField, params: &Params, z: f64, physical: &KGrid) -> Result<f64> {
    let lhs = helmholtz_operator_on_ansatz(w_hat, params, z, physical)?;
    let rhs = residual_spectrum(w_hat, params, z, physical)?;
    let scale = rhs.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = lhs
        .values
        .iter()
        .zip(&rhs.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { err / scale } else { err })
}
