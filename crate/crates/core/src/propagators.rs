//! Mode-wise solution operators.
//!
//! Every evolution here is diagonal in `k`, so each node is an independent
//! oscillator `v'' = -ω̂² v` (Helmholtz in z) or a pure phase (Schrödinger in Z).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ParaxialError, Result};
use crate::spectral::{Frame, ModeData, Params, SpectralField};

/// Below this `|ω̂²|` the mode uses the truncated series instead of `sin(μz)/μ`.
pub const DEGENERATE_MODE_TOL: f64 = 1e-12;

/// Largest elliptic growth factor `e^{νz}` the propagator will produce.
pub const ELLIPTIC_GROWTH_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchPolicy {
    /// Refuse any amplitude outside the cutoff.
    HyperbolicOnly,
    /// Evolve elliptic modes too (exponential growth, capped).
    AllowElliptic,
}

/// `(v̂, ∂_z v̂)` at a given `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzState {
    pub v_hat: SpectralField,
    pub dv_hat: SpectralField,
    pub z: f64,
}

impl HelmholtzState {
    pub fn new(v_hat: SpectralField, dv_hat: SpectralField, z: f64) -> Result<Self> {
        v_hat.grid.ensure_matches(&dv_hat.grid)?;
        v_hat.ensure_frame(Frame::PhysicalK)?;
        dv_hat.ensure_frame(Frame::PhysicalK)?;
        Ok(Self { v_hat, dv_hat, z })
    }
}

/// Exact solution of `v'' = -ω̂² v` after a distance `z` for one mode.
///
/// Returns `(v, v', growth)` where `growth` is the largest factor the
/// solution operator applies (1 for oscillatory modes).
pub fn evolve_mode(v0: Complex64, v1: Complex64, omega_hat_sq: f64, z: f64) -> (Complex64, Complex64, f64) {
    if omega_hat_sq.abs() < DEGENERATE_MODE_TOL {
        // cos/sin (or cosh/sinh) expanded to first order in ω̂².
        let w2 = omega_hat_sq;
        let z2 = z * z;
        let v = v0 * (1.0 - 0.5 * w2 * z2) + v1 * (z * (1.0 - w2 * z2 / 6.0));
        let dv = v0 * (-w2 * z) + v1 * (1.0 - 0.5 * w2 * z2);
        (v, dv, 1.0)
    } else if omega_hat_sq > 0.0 {
        let mu = omega_hat_sq.sqrt();
        let (s, c) = (mu * z).sin_cos();
        (v0 * c + v1 * (s / mu), v0 * (-mu * s) + v1 * c, 1.0)
    } else {
        let nu = (-omega_hat_sq).sqrt();
        let (sh, ch) = ((nu * z).sinh(), (nu * z).cosh());
        (v0 * ch + v1 * (sh / nu), v0 * (nu * sh) + v1 * ch, (nu * z.abs()).exp())
    }
}

/// Exact Helmholtz z-evolution by a distance `dz` from the state's current `z`.
///
/// Negative `dz` is accepted (the oscillatory propagator is invertible); it is
/// only used to check reversibility.
pub fn helmholtz_evolve(
    state: &HelmholtzState,
    modes: &ModeData,
    dz: f64,
    policy: BranchPolicy,
) -> Result<HelmholtzState> {
    let grid = state.v_hat.grid;
    grid.ensure_matches(&modes.grid)?;
    state.dv_hat.grid.ensure_matches(&modes.grid)?;

    let results: Vec<Result<(Complex64, Complex64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let v0 = state.v_hat.values[idx];
            let v1 = state.dv_hat.values[idx];
            let zero = v0.norm_sqr() == 0.0 && v1.norm_sqr() == 0.0;
            if modes.chi[idx] == 0.0 && policy == BranchPolicy::HyperbolicOnly {
                if zero {
                    return Ok((v0, v1));
                }
                return Err(ParaxialError::EllipticAmplitude {
                    k_abs: modes.k_sq(idx).sqrt(),
                });
            }
            if zero {
                return Ok((v0, v1));
            }
            let (v, dv, growth) = evolve_mode(v0, v1, modes.omega_hat_sq[idx], dz);
            if growth > ELLIPTIC_GROWTH_CAP {
                return Err(ParaxialError::AmplitudeCap {
                    k_abs: modes.k_sq(idx).sqrt(),
                    growth,
                    cap: ELLIPTIC_GROWTH_CAP,
                });
            }
            Ok((v, dv))
        })
        .collect();

    let mut v_hat = SpectralField::zeros(grid, Frame::PhysicalK);
    let mut dv_hat = SpectralField::zeros(grid, Frame::PhysicalK);
    for (idx, r) in results.into_iter().enumerate() {
        let (v, dv) = r?;
        v_hat.values[idx] = v;
        dv_hat.values[idx] = dv;
    }
    Ok(HelmholtzState {
        v_hat,
        dv_hat,
        z: state.z + dz,
    })
}

/// Nodewise energy density `|∂_z v̂|² + ω̂² |v̂|²`.
pub fn helmholtz_energy_per_mode(state: &HelmholtzState, modes: &ModeData) -> Result<Vec<f64>> {
    state.v_hat.grid.ensure_matches(&modes.grid)?;
    Ok(state
        .v_hat
        .values
        .par_iter()
        .zip(state.dv_hat.values.par_iter())
        .zip(modes.omega_hat_sq.par_iter())
        .map(|((v, dv), &w2)| dv.norm_sqr() + w2 * v.norm_sqr())
        .collect())
}

/// Fourier multiplier of the paraxial equation `2ik_z ∂_Z w = -Δ w` after slow distance `big_z`.
pub fn schrodinger_multiplier(k_sq: f64, k_z: f64, big_z: f64) -> Complex64 {
    Complex64::from_polar(1.0, -k_sq * big_z / (2.0 * k_z))
}

/// `∂_Z ŵ = -i|K|²/(2k_z) ŵ`, the paraxial right-hand side as a multiplier.
pub fn schrodinger_generator(k_sq: f64, k_z: f64) -> Complex64 {
    Complex64::new(0.0, -k_sq / (2.0 * k_z))
}

/// Propagates slow-frame envelope data to slow distance `big_z`.
pub fn schrodinger_evolve(w_hat0: &SpectralField, params: &Params, big_z: f64) -> Result<SpectralField> {
    w_hat0.ensure_frame(Frame::SlowK)?;
    let k_z = params.k_z;
    Ok(w_hat0.map_nodes(|kx, ky, v| v * schrodinger_multiplier(kx * kx + ky * ky, k_z, big_z)))
}

/// Classical RK4 on each mode's first-order system `(v, v')' = (v', -ω̂² v)`.
///
/// Independent of [`evolve_mode`]; used as an oracle for the exact propagator.
pub fn rk4_oracle_evolve(state: &HelmholtzState, modes: &ModeData, z: f64, steps: usize) -> Result<HelmholtzState> {
    if steps == 0 {
        return Err(ParaxialError::InvalidParams("rk4 needs at least one step".into()));
    }
    let grid = state.v_hat.grid;
    grid.ensure_matches(&modes.grid)?;
    let h = z / steps as f64;
    let pairs: Vec<(Complex64, Complex64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let mut v = state.v_hat.values[idx];
            let mut dv = state.dv_hat.values[idx];
            if v.norm_sqr() == 0.0 && dv.norm_sqr() == 0.0 {
                return (v, dv);
            }
            let w2 = modes.omega_hat_sq[idx];
            for _ in 0..steps {
                let (k1v, k1d) = (dv, v * -w2);
                let (k2v, k2d) = (dv + k1d * (0.5 * h), (v + k1v * (0.5 * h)) * -w2);
                let (k3v, k3d) = (dv + k2d * (0.5 * h), (v + k2v * (0.5 * h)) * -w2);
                let (k4v, k4d) = (dv + k3d * h, (v + k3v * h) * -w2);
                v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
                dv += (k1d + k2d * 2.0 + k3d * 2.0 + k4d) * (h / 6.0);
            }
            (v, dv)
        })
        .collect();
    let mut out = HelmholtzState {
        v_hat: SpectralField::zeros(grid, Frame::PhysicalK),
        dv_hat: SpectralField::zeros(grid, Frame::PhysicalK),
        z: state.z + z,
    };
    for (idx, (v, dv)) in pairs.into_iter().enumerate() {
        out.v_hat.values[idx] = v;
        out.dv_hat.values[idx] = dv;
    }
    Ok(out)
}

/// Relative L² distance between two states, `‖Δ(v̂, ∂_z v̂)‖ / ‖(v̂, ∂_z v̂)‖` of the first.
pub fn relative_state_distance(a: &HelmholtzState, b: &HelmholtzState) -> Result<f64> {
    a.v_hat.grid.ensure_matches(&b.v_hat.grid)?;
    let n = a.v_hat.grid.n;
    let diff = crate::spectral::grid_sum(n, |idx| {
        (a.v_hat.values[idx] - b.v_hat.values[idx]).norm_sqr()
            + (a.dv_hat.values[idx] - b.dv_hat.values[idx]).norm_sqr()
    });
    let norm = crate::spectral::grid_sum(n, |idx| {
        a.v_hat.values[idx].norm_sqr() + a.dv_hat.values[idx].norm_sqr()
    });
    Ok(if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub z: f64,
    pub amplitude: f64,
    pub predicted: f64,
}

/// Evolves the growing elliptic mode `(v̂, ∂_z v̂) = (1, ν)` at wave vector `k`
/// and tabulates its amplitude against `e^{νz}`.
pub fn illposed_growth_demo(k: (f64, f64), omega: f64, z_samples: &[f64]) -> Result<Vec<GrowthRow>> {
    let k_sq = k.0 * k.0 + k.1 * k.1;
    let omega_hat_sq = omega * omega - k_sq;
    let lambda_sq = -omega_hat_sq;
    if lambda_sq <= 0.0 {
        return Err(ParaxialError::HyperbolicMode { k_sq, lambda_sq });
    }
    let nu = lambda_sq.sqrt();
    z_samples
        .iter()
        .map(|&z| {
            let (v, _, growth) = evolve_mode(Complex64::new(1.0, 0.0), Complex64::new(nu, 0.0), omega_hat_sq, z);
            if growth > ELLIPTIC_GROWTH_CAP {
                return Err(ParaxialError::AmplitudeCap {
                    k_abs: k_sq.sqrt(),
                    growth,
                    cap: ELLIPTIC_GROWTH_CAP,
                });
            }
            Ok(GrowthRow {
                z,
                amplitude: v.norm(),
                predicted: (nu * z).exp(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{mode_data, KGrid};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn origin_modes(omega: f64) -> ModeData {
        mode_data(&KGrid::new(0.5, 1), &Params::new(omega, 0.1, 1.0, 0, 4).unwrap())
    }

    fn single(v: Complex64) -> SpectralField {
        let mut f = SpectralField::zeros(KGrid::new(0.5, 1), Frame::PhysicalK);
        f.values[0] = v;
        f
    }

    #[test]
    fn origin_mode_half_period() {
        let modes = origin_modes(1.0);
        let s0 = HelmholtzState::new(single(c(1.0, 0.0)), single(c(0.0, 0.0)), 0.0).unwrap();
        let s = helmholtz_evolve(&s0, &modes, PI, BranchPolicy::HyperbolicOnly).unwrap();
        assert!((s.v_hat.values[0] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!(s.dv_hat.values[0].norm() < 1e-15);
        assert_eq!(s.z, PI);
    }

    #[test]
    fn zero_distance_is_identity() {
        let modes = origin_modes(1.0);
        let s0 = HelmholtzState::new(single(c(0.3, -2.0)), single(c(1.5, 0.25)), 4.0).unwrap();
        let s = helmholtz_evolve(&s0, &modes, 0.0, BranchPolicy::HyperbolicOnly).unwrap();
        assert_eq!(s, s0);
        let r = rk4_oracle_evolve(&s0, &modes, 0.0, 5).unwrap();
        assert_eq!(r, s0);
    }

    #[test]
    fn elliptic_mode_collapses_to_exponential() {
        let (v, _, _) = evolve_mode(c(1.0, 0.0), c(1.0, 0.0), -1.0, 5.0);
        assert!((v.re - 5f64.exp()).abs() / 5f64.exp() < 1e-14);
        assert!((v.re - 148.413).abs() < 1e-3);
    }

    #[test]
    fn degenerate_mode_is_linear() {
        let (v, dv, _) = evolve_mode(c(1.0, 0.0), c(2.0, -1.0), 0.0, 3.0);
        assert_eq!(v, c(7.0, -3.0));
        assert_eq!(dv, c(2.0, -1.0));
        // Continuity with the trigonometric branch just above the threshold.
        let (a, _, _) = evolve_mode(c(1.0, 0.0), c(2.0, 0.0), 0.9e-12, 3.0);
        let (b, _, _) = evolve_mode(c(1.0, 0.0), c(2.0, 0.0), 1.1e-12, 3.0);
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn hyperbolic_only_rejects_elliptic_amplitude() {
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let g = KGrid::new(2.0, 8);
        let modes = mode_data(&g, &p);
        let mut v = SpectralField::zeros(g, Frame::PhysicalK);
        v.values[0] = c(1.0, 0.0); // corner node, far outside the cutoff
        let s0 = HelmholtzState::new(v, SpectralField::zeros(g, Frame::PhysicalK), 0.0).unwrap();
        match helmholtz_evolve(&s0, &modes, 1.0, BranchPolicy::HyperbolicOnly) {
            Err(ParaxialError::EllipticAmplitude { k_abs }) => {
                assert!((k_abs - (2.0f64 * 1.75 * 1.75).sqrt()).abs() < 1e-12)
            }
            other => panic!("expected elliptic error, got {other:?}"),
        }
        assert!(helmholtz_evolve(&s0, &modes, 1.0, BranchPolicy::AllowElliptic).is_ok());
    }

    #[test]
    fn elliptic_growth_is_capped() {
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let g = KGrid::new(2.0, 8);
        let modes = mode_data(&g, &p);
        let mut v = SpectralField::zeros(g, Frame::PhysicalK);
        v.values[0] = c(1.0, 0.0);
        let s0 = HelmholtzState::new(v, SpectralField::zeros(g, Frame::PhysicalK), 0.0).unwrap();
        assert!(matches!(
            helmholtz_evolve(&s0, &modes, 100.0, BranchPolicy::AllowElliptic),
            Err(ParaxialError::AmplitudeCap { .. })
        ));
    }

    #[test]
    fn free_mode_energy_is_conserved() {
        let modes = origin_modes(1.0);
        let s0 = HelmholtzState::new(single(c(1.0, 0.0)), single(c(0.0, 0.0)), 0.0).unwrap();
        for z in [0.0, 0.7, 3.0, 41.0] {
            let s = helmholtz_evolve(&s0, &modes, z, BranchPolicy::HyperbolicOnly).unwrap();
            let e = helmholtz_energy_per_mode(&s, &modes).unwrap();
            assert!((e[0] - 1.0).abs() < 1e-12);
        }
        let zero = HelmholtzState::new(single(c(0.0, 0.0)), single(c(0.0, 0.0)), 0.0).unwrap();
        assert_eq!(helmholtz_energy_per_mode(&zero, &modes).unwrap()[0], 0.0);
    }

    #[test]
    fn schrodinger_phase_examples() {
        assert_eq!(schrodinger_multiplier(0.0, 1.0, 123.0), c(1.0, 0.0));
        let m = schrodinger_multiplier(1.0, 1.0, PI);
        assert!((m - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn schrodinger_generator_is_derivative_of_multiplier() {
        let (k_sq, k_z, z, h) = (2.3, 1.7, 0.4, 1e-5);
        let fd = (schrodinger_multiplier(k_sq, k_z, z + h) - schrodinger_multiplier(k_sq, k_z, z - h)) / (2.0 * h);
        let exact = schrodinger_generator(k_sq, k_z) * schrodinger_multiplier(k_sq, k_z, z);
        assert!((fd - exact).norm() < 1e-9);
    }

    #[test]
    fn schrodinger_requires_slow_frame() {
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let f = SpectralField::zeros(KGrid::new(1.0, 4), Frame::PhysicalK);
        assert!(schrodinger_evolve(&f, &p, 0.5).is_err());
    }

    #[test]
    fn gaussian_envelope_spreads_like_closed_form() {
        // w(X, Z) = σ²/(σ² + iZ/k_z) · exp(-|X|²/(2(σ² + iZ/k_z))) for σ = 1, k_z = 1.
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let g = KGrid::new(12.0, 240);
        let w0 = SpectralField::from_fn(g, Frame::SlowK, |kx, ky| {
            c((-(kx * kx + ky * ky) / 2.0).exp() / (2.0 * PI), 0.0)
        });
        let w1 = schrodinger_evolve(&w0, &p, 1.0).unwrap();
        let pts = [(0.0, 0.0), (0.8, -0.3), (1.5, 2.0)];
        let got = evaluate(&w1, &pts);
        let q = c(1.0, 1.0);
        for ((x, y), v) in pts.iter().zip(got) {
            let expected = (c(-(x * x + y * y), 0.0) / (q * 2.0)).exp() / q;
            assert!((v - expected).norm() < 1e-10, "{v} vs {expected}");
        }
        assert!((got_peak(&w1) - 1.0 / 2f64.sqrt()).abs() < 1e-10);
    }

    fn evaluate(f: &SpectralField, pts: &[(f64, f64)]) -> Vec<Complex64> {
        crate::spectral::evaluate_physical(f, pts)
    }

    fn got_peak(f: &SpectralField) -> f64 {
        evaluate(f, &[(0.0, 0.0)])[0].norm()
    }

    #[test]
    fn illposed_demo_examples() {
        let rows = illposed_growth_demo((1.0, 1.0), 1.0, &[0.0, 1.0]).unwrap();
        assert_eq!(rows[0].amplitude, 1.0);
        assert!((rows[1].amplitude / 1f64.exp() - 1.0).abs() < 1e-12);

        // ν = 1 at |k|² = 2, ν = 2 at |k|² = 5.
        let z = 1.3;
        let a1 = illposed_growth_demo((2f64.sqrt(), 0.0), 1.0, &[z]).unwrap()[0].amplitude;
        let a2 = illposed_growth_demo((5f64.sqrt(), 0.0), 1.0, &[z]).unwrap()[0].amplitude;
        assert!((a2 / (a1 * a1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn illposed_demo_rejects_hyperbolic_wave_vector() {
        assert!(matches!(
            illposed_growth_demo((0.5, 0.0), 1.0, &[1.0]),
            Err(ParaxialError::HyperbolicMode { .. })
        ));
    }
}
