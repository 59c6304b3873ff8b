//! Experiments: error curves over `z ∈ [0, Z₀/ε²]`, energy traces with the
//! Gronwall inequality, tail norms, ε-sweeps and log-log slope fits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::approximation::{ansatz_spectrum, ansatz_z_derivative, initial_spectrum, InitialData};
use crate::error::{ParaxialError, Result};
use crate::propagators::{helmholtz_evolve, schrodinger_evolve, schrodinger_generator, BranchPolicy, HelmholtzState};
use crate::spectral::{
    evaluate_lattice, grid_pair, grid_sum, l2s_norm_sq, mode_data, project_hyp, sobolev_weight, Frame, GridPolicy,
    KGrid, ModeData, Params, SpectralField,
};

/// Minimum number of z samples per comparison run.
pub const MIN_Z_SAMPLES: usize = 16;

/// Relative slack for inequalities that hold with an exact constant.
pub const EXACT_CONSTANT_SLACK: f64 = 1e-12;

/// Relative slack for the triangle decomposition of the error.
pub const TRIANGLE_SLACK: f64 = 1e-10;

/// Multiplier on `h₋h₊ · max|E'''|` in the finite-difference tolerance; twice
/// the leading error coefficient (1/6) of the three-point derivative.
pub const FD_TOL_COEFF: f64 = 1.0 / 3.0;

/// Relative floor of the finite-difference tolerance, in units of `max E`.
pub const FD_TOL_FLOOR: f64 = 1e-9;

/// Allowed excess of the measured `sup E/ε²` over `e^{Z₀} Z₀ C_meas`.
pub const GRONWALL_CONSTANT_SLACK: f64 = 0.05;

/// Outer-annulus cells per primary half-extent, per level.
const TAIL_CELLS_PER_LEVEL: usize = 32;
const TAIL_MAX_LEVELS: usize = 200;

/// Knobs of a single comparison run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonConfig {
    pub policy: GridPolicy,
    pub z_sample_count: usize,
    /// Points per axis of the sup-norm lattice.
    pub lattice_points: usize,
    /// Lattice half-width in slow units; the physical half-width is this over ε.
    pub lattice_half_width: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            policy: GridPolicy::default(),
            z_sample_count: 64,
            lattice_points: 65,
            lattice_half_width: 5.0,
        }
    }
}

/// Source of the envelope data for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    Family(InitialData),
    /// A single nonzero slow node at `K = 0`: the ansatz then solves the Helmholtz equation exactly.
    OriginMode {
        amplitude: f64,
    },
}

impl Envelope {
    fn grids(&self, params: &Params, policy: &GridPolicy) -> Result<(KGrid, KGrid)> {
        let (slow, physical) = grid_pair(params, policy)?;
        match self {
            Envelope::Family(_) => Ok((slow, physical)),
            Envelope::OriginMode { .. } => {
                // Odd node count puts a node on K = 0.
                let n = slow.n + 1;
                let slow = KGrid::new(0.5 * n as f64 * slow.spacing, n);
                Ok((slow, slow.scaled(params.epsilon)))
            }
        }
    }

    fn spectrum(&self, slow: &KGrid) -> Result<SpectralField> {
        match self {
            Envelope::Family(data) => initial_spectrum(data, slow),
            Envelope::OriginMode { amplitude } => {
                let mut f = SpectralField::zeros(*slow, Frame::SlowK);
                let mid = slow.n / 2;
                f.values[mid * slow.n + mid] = Complex64::new(*amplitude, 0.0);
                Ok(f)
            }
        }
    }
}

/// Z-sample positions on `[0, z_end]`: half uniform (including both ends),
/// half geometric inside the first uniform cell where the energy starts growing.
pub fn z_samples(z_end: f64, count: usize) -> Vec<f64> {
    let n_uniform = count.div_ceil(2).max(2);
    let n_geo = count.saturating_sub(n_uniform);
    let h = z_end / (n_uniform - 1) as f64;
    let mut zs: Vec<f64> = (0..n_uniform).map(|i| i as f64 * h).collect();
    if n_geo > 0 {
        let lo = h * 1e-3;
        let ratio = (h / lo).powf(1.0 / n_geo as f64);
        zs.extend((0..n_geo).map(|i| lo * ratio.powi(i as i32)));
    }
    zs.sort_by(f64::total_cmp);
    zs
}

/// `∫ |∂_z R̂|² + ω̂² |R̂|² dk` for fields supported inside the cutoff.
pub fn energy(r_hat: &SpectralField, dr_hat: &SpectralField, modes: &ModeData) -> Result<f64> {
    r_hat.grid.ensure_matches(&modes.grid)?;
    dr_hat.grid.ensure_matches(&modes.grid)?;
    let sum = grid_sum(modes.grid.n, |idx| {
        dr_hat.values[idx].norm_sqr() + modes.omega_hat_sq[idx] * r_hat.values[idx].norm_sqr()
    });
    Ok(sum * modes.grid.cell_area())
}

/// `(√2/ω)`, the constant bounding `‖R̂‖_{L²}` by `E^{1/2}` on the cutoff support.
pub fn c3_constant(omega: f64) -> f64 {
    2f64.sqrt() / omega
}

/// Squared tail contribution of the region outside the primary grid, from
/// the closed-form spectrum on nested, progressively coarser square annuli.
pub fn outer_tail_norm_sq(data: &InitialData, params: &Params, physical: &KGrid, s: f64) -> Result<f64> {
    let eps = params.epsilon;
    let scale = 1.0 / (eps * eps);
    let q = TAIL_CELLS_PER_LEVEL;
    let mut inner = physical.k_max;
    let mut total = 0.0;
    for _ in 0..TAIL_MAX_LEVELS {
        let outer = 2.0 * inner;
        let h = outer / (2 * q) as f64;
        let m = 4 * q;
        let level = grid_sum(m, |idx| {
            let kx = -outer + ((idx / m) as f64 + 0.5) * h;
            let ky = -outer + ((idx % m) as f64 + 0.5) * h;
            if kx.abs() < inner && ky.abs() < inner {
                return 0.0;
            }
            let k_sq = kx * kx + ky * ky;
            let a = scale * data.spectrum(k_sq / (eps * eps));
            a * a * sobolev_weight(k_sq, s)
        }) * h
            * h;
        total += level;
        if level <= 1e-16 * total || total == 0.0 {
            return Ok(total);
        }
        inner = outer;
    }
    Err(ParaxialError::TailNotConverged {
        levels: TAIL_MAX_LEVELS,
    })
}

/// `‖(1-χ) ψ̂_app‖_{L²_s}`. Independent of `z`, since the ansatz phases are unimodular.
pub fn tail_norm(data: &InitialData, params: &Params, physical: &KGrid, s: f64) -> Result<f64> {
    let cutoff = params.cutoff_sq().sqrt();
    if physical.k_max <= cutoff {
        return Err(ParaxialError::CutoffNotCovered {
            k_max: physical.k_max,
            cutoff,
        });
    }
    let eps = params.epsilon;
    let scale = 1.0 / (eps * eps);
    let cutoff_sq = params.cutoff_sq();
    let axis = physical.axis();
    let n = physical.n;
    let primary = grid_sum(n, |idx| {
        let (kx, ky) = (axis[idx / n], axis[idx % n]);
        let k_sq = kx * kx + ky * ky;
        if k_sq <= cutoff_sq {
            return 0.0;
        }
        let a = scale * data.spectrum(k_sq / (eps * eps));
        a * a * sobolev_weight(k_sq, s)
    }) * physical.cell_area();
    Ok((primary + outer_tail_norm_sq(data, params, physical, s)?).sqrt())
}

/// Per-sample measurements of a comparison run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleRecord {
    pub z: f64,
    /// `‖v - ψ_app‖_{H^s}`, tail included.
    pub error_hs: f64,
    /// `max |v - ψ_app|` over the x-lattice.
    pub error_inf: f64,
    pub r_l2: f64,
    pub r_hs: f64,
    pub energy: f64,
    pub tail: f64,
    /// `‖χ ∂²_Z ŵ‖²_{L²(dK)}` at `Z = ε²z`.
    pub c_meas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub sup_error_hs: f64,
    pub z_at_sup: f64,
    pub sup_error_inf: f64,
    pub tail_norm: f64,
    /// `sup_z E(z) / ε²`.
    pub energy_bound_ratio: f64,
    /// `sup_z ‖ψ_app‖_{H^s}`, the scale against which errors are judged degenerate.
    pub reference_norm: f64,
    pub z_sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub z_samples: Vec<f64>,
    pub energy: Vec<f64>,
    /// Centered three-point derivative; `None` at the two end samples.
    pub de_fd: Vec<Option<f64>>,
    /// `ε² E + ε⁴ C_meas`.
    pub bound_rhs: Vec<f64>,
    pub c_meas: f64,
    pub epsilon: f64,
}

impl EnergyTrace {
    pub fn new(z_samples: Vec<f64>, energy: Vec<f64>, epsilon: f64, c_meas: f64) -> Self {
        let eps2 = epsilon * epsilon;
        let bound_rhs = energy.iter().map(|e| eps2 * e + eps2 * eps2 * c_meas).collect();
        let de_fd = centered_derivative(&z_samples, &energy);
        Self {
            z_samples,
            energy,
            de_fd,
            bound_rhs,
            c_meas,
            epsilon,
        }
    }
}

/// Second-order centered derivative on a non-uniform grid.
fn centered_derivative(z: &[f64], f: &[f64]) -> Vec<Option<f64>> {
    let n = z.len();
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 >= n {
                return None;
            }
            let (h0, h1) = (z[i] - z[i - 1], z[i + 1] - z[i]);
            Some(-h1 / (h0 * (h0 + h1)) * f[i - 1] + (h1 - h0) / (h0 * h1) * f[i] + h0 / (h1 * (h0 + h1)) * f[i + 1])
        })
        .collect()
}

/// Largest `|f'''|` estimated from third divided differences.
fn third_derivative_scale(z: &[f64], f: &[f64]) -> f64 {
    let divided = |i: usize, order: usize| -> f64 {
        // Newton divided difference f[z_i, ..., z_{i+order}].
        let mut table: Vec<f64> = f[i..=i + order].to_vec();
        for level in 1..=order {
            for j in 0..=order - level {
                table[j] = (table[j + 1] - table[j]) / (z[i + j + level] - z[i + j]);
            }
        }
        table[0]
    };
    (0..z.len().saturating_sub(3))
        .map(|i| (6.0 * divided(i, 3)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub passed: bool,
    /// Largest `lhs / rhs` over the samples.
    pub max_ratio: f64,
}

impl InequalityCheck {
    fn new() -> Self {
        Self {
            passed: true,
            max_ratio: 0.0,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, slack: f64) {
        let ok = lhs <= rhs * (1.0 + slack);
        self.passed &= ok;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.max_ratio = self.max_ratio.max(ratio);
    }
}

/// Exact-constant inequalities evaluated at every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleChecks {
    /// `‖R̂‖_{L²} ≤ (√2/ω) E^{1/2}`.
    pub c3_bound: InequalityCheck,
    /// `‖R‖_{H^s} ≤ (1+ω²/2)^{s/2} ‖R‖_{L²}`.
    pub compact_support_gain: InequalityCheck,
    /// `‖v - ψ_app‖_{H^s} ≤ ‖v - P_hyp ψ_app‖_{H^s} + tail`.
    pub triangle: InequalityCheck,
    /// `R(0) = 0` and `E(0) = 0` exactly.
    pub zero_initial_remainder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRun {
    pub params: Params,
    pub report: ErrorReport,
    pub trace: EnergyTrace,
    pub samples: Vec<SampleRecord>,
    pub checks: SampleChecks,
}

/// Compares the Helmholtz solution started from the projected ansatz data
/// with the ansatz itself over `z ∈ [0, Z₀/ε²]`.
pub fn run_comparison(params: &Params, data: &InitialData, config: &ComparisonConfig) -> Result<ComparisonRun> {
    data.validate(params.s_a)?;
    run_comparison_with(params, &Envelope::Family(*data), config)
}

pub fn run_comparison_with(params: &Params, envelope: &Envelope, config: &ComparisonConfig) -> Result<ComparisonRun> {
    params.validate()?;
    if config.z_sample_count < MIN_Z_SAMPLES {
        return Err(ParaxialError::TooFewSamples {
            got: config.z_sample_count,
            min: MIN_Z_SAMPLES,
        });
    }
    let (slow, physical) = envelope.grids(params, &config.policy)?;
    let cutoff = params.cutoff_sq().sqrt();
    if physical.k_max <= cutoff {
        return Err(ParaxialError::CutoffNotCovered {
            k_max: physical.k_max,
            cutoff,
        });
    }
    let s = params.s as f64;
    let eps = params.epsilon;
    let modes = mode_data(&physical, params);
    let w0 = envelope.spectrum(&slow)?;
    let outer_sq = match envelope {
        Envelope::Family(data) => outer_tail_norm_sq(data, params, &physical, s)?,
        Envelope::OriginMode { .. } => 0.0,
    };

    let psi0 = ansatz_spectrum(&w0, params, 0.0, &physical)?;
    let dpsi0 = ansatz_z_derivative(&w0, params, 0.0, &physical)?;
    let state0 = HelmholtzState::new(project_hyp(&psi0, &modes)?, project_hyp(&dpsi0, &modes)?, 0.0)?;

    let half_width = config.lattice_half_width / eps;
    let lattice: Vec<f64> = (0..config.lattice_points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (config.lattice_points.max(2) - 1) as f64)
        .collect();
    let gain = modes.hyperbolic_weight_bound(s);
    let c3 = c3_constant(params.omega);

    let zs = z_samples(params.z_end(), config.z_sample_count);
    let mut samples = Vec::with_capacity(zs.len());
    let mut checks = SampleChecks {
        c3_bound: InequalityCheck::new(),
        compact_support_gain: InequalityCheck::new(),
        triangle: InequalityCheck::new(),
        zero_initial_remainder: true,
    };
    let mut reference_norm: f64 = 0.0;

    for &z in &zs {
        let w = schrodinger_evolve(&w0, params, eps * eps * z)?;
        let psi = ansatz_spectrum(&w, params, z, &physical)?;
        let dpsi = ansatz_z_derivative(&w, params, z, &physical)?;
        let state = helmholtz_evolve(&state0, &modes, z, BranchPolicy::HyperbolicOnly)?;

        let diff = state.v_hat.sub(&psi)?;
        let r_hat = state.v_hat.sub(&project_hyp(&psi, &modes)?)?;
        let dr_hat = state.dv_hat.sub(&project_hyp(&dpsi, &modes)?)?;

        let e = energy(&r_hat, &dr_hat, &modes)?;
        let r_l2 = l2s_norm_sq(&r_hat, 0.0).sqrt();
        let r_hs = l2s_norm_sq(&r_hat, s).sqrt();
        let error_hs = (l2s_norm_sq(&diff, s) + outer_sq).sqrt();
        let tail_primary = grid_sum(physical.n, |idx| {
            let k_sq = modes.k_sq(idx);
            (1.0 - modes.chi[idx]) * psi.values[idx].norm_sqr() * sobolev_weight(k_sq, s)
        }) * physical.cell_area();
        let tail = (tail_primary + outer_sq).sqrt();
        reference_norm = reference_norm.max((l2s_norm_sq(&psi, s) + outer_sq).sqrt());

        let c_meas = grid_sum(slow.n, |idx| {
            let k = w.values[idx];
            if modes.chi[idx] == 0.0 || k.norm_sqr() == 0.0 {
                return 0.0;
            }
            let n = slow.n;
            let (kx, ky) = (slow.node(idx / n), slow.node(idx % n));
            let g = schrodinger_generator(kx * kx + ky * ky, params.k_z);
            (g * g * k).norm_sqr()
        }) * slow.cell_area();

        let error_inf = evaluate_lattice(&diff, &lattice, &lattice)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);

        checks
            .c3_bound
            .record(r_l2, c3 * e.max(0.0).sqrt(), EXACT_CONSTANT_SLACK);
        checks
            .compact_support_gain
            .record(r_hs, gain * r_l2, EXACT_CONSTANT_SLACK);
        checks.triangle.record(error_hs, r_hs + tail, TRIANGLE_SLACK);
        if z == 0.0 {
            let r_zero = r_hat.values.iter().chain(&dr_hat.values).all(|v| v.norm_sqr() == 0.0);
            checks.zero_initial_remainder &= r_zero && e == 0.0;
        }

        samples.push(SampleRecord {
            z,
            error_hs,
            error_inf,
            r_l2,
            r_hs,
            energy: e,
            tail,
            c_meas,
        });
    }

    let sup_rec = samples
        .iter()
        .max_by(|a, b| a.error_hs.total_cmp(&b.error_hs))
        .expect("at least MIN_Z_SAMPLES samples");
    let c_meas = samples.iter().map(|r| r.c_meas).fold(0.0, f64::max);
    let sup_energy = samples.iter().map(|r| r.energy).fold(0.0, f64::max);
    let report = ErrorReport {
        epsilon: eps,
        sup_error_hs: sup_rec.error_hs,
        z_at_sup: sup_rec.z,
        sup_error_inf: samples.iter().map(|r| r.error_inf).fold(0.0, f64::max),
        tail_norm: samples.iter().map(|r| r.tail).fold(0.0, f64::max),
        energy_bound_ratio: sup_energy / (eps * eps),
        reference_norm,
        z_sample_count: samples.len(),
    };
    let trace = EnergyTrace::new(
        samples.iter().map(|r| r.z).collect(),
        samples.iter().map(|r| r.energy).collect(),
        eps,
        c_meas,
    );
    Ok(ComparisonRun {
        params: *params,
        report,
        trace,
        samples,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallVerdict {
    pub holds: bool,
    /// Every interior sample satisfies `dE_fd ≤ ε²E + ε⁴C_meas + tol_fd`.
    pub pointwise_holds: bool,
    /// `sup E ≤ (1 + slack) e^{Z₀} Z₀ C_meas ε²`.
    pub integrated_holds: bool,
    /// Largest `dE_fd - bound_rhs - tol_fd` (negative when the inequality holds with room).
    pub max_excess: f64,
    pub z_at_max_excess: f64,
    pub third_derivative_scale: f64,
    pub sup_energy: f64,
    /// `sup E / ε²`.
    pub energy_constant: f64,
    /// `e^{Z₀} Z₀ C_meas`.
    pub constant_bound: f64,
}

/// Checks the differential inequality and its integrated Gronwall form on a trace.
///
/// `dE_fd` is recomputed from `trace.energy`; `bound_rhs` is taken as stored.
pub fn gronwall_check(trace: &EnergyTrace, params: &Params) -> Result<GronwallVerdict> {
    let n = trace.z_samples.len();
    if n < 4 || trace.energy.len() != n || trace.bound_rhs.len() != n {
        return Err(ParaxialError::TraceTooShort { len: n, min: 4 });
    }
    let z = &trace.z_samples;
    let de = centered_derivative(z, &trace.energy);
    let e_max = trace.energy.iter().copied().fold(0.0, f64::max);
    let third = third_derivative_scale(z, &trace.energy);
    let mut max_excess = f64::NEG_INFINITY;
    let mut z_at_max_excess = z[0];
    for i in 1..n - 1 {
        let d = de[i].expect("interior sample");
        let (h0, h1) = (z[i] - z[i - 1], z[i + 1] - z[i]);
        let tol = FD_TOL_COEFF * h0 * h1 * third + FD_TOL_FLOOR * e_max;
        let excess = d - trace.bound_rhs[i] - tol;
        if excess > max_excess {
            max_excess = excess;
            z_at_max_excess = z[i];
        }
    }
    let eps2 = trace.epsilon * trace.epsilon;
    let constant_bound = params.z0.exp() * params.z0 * trace.c_meas;
    let energy_constant = e_max / eps2;
    let pointwise_holds = max_excess <= 0.0;
    let integrated_holds = energy_constant <= (1.0 + GRONWALL_CONSTANT_SLACK) * constant_bound;
    Ok(GronwallVerdict {
        holds: pointwise_holds && integrated_holds,
        pointwise_holds,
        integrated_holds,
        max_excess,
        z_at_max_excess,
        third_derivative_scale: third,
        sup_energy: e_max,
        energy_constant,
        constant_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of `ln y` from the fitted line.
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FitOutcome {
    Fitted(SlopeFit),
    /// Some value is zero or not finite, so no power law can be fitted.
    Degenerate,
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&SlopeFit> {
        match self {
            FitOutcome::Fitted(f) => Some(f),
            FitOutcome::Degenerate => None,
        }
    }
}

/// Least-squares fit of `ln y = slope · ln x + intercept`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<FitOutcome> {
    if xs.len() < 3 || xs.len() != ys.len() {
        return Err(ParaxialError::TooFewPoints {
            got: xs.len().min(ys.len()),
            min: 3,
        });
    }
    if ys.iter().chain(xs).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Ok(FitOutcome::Degenerate);
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0, f64::max);
    Ok(FitOutcome::Fitted(SlopeFit {
        slope,
        intercept,
        max_residual,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub reports: Vec<ErrorReport>,
    pub error_fit: FitOutcome,
    pub sup_norm_fit: FitOutcome,
    pub tail_fit: FitOutcome,
    pub energy_ratio_fit: FitOutcome,
    /// `max(err/ε) / min(err/ε)` over the sweep.
    pub err_over_eps_spread: f64,
    pub max_err_over_eps: f64,
    #[serde(skip)]
    pub runs: Vec<ComparisonRun>,
}

/// Relative error size below which a sweep is reported as degenerate.
pub const DEGENERATE_REL_ERROR: f64 = 1e-10;

pub fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.len() < 3 {
        return Err(ParaxialError::TooFewPoints {
            got: epsilons.len(),
            min: 3,
        });
    }
    let r0 = epsilons[1] / epsilons[0];
    let geometric = epsilons.windows(2).all(|w| ((w[1] / w[0]) / r0 - 1.0).abs() < 1e-9);
    if !geometric || r0 == 1.0 || !r0.is_finite() {
        return Err(ParaxialError::InvalidParams(format!(
            "epsilons must be distinct and geometrically spaced, got {epsilons:?}"
        )));
    }
    Ok(())
}

/// Runs a comparison per ε and fits the observed rates.
pub fn sweep(base: &Params, envelope: &Envelope, epsilons: &[f64], config: &ComparisonConfig) -> Result<SweepResult> {
    check_epsilons(epsilons)?;
    if let Envelope::Family(data) = envelope {
        data.validate(base.s_a)?;
    }
    let outcomes: Vec<Result<ComparisonRun>> = epsilons
        .par_iter()
        .map(|&eps| run_comparison_with(&base.with_epsilon(eps)?, envelope, config))
        .collect();
    let mut runs = Vec::with_capacity(outcomes.len());
    for (eps, outcome) in epsilons.iter().zip(outcomes) {
        match outcome {
            Ok(run) => runs.push(run),
            Err(e) => {
                return Err(ParaxialError::SweepAborted {
                    epsilon: *eps,
                    completed: runs.into_iter().map(|r| r.report).collect(),
                    source: Box::new(e),
                })
            }
        }
    }
    let reports: Vec<ErrorReport> = runs.iter().map(|r| r.report.clone()).collect();
    let errs: Vec<f64> = reports.iter().map(|r| r.sup_error_hs).collect();
    let degenerate = reports
        .iter()
        .all(|r| r.sup_error_hs <= DEGENERATE_REL_ERROR * r.reference_norm);
    let pick = |f: fn(&ErrorReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let (error_fit, sup_norm_fit) = if degenerate {
        (FitOutcome::Degenerate, FitOutcome::Degenerate)
    } else {
        (
            fit_log_log(epsilons, &errs)?,
            fit_log_log(epsilons, &pick(|r| r.sup_error_inf))?,
        )
    };
    let ratios: Vec<f64> = errs.iter().zip(epsilons).map(|(e, eps)| e / eps).collect();
    let max_r = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_r = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SweepResult {
        error_fit,
        sup_norm_fit,
        tail_fit: fit_log_log(epsilons, &pick(|r| r.tail_norm))?,
        energy_ratio_fit: fit_log_log(epsilons, &pick(|r| r.energy_bound_ratio))?,
        err_over_eps_spread: if min_r > 0.0 { max_r / min_r } else { f64::INFINITY },
        max_err_over_eps: max_r,
        reports,
        runs,
    })
}

/// Tail norms over an ε list with their log-log fit.
pub fn tail_scaling(
    base: &Params,
    data: &InitialData,
    epsilons: &[f64],
    policy: &GridPolicy,
) -> Result<(Vec<f64>, FitOutcome)> {
    check_epsilons(epsilons)?;
    data.validate(base.s_a)?;
    let tails = epsilons
        .iter()
        .map(|&eps| {
            let p = base.with_epsilon(eps)?;
            let (_, physical) = grid_pair(&p, policy)?;
            tail_norm(data, &p, &physical, p.s as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_log_log(epsilons, &tails)?;
    Ok((tails, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn z_samples_shape() {
        let zs = z_samples(100.0, 64);
        assert_eq!(zs.len(), 64);
        assert_eq!(zs[0], 0.0);
        assert_eq!(*zs.last().unwrap(), 100.0);
        assert!(zs.windows(2).all(|w| w[0] < w[1]));
        // Denser near zero.
        assert!(zs[1] < 100.0 / 31.0 / 100.0);
    }

    #[test]
    fn energy_of_single_unit_mode() {
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let g = KGrid::new(0.5, 1);
        let modes = mode_data(&g, &p);
        let mut r = SpectralField::zeros(g, Frame::PhysicalK);
        r.values[0] = Complex64::new(1.0, 0.0);
        let dr = SpectralField::zeros(g, Frame::PhysicalK);
        assert_eq!(energy(&r, &dr, &modes).unwrap(), 1.0);
        assert_eq!(energy(&dr, &dr, &modes).unwrap(), 0.0);
    }

    #[test]
    fn c3_bound_on_hyperbolic_fields() {
        let p = Params::new(1.7, 0.1, 1.0, 0, 4).unwrap();
        let g = KGrid::new(2.0, 50);
        let modes = mode_data(&g, &p);
        let f = SpectralField::from_fn(g, Frame::PhysicalK, |kx, ky| Complex64::new(1.0 + kx * ky, kx));
        let r = project_hyp(&f, &modes).unwrap();
        let zero = SpectralField::zeros(g, Frame::PhysicalK);
        let e = energy(&r, &zero, &modes).unwrap();
        assert!(l2s_norm_sq(&r, 0.0).sqrt() <= c3_constant(p.omega) * e.sqrt());
    }

    #[test]
    fn fit_recovers_power_law() {
        let xs = [0.2, 0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        let fit = *fit_log_log(&xs, &ys).unwrap().fit().unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
        assert_eq!(fit_log_log(&xs, &[1.0, 0.0, 1.0, 1.0]).unwrap(), FitOutcome::Degenerate);
        assert!(fit_log_log(&xs[..2], &ys[..2]).is_err());
    }

    #[test]
    fn epsilons_must_be_geometric() {
        assert!(check_epsilons(&[0.2, 0.1, 0.05]).is_ok());
        assert!(check_epsilons(&[0.2, 0.1]).is_err());
        assert!(check_epsilons(&[0.2, 0.1, 0.07]).is_err());
    }

    #[test]
    fn centered_derivative_is_exact_for_quadratics() {
        let z = [0.0, 0.1, 0.5, 1.7, 2.0];
        let f: Vec<f64> = z.iter().map(|z| 3.0 * z * z - z + 2.0).collect();
        let d = centered_derivative(&z, &f);
        assert!(d[0].is_none() && d[4].is_none());
        for i in 1..4 {
            assert!((d[i].unwrap() - (6.0 * z[i] - 1.0)).abs() < 1e-12);
        }
        let cubic: Vec<f64> = z.iter().map(|z| z * z * z).collect();
        assert!((third_derivative_scale(&z, &cubic) - 6.0).abs() < 1e-10);
    }

    #[test]
    fn gronwall_check_needs_samples() {
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let t = EnergyTrace::new(vec![0.0, 1.0, 2.0], vec![0.0; 3], 0.1, 1.0);
        assert!(matches!(
            gronwall_check(&t, &p),
            Err(ParaxialError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn zero_forcing_trace_holds() {
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let zs = z_samples(100.0, 32);
        let t = EnergyTrace::new(zs.clone(), vec![0.0; zs.len()], 0.1, 0.0);
        let v = gronwall_check(&t, &p).unwrap();
        assert!(v.holds);
    }

    #[test]
    fn gaussian_tail_matches_closed_form() {
        // tail = ε^-1 e^{-a²/2} / (2√π), a² = ω²/(2ε²). Sharp-cutoff quadrature
        // converges at first order, so a fine grid is used.
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let policy = GridPolicy {
            cells_per_epsilon: 80.0,
            ..Default::default()
        };
        let (_, phys) = grid_pair(&p, &policy).unwrap();
        let t = tail_norm(&InitialData::gaussian(1.0), &p, &phys, 0.0).unwrap();
        let exact = 10.0 * (-25f64).exp() / (2.0 * PI.sqrt());
        assert!((t / exact - 1.0).abs() < 0.1, "{t} vs {exact}");
    }

    #[test]
    fn tail_vanishes_when_cutoff_covers_support() {
        // With ω large the cutoff disk contains the whole primary grid, and the
        // Gaussian has underflowed beyond it.
        let p = Params::new(30.0, 0.1, 1.0, 0, 4).unwrap();
        let phys = KGrid::new(60.0, 200);
        let t = tail_norm(&InitialData::gaussian(1.0), &p, &phys, 0.0).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn tail_requires_cutoff_coverage() {
        let p = Params::new(1.0, 0.1, 1.0, 0, 4).unwrap();
        let phys = KGrid::new(0.5, 50);
        assert!(matches!(
            tail_norm(&InitialData::gaussian(1.0), &p, &phys, 0.0),
            Err(ParaxialError::CutoffNotCovered { .. })
        ));
    }

    #[test]
    fn comparison_rejects_few_samples() {
        let p = Params::new(1.0, 0.2, 1.0, 0, 4).unwrap();
        let cfg = ComparisonConfig {
            z_sample_count: 3,
            ..Default::default()
        };
        assert!(matches!(
            run_comparison(&p, &InitialData::gaussian(1.0), &cfg),
            Err(ParaxialError::TooFewSamples { got: 3, min: 16 })
        ));
    }
}
