use paraxial::analysis::{
    gronwall_check, run_comparison, run_comparison_with, sweep, ComparisonConfig, EnergyTrace, Envelope, FitOutcome,
};
use paraxial::approximation::{ansatz_spectrum, ansatz_z_derivative, initial_spectrum, InitialData};
use paraxial::propagators::{
    helmholtz_evolve, relative_state_distance, rk4_oracle_evolve, BranchPolicy, HelmholtzState,
};
use paraxial::spectral::{grid_pair, mode_data, project_hyp, GridPolicy, ModeData, Params};

fn gaussian_params(eps: f64) -> Params {
    Params::new(1.0, eps, 1.0, 0, 4).unwrap()
}

fn hyperbolic_gaussian_state(params: &Params) -> (HelmholtzState, ModeData) {
    let (slow, physical) = grid_pair(params, &GridPolicy::default()).unwrap();
    let w0 = initial_spectrum(&InitialData::gaussian(1.0), &slow).unwrap();
    let modes = mode_data(&physical, params);
    let v = project_hyp(&ansatz_spectrum(&w0, params, 0.0, &physical).unwrap(), &modes).unwrap();
    let dv = project_hyp(&ansatz_z_derivative(&w0, params, 0.0, &physical).unwrap(), &modes).unwrap();
    (HelmholtzState::new(v, dv, 0.0).unwrap(), modes)
}

fn rk4_error(params: &Params, z: f64, steps: usize) -> f64 {
    let (s0, modes) = hyperbolic_gaussian_state(params);
    let exact = helmholtz_evolve(&s0, &modes, z, BranchPolicy::HyperbolicOnly).unwrap();
    let rk4 = rk4_oracle_evolve(&s0, &modes, z, steps).unwrap();
    relative_state_distance(&exact, &rk4).unwrap()
}

#[test]
fn exact_propagator_matches_rk4() {
    let err = rk4_error(&gaussian_params(0.2), 10.0, 10_000);
    assert!(err <= 1e-7, "relative L2 error {err:e}");
}

#[test]
fn rk4_step_halving_shows_fourth_order() {
    let p = gaussian_params(0.2);
    let ratio = rk4_error(&p, 10.0, 50) / rk4_error(&p, 10.0, 100);
    assert!((ratio / 16.0 - 1.0).abs() <= 0.2, "ratio {ratio}");
}

#[test]
fn single_origin_mode_is_an_exact_solution() {
    let config = ComparisonConfig {
        z_sample_count: 16,
        ..ComparisonConfig::default()
    };
    let run = run_comparison_with(&gaussian_params(0.2), &Envelope::OriginMode { amplitude: 1.0 }, &config).unwrap();
    assert!(run.report.reference_norm > 0.0);
    assert!(
        run.report.sup_error_hs <= 1e-12 * run.report.reference_norm,
        "{:?}",
        run.report
    );
    assert_eq!(run.report.tail_norm, 0.0);

    let swept = sweep(
        &gaussian_params(0.2),
        &Envelope::OriginMode { amplitude: 1.0 },
        &[0.2, 0.1, 0.05],
        &config,
    )
    .unwrap();
    assert_eq!(swept.error_fit, FitOutcome::Degenerate);
    assert_eq!(swept.sup_norm_fit, FitOutcome::Degenerate);
}

#[test]
fn initial_error_is_the_tail() {
    for data in [InitialData::gaussian(1.0), InitialData::algebraic(5.5)] {
        let run = run_comparison(&gaussian_params(0.2), &data, &ComparisonConfig::default()).unwrap();
        let first = run.samples[0];
        assert_eq!(first.z, 0.0);
        assert_eq!(first.energy, 0.0);
        assert_eq!(first.r_l2, 0.0);
        assert!((first.error_hs - first.tail).abs() <= 1e-12 * first.tail, "{first:?}");
        assert!(run.checks.zero_initial_remainder);
    }
}

#[test]
fn gronwall_holds_and_rejects_a_corrupted_trace() {
    let params = gaussian_params(0.2);
    let run = run_comparison(&params, &InitialData::gaussian(1.0), &ComparisonConfig::default()).unwrap();
    let verdict = gronwall_check(&run.trace, &params).unwrap();
    assert!(verdict.holds, "{verdict:?}");

    // Doubling E while keeping the original right-hand side breaks the
    // differential inequality wherever E grows.
    let mut corrupted = run.trace.clone();
    corrupted.energy.iter_mut().for_each(|e| *e *= 2.0);
    let bad = gronwall_check(&corrupted, &params).unwrap();
    assert!(!bad.pointwise_holds, "{bad:?}");
    assert!(!bad.holds);

    let rebuilt = EnergyTrace::new(
        run.trace.z_samples.clone(),
        run.trace.energy.clone(),
        params.epsilon,
        0.0,
    );
    assert!(!gronwall_check(&rebuilt, &params).unwrap().holds);
}

#[test]
fn regression_anchor_gaussian_eps_0_1() {
    let run = run_comparison(
        &gaussian_params(0.1),
        &InitialData::gaussian(1.0),
        &ComparisonConfig::default(),
    )
    .unwrap();
    let expected = 1.771_060_736_729_784e-2;
    let got = run.report.sup_error_hs;
    assert!((got / expected - 1.0).abs() <= 1e-9, "sup error {got:.16e}");
}

#[test]
fn gronwall_needs_four_samples() {
    let trace = EnergyTrace::new(vec![0.0, 1.0, 2.0], vec![0.0; 3], 0.1, 1.0);
    assert!(gronwall_check(&trace, &gaussian_params(0.1)).is_err());
}
