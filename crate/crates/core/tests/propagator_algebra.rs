use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use paraxial::propagators::{
    helmholtz_energy_per_mode, helmholtz_evolve, relative_state_distance, schrodinger_evolve, BranchPolicy,
    HelmholtzState,
};
use paraxial::spectral::{
    l2s_norm_sq, mode_data, project_ell, project_hyp, Frame, KGrid, ModeData, Params, SpectralField,
};

const TOL: f64 = 1e-12;

fn setup(omega: f64) -> (Params, ModeData) {
    let params = Params::new(omega, 0.1, 1.0, 0, 4).unwrap();
    let grid = KGrid::new(omega, 12);
    (params, mode_data(&grid, &params))
}

fn random_field(rng: &mut StdRng, grid: KGrid, frame: Frame, mask: Option<&[f64]>) -> SpectralField {
    let mut f = SpectralField::zeros(grid, frame);
    for (idx, v) in f.values.iter_mut().enumerate() {
        if mask.is_none_or(|m| m[idx] == 1.0) {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    f
}

fn random_state(seed: u64, modes: &ModeData) -> HelmholtzState {
    let mut rng = StdRng::seed_from_u64(seed);
    let v = random_field(&mut rng, modes.grid, Frame::PhysicalK, Some(&modes.chi));
    let dv = random_field(&mut rng, modes.grid, Frame::PhysicalK, Some(&modes.chi));
    HelmholtzState::new(v, dv, 0.0).unwrap()
}

fn total_energy(state: &HelmholtzState, modes: &ModeData) -> f64 {
    helmholtz_energy_per_mode(state, modes).unwrap().iter().sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn helmholtz_group_property(seed in any::<u64>(), omega in 0.5f64..2.0, a in -40.0f64..40.0, b in -40.0f64..40.0) {
        let (_, modes) = setup(omega);
        let s0 = random_state(seed, &modes);
        let two_step = helmholtz_evolve(
            &helmholtz_evolve(&s0, &modes, a, BranchPolicy::HyperbolicOnly).unwrap(),
            &modes, b, BranchPolicy::HyperbolicOnly,
        ).unwrap();
        let one_step = helmholtz_evolve(&s0, &modes, a + b, BranchPolicy::HyperbolicOnly).unwrap();
        prop_assert!(relative_state_distance(&one_step, &two_step).unwrap() <= TOL);
        prop_assert!((two_step.z - (a + b)).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn helmholtz_conserves_energy(seed in any::<u64>(), omega in 0.5f64..2.0, z in 0.0f64..200.0) {
        let (_, modes) = setup(omega);
        let s0 = random_state(seed, &modes);
        let s1 = helmholtz_evolve(&s0, &modes, z, BranchPolicy::HyperbolicOnly).unwrap();
        let (e0, e1) = (total_energy(&s0, &modes), total_energy(&s1, &modes));
        prop_assert!((e1 - e0).abs() <= TOL * e0, "E0 = {e0}, E1 = {e1}");
    }

    #[test]
    fn helmholtz_is_reversible(seed in any::<u64>(), omega in 0.5f64..2.0, z in 0.0f64..100.0) {
        let (_, modes) = setup(omega);
        let s0 = random_state(seed, &modes);
        let forward = helmholtz_evolve(&s0, &modes, z, BranchPolicy::HyperbolicOnly).unwrap();
        let back = helmholtz_evolve(&forward, &modes, -z, BranchPolicy::HyperbolicOnly).unwrap();
        prop_assert!(relative_state_distance(&s0, &back).unwrap() <= TOL);
        prop_assert!(back.z.abs() <= 1e-12 * (1.0 + z));
    }

    #[test]
    fn schrodinger_is_unitary_group(seed in any::<u64>(), k_z in 0.5f64..2.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let params = Params::new(k_z, 0.1, 1.0, 0, 4).unwrap();
        let grid = KGrid::new(4.0, 16);
        let mut rng = StdRng::seed_from_u64(seed);
        let w0 = random_field(&mut rng, grid, Frame::SlowK, None);
        let wa = schrodinger_evolve(&w0, &params, a).unwrap();
        let wab = schrodinger_evolve(&wa, &params, b).unwrap();
        let direct = schrodinger_evolve(&w0, &params, a + b).unwrap();
        let n0 = l2s_norm_sq(&w0, 0.0);
        prop_assert!((l2s_norm_sq(&wab, 0.0) - n0).abs() <= TOL * n0);
        prop_assert!(l2s_norm_sq(&wab.sub(&direct).unwrap(), 0.0).sqrt() <= TOL * n0.sqrt());
    }

    #[test]
    fn cutoff_projections_partition(seed in any::<u64>(), omega in 0.5f64..2.0) {
        let (_, modes) = setup(omega);
        let mut rng = StdRng::seed_from_u64(seed);
        let f = random_field(&mut rng, modes.grid, Frame::PhysicalK, None);
        let hyp = project_hyp(&f, &modes).unwrap();
        let ell = project_ell(&f, &modes).unwrap();
        for idx in 0..f.values.len() {
            prop_assert_eq!(hyp.values[idx] + ell.values[idx], f.values[idx]);
            prop_assert!(hyp.values[idx] == Complex64::new(0.0, 0.0) || ell.values[idx] == Complex64::new(0.0, 0.0));
        }
        prop_assert_eq!(project_hyp(&hyp, &modes).unwrap(), hyp);
    }
}

#[test]
fn elliptic_amplitude_is_refused_under_hyperbolic_policy() {
    let (_, modes) = setup(1.0);
    let mut rng = StdRng::seed_from_u64(7);
    let v = random_field(&mut rng, modes.grid, Frame::PhysicalK, None);
    let state = HelmholtzState::new(v.clone(), SpectralField::zeros(modes.grid, Frame::PhysicalK), 0.0).unwrap();
    assert!(helmholtz_evolve(&state, &modes, 1.0, BranchPolicy::HyperbolicOnly).is_err());
    assert!(helmholtz_evolve(&state, &modes, 1.0, BranchPolicy::AllowElliptic).is_ok());
}
