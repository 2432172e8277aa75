//! Cross-module checks on the public API.

use proptest::prelude::*;
use tomochaos_core::dynamics::{heisenberg_sequence, kicked_top_unitary, perturb, PerturbationSpec};
use tomochaos_core::metrics;
use tomochaos_core::operator_space::{angular_momentum, hermitian_basis, random_observable, random_pure_state, SpinSystem};
use tomochaos_core::rmt::{self, EnsembleKind, EnsembleSpec};
use tomochaos_core::scrambling::{self, KrylovOptions};
use tomochaos_core::seed::rng_from_seed;
use tomochaos_core::tomography::{
    design_matrix, simulate_record, EnsemblePlan, InversionPlan, InversionSettings, MeasurementModel,
};
use tomochaos_core::Execution;

#[test]
fn design_rows_reproduce_noiseless_record() {
    let sys = SpinSystem::new(2.0).unwrap();
    let basis = hermitian_basis(5).unwrap();
    let u = kicked_top_unitary(sys, 3.0, 1.4).unwrap();
    let mut rng = rng_from_seed(21);
    let o = random_observable(5, &mut rng);
    let rho0 = random_pure_state(5, &mut rng);
    let model = MeasurementModel::new(0.0, 30).unwrap();
    let rec = simulate_record(&rho0, &o, &u, &model, &mut rng).unwrap();
    let dm = design_matrix(&o, &u, 30, &basis).unwrap();
    let pred = dm.predict(rho0.bloch());
    // Heisenberg orbit straight from dynamics: M_n = Tr(O_n ρ0).
    let orbit = heisenberg_sequence(&o, &u, 30).unwrap();
    for n in 0..30 {
        let direct = (orbit[n + 1].matrix() * rho0.rho()).trace().re;
        assert!((rec.values[n] - direct).abs() < 1e-12);
        assert!((pred[n] - direct).abs() < 1e-12);
    }
}

#[test]
fn ensemble_plan_is_policy_independent() {
    let sys = SpinSystem::new(2.0).unwrap();
    let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
    let o = angular_momentum(sys).2.normalized().unwrap();
    let model = MeasurementModel::new(0.01, 20).unwrap();
    let settings = InversionSettings::default();
    let seeds = [1, 2, 3, 4];
    let a = EnsemblePlan::new(&o, &u, model, &settings, &[10, 20], Execution::Sequential)
        .unwrap()
        .run(&seeds, Execution::Sequential)
        .unwrap();
    let b = EnsemblePlan::new(&o, &u, model, &settings, &[10, 20], Execution::Parallel)
        .unwrap()
        .run(&seeds, Execution::Parallel)
        .unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.record, y.record);
        assert_eq!(x.reports, y.reports);
    }
}

#[test]
fn sampling_is_policy_independent() {
    let spec = EnsembleSpec::new(EnsembleKind::Gue, 12).unwrap();
    assert_eq!(
        rmt::sample_levels(&spec, 6, 9, Execution::Sequential).unwrap(),
        rmt::sample_levels(&spec, 6, 9, Execution::Parallel).unwrap()
    );
    let u = rmt::haar_unitary(4, &mut rng_from_seed(4));
    let s = scrambling::average_otoc(&u, 2, 2, 20, 5, Execution::Sequential).unwrap();
    let p = scrambling::average_otoc(&u, 2, 2, 20, 5, Execution::Parallel).unwrap();
    assert_eq!(s, p);
}

#[test]
fn chaotic_information_spectrum_is_flatter() {
    // The chaotic record spreads over more Bloch directions, so its
    // information spectrum is flatter than the regular one at equal trace.
    let sys = SpinSystem::new(3.0).unwrap();
    let basis = hermitian_basis(7).unwrap();
    let o = random_observable(7, &mut rng_from_seed(8));
    let spectral = |lambda: f64| {
        let u = kicked_top_unitary(sys, lambda, 1.4).unwrap();
        InversionPlan::new(design_matrix(&o, &u, 80, &basis).unwrap(), &InversionSettings::default())
            .unwrap()
            .spectral
    };
    let (reg, cha) = (spectral(0.5), spectral(7.0));
    assert!((reg.trace_cinv - cha.trace_cinv).abs() < 1e-8 * reg.trace_cinv);
    assert!(cha.shannon_entropy > reg.shannon_entropy);
}

#[test]
fn krylov_dimension_bounds_design_rank() {
    let sys = SpinSystem::new(2.0).unwrap();
    let basis = hermitian_basis(5).unwrap();
    let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
    let o = random_observable(5, &mut rng_from_seed(30)).normalized().unwrap();
    let k = scrambling::krylov_basis(&o, &u, &KrylovOptions::default()).unwrap();
    let plan = InversionPlan::new(design_matrix(&o, &u, 200, &basis).unwrap(), &InversionSettings::default()).unwrap();
    assert_eq!(plan.spectral.rank, 21);
    assert!(k.dim() >= plan.spectral.rank);
    assert!(k.dim() <= 25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn otoc_matches_commutator_expansion(seed in any::<u64>(), lambda in 0.0..8.0f64, n in 0usize..6) {
        let sys = SpinSystem::new(1.5).unwrap();
        let u = kicked_top_unitary(sys, lambda, 1.4).unwrap();
        let mut rng = rng_from_seed(seed);
        let w = random_observable(4, &mut rng);
        let v = random_observable(4, &mut rng);
        let a = scrambling::otoc(&w, &v, &u, n, None).unwrap();
        let b = scrambling::otoc_expansion(&w, &v, &u, n).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn echoes_are_bounded(seed in any::<u64>(), delta in -0.5..0.5f64) {
        let sys = SpinSystem::new(2.0).unwrap();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let up = perturb(&u, &PerturbationSpec::new("lambda", delta)).unwrap();
        let psi = tomochaos_core::operator_space::random_ket(5, &mut rng_from_seed(seed));
        for v in scrambling::loschmidt_echo_curve(&psi, &u, &up, 20).unwrap() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn reconstruction_is_a_state(seed in any::<u64>()) {
        let sys = SpinSystem::new(1.0).unwrap();
        let basis = hermitian_basis(3).unwrap();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let o = angular_momentum(sys).2.normalized().unwrap();
        let model = MeasurementModel::new(0.05, 30).unwrap();
        let mut rng = rng_from_seed(seed);
        let rho0 = random_pure_state(3, &mut rng);
        let res = tomochaos_core::tomography::reconstruct(&rho0, &o, &u, &model, &InversionSettings::default(), &basis, &mut rng).unwrap();
        let ev = tomochaos_core::linalg::hermitian_eigen(&res.rho_bar).0;
        prop_assert!(ev[0] >= -1e-9);
        prop_assert!((res.rho_bar.trace().re - 1.0).abs() < 1e-10);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&res.diagnostics.fidelity));
        let dist = metrics::hs_distance(rho0.rho(), &res.rho_bar);
        prop_assert!((0.0..=2.0 + 1e-9).contains(&dist));
    }
}
