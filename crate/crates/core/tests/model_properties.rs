use probtune_core::models::{barabasi_albert, make_diffusive, make_kuramoto, KuramotoConfig};
use probtune_core::{
    integrate, output_trajectory, sample_inputs, InputEnsembleSpec, ParamDomain, SystemFamily, TimeGrid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn diffusive_trajectories_stay_bounded() {
    let grid = TimeGrid::new(10.0, 0.01).unwrap();
    let sys = make_diffusive(barabasi_albert(10, 2, 42).unwrap());
    let inputs = sample_inputs(&InputEnsembleSpec::new(10, 77), 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for input in &inputs {
        let p: Vec<f64> = (0..10)
            .map(|_| rng.random_range(-10f64.ln()..10f64.ln()).exp())
            .collect();
        let traj = integrate(&sys, &p, input, &grid).unwrap();
        let peak = traj.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 1e3, "peak {peak}");
    }
}

#[test]
fn one_node_network_is_the_single_oscillator() {
    let grid = TimeGrid::new(5.0, 0.01).unwrap();
    let one = make_kuramoto(KuramotoConfig::generate(1, 3, 1.0, 2.0)).unwrap();
    let spec = make_kuramoto(KuramotoConfig::single_oscillator()).unwrap();
    assert_eq!(one.param_dim(), 1);
    for input in sample_inputs(&InputEnsembleSpec::new(6, 5), 5).unwrap() {
        let a = output_trajectory(&one, &[0.7], &input, &grid).unwrap();
        let b = output_trajectory(&spec, &[0.7], &input, &grid).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn generated_frequencies_are_normalized() {
    for seed in 0..50 {
        for spread in [1.0, 1.2, 4.5] {
            let cfg = KuramotoConfig::generate(10, seed, 1.0, spread);
            let omegas = cfg.scaled_omegas();
            assert_eq!(omegas[0], 0.0);
            let mean = omegas.iter().sum::<f64>() / 10.0;
            assert!(mean.abs() < 1e-12);
            cfg.validate().unwrap();
        }
    }
}

proptest! {
    #[test]
    fn decoded_parameters_are_positive(theta in proptest::collection::vec(-700.0f64..700.0, 1..12)) {
        let domain = ParamDomain::all_positive(theta.len());
        let p = domain.decode(&theta);
        prop_assert!(p.iter().all(|v| *v > 0.0 && v.is_finite()));
    }

    #[test]
    fn search_box_keeps_parameters_in_range(theta in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
        let domain = ParamDomain::all_positive(theta.len());
        let (lo, hi) = domain.positive_range().unwrap();
        let mut t = theta.clone();
        domain.search_box().project(&mut t);
        for v in domain.decode(&t) {
            prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
        }
    }
}
