mod common;

use cyclic_dde::equivalence::{check_equivalence, EquivalenceConfig, EquivalenceMode};
use cyclic_dde::reduction::{nested_g, partial_reduce, QuadratureSettings};
use cyclic_dde::simulate::{integrate_cyclic, required_history};
use cyclic_dde::stability::equilibrium_state;
use cyclic_dde::{SimConfig, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_history_composes_to_stationary_values(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_positive_model(&mut rng, 0.01);
        let x = rng.gen_range(0.2..3.0);
        let Ok(composed) = equilibrium_state(&m, x) else { return Ok(()) };
        let psi = Trajectory::constant(&[x], 0.01, 10.0).unwrap();
        for depth in 1..m.n() {
            let g = nested_g(&m, depth, &psi, 0.0, &QuadratureSettings::default()).unwrap();
            let want = composed[depth - 1];
            prop_assert!((g - want).abs() <= 1e-9 * want.abs().max(1.0), "depth {depth}: {g} vs {want}");
        }
    }

    #[test]
    fn eliminating_all_intermediates_keeps_the_last_compartment(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 0.01;
        let m = common::random_positive_model(&mut rng, h);
        let x0: Vec<f64> = (0..m.n()).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut cfg = EquivalenceConfig::reduction(SimConfig::new(h, 20.0));
        cfg.mode = EquivalenceMode::Reduction { eliminate: Some((0..m.last()).collect()) };
        cfg.initial = Some(x0);
        let rep = check_equivalence(&m, &cfg).unwrap();
        prop_assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn empty_elimination_reproduces_the_full_model(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 0.02;
        let m = common::random_positive_model(&mut rng, h);
        let x0: Vec<f64> = (0..m.n()).map(|_| rng.gen_range(0.1..2.0)).collect();
        let cfg = SimConfig::new(h, 10.0);
        let span = required_history(&m, h, cfg.tail_mass).unwrap();
        let hist = Trajectory::constant(&x0, h, span).unwrap();
        let full = integrate_cyclic(&m, &hist, &cfg).unwrap();
        let reduced = partial_reduce(&m, &[]).unwrap().integrate(&hist, &cfg).unwrap();
        prop_assert_eq!(full.columns(), reduced.columns());
    }
}

#[test]
fn non_contiguous_or_last_stage_elimination_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = loop {
        let m = common::random_positive_model(&mut rng, 0.01);
        if m.n() >= 4 {
            break m;
        }
    };
    assert!(partial_reduce(&m, &[0, 2]).is_err());
    assert!(partial_reduce(&m, &[m.last()]).is_err());
    assert!(partial_reduce(&m, &[1, 2]).is_ok());
}
