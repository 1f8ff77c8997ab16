mod common;

use cyclic_dde::model::{preset, Preset};
use cyclic_dde::simulate::{integrate_cyclic, required_history};
use cyclic_dde::stability::find_equilibria;
use cyclic_dde::{CyclicModel, DelayKernel, FeedbackFn, SimConfig, Stage, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(m: &CyclicModel, x0: &[f64], cfg: SimConfig) -> Trajectory {
    let span = required_history(m, cfg.h, cfg.tail_mass).unwrap();
    integrate_cyclic(m, &Trajectory::constant(x0, cfg.h, span).unwrap(), &cfg).unwrap()
}

#[test]
fn rk4_is_fourth_order_without_delays() {
    let m = preset(Preset::Goodwin, &common::params(&[("n", 4.0), ("vmax", 3.0)])).unwrap().model;
    let x0 = [0.2, 1.5, 0.7];
    let reference = run(&m, &x0, SimConfig::new(0.0025, 5.0)).last_row();
    let err = |h: f64| {
        let end = run(&m, &x0, SimConfig::new(h, 5.0)).last_row();
        end.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "{e1:e} / {e2:e} = {ratio}");
}

#[test]
fn dirac_models_ignore_tail_mass() {
    let mut m = preset(Preset::Goodwin, &common::params(&[("n", 4.0)])).unwrap().model;
    m.stage_mut(2).kernel = DelayKernel::dirac(1.3).unwrap();
    let a = run(&m, &[1.0, 0.5, 0.2], SimConfig::new(0.01, 20.0).with_tail_mass(1e-4));
    let b = run(&m, &[1.0, 0.5, 0.2], SimConfig::new(0.01, 20.0).with_tail_mass(1e-12));
    assert_eq!(a.columns(), b.columns());
}

#[test]
fn equilibrium_history_is_stationary() {
    for p in [Preset::Goodwin, Preset::Yildirim, Preset::Knauer] {
        let m = preset(p, &Default::default()).unwrap().model;
        let eq = find_equilibria(&m, [0.0, 100.0], 2000).unwrap();
        let x = &eq.positive().next().unwrap().state;
        let tr = run(&m, x, SimConfig::new(0.01, 20.0));
        for (c, xc) in x.iter().enumerate() {
            let drift = tr.column(c).iter().map(|v| (v - xc).abs()).fold(0.0, f64::max);
            assert!(drift <= 1e-10 * xc.max(1.0), "{p} compartment {c}: {drift:e}");
        }
    }
}

#[test]
fn erlang_chain_reaches_linear_steady_state() {
    // x1' = 1 - x1 fed through Erlang(3, 2): x2' = (K * x1) - x2 tends to 1
    let m = CyclicModel::new(vec![
        Stage::simple(FeedbackFn::Constant { value: 1.0 }, 1.0),
        Stage::simple(FeedbackFn::Linear { alpha: 1.0 }, 1.0).with_kernel(DelayKernel::erlang(3, 2.0).unwrap()),
    ]);
    let tr = run(&m, &[0.0, 0.0], SimConfig::new(0.01, 60.0));
    let end = tr.last_row();
    assert!((end[0] - 1.0).abs() < 1e-9 && (end[1] - 1.0).abs() < 1e-9, "{end:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nonnegative_data_stays_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 0.02;
        let m = common::random_positive_model(&mut rng, h);
        let x0: Vec<f64> = (0..m.n()).map(|_| rng.gen_range(0.0..3.0)).collect();
        let tr = run(&m, &x0, SimConfig::new(h, 30.0));
        let min = tr.columns().iter().flatten().fold(f64::INFINITY, |a, v| a.min(*v));
        prop_assert!(min >= -1e-9, "{min:e}");
    }
}
