//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use cyclic_dde::model::ParamMap;
use cyclic_dde::{CyclicModel, DelayKernel, FeedbackFn, Stage, StateFn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Every constructible kernel kind, with parameters in the range the
/// presets and tests use.
pub fn fixture_kernels() -> Vec<DelayKernel> {
    let triangle_grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
    let triangle: Vec<f64> = triangle_grid.iter().map(|t| 1.0 - (t - 1.0).abs()).collect();
    let uniform_grid: Vec<f64> = (0..=300).map(|k| 0.5 + k as f64 * 0.01).collect();
    let uniform = vec![1.0 / 3.0; uniform_grid.len()];
    vec![
        DelayKernel::DiracAtZero,
        DelayKernel::dirac(1.5).unwrap(),
        DelayKernel::erlang(1, 2.0).unwrap(),
        DelayKernel::erlang(3, 1.0).unwrap(),
        DelayKernel::erlang(5, 0.5).unwrap(),
        DelayKernel::tabulated(triangle_grid, triangle).unwrap(),
        DelayKernel::tabulated(uniform_grid, uniform).unwrap(),
    ]
}

pub fn params(pairs: &[(&str, f64)]) -> ParamMap {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Relative L∞ over the samples of `a` against `b`.
pub fn rel_linf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale.max(f64::MIN_POSITIVE)
}

fn feedback(rng: &mut ChaCha8Rng) -> FeedbackFn {
    match rng.gen_range(0..3) {
        0 => FeedbackFn::Linear { alpha: rng.gen_range(0.2..2.0) },
        1 => FeedbackFn::HillUp {
            vmax: rng.gen_range(0.5..3.0),
            k: rng.gen_range(0.3..2.0),
            n: rng.gen_range(1.0..4.0),
        },
        _ => FeedbackFn::HillDown {
            vmax: rng.gen_range(0.5..3.0),
            k: rng.gen_range(0.3..2.0),
            n: rng.gen_range(1.0..6.0),
        },
    }
}

fn kernel(rng: &mut ChaCha8Rng, h: f64) -> DelayKernel {
    match rng.gen_range(0..3) {
        0 => DelayKernel::DiracAtZero,
        1 => DelayKernel::dirac((rng.gen_range(h..3.0) / h).round() * h).unwrap(),
        _ => DelayKernel::erlang(rng.gen_range(1..5), rng.gen_range(1.0..4.0)).unwrap(),
    }
}

fn clearance(rng: &mut ChaCha8Rng) -> StateFn {
    match rng.gen_range(0..3) {
        0 => StateFn::constant(rng.gen_range(0.1..2.0)),
        // bounded, possibly negative at small x (net growth)
        1 => StateFn::HillGate {
            a: -rng.gen_range(0.0..0.5),
            k: rng.gen_range(0.2..2.0),
            offset: rng.gen_range(0.3..1.5),
        },
        _ => StateFn::SaturatingLoss {
            alpha: rng.gen_range(0.3..2.0),
            beta: rng.gen_range(0.0..0.3),
            k: rng.gen_range(0.5..2.0),
        },
    }
}

fn gate(rng: &mut ChaCha8Rng) -> StateFn {
    if rng.gen_bool(0.5) {
        StateFn::ONE
    } else {
        let alpha = rng.gen_range(0.5..2.0);
        StateFn::SaturatingLoss {
            alpha,
            beta: rng.gen_range(0.0..alpha),
            k: rng.gen_range(0.5..2.0),
        }
    }
}

/// Random model with non-negative feedbacks and gates, bounded clearances
/// and kernels representable on a grid of step `h`.
pub fn random_positive_model(rng: &mut ChaCha8Rng, h: f64) -> CyclicModel {
    let n = rng.gen_range(2..6);
    let stages = (0..n)
        .map(|_| Stage::new(feedback(rng), kernel(rng, h), gate(rng), clearance(rng)))
        .collect();
    CyclicModel::new(stages)
}

/// Random chain with linear feedbacks, Erlang or Dirac kernels and constant
/// clearances.
pub fn random_linear_chain(rng: &mut ChaCha8Rng) -> CyclicModel {
    let n = rng.gen_range(2..6);
    let stages = (0..n)
        .map(|_| {
            let k = if rng.gen_bool(0.7) {
                DelayKernel::erlang(rng.gen_range(1..6), rng.gen_range(0.5..3.0)).unwrap()
            } else {
                DelayKernel::dirac(rng.gen_range(0.0..2.0)).unwrap()
            };
            Stage::simple(FeedbackFn::Linear { alpha: rng.gen_range(0.2..3.0) }, rng.gen_range(0.3..2.0)).with_kernel(k)
        })
        .collect();
    CyclicModel::new(stages)
}
