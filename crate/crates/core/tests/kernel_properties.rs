mod common;

use cyclic_dde::{Complex64, DelayKernel};
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = DelayKernel> {
    prop_oneof![
        (0.0f64..5.0).prop_map(|tau| DelayKernel::dirac(tau).unwrap()),
        (1u32..8, 0.2f64..5.0).prop_map(|(j, r)| DelayKernel::erlang(j, r).unwrap()),
        // piecewise-linear bumps on a shifted grid
        (0.0f64..2.0, 0.5f64..3.0, prop::collection::vec(0.0f64..1.0, 3..12)).prop_map(|(start, width, heights)| {
            let nodes = 4 * heights.len() + 1;
            let grid: Vec<f64> = (0..nodes).map(|k| start + width * k as f64 / (nodes - 1) as f64).collect();
            let mut density: Vec<f64> = grid
                .iter()
                .map(|t| {
                    let u = (t - start) / width * (heights.len() - 1) as f64;
                    let i = (u.floor() as usize).min(heights.len() - 2);
                    let w = u - i as f64;
                    0.05 + heights[i] * (1.0 - w) + heights[i + 1] * w
                })
                .collect();
            let mass: f64 = grid.windows(2).zip(density.windows(2)).map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1])).sum();
            density.iter_mut().for_each(|d| *d /= mass);
            DelayKernel::tabulated(grid, density).unwrap()
        }),
    ]
}

fn sample_lambdas() -> [Complex64; 4] {
    [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(2.0, -3.0),
    ]
}

fn is_tabulated(k: &DelayKernel) -> bool {
    matches!(k, DelayKernel::Tabulated { .. })
}

#[test]
fn fixture_kernels_have_unit_transform_at_zero() {
    for k in common::fixture_kernels() {
        let l0 = k.laplace(Complex64::new(0.0, 0.0)).unwrap();
        assert!((l0 - 1.0).norm() <= 1e-8, "{k}: {l0}");
    }
}

#[test]
fn fixture_erlangs_satisfy_the_chain_generator() {
    // d/ds g^i = V (g^{i-1} - g^i), with g^0 read as the point mass at 0
    let eps = 1e-6;
    for (shape, rate) in [(1u32, 2.0f64), (2, 1.0), (3, 1.0), (5, 0.5), (7, 3.0)] {
        let g = |j: u32, s: f64| DelayKernel::erlang(j, rate).unwrap().pdf(s).unwrap();
        for k in 1..60 {
            let s = k as f64 * 0.25 / rate;
            let fd = (g(shape, s + eps) - g(shape, s - eps)) / (2.0 * eps);
            let prev = if shape == 1 { 0.0 } else { g(shape - 1, s) };
            let gen = rate * (prev - g(shape, s));
            assert!((fd - gen).abs() <= 1e-5, "shape {shape} rate {rate} s {s}: {fd} vs {gen}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_at_zero_is_one(k in kernel_strategy()) {
        let l0 = k.laplace(Complex64::new(0.0, 0.0)).unwrap();
        prop_assert!((l0 - 1.0).norm() <= 1e-8, "{k}: {l0}");
    }

    #[test]
    fn transform_slope_at_zero_is_minus_mean(k in kernel_strategy()) {
        let eps = 1e-5;
        let plus = k.laplace(Complex64::new(eps, 0.0)).unwrap();
        let minus = k.laplace(Complex64::new(-eps, 0.0)).unwrap();
        let slope = -(plus - minus).re / (2.0 * eps);
        prop_assert!((slope - k.mean()).abs() <= 1e-4, "{k}: {slope} vs {}", k.mean());
    }

    #[test]
    fn convolution_factorizes_transforms(a in kernel_strategy(), b in kernel_strategy()) {
        let c = a.convolve(&b);
        let tol = if is_tabulated(&c) { 1e-6 } else { 1e-12 };
        for lambda in sample_lambdas() {
            let lhs = c.laplace(lambda).unwrap();
            let rhs = a.laplace(lambda).unwrap() * b.laplace(lambda).unwrap();
            prop_assert!((lhs - rhs).norm() <= tol * rhs.norm().max(1.0), "{a} * {b} at {lambda}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn convolution_adds_means(a in kernel_strategy(), b in kernel_strategy()) {
        let c = a.convolve(&b);
        prop_assert!((c.mean() - a.mean() - b.mean()).abs() <= 1e-6, "{a} * {b}");
    }

    #[test]
    fn erlang_generator_identity(shape in 1u32..9, rate in 0.2f64..5.0, s_frac in 0.01f64..4.0) {
        let s = s_frac * shape as f64 / rate;
        let eps = 1e-6 * (1.0 + s);
        let g = |j: u32, t: f64| DelayKernel::erlang(j, rate).unwrap().pdf(t).unwrap();
        let fd = (g(shape, s + eps) - g(shape, s - eps)) / (2.0 * eps);
        let prev = if shape == 1 { 0.0 } else { g(shape - 1, s) };
        prop_assert!((fd - rate * (prev - g(shape, s))).abs() <= 1e-5);
    }

    #[test]
    fn horizon_bounds_the_tail(shape in 1u32..9, rate in 0.2f64..5.0, tail_exp in 3i32..13) {
        let tail = 10f64.powi(-tail_exp);
        let k = DelayKernel::erlang(shape, rate).unwrap();
        let t = k.horizon(tail).unwrap();
        // survival of Erlang(j, V) at t is e^{-Vt} Σ_{m<j} (Vt)^m / m!
        let x = rate * t;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..shape {
            term *= x / m as f64;
            sum += term;
        }
        let survival = (-x).exp() * sum;
        prop_assert!(survival <= tail * (1.0 + 1e-9), "{k}: S({t}) = {survival:e} > {tail:e}");
    }
}
