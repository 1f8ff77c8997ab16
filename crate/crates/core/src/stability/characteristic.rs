//! Characteristic function of a cyclic model linearized at an equilibrium.
//!
//! Perturbing stage `i` around `x*` and taking Laplace transforms gives
//!
//! ```text
//! (λ + mu_i) Z_i = g_i f_i' L_i(λ) Z_{i-1} + (g_i' f_i - mu_i' x_i) Z_n,
//! ```
//!
//! all coefficients evaluated at the equilibrium (`f_i` at `x_{i-1}`,
//! `g_i`, `mu_i` at `x_n`). Eliminating `Z_1 .. Z_{n-1}` in order gives the
//! affine recursion `Z_i = P_i Z_n` with
//!
//! ```text
//! P_{-1} = 1,  P_i = a_i P_{i-1} + b_i,
//! a_i = g_i f_i' L_i / (λ + mu_i),  b_i = (g_i' f_i - mu_i' x_i) / (λ + mu_i),
//! ```
//!
//! and the scalar characteristic function
//!
//! ```text
//! Δ(λ) = λ + mu_n + mu_n' x_n - g_n' f_n - g_n f_n' L_n(λ) P_{n-2}.
//! ```
//!
//! With constant gates and clearances `b_i = 0`, `P_{n-2}` is the product
//! of `L_i f_i' g_i / (λ + mu_i)` and the kernel transforms multiply into
//! the transform of the convolved kernel. Multiplying by
//! `∏_{i<n-1} (λ + mu_i)` removes the poles; the cleared function equals
//! `det(λ I - J(λ))` for the delayed Jacobian `J`, which is used as a
//! build-time cross-check with finite-difference partial derivatives.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::DelayKernel;
use crate::model::CyclicModel;

use super::equilibria::stage_balance_residual;

/// Relative tolerance of the finite-difference determinant check.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-6;

/// Linearization coefficients of one stage at the equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageLinearization {
    /// `g_i f_i'(x_{i-1})`: gain on the delayed upstream perturbation.
    pub input_gain: f64,
    /// `g_i' f_i - mu_i' x_i`: direct sensitivity to the last compartment.
    pub last_gain: f64,
    pub mu: f64,
    pub f: f64,
    pub f_prime: f64,
    pub g: f64,
    pub g_prime: f64,
    pub mu_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFn {
    state: Vec<f64>,
    stages: Vec<StageLinearization>,
    kernels: Vec<DelayKernel>,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Builds `Δ` for `model` at the equilibrium `state` (all compartments).
pub fn build_characteristic(model: &CyclicModel, state: &[f64]) -> Result<CharacteristicFn> {
    model.ensure_valid()?;
    let n = model.n();
    if state.len() != n {
        return Err(Error::InvalidConfig(format!("equilibrium has {} values, model has {n} stages", state.len())));
    }
    let scale = state.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let res = stage_balance_residual(model, state);
    if !(res <= 1e-8 * scale) {
        return Err(Error::InvalidConfig(format!("state is not an equilibrium (residual {res:e})")));
    }
    let last = state[n - 1];
    let stages = (0..n)
        .map(|i| {
            let st = model.stage(i);
            let input = state[model.upstream(i)];
            let (f, f_prime) = (st.feedback.eval(input), st.feedback.derivative(input));
            let (g, g_prime) = (st.gate.eval(last), st.gate.derivative(last));
            let (mu, mu_prime) = (st.clearance.eval(last), st.clearance.derivative(last));
            StageLinearization {
                input_gain: g * f_prime,
                last_gain: g_prime * f - mu_prime * state[i],
                mu,
                f,
                f_prime,
                g,
                g_prime,
                mu_prime,
            }
        })
        .collect();
    let cf = CharacteristicFn {
        state: state.to_vec(),
        stages,
        kernels: model.stages().iter().map(|s| s.kernel.clone()).collect(),
    };
    let nonconstant = model
        .stages()
        .iter()
        .any(|s| s.gate.constant_value().is_none() || s.clearance.constant_value().is_none());
    if nonconstant {
        cf.cross_check(model)?;
    }
    Ok(cf)
}

impl CharacteristicFn {
    pub fn n(&self) -> usize {
        self.stages.len()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn x_star(&self) -> f64 {
        self.state[self.n() - 1]
    }

    pub fn stages(&self) -> &[StageLinearization] {
        &self.stages
    }

    /// `-mu_i` for every eliminated stage.
    pub fn poles(&self) -> Vec<f64> {
        self.stages[..self.n() - 1].iter().map(|s| -s.mu).collect()
    }

    fn transforms(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        self.kernels.iter().map(|k| k.laplace(lambda)).collect()
    }

    /// `Δ(λ)`.
    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        let n = self.n();
        for (i, s) in self.stages[..n - 1].iter().enumerate() {
            if lambda == c(-s.mu) {
                return Err(Error::PoleAtEvaluation(format!("{lambda} = -mu of stage {}", i + 1)));
            }
        }
        let l = self.transforms(lambda)?;
        let mut p = c(1.0);
        for (i, s) in self.stages[..n - 1].iter().enumerate() {
            let d = lambda + s.mu;
            p = (s.input_gain * l[i] * p + s.last_gain) / d;
        }
        let s = &self.stages[n - 1];
        Ok(lambda + s.mu - s.last_gain - s.input_gain * l[n - 1] * p)
    }

    /// `Δ(λ) ∏_{i<n-1} (λ + mu_i)`, entire whenever the kernel transforms are.
    pub fn eval_cleared(&self, lambda: Complex64) -> Result<Complex64> {
        let n = self.n();
        let l = self.transforms(lambda)?;
        // q = P_i D_i, d = D_i
        let (mut q, mut d) = (c(1.0), c(1.0));
        for (i, s) in self.stages[..n - 1].iter().enumerate() {
            q = s.input_gain * l[i] * q + s.last_gain * d;
            d *= lambda + s.mu;
        }
        let s = &self.stages[n - 1];
        Ok((lambda + s.mu - s.last_gain) * d - s.input_gain * l[n - 1] * q)
    }

    /// `∏_{i<n-1} (λ + mu_i)`.
    pub fn denominator(&self, lambda: Complex64) -> Complex64 {
        self.stages[..self.n() - 1].iter().map(|s| lambda + s.mu).product()
    }

    /// Product of all kernel transforms.
    pub fn kernel_product(&self, lambda: Complex64) -> Result<Complex64> {
        Ok(self.transforms(lambda)?.into_iter().product())
    }

    /// `det(λ I - J(λ))` with `J` built from finite-difference partials of
    /// the stage rates.
    pub fn jacobian_determinant(&self, model: &CyclicModel, lambda: Complex64) -> Result<Complex64> {
        let n = self.n();
        let l = self.transforms(lambda)?;
        let last = self.state[n - 1];
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let st = model.stage(i);
            let up = model.upstream(i);
            let (u, own) = (self.state[up], self.state[i]);
            let rate = |du: f64, down: f64, dlast: f64| st.rate(u + du, own + down, last + dlast);
            let d_input = central(|e| rate(e, 0.0, 0.0), u);
            let d_own = central(|e| rate(0.0, e, 0.0), own);
            let d_last = central(|e| rate(0.0, 0.0, e), last);
            m[(i, i)] += lambda - d_own;
            m[(i, up)] -= d_input * l[i];
            m[(i, n - 1)] -= c(d_last);
        }
        Ok(m.determinant())
    }

    fn cross_check(&self, model: &CyclicModel) -> Result<()> {
        let samples = [
            Complex64::new(0.37, 0.81),
            Complex64::new(1.3, -0.4),
            Complex64::new(0.6, 2.2),
            Complex64::new(2.5, 0.0),
        ];
        let mut worst = 0.0f64;
        for lambda in samples {
            let a = self.eval_cleared(lambda)?;
            let b = self.jacobian_determinant(model, lambda)?;
            worst = worst.max((a - b).norm() / a.norm().max(b.norm()).max(1e-300));
        }
        if worst > CROSS_CHECK_TOLERANCE {
            return Err(Error::CharacteristicMismatch(worst));
        }
        Ok(())
    }
}

/// Central difference of `f` at offset 0 around a point of magnitude `x`.
fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1e-3);
    (f(h) - f(-h)) / (2.0 * h)
}
