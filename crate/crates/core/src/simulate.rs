//! Fixed-step RK4 integration of cyclic models from history data.
//!
//! Stage inputs are evaluated per kernel kind:
//!
//! * `DiracAtZero`: the upstream value of the current RK stage state;
//! * `Dirac(tau)`: linear interpolation of stored values at `t - tau`
//!   (method of steps, requires `h <= tau`);
//! * Erlang / tabulated: trapezoid quadrature over the truncated kernel
//!   support on the simulation grid. The `s = 0` node uses the RK stage
//!   state, older nodes use stored values, and half-step substeps use the
//!   mean of the two neighbouring node sums.
//!
//! Quadrature weights are renormalised to unit mass so that constant
//! histories are reproduced exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{check_tail_mass, erlang_pdf, DelayKernel};
use crate::model::{CyclicModel, FeedbackFn, Stage, StateFn};
use crate::trajectory::{steps_for, Trajectory};

pub const DEFAULT_TAIL_MASS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub h: f64,
    pub t_end: f64,
    pub tail_mass: f64,
    pub method: Method,
}

impl SimConfig {
    pub fn new(h: f64, t_end: f64) -> Self {
        SimConfig {
            h,
            t_end,
            tail_mass: DEFAULT_TAIL_MASS,
            method: Method::Rk4,
        }
    }

    pub fn with_tail_mass(mut self, tail_mass: f64) -> Self {
        self.tail_mass = tail_mass;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidConfig(format!("h must be > 0, got {}", self.h)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::InvalidConfig("t_end must be finite".into()));
        }
        check_tail_mass(self.tail_mass)
    }
}

/// Normalised trapezoid weights `w_j` for `K(j h)`, `j = 0..=J`, covering
/// the kernel support up to its horizon at `tail_mass`.
pub(crate) fn kernel_weights(kernel: &DelayKernel, h: f64, tail_mass: f64) -> Result<Vec<f64>> {
    let horizon = kernel.horizon(tail_mass)?;
    let steps = steps_for(horizon, h).max(1);
    let mut w: Vec<f64> = (0..=steps)
        .map(|j| {
            let s = j as f64 * h;
            match kernel {
                DelayKernel::Erlang { shape, rate } => erlang_pdf(*shape, *rate, s),
                other => other.pdf(s).unwrap_or(0.0),
            }
        })
        .collect();
    w[0] *= 0.5;
    w[steps] *= 0.5;
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidKernel(format!(
            "kernel {kernel} has no mass on a grid of step {h}"
        )));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

enum InputRule {
    Instant,
    /// Delay in units of `h`.
    Lag(f64),
    Distributed(Vec<f64>),
}

fn input_rules(m: &CyclicModel, h: f64, tail_mass: f64) -> Result<Vec<InputRule>> {
    m.stages()
        .iter()
        .map(|st| {
            Ok(match &st.kernel {
                DelayKernel::DiracAtZero => InputRule::Instant,
                DelayKernel::Dirac { tau } => {
                    if h > *tau * (1.0 + 1e-12) {
                        return Err(Error::StepTooLarge { h, tau: *tau });
                    }
                    InputRule::Lag(tau / h)
                }
                k => InputRule::Distributed(kernel_weights(k, h, tail_mass)?),
            })
        })
        .collect()
}

/// History length required by `m` on a grid of step `h`.
pub fn required_history(m: &CyclicModel, h: f64, tail_mass: f64) -> Result<f64> {
    let mut need: f64 = 0.0;
    for st in m.stages() {
        let span = match &st.kernel {
            DelayKernel::DiracAtZero => 0.0,
            DelayKernel::Dirac { tau } => *tau,
            k => steps_for(k.horizon(tail_mass)?, h).max(1) as f64 * h,
        };
        need = need.max(span);
    }
    Ok(need)
}

/// Integrates `m` from the end of `history` to `cfg.t_end`. The returned
/// trajectory contains the history followed by the new samples.
pub fn integrate_cyclic(m: &CyclicModel, history: &Trajectory, cfg: &SimConfig) -> Result<Trajectory> {
    integrate_with_block(m, history, cfg, None)
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn stage_input(
    rule: &InputRule,
    up: usize,
    c: f64,
    x: &[f64],
    k: usize,
    tr: &Trajectory,
    sum_now: f64,
    sum_next: f64,
) -> f64 {
    match rule {
        InputRule::Instant => x[up],
        InputRule::Lag(lag) => tr.interp_unchecked(up, k as f64 + c - lag),
        InputRule::Distributed(w) => {
            let older = if c == 0.0 {
                sum_now
            } else if c == 1.0 {
                sum_next
            } else {
                0.5 * (sum_now + sum_next)
            };
            w[0] * x[up] + older
        }
    }
}

/// Advances a stage integral `x(t) = ∫_0^∞ R(t-s) exp(-∫_{t-s}^t mu) ds`
/// by `dt`, with `R` linear and `mu` held at its mean over the step:
///
/// ```text
/// x(t + dt) = e^{-a} x(t) + ∫_0^dt R(t + dt - s) e^{-mu s} ds,  a = mu dt.
/// ```
///
/// Exact for constant data, so the fixed point is `R / mu`.
#[inline]
pub(crate) fn stage_integral_step(x: f64, r_prev: f64, r: f64, mu_prev: f64, mu: f64, dt: f64) -> f64 {
    let a = 0.5 * (mu_prev + mu) * dt;
    // phi0 = ∫_0^1 e^{-a u} du, phi1 = ∫_0^1 u e^{-a u} du
    let (phi0, phi1) = if a.abs() < 1e-3 {
        (
            1.0 - a / 2.0 + a * a / 6.0 - a * a * a / 24.0,
            0.5 - a / 3.0 + a * a / 8.0 - a * a * a / 30.0,
        )
    } else {
        let em1 = (-a).exp_m1();
        (-em1 / a, (-em1 - a * (em1 + 1.0)) / (a * a))
    };
    (-a).exp() * x + dt * (phi1 * r_prev + (phi0 - phi1) * r)
}

/// RK4 driver shared with partial reduction. Compartments in `block` are
/// not integrated: at every substep they are set to the continuation of
/// their stage integral from the last accepted node by
/// [`stage_integral_step`]. Applied node to node this is the same
/// quadrature the reduction sweeps use, so accepted eliminated values are
/// quadrature values. `history` must already hold stage-integral values in
/// those columns.
pub(crate) fn integrate_with_block(
    m: &CyclicModel,
    history: &Trajectory,
    cfg: &SimConfig,
    block: Option<std::ops::Range<usize>>,
) -> Result<Trajectory> {
    cfg.check()?;
    m.ensure_valid()?;
    let n = m.n();
    if history.n_compartments() != n {
        return Err(Error::InvalidConfig(format!(
            "history has {} compartments, model has {n}",
            history.n_compartments()
        )));
    }
    let h = cfg.h;
    let mut tr = history.resample(h)?;
    let t_begin = tr.end();
    if cfg.t_end <= t_begin {
        return Err(Error::InvalidConfig(format!(
            "t_end = {} must exceed the history end {t_begin}",
            cfg.t_end
        )));
    }
    let needed = required_history(m, h, cfg.tail_mass)?;
    let available = t_begin - tr.start();
    if available + 1e-9 * h < needed {
        return Err(Error::InsufficientHistory { needed, available });
    }
    let rules = input_rules(m, h, cfg.tail_mass)?;
    let upstream: Vec<usize> = (0..n).map(|i| m.upstream(i)).collect();
    let block = block.unwrap_or(0..0);
    let last = m.last();
    let steps = steps_for(cfg.t_end - t_begin, h);

    // sum_{j >= 1} w_j x[k - j] for the current node and x[k + 1 - j] for the next
    let mut sum_now = vec![0.0; n];
    let mut sum_next = vec![0.0; n];
    let k0 = tr.len() - 1;
    for (i, rule) in rules.iter().enumerate() {
        if let InputRule::Distributed(w) = rule {
            let xs = tr.column(upstream[i]);
            sum_now[i] = w.iter().skip(1).enumerate().map(|(j, wj)| wj * xs[k0 - (j + 1)]).sum();
        }
    }

    let mut state = tr.row(k0);
    let mut node_state = state.clone();
    let mut node_prod = vec![0.0; n];
    let mut node_mu = vec![0.0; n];
    for e in block.clone() {
        let u = stage_input(&rules[e], upstream[e], 0.0, &state, k0, &tr, sum_now[e], 0.0);
        node_prod[e] = m.stage(e).production(u, state[last]);
        node_mu[e] = m.stage(e).clearance.eval(state[last]);
    }
    let mut sub_prod = vec![0.0; n];
    let mut sub_mu = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut inputs = vec![0.0; n];

    for _ in 0..steps {
        let k = tr.len() - 1;
        for (i, rule) in rules.iter().enumerate() {
            if let InputRule::Distributed(w) = rule {
                let xs = tr.column(upstream[i]);
                sum_next[i] = w.iter().skip(1).enumerate().map(|(j, wj)| wj * xs[k - j]).sum();
            }
        }
        let fill = |c: f64, x: &mut [f64], prod: &mut [f64], mu: &mut [f64]| {
            let ch = c * h;
            for e in block.clone() {
                let u = stage_input(&rules[e], upstream[e], c, x, k, &tr, sum_now[e], sum_next[e]);
                prod[e] = m.stage(e).production(u, x[last]);
                mu[e] = m.stage(e).clearance.eval(x[last]);
                x[e] = stage_integral_step(node_state[e], node_prod[e], prod[e], node_mu[e], mu[e], ch);
            }
        };
        let mut eval = |c: f64, x: &[f64], out: &mut [f64]| {
            for (i, rule) in rules.iter().enumerate() {
                inputs[i] = stage_input(rule, upstream[i], c, x, k, &tr, sum_now[i], sum_next[i]);
            }
            m.rhs(x, &inputs, out);
            for e in block.clone() {
                out[e] = 0.0;
            }
        };
        eval(0.0, &state, &mut k1);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        fill(0.5, &mut tmp, &mut sub_prod, &mut sub_mu);
        eval(0.5, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k2[i];
        }
        fill(0.5, &mut tmp, &mut sub_prod, &mut sub_mu);
        eval(0.5, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = state[i] + h * k3[i];
        }
        fill(1.0, &mut tmp, &mut sub_prod, &mut sub_mu);
        eval(1.0, &tmp, &mut k4);
        for i in 0..n {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        fill(1.0, &mut state, &mut sub_prod, &mut sub_mu);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "solution blew up near t = {}",
                tr.time(k + 1)
            )));
        }
        tr.push(&state);
        node_state.copy_from_slice(&state);
        for e in block.clone() {
            node_prod[e] = sub_prod[e];
            node_mu[e] = sub_mu[e];
        }
        std::mem::swap(&mut sum_now, &mut sum_next);
    }
    Ok(tr)
}

/// Position of one auxiliary transit chain inside an expanded model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitChain {
    /// Original stage whose Erlang input the chain replaces.
    pub stage: usize,
    pub shape: u32,
    pub rate: f64,
    /// Expanded index of the first auxiliary compartment.
    pub first: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LctExpansion {
    pub model: CyclicModel,
    /// Expanded index of each original compartment.
    pub original_index: Vec<usize>,
    pub chains: Vec<TransitChain>,
}

/// Replaces each Erlang(j, V) edge by `j` linear transit compartments with
/// rate `V`. Dirac edges are kept; tabulated kernels have no finite chain.
pub fn expand_erlang_lct(m: &CyclicModel) -> Result<LctExpansion> {
    m.ensure_valid()?;
    let mut stages = Vec::new();
    let mut labels = Vec::new();
    let mut original_index = Vec::with_capacity(m.n());
    let mut chains = Vec::new();
    for (i, st) in m.stages().iter().enumerate() {
        match &st.kernel {
            DelayKernel::Tabulated { .. } => {
                return Err(Error::UnsupportedKernel(format!(
                    "stage {} has a tabulated kernel; no finite transit chain exists",
                    i + 1
                )))
            }
            DelayKernel::Erlang { shape, rate } => {
                chains.push(TransitChain {
                    stage: i,
                    shape: *shape,
                    rate: *rate,
                    first: stages.len(),
                });
                for c in 1..=*shape {
                    stages.push(Stage::new(
                        FeedbackFn::Linear { alpha: *rate },
                        DelayKernel::DiracAtZero,
                        StateFn::ONE,
                        StateFn::constant(*rate),
                    ));
                    labels.push(format!("{}_transit{c}", m.labels()[i]));
                }
                let mut replaced = st.clone();
                replaced.kernel = DelayKernel::DiracAtZero;
                original_index.push(stages.len());
                stages.push(replaced);
            }
            _ => {
                original_index.push(stages.len());
                stages.push(st.clone());
            }
        }
        labels.push(m.labels()[i].clone());
    }
    Ok(LctExpansion {
        model: CyclicModel::new(stages).with_labels(labels),
        original_index,
        chains,
    })
}

impl LctExpansion {
    /// History for the expanded model. Transit compartment `c` of a chain
    /// holds `∫ x(t - s) g_V^c(s) ds`, computed by trapezoid quadrature on
    /// the history grid; the result covers the part of `history` that is at
    /// least one chain horizon past its start.
    pub fn expand_history(&self, original: &CyclicModel, history: &Trajectory, tail_mass: f64) -> Result<Trajectory> {
        let h = history.h();
        let mut weights = Vec::new();
        let mut skip = 0usize;
        for ch in &self.chains {
            let per: Vec<Vec<f64>> = (1..=ch.shape)
                .map(|c| kernel_weights(&DelayKernel::Erlang { shape: c, rate: ch.rate }, h, tail_mass))
                .collect::<Result<_>>()?;
            skip = skip.max(per.last().map_or(0, |w| w.len() - 1));
            weights.push(per);
        }
        if skip >= history.len() {
            return Err(Error::InsufficientHistory {
                needed: skip as f64 * h,
                available: history.end() - history.start(),
            });
        }
        let len = history.len() - skip;
        let mut cols = vec![Vec::new(); self.model.n()];
        for (orig, &idx) in self.original_index.iter().enumerate() {
            cols[idx] = history.column(orig)[skip..].to_vec();
        }
        for (ch, per) in self.chains.iter().zip(&weights) {
            let src = history.column(original.upstream(ch.stage));
            for (c, w) in per.iter().enumerate() {
                cols[ch.first + c] = (0..len)
                    .map(|r| {
                        let k = r + skip;
                        w.iter().enumerate().map(|(j, wj)| wj * src[k - j]).sum()
                    })
                    .collect();
            }
        }
        Trajectory::new(history.time(skip), h, history.origin(), cols)
    }

    /// Original compartments of an expanded trajectory.
    pub fn project(&self, expanded: &Trajectory) -> Trajectory {
        expanded.select(&self.original_index)
    }
}
