//! Stage integrals and their composition.
//!
//! Every stage is linear in its own state, so on a trajectory
//!
//! ```text
//! x_i(t) = ∫_0^∞ g_i(x_n(t-s)) f_i(u_i(t-s)) exp(-∫_{t-s}^t mu_i(x_n(r)) dr) ds,
//! u_i(t) = ∫ x_{i-1}(t - φ) K_i(φ) dφ.
//! ```
//!
//! On a uniform grid the outer integral is evaluated in one forward pass,
//! treating production as piecewise linear and clearance as piecewise
//! constant (its mean over each step) and integrating the exponential
//! exactly over each step.
//!
//! The part of the integral older than the first sample is either dropped
//! ([`PreHistory::Truncated`], values become valid once the survival factor
//! has decayed below [`QuadratureSettings::survival_cut`]) or supplied by
//! assuming the first sample held forever ([`PreHistory::Constant`]).
//! Composing stage sweeps gives the nested functionals `G_i` of the last
//! compartment in `O(n M)` work for `M` grid nodes.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{fft_convolution, DelayKernel};
use crate::model::{CyclicModel, FeedbackFn, Stage};
use crate::simulate::{integrate_with_block, kernel_weights, stage_integral_step, SimConfig, DEFAULT_TAIL_MASS};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PreHistory {
    Truncated,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSettings {
    pub tail_mass: f64,
    pub survival_cut: f64,
    pub pre_history: PreHistory,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            tail_mass: DEFAULT_TAIL_MASS,
            survival_cut: 1e-12,
            pre_history: PreHistory::Constant,
        }
    }
}

impl QuadratureSettings {
    pub fn truncated() -> Self {
        QuadratureSettings {
            pre_history: PreHistory::Truncated,
            ..Default::default()
        }
    }
}

/// One stage integral evaluated at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSweep {
    pub values: Vec<f64>,
    /// First node whose value accounts for the whole past.
    pub first_valid: usize,
    pub warnings: Vec<String>,
}

/// Kernel-weighted input `u[k]` and the first node where it is defined.
fn convolve_input(
    kernel: &DelayKernel,
    upstream: &[f64],
    upstream_valid: usize,
    h: f64,
    settings: &QuadratureSettings,
) -> Result<(Vec<f64>, usize)> {
    let len = upstream.len();
    let extend = settings.pre_history == PreHistory::Constant;
    let at = |i: isize| -> f64 {
        if i < upstream_valid as isize {
            upstream[upstream_valid]
        } else {
            upstream[i as usize]
        }
    };
    match kernel {
        DelayKernel::DiracAtZero => Ok((upstream.to_vec(), upstream_valid)),
        DelayKernel::Dirac { tau } => {
            let lag = tau / h;
            let values = (0..len)
                .map(|k| {
                    let u = k as f64 - lag;
                    let i = u.floor();
                    let w = u - i;
                    let i = i as isize;
                    if w < 1e-9 {
                        at(i)
                    } else if w > 1.0 - 1e-9 {
                        at(i + 1)
                    } else {
                        at(i) + w * (at(i + 1) - at(i))
                    }
                })
                .collect();
            let valid = if extend {
                upstream_valid
            } else {
                upstream_valid + (lag - 1e-9).ceil().max(0.0) as usize
            };
            Ok((values, valid))
        }
        k => {
            let w = kernel_weights(k, h, settings.tail_mass)?;
            let steps = w.len() - 1;
            let padded: Vec<f64> = (-(steps as isize)..len as isize).map(at).collect();
            let conv = if padded.len().saturating_mul(w.len()) > 1 << 22 {
                fft_convolution(&padded, &w)
            } else {
                let mut out = vec![0.0; padded.len() + w.len() - 1];
                for (i, x) in padded.iter().enumerate() {
                    for (j, wj) in w.iter().enumerate() {
                        out[i + j] += x * wj;
                    }
                }
                out
            };
            // u[k] = sum_j w_j x[k - j] sits at padded index k + steps
            let values = conv[steps..steps + len].to_vec();
            let valid = if extend { upstream_valid } else { upstream_valid + steps };
            Ok((values, valid))
        }
    }
}

/// Sweeps stage `index` of a model over grid columns.
pub fn sweep_stage(
    stage: &Stage,
    index: usize,
    upstream: &[f64],
    upstream_valid: usize,
    last: &[f64],
    h: f64,
    settings: &QuadratureSettings,
) -> Result<StageSweep> {
    let len = upstream.len();
    if upstream_valid >= len {
        return Err(Error::InsufficientHistory {
            needed: (upstream_valid + 1) as f64 * h,
            available: (len as f64 - 1.0) * h,
        });
    }
    let (u, start) = convolve_input(&stage.kernel, upstream, upstream_valid, h, settings)?;
    if start >= len {
        return Err(Error::InsufficientHistory {
            needed: start as f64 * h,
            available: (len as f64 - 1.0) * h,
        });
    }
    let mut warnings = Vec::new();
    let mut values = vec![f64::NAN; len];
    let prod = |k: usize| stage.production(u[k], last[k]);
    let mu = |k: usize| stage.clearance.eval(last[k]);
    values[start] = match settings.pre_history {
        PreHistory::Truncated => 0.0,
        PreHistory::Constant => {
            let mu0 = mu(start);
            if !(mu0 > 0.0) {
                return Err(Error::NoDecay(index + 1));
            }
            prod(start) / mu0
        }
    };
    let threshold = -settings.survival_cut.ln();
    let mut cumulative = 0.0;
    let mut first_valid = match settings.pre_history {
        PreHistory::Constant => Some(start),
        PreHistory::Truncated => None,
    };
    let (mut p_prev, mut mu_prev) = (prod(start), mu(start));
    for m in start + 1..len {
        let (p, mu_m) = (prod(m), mu(m));
        let exponent = 0.5 * h * (mu_prev + mu_m);
        cumulative += exponent;
        values[m] = stage_integral_step(values[m - 1], p_prev, p, mu_prev, mu_m, h);
        if first_valid.is_none() && cumulative >= threshold {
            first_valid = Some(m);
        }
        p_prev = p;
        mu_prev = mu_m;
    }
    let first_valid = match first_valid {
        Some(v) => v,
        None => {
            // with a positive clearance floor the cut is reachable given more history
            let floor = stage.clearance.range_on_nonnegative().0;
            if floor > 0.0 {
                return Err(Error::InsufficientHistory {
                    needed: (start as f64) * h + threshold / floor,
                    available: (len as f64 - 1.0) * h,
                });
            }
            warnings.push(format!(
                "stage {}: no positive clearance floor and the survival factor stays above {:e}; using the full span",
                index + 1,
                settings.survival_cut
            ));
            start
        }
    };
    Ok(StageSweep {
        values,
        first_valid,
        warnings,
    })
}

/// Evaluates the integral form of one stage on trajectories of the full model.
#[derive(Debug, Clone, PartialEq)]
pub struct StageIntegralEvaluator {
    model: CyclicModel,
    stage: usize,
    settings: QuadratureSettings,
}

impl StageIntegralEvaluator {
    pub fn new(model: &CyclicModel, stage: usize, settings: QuadratureSettings) -> Result<Self> {
        model.ensure_valid()?;
        if stage >= model.n() {
            return Err(Error::InvalidModel(format!("stage {} out of range", stage + 1)));
        }
        Ok(StageIntegralEvaluator {
            model: model.clone(),
            stage,
            settings,
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn settings(&self) -> &QuadratureSettings {
        &self.settings
    }

    /// Sweep over the whole trajectory.
    pub fn sweep(&self, tr: &Trajectory) -> Result<StageSweep> {
        let m = &self.model;
        sweep_stage(
            m.stage(self.stage),
            self.stage,
            tr.column(m.upstream(self.stage)),
            0,
            tr.column(m.last()),
            tr.h(),
            &self.settings,
        )
    }
}

fn value_at(values: &[f64], first_valid: usize, tr_start: f64, h: f64, t: f64) -> Result<f64> {
    let u = (t - tr_start) / h;
    let last = (values.len() - 1) as f64;
    let valid_from = first_valid as f64;
    if u < valid_from - 1e-9 || u > last + 1e-9 {
        return Err(Error::InsufficientHistory {
            needed: (t - tr_start).max(0.0) + (valid_from - u.min(valid_from)) * h,
            available: (t - tr_start).max(0.0),
        });
    }
    let u = u.clamp(valid_from, last);
    let k = u.floor() as usize;
    let w = u - k as f64;
    if w < 1e-9 || k + 1 >= values.len() {
        Ok(values[k])
    } else {
        Ok(values[k] + w * (values[k + 1] - values[k]))
    }
}

/// Stage integral of `ev` on `tr` (all compartments) at time `t`.
pub fn eval_stage_integral(ev: &StageIntegralEvaluator, tr: &Trajectory, t: f64) -> Result<f64> {
    let sweep = ev.sweep(tr)?;
    value_at(&sweep.values, sweep.first_valid, tr.start(), tr.h(), t)
}

/// `G_0 = psi`, `G_i = F_i(G_{i-1}, psi)` on the grid of `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedSweep {
    pub columns: Vec<Vec<f64>>,
    pub first_valid: Vec<usize>,
    pub warnings: Vec<String>,
    pub start: f64,
    pub h: f64,
}

fn last_column<'a>(model: &CyclicModel, psi: &'a Trajectory) -> Result<&'a [f64]> {
    match psi.n_compartments() {
        1 => Ok(psi.column(0)),
        c if c == model.n() => Ok(psi.column(model.last())),
        c => Err(Error::InvalidConfig(format!(
            "history for the last compartment has {c} columns; expected 1 or {}",
            model.n()
        ))),
    }
}

pub fn nested_sweeps(
    model: &CyclicModel,
    psi: &Trajectory,
    up_to: usize,
    settings: &QuadratureSettings,
) -> Result<NestedSweep> {
    model.ensure_valid()?;
    if up_to >= model.n() {
        return Err(Error::InvalidModel(format!(
            "composition depth {up_to} exceeds n - 1 = {}",
            model.n() - 1
        )));
    }
    let last = last_column(model, psi)?;
    let mut columns = vec![last.to_vec()];
    let mut first_valid = vec![0];
    let mut warnings = Vec::new();
    for i in 0..up_to {
        let sweep = sweep_stage(
            model.stage(i),
            i,
            &columns[i],
            first_valid[i],
            last,
            psi.h(),
            settings,
        )?;
        warnings.extend(sweep.warnings);
        columns.push(sweep.values);
        first_valid.push(sweep.first_valid);
    }
    Ok(NestedSweep {
        columns,
        first_valid,
        warnings,
        start: psi.start(),
        h: psi.h(),
    })
}

impl NestedSweep {
    pub fn value(&self, depth: usize, t: f64) -> Result<f64> {
        value_at(&self.columns[depth], self.first_valid[depth], self.start, self.h, t)
    }
}

/// `G_{up_to}(x_{n,t})` from a history of the last compartment.
pub fn nested_g(
    model: &CyclicModel,
    up_to: usize,
    psi: &Trajectory,
    t: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    nested_sweeps(model, psi, up_to, settings)?.value(up_to, t)
}

/// Full-model history `xi_i = G_i(psi)` on its valid sub-span.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedHistory {
    pub trajectory: Trajectory,
    pub valid_start: f64,
    pub valid_end: f64,
    pub pre_history_extended: bool,
    pub warnings: Vec<String>,
}

pub fn map_history(model: &CyclicModel, psi: &Trajectory, settings: &QuadratureSettings) -> Result<MappedHistory> {
    let nested = nested_sweeps(model, psi, model.n() - 1, settings)?;
    let first = *nested.first_valid.iter().max().expect("at least one column");
    if first >= psi.len() {
        return Err(Error::InsufficientHistory {
            needed: first as f64 * psi.h(),
            available: psi.end() - psi.start(),
        });
    }
    // compartment i (0-based, i < n - 1) is G_{i+1}; the last is psi itself
    let mut cols: Vec<Vec<f64>> = (1..model.n()).map(|d| nested.columns[d][first..].to_vec()).collect();
    cols.push(nested.columns[0][first..].to_vec());
    let origin = psi.origin().max(psi.time(first));
    let trajectory = Trajectory::new(psi.time(first), psi.h(), origin, cols)?;
    Ok(MappedHistory {
        valid_start: trajectory.start(),
        valid_end: trajectory.end(),
        trajectory,
        pre_history_extended: settings.pre_history == PreHistory::Constant,
        warnings: nested.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageConsistency {
    pub stage: usize,
    pub label: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub stages: Vec<StageConsistency>,
    pub pre_history_extended: bool,
    pub warnings: Vec<String>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Checks `xi_i = F_i(xi_{i-1}, xi_n)` for every stage but the last, where
/// `xi` is `full_history`. Each stage's deviation is the larger of the
/// pointwise mismatch at the history end and its mismatch weighted by the
/// kernel through which the next stage reads it (Dirac kernels: the
/// pointwise mismatch at the delayed instant), relative to the largest
/// magnitude of `xi_i`. Uses constant pre-history extension.
pub fn check_consistency(model: &CyclicModel, full_history: &Trajectory, tol: f64) -> Result<ConsistencyReport> {
    model.ensure_valid()?;
    if full_history.n_compartments() != model.n() {
        return Err(Error::InvalidConfig(format!(
            "history has {} compartments, model has {}",
            full_history.n_compartments(),
            model.n()
        )));
    }
    let settings = QuadratureSettings::default();
    let h = full_history.h();
    let end = full_history.node_index(full_history.origin()).unwrap_or(full_history.len() - 1);
    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..model.n() - 1 {
        let xi = full_history.column(i);
        let sweep = sweep_stage(
            model.stage(i),
            i,
            full_history.column(model.upstream(i)),
            0,
            full_history.column(model.last()),
            h,
            &settings,
        )?;
        warnings.extend(sweep.warnings);
        let f = &sweep.values;
        let diff = |k: usize| (xi[k] - f[k]).abs();
        let pointwise = diff(end);
        let weighted = match &model.stage(i + 1).kernel {
            DelayKernel::DiracAtZero => pointwise,
            DelayKernel::Dirac { tau } => {
                let u = end as f64 - tau / h;
                if u < 0.0 {
                    warnings.push(format!("stage {}: history shorter than delay {tau}", i + 1));
                    0.0
                } else {
                    let k = u.floor() as usize;
                    let w = u - k as f64;
                    if k + 1 > end || w < 1e-9 {
                        diff(k)
                    } else {
                        (1.0 - w) * diff(k) + w * diff(k + 1)
                    }
                }
            }
            k => {
                let w = kernel_weights(k, h, settings.tail_mass)?;
                if w.len() > end + 1 {
                    warnings.push(format!(
                        "stage {}: history covers only part of the kernel support",
                        i + 2
                    ));
                }
                w.iter().take(end + 1).enumerate().map(|(j, wj)| wj * diff(end - j)).sum()
            }
        };
        let scale = xi[..=end].iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let deviation = pointwise.max(weighted) / scale;
        stages.push(StageConsistency {
            stage: i + 1,
            label: model.labels()[i].clone(),
            deviation,
            tolerance: tol,
            pass: deviation <= tol,
        });
    }
    Ok(ConsistencyReport {
        stages,
        pre_history_extended: true,
        warnings,
    })
}

/// A cyclic model with one contiguous block of stages replaced by their
/// stage integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    model: CyclicModel,
    eliminated: Range<usize>,
    evaluators: Vec<StageIntegralEvaluator>,
}

/// Eliminates the (0-based) stages in `eliminate`, which must form one
/// contiguous run excluding the last stage.
pub fn partial_reduce(model: &CyclicModel, eliminate: &[usize]) -> Result<ReducedSystem> {
    model.ensure_valid()?;
    let mut idx = eliminate.to_vec();
    idx.sort_unstable();
    idx.dedup();
    let eliminated = match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) => {
            if b >= model.last() || b - a + 1 != idx.len() {
                return Err(Error::NonContiguousElimination);
            }
            a..b + 1
        }
        _ => 0..0,
    };
    let evaluators = eliminated
        .clone()
        .map(|e| StageIntegralEvaluator::new(model, e, QuadratureSettings::default()))
        .collect::<Result<_>>()?;
    Ok(ReducedSystem {
        model: model.clone(),
        eliminated,
        evaluators,
    })
}

/// How a retained compartment is driven after reduction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetainedEquation {
    pub compartment: usize,
    pub label: String,
    /// `true` when its input is the stage integral of an eliminated block.
    pub distributed_input: bool,
    /// Feedback applied to the input.
    pub feedback: String,
}

impl ReducedSystem {
    pub fn model(&self) -> &CyclicModel {
        &self.model
    }

    pub fn eliminated(&self) -> Range<usize> {
        self.eliminated.clone()
    }

    pub fn retained(&self) -> Vec<usize> {
        (0..self.model.n()).filter(|i| !self.eliminated.contains(i)).collect()
    }

    pub fn evaluators(&self) -> &[StageIntegralEvaluator] {
        &self.evaluators
    }

    pub fn equations(&self) -> Vec<RetainedEquation> {
        self.retained()
            .into_iter()
            .map(|i| RetainedEquation {
                compartment: i,
                label: self.model.labels()[i].clone(),
                distributed_input: !self.eliminated.is_empty() && self.model.upstream(i) + 1 == self.eliminated.end,
                feedback: self.model.stage(i).feedback.kind_name().to_string(),
            })
            .collect()
    }

    /// Replaces eliminated columns of `history` by their stage integrals
    /// (constant pre-history), which is the initial data the reduced
    /// system actually sees.
    pub fn reduce_history(&self, history: &Trajectory, h: f64) -> Result<Trajectory> {
        let mut hist = history.resample(h)?;
        for ev in &self.evaluators {
            let sweep = ev.sweep(&hist)?;
            hist.set_column(ev.stage(), sweep.values);
        }
        Ok(hist)
    }

    /// Integrates the retained compartments; eliminated columns of the
    /// result hold the stage integrals they are replaced by.
    pub fn integrate(&self, history: &Trajectory, cfg: &SimConfig) -> Result<Trajectory> {
        cfg.check()?;
        let hist = self.reduce_history(history, cfg.h)?;
        let block = (!self.eliminated.is_empty()).then(|| self.eliminated.clone());
        integrate_with_block(&self.model, &hist, cfg, block)
    }
}

/// Default elimination: every intermediate stage after any leading run of
/// stages with zero feedback (those depend on their own initial data).
pub fn default_elimination(model: &CyclicModel) -> Vec<usize> {
    let lead = model
        .stages()
        .iter()
        .take(model.last())
        .take_while(|s| s.feedback == FeedbackFn::Zero)
        .count();
    (lead..model.last()).collect()
}

/// Constant history with retained compartments at `state` and each
/// compartment of `block` at its stationary value `g f(x_{i-1}) / mu`.
pub fn consistent_constant_history(
    model: &CyclicModel,
    block: &[usize],
    state: &[f64],
    h: f64,
    span: f64,
) -> Result<Trajectory> {
    let mut x = state.to_vec();
    let last = x[model.last()];
    let mut sorted = block.to_vec();
    sorted.sort_unstable();
    for i in sorted {
        let st = model.stage(i);
        let mu = st.clearance.eval(last);
        if mu == 0.0 {
            return Err(Error::ZeroClearanceAtCandidate { x: last, stage: i + 1 });
        }
        x[i] = st.production(x[model.upstream(i)], last) / mu;
    }
    Trajectory::constant(&x, h, span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, FeedbackFn, Preset, StateFn};
    use crate::simulate::integrate_cyclic;

    fn goodwin() -> CyclicModel {
        preset(Preset::Goodwin, &Default::default()).unwrap().model
    }

    #[test]
    fn constant_history_gives_production_over_clearance() {
        let stage = Stage::new(
            FeedbackFn::HillUp { vmax: 2.0, k: 1.0, n: 2.0 },
            DelayKernel::DiracAtZero,
            StateFn::constant(1.5),
            StateFn::constant(0.7),
        );
        let x = vec![1.3; 2001];
        let expected = 1.5 * stage.feedback.eval(1.3) / 0.7;
        for settings in [QuadratureSettings::default(), QuadratureSettings::truncated()] {
            let s = sweep_stage(&stage, 0, &x, 0, &x, 0.05, &settings).unwrap();
            let v = *s.values.last().unwrap();
            assert!((v - expected).abs() < 1e-9 * expected, "{v} vs {expected}");
        }
    }

    #[test]
    fn exponential_input_matches_closed_form() {
        // I(t) = ∫_0^{t+20} alpha M(t - s) e^{-gamma s} ds, M(t) = e^{-t}
        let (alpha, gamma) = (1.0, 3.0);
        let mut m = goodwin();
        m.stage_mut(0).feedback = FeedbackFn::Linear { alpha };
        m.stage_mut(0).clearance = StateFn::constant(gamma);
        let h = 1e-3;
        let psi = Trajectory::from_fn(1, h, 20.0, |t| vec![(-t).exp()]).unwrap();
        let mut full = psi.clone();
        for k in 1..=10_000 {
            full.push(&[(-(k as f64) * h).exp()]);
        }
        let nested = nested_sweeps(&m, &full, 1, &QuadratureSettings::truncated()).unwrap();
        for t in [0.0f64, 2.5, 5.0, 10.0] {
            let exact = alpha * (-t).exp() * (1.0 - (-(gamma - 1.0) * (t + 20.0)).exp()) / (gamma - 1.0);
            let got = nested.value(1, t).unwrap();
            assert!((got - exact).abs() <= 1e-5 * exact, "t={t}: {got} vs {exact}");
        }
    }

    #[test]
    fn zero_trajectory_gives_zero() {
        let m = goodwin();
        let psi = Trajectory::constant(&[0.0], 0.01, 5.0).unwrap();
        assert_eq!(nested_g(&m, 1, &psi, 0.0, &Default::default()).unwrap(), 0.0);
    }

    #[test]
    fn depth_zero_is_raw_history() {
        let m = goodwin();
        let psi = Trajectory::from_fn(1, 0.1, 2.0, |t| vec![t * t]).unwrap();
        assert!((nested_g(&m, 0, &psi, -1.0, &Default::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_psi_is_insufficient_in_truncated_mode() {
        let m = goodwin();
        let psi = Trajectory::constant(&[1.0], 0.01, 1.0).unwrap();
        assert!(matches!(
            map_history(&m, &psi, &QuadratureSettings::truncated()),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn non_contiguous_elimination_is_rejected() {
        let m = preset(Preset::Knauer, &Default::default()).unwrap().model;
        assert!(matches!(partial_reduce(&m, &[0, 2]), Err(Error::NonContiguousElimination)));
        assert!(matches!(partial_reduce(&m, &[2]), Err(Error::NonContiguousElimination)));
        let mut big = goodwin();
        big = CyclicModel::new(vec![big.stage(0).clone(), big.stage(1).clone(), big.stage(0).clone(), big.stage(2).clone()]);
        assert!(matches!(partial_reduce(&big, &[0, 2]), Err(Error::NonContiguousElimination)));
    }

    #[test]
    fn empty_elimination_is_identity() {
        let m = goodwin();
        let hist = Trajectory::constant(&[0.2, 0.4, 0.9], 0.01, 0.0).unwrap();
        let cfg = SimConfig::new(0.01, 5.0);
        let red = partial_reduce(&m, &[]).unwrap();
        assert_eq!(red.retained(), vec![0, 1, 2]);
        assert_eq!(red.integrate(&hist, &cfg).unwrap(), integrate_cyclic(&m, &hist, &cfg).unwrap());
    }

    #[test]
    fn knauer_partial_reduction_structure() {
        let m = preset(Preset::Knauer, &Default::default()).unwrap().model;
        assert_eq!(default_elimination(&m), vec![1]);
        let red = partial_reduce(&m, &[1]).unwrap();
        let eqs = red.equations();
        assert_eq!(eqs.len(), 2);
        assert_eq!((eqs[0].label.as_str(), eqs[0].distributed_input), ("u1", false));
        assert_eq!((eqs[1].label.as_str(), eqs[1].distributed_input), ("u3", true));
    }

    #[test]
    fn goodwin_partial_reduction_matches_full_run() {
        let m = goodwin();
        let h = 1e-3;
        let hist = consistent_constant_history(&m, &[0], &[0.0, 0.3, 1.2], h, 0.0).unwrap();
        let cfg = SimConfig::new(h, 20.0);
        let full = integrate_cyclic(&m, &hist, &cfg).unwrap();
        let red = partial_reduce(&m, &[0]).unwrap().integrate(&hist, &cfg).unwrap();
        for c in 0..3 {
            let scale = full.column(c).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = full
                .column(c)
                .iter()
                .zip(red.column(c))
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(err <= 1e-5 * scale, "compartment {c}: {err}");
        }
    }

    #[test]
    fn perturbed_history_fails_only_that_stage() {
        let m = goodwin();
        let hist = Trajectory::constant(&[0.4, 0.4, 0.4], 0.01, 0.0).unwrap();
        let run = integrate_cyclic(&m, &hist, &SimConfig::new(0.01, 60.0)).unwrap();
        let restarted = run.restart_at(30.0).unwrap();
        let ok = check_consistency(&m, &restarted, 1e-4).unwrap();
        assert!(ok.passed(), "{ok:?}");
        let mut bad = restarted.clone();
        let bumped = bad.column(1).iter().map(|v| v * 1.1).collect();
        bad.set_column(1, bumped);
        let r = check_consistency(&m, &bad, 1e-4).unwrap();
        assert!(r.stages[0].pass);
        assert!(!r.stages[1].pass);
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    #[test]
    fn nested_g_reproduces_simulated_compartments() {
        let m = goodwin();
        let h = 0.005;
        let hist = Trajectory::constant(&[0.1, 0.5, 2.0], h, 0.0).unwrap();
        let run = integrate_cyclic(&m, &hist, &SimConfig::new(h, 120.0)).unwrap();
        let psi = run.select(&[2]);
        let mapped = map_history(&m, &psi, &QuadratureSettings::truncated()).unwrap();
        let tr = &mapped.trajectory;
        let from = tr.first_index_at_or_after(5.0);
        let k0 = run.first_index_at_or_after(tr.time(from));
        let len = tr.len() - from;
        for c in 0..2 {
            let err = rel_err(&tr.column(c)[from..], &run.column(c)[k0..k0 + len]);
            assert!(err < 1e-3, "compartment {c}: {err}");
        }
        let g2 = nested_g(&m, 2, &psi, 100.0, &QuadratureSettings::truncated()).unwrap();
        let e = run.interpolate(1, 100.0).unwrap();
        assert!((g2 - e).abs() < 1e-3 * e);
    }

    #[test]
    fn constant_psi_maps_to_composition() {
        let m = goodwin();
        let x = 0.8;
        let psi = Trajectory::constant(&[x], 0.01, 3.0).unwrap();
        let mapped = map_history(&m, &psi, &Default::default()).unwrap();
        let i = m.stage(0).production(x, x) / m.stage(0).clearance.eval(x);
        let e = m.stage(1).production(i, x) / m.stage(1).clearance.eval(x);
        let row = mapped.trajectory.last_row();
        assert!((row[0] - i).abs() < 1e-12 * i);
        assert!((row[1] - e).abs() < 1e-12 * e);
        assert!(check_consistency(&m, &mapped.trajectory, 1e-9).unwrap().passed());
    }
}
