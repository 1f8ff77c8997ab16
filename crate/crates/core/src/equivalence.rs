//! Dual-simulation harnesses comparing formulations of the same model.
//!
//! * Reduction mode runs the full cyclic system, then the partially reduced
//!   system from the same initial data, and also re-evaluates each
//!   eliminated compartment as a stage integral of the full trajectory.
//! * LCT mode runs a distributed-delay model by quadrature and its Erlang
//!   transit-chain expansion as an ODE.
//!
//! Deviations are relative L∞ over the nodes in `[0, t_end]`:
//! `max |a - b| / max |b|` with `b` the full (reference) run.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CyclicModel;
use crate::reduction::{consistent_constant_history, default_elimination, partial_reduce, QuadratureSettings, StageIntegralEvaluator};
use crate::simulate::{expand_erlang_lct, integrate_cyclic, required_history, SimConfig};
use crate::stability::find_equilibria;
use crate::trajectory::Trajectory;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EquivalenceMode {
    /// Eliminate the given (0-based) stages; `None` uses
    /// [`default_elimination`].
    Reduction { eliminate: Option<Vec<usize>> },
    Lct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceConfig {
    pub sim: SimConfig,
    pub mode: EquivalenceMode,
    /// Initial state; eliminated compartments are replaced by their
    /// stationary composition. `None` uses [`default_initial_state`].
    pub initial: Option<Vec<f64>>,
    pub tolerance: f64,
}

impl EquivalenceConfig {
    pub fn reduction(sim: SimConfig) -> Self {
        EquivalenceConfig {
            sim,
            mode: EquivalenceMode::Reduction { eliminate: None },
            initial: None,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn lct(sim: SimConfig) -> Self {
        EquivalenceConfig {
            mode: EquivalenceMode::Lct,
            ..EquivalenceConfig::reduction(sim)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompartmentRole {
    Retained,
    Eliminated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompartmentDeviation {
    pub label: String,
    pub role: CompartmentRole,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub mode: EquivalenceMode,
    pub eliminated: Vec<usize>,
    pub initial: Vec<f64>,
    pub compartments: Vec<CompartmentDeviation>,
    pub tolerance: f64,
    pub t_end: f64,
    pub h: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.compartments.iter().all(|c| c.pass)
    }

    pub fn max_deviation(&self) -> f64 {
        self.compartments.iter().map(|c| c.deviation).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Relative L∞ distance of `a` from the reference `b` (same grid).
pub fn relative_linf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// 1.2 times the positive equilibrium with the largest last compartment, or
/// all ones when none is found in `[0, 100]`.
pub fn default_initial_state(model: &CyclicModel) -> Vec<f64> {
    find_equilibria(model, [0.0, 100.0], 2000)
        .ok()
        .and_then(|r| r.positive().max_by(|a, b| a.x_star.total_cmp(&b.x_star)).map(|e| e.state.clone()))
        .map(|s| s.iter().map(|v| 1.2 * v).collect())
        .unwrap_or_else(|| vec![1.0; model.n()])
}

fn window(tr: &Trajectory, c: usize) -> &[f64] {
    &tr.column(c)[tr.first_index_at_or_after(0.0)..]
}

pub fn check_equivalence(model: &CyclicModel, cfg: &EquivalenceConfig) -> Result<EquivalenceReport> {
    model.ensure_valid()?;
    cfg.sim.check()?;
    let initial = cfg.initial.clone().unwrap_or_else(|| default_initial_state(model));
    if initial.len() != model.n() {
        return Err(Error::InvalidConfig(format!(
            "initial state has {} values, model has {} stages",
            initial.len(),
            model.n()
        )));
    }
    let h = cfg.sim.h;
    let span = required_history(model, h, cfg.sim.tail_mass)?;
    let entry = |label: &str, role, deviation: f64| CompartmentDeviation {
        label: label.to_string(),
        role,
        deviation,
        pass: deviation <= cfg.tolerance,
    };
    match &cfg.mode {
        EquivalenceMode::Reduction { eliminate } => {
            let eliminate = eliminate.clone().unwrap_or_else(|| default_elimination(model));
            let reduced = partial_reduce(model, &eliminate)?;
            let block: Vec<usize> = reduced.eliminated().collect();
            let hist = consistent_constant_history(model, &block, &initial, h, span)?;
            let full = integrate_cyclic(model, &hist, &cfg.sim)?;
            let red = reduced.integrate(&hist, &cfg.sim)?;
            let mut compartments = Vec::new();
            for c in 0..model.n() {
                let reference = window(&full, c);
                let label = &model.labels()[c];
                if block.contains(&c) {
                    let ev = StageIntegralEvaluator::new(model, c, QuadratureSettings::default())?;
                    let sweep = ev.sweep(&full)?;
                    let from = full.first_index_at_or_after(0.0);
                    let d = relative_linf(&sweep.values[from..], reference).max(relative_linf(window(&red, c), reference));
                    compartments.push(entry(label, CompartmentRole::Eliminated, d));
                } else {
                    compartments.push(entry(label, CompartmentRole::Retained, relative_linf(window(&red, c), reference)));
                }
            }
            let initial = hist.last_row();
            Ok(EquivalenceReport {
                mode: EquivalenceMode::Reduction { eliminate: Some(block.clone()) },
                eliminated: block,
                initial,
                compartments,
                tolerance: cfg.tolerance,
                t_end: cfg.sim.t_end,
                h,
            })
        }
        EquivalenceMode::Lct => {
            let exp = expand_erlang_lct(model)?;
            let chain_span = required_history(&exp.model, h, cfg.sim.tail_mass)?;
            let hist = Trajectory::constant(&initial, h, 2.0 * span + chain_span)?;
            let distributed = integrate_cyclic(model, &hist, &cfg.sim)?;
            let exp_hist = exp.expand_history(model, &hist, cfg.sim.tail_mass)?;
            let ode = exp.project(&integrate_cyclic(&exp.model, &exp_hist, &cfg.sim)?);
            let compartments = (0..model.n())
                .map(|c| {
                    entry(
                        &model.labels()[c],
                        CompartmentRole::Retained,
                        relative_linf(window(&ode, c), window(&distributed, c)),
                    )
                })
                .collect();
            Ok(EquivalenceReport {
                mode: EquivalenceMode::Lct,
                eliminated: vec![],
                initial,
                compartments,
                tolerance: cfg.tolerance,
                t_end: cfg.sim.t_end,
                h,
            })
        }
    }
}
