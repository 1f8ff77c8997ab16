//! Equilibria of the reduced scalar equation.
//!
//! At a constant state every stage satisfies `g_i(x) f_i(x_{i-1}) = mu_i(x) x_i`
//! with `x` the last compartment, so the intermediate values are the
//! composition `x_i = g_i(x) f_i(x_{i-1}) / mu_i(x)` starting from
//! `x_{-1} = x`, and equilibria are the zeros of
//!
//! ```text
//! r(x) = g_n(x) f_n(x_{n-1}(x)) - mu_n(x) x.
//! ```
//!
//! A leading stage with zero feedback (pure self-renewal, as in the
//! hematopoiesis preset) decouples: either it is empty, or its clearance
//! vanishes at `x` and its level is fixed by the balance of the last stage.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CyclicModel, FeedbackFn, StateFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    /// `x = 0` with every compartment empty.
    Trivial,
    /// Root of the composed residual.
    Composed,
    /// Leading zero-feedback stage with vanishing clearance.
    FreeLeadingStage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub x_star: f64,
    /// Largest stage balance mismatch at `state`.
    pub residual: f64,
    /// Compartments `1..n-1` at the equilibrium.
    pub stage_values: Vec<f64>,
    /// Clearance of the last stage.
    pub mu_star: f64,
    pub state: Vec<f64>,
    pub kind: EquilibriumKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub roots: Vec<Equilibrium>,
    pub scan_interval: [f64; 2],
    pub n_brackets: usize,
    pub flags: Vec<String>,
}

impl EquilibriumReport {
    /// Nontrivial equilibria with every compartment non-negative.
    pub fn positive(&self) -> impl Iterator<Item = &Equilibrium> {
        self.roots
            .iter()
            .filter(|e| e.kind != EquilibriumKind::Trivial && e.state.iter().all(|v| *v >= 0.0) && e.x_star > 0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Compartment values at constant last compartment `x`, or `None` when an
/// intermediate clearance vanishes (reported as the offending stage).
fn compose(model: &CyclicModel, x: f64) -> std::result::Result<Vec<f64>, usize> {
    let n = model.n();
    let mut state = vec![0.0; n];
    state[n - 1] = x;
    let mut input = x;
    for (i, slot) in state[..n - 1].iter_mut().enumerate() {
        let st = model.stage(i);
        let mu = st.clearance.eval(x);
        if mu == 0.0 {
            return Err(i);
        }
        *slot = st.production(input, x) / mu;
        input = *slot;
    }
    Ok(state)
}

/// `x_i = G_i(x)` for `i = 1..n-1` followed by `x` itself.
pub fn equilibrium_state(model: &CyclicModel, x: f64) -> Result<Vec<f64>> {
    compose(model, x).map_err(|stage| Error::ZeroClearanceAtCandidate { x, stage: stage + 1 })
}

/// Composed residual `g_n f_n(G_{n-1}(x)) - mu_n(x) x`.
pub fn equilibrium_residual(model: &CyclicModel, x: f64) -> Result<f64> {
    let state = equilibrium_state(model, x)?;
    Ok(last_balance(model, &state))
}

fn last_balance(model: &CyclicModel, state: &[f64]) -> f64 {
    let n = model.n();
    let x = state[n - 1];
    let st = model.stage(n - 1);
    let input = if n == 1 { x } else { state[n - 2] };
    st.production(input, x) - st.clearance.eval(x) * x
}

/// Largest `|g_i f_i(x_{i-1}) - mu_i x_i|` over all stages.
pub fn stage_balance_residual(model: &CyclicModel, state: &[f64]) -> f64 {
    let last = state[model.last()];
    (0..model.n())
        .map(|i| model.stage(i).rate(state[model.upstream(i)], state[i], last).abs())
        .fold(0.0, f64::max)
}

/// Bisects a sign change of `f` on `[lo, hi]` down to adjacent floats.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return hi;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Sign changes of `f` over `n` uniform cells of `[lo, hi]`, each bisected.
/// Points where `f` is undefined are skipped.
fn bracketed_roots(f: impl Fn(f64) -> Option<f64>, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect();
    let vals: Vec<Option<f64>> = xs.iter().map(|&x| f(x)).collect();
    let mut roots: Vec<f64> = Vec::new();
    for j in 0..n {
        let (Some(a), Some(b)) = (vals[j], vals[j + 1]) else { continue };
        let root = if a == 0.0 {
            xs[j]
        } else if b == 0.0 {
            continue;
        } else if (a < 0.0) != (b < 0.0) {
            bisect(|x| f(x).unwrap_or(f64::NAN), xs[j], xs[j + 1])
        } else {
            continue;
        };
        if roots.last().is_none_or(|r| (root - r).abs() > 1e-12 * (1.0 + root.abs())) {
            roots.push(root);
        }
    }
    if let Some(b) = vals[n] {
        if b == 0.0 && roots.last().is_none_or(|r| (xs[n] - r).abs() > 1e-12) {
            roots.push(xs[n]);
        }
    }
    roots
}

/// Zeros of a clearance in `[lo, hi]`.
fn clearance_zeros(mu: &StateFn, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match *mu {
        StateFn::HillGate { a, k, offset } if offset != 0.0 && k > 0.0 => {
            // offset + a / (1 + k x) = 0
            let x = (-a / offset - 1.0) / k;
            if x >= lo.max(0.0) && x <= hi {
                vec![x]
            } else {
                vec![]
            }
        }
        StateFn::Constant { .. } => vec![],
        _ => bracketed_roots(|x| Some(mu.eval(x)), lo.max(0.0), hi, n),
    }
}

/// Solves the last-stage balance for the level of a free leading stage.
fn free_leading_level(model: &CyclicModel, x: f64) -> std::result::Result<Option<Vec<f64>>, usize> {
    let n = model.n();
    let with_lead = |x0: f64| -> std::result::Result<Vec<f64>, usize> {
        let mut state = vec![0.0; n];
        state[0] = x0;
        state[n - 1] = x;
        for i in 1..n - 1 {
            let st = model.stage(i);
            let mu = st.clearance.eval(x);
            if mu == 0.0 {
                return Err(i);
            }
            state[i] = st.production(state[i - 1], x) / mu;
        }
        Ok(state)
    };
    let balance = |x0: f64| with_lead(x0).map(|s| last_balance(model, &s));
    let (b0, b1, b2) = (balance(0.0)?, balance(1.0)?, balance(2.0)?);
    let slope = b1 - b0;
    let linear = ((b2 - b0) - 2.0 * slope).abs() <= 1e-12 * (b0.abs() + b1.abs() + b2.abs()).max(1e-300);
    let x0 = if linear {
        if slope == 0.0 {
            return Ok(None);
        }
        -b0 / slope
    } else {
        // geometric bracket search over positive levels
        let grid: Vec<f64> = (-24..=24).map(|e| 10f64.powf(e as f64 / 2.0)).collect();
        let mut found = None;
        let mut prev = (0.0, b0);
        for &g in &grid {
            let v = balance(g)?;
            if (v < 0.0) != (prev.1 < 0.0) || v == 0.0 {
                found = Some(bisect(|t| balance(t).unwrap_or(f64::NAN), prev.0, g));
                break;
            }
            prev = (g, v);
        }
        match found {
            Some(v) => v,
            None => return Ok(None),
        }
    };
    Ok(Some(with_lead(x0)?))
}

/// Scans `[lo, hi]` for equilibria of `model`.
pub fn find_equilibria(model: &CyclicModel, interval: [f64; 2], n_brackets: usize) -> Result<EquilibriumReport> {
    model.ensure_valid()?;
    let [lo, hi] = interval;
    if !(lo < hi) || n_brackets == 0 {
        return Err(Error::InvalidConfig(format!(
            "need lo < hi and at least one bracket, got [{lo}, {hi}] with {n_brackets}"
        )));
    }
    let mut flags = Vec::new();
    let mut roots = Vec::new();
    let mu_last = |x: f64| model.stage(model.last()).clearance.eval(x);

    let zeros = vec![0.0; model.n()];
    if stage_balance_residual(model, &zeros) == 0.0 {
        let state = zeros;
        roots.push(Equilibrium {
            x_star: 0.0,
            residual: stage_balance_residual(model, &state),
            stage_values: state[..model.n() - 1].to_vec(),
            mu_star: mu_last(0.0),
            state,
            kind: EquilibriumKind::Trivial,
        });
    }

    let residual = |x: f64| compose(model, x).ok().map(|s| last_balance(model, &s));
    for x in bracketed_roots(residual, lo, hi, n_brackets) {
        if x == 0.0 && !roots.is_empty() {
            continue;
        }
        let state = equilibrium_state(model, x)?;
        roots.push(Equilibrium {
            x_star: x,
            residual: stage_balance_residual(model, &state),
            stage_values: state[..model.n() - 1].to_vec(),
            mu_star: mu_last(x),
            state,
            kind: EquilibriumKind::Composed,
        });
    }

    if model.n() > 1 && model.stage(0).feedback == FeedbackFn::Zero {
        let mut any_positive = false;
        for x in clearance_zeros(&model.stage(0).clearance, lo, hi, n_brackets) {
            match free_leading_level(model, x) {
                Err(stage) => flags.push(format!(
                    "positive equilibrium absent: clearance of stage {} vanishes at x = {x}",
                    stage + 1
                )),
                Ok(None) => flags.push(format!("no admissible level for stage 1 at x = {x}")),
                Ok(Some(state)) => {
                    if state[0] > 0.0 && state.iter().all(|v| *v >= 0.0) && x > 0.0 {
                        any_positive = true;
                        roots.push(Equilibrium {
                            x_star: x,
                            residual: stage_balance_residual(model, &state),
                            stage_values: state[..model.n() - 1].to_vec(),
                            mu_star: mu_last(x),
                            state,
                            kind: EquilibriumKind::FreeLeadingStage,
                        });
                    } else {
                        flags.push(format!(
                            "positive equilibrium absent: stage balance at x = {x} needs negative compartments"
                        ));
                    }
                }
            }
        }
        if !any_positive && !flags.iter().any(|f| f.starts_with("positive equilibrium absent")) {
            flags.push("positive equilibrium absent: stage 1 clearance has no zero in the interval".into());
        }
    }
    if roots.is_empty() {
        flags.push("no bracket found".into());
    }
    roots.sort_by(|a, b| a.x_star.total_cmp(&b.x_star));
    Ok(EquilibriumReport {
        roots,
        scan_interval: interval,
        n_brackets,
        flags,
    })
}
