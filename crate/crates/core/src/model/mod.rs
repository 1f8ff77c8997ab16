//! Cyclic stage models.
//!
//! Stage `i` obeys
//!
//! ```text
//! dx_i/dt = g_i(x_n) * f_i( ∫ x_{i-1}(t - s) K_i(s) ds ) - mu_i(x_n) * x_i
//! ```
//!
//! with indices taken mod `n`, so stage 1 consumes the last compartment.
//! `g_i` is the gate, `f_i` the feedback, `K_i` the delay kernel and `mu_i`
//! the clearance. Clearances may be negative (net self-renewal).

mod functions;
pub mod presets;

use serde::{Deserialize, Serialize};

pub use functions::{FeedbackFn, StateFn};
pub use presets::{preset, preset_from_uri, ParamMap, Preset, PresetInstance};

use crate::error::{Error, Result};
use crate::kernels::DelayKernel;

fn default_kernel() -> DelayKernel {
    DelayKernel::DiracAtZero
}

fn default_gate() -> StateFn {
    StateFn::ONE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub feedback: FeedbackFn,
    #[serde(default = "default_kernel")]
    pub kernel: DelayKernel,
    #[serde(default = "default_gate")]
    pub gate: StateFn,
    pub clearance: StateFn,
}

impl Stage {
    pub fn new(feedback: FeedbackFn, kernel: DelayKernel, gate: StateFn, clearance: StateFn) -> Self {
        Stage {
            feedback,
            kernel,
            gate,
            clearance,
        }
    }

    /// Ungated stage with instantaneous input and constant clearance.
    pub fn simple(feedback: FeedbackFn, clearance: f64) -> Self {
        Stage::new(feedback, DelayKernel::DiracAtZero, StateFn::ONE, StateFn::constant(clearance))
    }

    pub fn with_kernel(mut self, kernel: DelayKernel) -> Self {
        self.kernel = kernel;
        self
    }

    /// Net rate of change given the convolved input, own state and last compartment.
    #[inline]
    pub fn rate(&self, input: f64, own: f64, last: f64) -> f64 {
        self.gate.eval(last) * self.feedback.eval(input) - self.clearance.eval(last) * own
    }

    /// Production part `g(last) * f(input)`.
    #[inline]
    pub fn production(&self, input: f64, last: f64) -> f64 {
        self.gate.eval(last) * self.feedback.eval(input)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclicModel {
    stages: Vec<Stage>,
    labels: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    stages: Vec<Stage>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

impl CyclicModel {
    /// Builds a model with labels `x1..xn`. Structural problems are reported
    /// by [`CyclicModel::validate`], not here.
    pub fn new(stages: Vec<Stage>) -> Self {
        let labels = (1..=stages.len()).map(|i| format!("x{i}")).collect();
        CyclicModel { stages, labels }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, i: usize) -> &Stage {
        &self.stages[i]
    }

    pub fn stage_mut(&mut self, i: usize) -> &mut Stage {
        &mut self.stages[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.stages.len()
    }

    pub fn last(&self) -> usize {
        self.stages.len() - 1
    }

    /// Compartment consumed by stage `i`.
    pub fn upstream(&self, i: usize) -> usize {
        (i + self.n() - 1) % self.n()
    }

    /// Fails with `InvalidModel` on structural errors.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        match report.structural_errors.first() {
            Some(e) => Err(Error::InvalidModel(e.clone())),
            None => Ok(()),
        }
    }

    /// Right-hand side with each stage's convolved input supplied by the caller.
    pub fn rhs(&self, state: &[f64], inputs: &[f64], out: &mut [f64]) {
        let last = state[self.last()];
        for (i, st) in self.stages.iter().enumerate() {
            out[i] = st.rate(inputs[i], state[i], last);
        }
    }

    /// Right-hand side with every kernel treated as instantaneous.
    pub fn rhs_undelayed(&self, state: &[f64]) -> Vec<f64> {
        let inputs: Vec<f64> = (0..self.n()).map(|i| state[self.upstream(i)]).collect();
        let mut out = vec![0.0; self.n()];
        self.rhs(state, &inputs, &mut out);
        out
    }

    pub fn max_horizon(&self, tail_mass: f64) -> Result<f64> {
        let mut h: f64 = 0.0;
        for st in &self.stages {
            h = h.max(st.kernel.horizon(tail_mass)?);
        }
        Ok(h)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.n();
        if n < 2 {
            report.structural_errors.push(format!("n >= 2 required, got n = {n}"));
        }
        if self.labels.len() != n {
            report.structural_errors.push(format!(
                "{} labels given for {n} stages",
                self.labels.len()
            ));
        }
        for (i, st) in self.stages.iter().enumerate() {
            let parts = [
                ("feedback", st.feedback.check()),
                ("gate", st.gate.check()),
                ("clearance", st.clearance.check()),
            ];
            for (name, res) in parts {
                if let Err(e) = res {
                    report.structural_errors.push(format!("stage {}: {name}: {e}", i + 1));
                }
            }
        }

        let mut nonneg = true;
        for (i, st) in self.stages.iter().enumerate() {
            if !st.feedback.is_nonnegative() {
                nonneg = false;
                report.notes.push(format!("stage {}: feedback can be negative", i + 1));
            }
            let (gate_min, _) = st.gate.range_on_nonnegative();
            if gate_min < 0.0 {
                nonneg = false;
                report.notes.push(format!(
                    "stage {}: gate reaches {gate_min} < 0 on x >= 0",
                    i + 1
                ));
            }
            let (_, mu_max) = st.clearance.range_on_nonnegative();
            if !mu_max.is_finite() {
                nonneg = false;
                report.notes.push(format!("stage {}: clearance unbounded above", i + 1));
            }
            if !st.feedback.vanishes_at_zero_and_positive() {
                report.strict_feedback_violations.push(i);
            }
        }
        report.nonnegativity = nonneg;

        let first = self.stages.first().map(|s| &s.clearance);
        report.uniform_clearance = self.stages.iter().all(|s| Some(&s.clearance) == first);
        report.constant_clearances = self.stages.iter().all(|s| s.clearance.constant_value().is_some());

        if let Some(s) = self.stages.first() {
            if s.feedback == FeedbackFn::Zero {
                report
                    .flags
                    .push("stage-1 feedback is Zero: self-renewal-only first stage".to_string());
            }
        }
        for (i, st) in self.stages.iter().enumerate() {
            let (mu_min, _) = st.clearance.range_on_nonnegative();
            if mu_min <= 0.0 {
                report.flags.push(format!(
                    "stage {}: clearance can be <= 0 (net growth), inf = {mu_min}",
                    i + 1
                ));
            }
        }
        report
    }
}

impl<'de> Deserialize<'de> for CyclicModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDoc::deserialize(d)?;
        let model = CyclicModel::new(doc.stages);
        Ok(match doc.labels {
            Some(labels) => model.with_labels(labels),
            None => model,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub structural_errors: Vec<String>,
    /// Every feedback is non-negative on `x >= 0`, every gate is
    /// non-negative there and every clearance is bounded above.
    pub nonnegativity: bool,
    /// Stages (0-based) whose feedback fails `f(0) = 0, f > 0 on x > 0`.
    pub strict_feedback_violations: Vec<usize>,
    pub uniform_clearance: bool,
    pub constant_clearances: bool,
    pub flags: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.structural_errors.is_empty()
    }
}

/// Parses a JSON model document. Syntax errors and invalid parameter values
/// are reported with line and column; structural errors as `InvalidModel`.
pub fn parse_model_config(text: &str) -> Result<CyclicModel> {
    let model: CyclicModel = serde_json::from_str(text).map_err(|e| Error::Parse {
        message: strip_position(&e.to_string()),
        line: e.line(),
        column: e.column(),
    })?;
    model.ensure_valid()?;
    Ok(model)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Canonical JSON form; `parse_model_config` inverts it exactly.
pub fn serialize_model_config(model: &CyclicModel) -> String {
    serde_json::to_string_pretty(model).expect("model serialization cannot fail")
}
