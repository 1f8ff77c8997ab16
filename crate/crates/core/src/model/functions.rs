//! Scalar response functions used by stages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Production term applied to the (delayed) upstream compartment.
///
/// Hill variants are evaluated on `max(x, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeedbackSpec", into = "FeedbackSpec")]
pub enum FeedbackFn {
    Zero,
    Constant { value: f64 },
    Linear { alpha: f64 },
    HillUp { vmax: f64, k: f64, n: f64 },
    HillDown { vmax: f64, k: f64, n: f64 },
    /// `alpha * exp_factor * x`; `exp_factor` carries survival factors such
    /// as `exp(-decay * delay)`.
    ScaledLinear { alpha: f64, exp_factor: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FeedbackSpec {
    Zero,
    Constant { value: f64 },
    Linear { alpha: f64 },
    HillUp { vmax: f64, k: f64, n: f64 },
    HillDown { vmax: f64, k: f64, n: f64 },
    ScaledLinear { alpha: f64, exp_factor: f64 },
}

impl TryFrom<FeedbackSpec> for FeedbackFn {
    type Error = Error;

    fn try_from(s: FeedbackSpec) -> Result<Self> {
        let f = match s {
            FeedbackSpec::Zero => FeedbackFn::Zero,
            FeedbackSpec::Constant { value } => FeedbackFn::Constant { value },
            FeedbackSpec::Linear { alpha } => FeedbackFn::Linear { alpha },
            FeedbackSpec::HillUp { vmax, k, n } => FeedbackFn::HillUp { vmax, k, n },
            FeedbackSpec::HillDown { vmax, k, n } => FeedbackFn::HillDown { vmax, k, n },
            FeedbackSpec::ScaledLinear { alpha, exp_factor } => {
                FeedbackFn::ScaledLinear { alpha, exp_factor }
            }
        };
        f.check()?;
        Ok(f)
    }
}

impl From<FeedbackFn> for FeedbackSpec {
    fn from(f: FeedbackFn) -> Self {
        match f {
            FeedbackFn::Zero => FeedbackSpec::Zero,
            FeedbackFn::Constant { value } => FeedbackSpec::Constant { value },
            FeedbackFn::Linear { alpha } => FeedbackSpec::Linear { alpha },
            FeedbackFn::HillUp { vmax, k, n } => FeedbackSpec::HillUp { vmax, k, n },
            FeedbackFn::HillDown { vmax, k, n } => FeedbackSpec::HillDown { vmax, k, n },
            FeedbackFn::ScaledLinear { alpha, exp_factor } => {
                FeedbackSpec::ScaledLinear { alpha, exp_factor }
            }
        }
    }
}

fn field(name: &str, message: impl Into<String>) -> Error {
    Error::Field {
        field: name.to_string(),
        message: message.into(),
    }
}

fn require(ok: bool, name: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(field(name, message))
    }
}

fn hill_parts(y: f64, k: f64, n: f64) -> (f64, f64) {
    // returns (y^n / (k^n + y^n), d/dy of it)
    if y <= 0.0 {
        let slope = if n == 1.0 { 1.0 / k } else { 0.0 };
        return (0.0, slope);
    }
    let r = (y / k).powf(n);
    let frac = r / (1.0 + r);
    let slope = n * r / (y * (1.0 + r) * (1.0 + r));
    (frac, slope)
}

impl FeedbackFn {
    pub fn check(&self) -> Result<()> {
        let finite = |v: f64, name: &str| require(v.is_finite(), name, "must be finite");
        match *self {
            FeedbackFn::Zero => Ok(()),
            FeedbackFn::Constant { value } => {
                finite(value, "value")?;
                require(value >= 0.0, "value", "must be >= 0")
            }
            FeedbackFn::Linear { alpha } => {
                finite(alpha, "alpha")?;
                require(alpha >= 0.0, "alpha", "must be >= 0")
            }
            FeedbackFn::ScaledLinear { alpha, exp_factor } => {
                finite(alpha, "alpha")?;
                finite(exp_factor, "exp_factor")?;
                require(alpha >= 0.0, "alpha", "must be >= 0")?;
                require(exp_factor > 0.0, "exp_factor", "must be > 0")
            }
            FeedbackFn::HillUp { vmax, k, n } | FeedbackFn::HillDown { vmax, k, n } => {
                finite(vmax, "vmax")?;
                finite(k, "k")?;
                finite(n, "n")?;
                require(vmax > 0.0, "vmax", "must be > 0")?;
                require(k > 0.0, "k", "must be > 0")?;
                require(n >= 1.0, "n", "must be >= 1")
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FeedbackFn::Zero => 0.0,
            FeedbackFn::Constant { value } => value,
            FeedbackFn::Linear { alpha } => alpha * x,
            FeedbackFn::ScaledLinear { alpha, exp_factor } => alpha * exp_factor * x,
            FeedbackFn::HillUp { vmax, k, n } => vmax * hill_parts(x.max(0.0), k, n).0,
            FeedbackFn::HillDown { vmax, k, n } => {
                let y = x.max(0.0);
                if y == 0.0 {
                    vmax
                } else {
                    vmax / (1.0 + (y / k).powf(n))
                }
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            FeedbackFn::Zero | FeedbackFn::Constant { .. } => 0.0,
            FeedbackFn::Linear { alpha } => alpha,
            FeedbackFn::ScaledLinear { alpha, exp_factor } => alpha * exp_factor,
            FeedbackFn::HillUp { vmax, k, n } => {
                if x < 0.0 {
                    0.0
                } else {
                    vmax * hill_parts(x, k, n).1
                }
            }
            FeedbackFn::HillDown { vmax, k, n } => {
                if x < 0.0 {
                    0.0
                } else {
                    -vmax * hill_parts(x, k, n).1
                }
            }
        }
    }

    /// `f(0) = 0` and `f > 0` on `x > 0`.
    pub fn vanishes_at_zero_and_positive(&self) -> bool {
        match *self {
            FeedbackFn::Linear { alpha } => alpha > 0.0,
            FeedbackFn::ScaledLinear { alpha, .. } => alpha > 0.0,
            FeedbackFn::HillUp { .. } => true,
            FeedbackFn::Zero | FeedbackFn::Constant { .. } | FeedbackFn::HillDown { .. } => false,
        }
    }

    /// `f >= 0` on `x >= 0`.
    pub fn is_nonnegative(&self) -> bool {
        self.check().is_ok()
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FeedbackFn::Zero => "zero",
            FeedbackFn::Constant { .. } => "constant",
            FeedbackFn::Linear { .. } => "linear",
            FeedbackFn::HillUp { .. } => "hill_up",
            FeedbackFn::HillDown { .. } => "hill_down",
            FeedbackFn::ScaledLinear { .. } => "scaled_linear",
        }
    }
}

/// Function of the last compartment used for gates and clearances.
///
/// `HillGate` is `offset + a / (1 + k x)`; `SaturatingLoss` is
/// `alpha - beta x / (k + x)`. Both are evaluated on `max(x, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpec", into = "StateSpec")]
pub enum StateFn {
    Constant { value: f64 },
    HillGate { a: f64, k: f64, offset: f64 },
    SaturatingLoss { alpha: f64, beta: f64, k: f64 },
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum StateSpec {
    Constant {
        value: f64,
    },
    HillGate {
        a: f64,
        k: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        offset: f64,
    },
    SaturatingLoss {
        alpha: f64,
        beta: f64,
        k: f64,
    },
}

impl TryFrom<StateSpec> for StateFn {
    type Error = Error;

    fn try_from(s: StateSpec) -> Result<Self> {
        let f = match s {
            StateSpec::Constant { value } => StateFn::Constant { value },
            StateSpec::HillGate { a, k, offset } => StateFn::HillGate { a, k, offset },
            StateSpec::SaturatingLoss { alpha, beta, k } => {
                StateFn::SaturatingLoss { alpha, beta, k }
            }
        };
        f.check()?;
        Ok(f)
    }
}

impl From<StateFn> for StateSpec {
    fn from(f: StateFn) -> Self {
        match f {
            StateFn::Constant { value } => StateSpec::Constant { value },
            StateFn::HillGate { a, k, offset } => StateSpec::HillGate { a, k, offset },
            StateFn::SaturatingLoss { alpha, beta, k } => {
                StateSpec::SaturatingLoss { alpha, beta, k }
            }
        }
    }
}

impl StateFn {
    pub const ONE: StateFn = StateFn::Constant { value: 1.0 };

    pub fn constant(value: f64) -> Self {
        StateFn::Constant { value }
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            StateFn::Constant { value } => require(value.is_finite(), "value", "must be finite"),
            StateFn::HillGate { a, k, offset } => {
                require(a.is_finite(), "a", "must be finite")?;
                require(offset.is_finite(), "offset", "must be finite")?;
                require(k.is_finite() && k >= 0.0, "k", "must be >= 0")
            }
            StateFn::SaturatingLoss { alpha, beta, k } => {
                require(alpha.is_finite(), "alpha", "must be finite")?;
                require(beta.is_finite() && beta >= 0.0, "beta", "must be >= 0")?;
                require(k.is_finite() && k > 0.0, "k", "must be > 0")
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = x.max(0.0);
        match *self {
            StateFn::Constant { value } => value,
            StateFn::HillGate { a, k, offset } => offset + a / (1.0 + k * y),
            StateFn::SaturatingLoss { alpha, beta, k } => alpha - beta * y / (k + y),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let y = x.max(0.0);
        match *self {
            StateFn::Constant { .. } => 0.0,
            StateFn::HillGate { a, k, .. } => -a * k / ((1.0 + k * y) * (1.0 + k * y)),
            StateFn::SaturatingLoss { beta, k, .. } => -beta * k / ((k + y) * (k + y)),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            StateFn::Constant { value } => Some(value),
            StateFn::HillGate { a, k, offset } if a == 0.0 || k == 0.0 => Some(offset + a),
            StateFn::SaturatingLoss { alpha, beta: 0.0, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Infimum and supremum over `x >= 0`. All variants are monotone, so the
    /// bounds are the values at `0` and `∞`.
    pub fn range_on_nonnegative(&self) -> (f64, f64) {
        let (at0, at_inf) = match *self {
            StateFn::Constant { value } => (value, value),
            StateFn::HillGate { a, k, offset } => {
                (offset + a, if k > 0.0 { offset } else { offset + a })
            }
            StateFn::SaturatingLoss { alpha, beta, .. } => (alpha, alpha - beta),
        };
        (at0.min(at_inf), at0.max(at_inf))
    }
}
