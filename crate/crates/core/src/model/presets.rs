//! Named example models with default parameters.
//!
//! Defaults live in `fixtures/presets.json`. Parameter names are
//! lower-case; lookups are case-insensitive and accept `-` for `_`.
//!
//! | preset | stages (last = fed back) |
//! |---|---|
//! | `goodwin` | I, E, M |
//! | `yildirim` | M, I, E |
//! | `knauer` | u1, u2, u3 |
//! | `knauer_singular` | u2, u3 |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{CyclicModel, FeedbackFn, Stage, StateFn};
use crate::error::{Error, Result};
use crate::kernels::DelayKernel;

const DEFAULTS_JSON: &str = include_str!("../../fixtures/presets.json");

pub type ParamMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Goodwin,
    Yildirim,
    Knauer,
    KnauerSingular,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Goodwin,
        Preset::Yildirim,
        Preset::Knauer,
        Preset::KnauerSingular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Goodwin => "goodwin",
            Preset::Yildirim => "yildirim",
            Preset::Knauer => "knauer",
            Preset::KnauerSingular => "knauer_singular",
        }
    }

    pub fn defaults(self) -> ParamMap {
        let doc: serde_json::Value =
            serde_json::from_str(DEFAULTS_JSON).expect("preset fixture is valid JSON");
        doc[self.name()]
            .as_object()
            .expect("preset fixture has an entry per preset")
            .iter()
            .map(|(k, v)| (k.clone(), v.as_f64().expect("numeric default")))
            .collect()
    }

    pub fn param_names(self) -> Vec<String> {
        self.defaults().into_keys().collect()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// A preset model together with its fully resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetInstance {
    pub preset: Preset,
    pub params: ParamMap,
    pub model: CyclicModel,
    /// Existence conditions that fail at these parameters.
    pub flags: Vec<String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

/// Builds `preset` with `overrides` applied on top of the defaults.
pub fn preset(preset: Preset, overrides: &ParamMap) -> Result<PresetInstance> {
    let mut params = preset.defaults();
    for (k, v) in overrides {
        let key = normalize_key(k);
        match params.get_mut(&key) {
            Some(slot) => *slot = *v,
            None => return Err(Error::UnknownParameter(k.clone())),
        }
    }
    let get = |name: &str| -> Result<f64> {
        params
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    };
    let positive = |name: &str| -> Result<f64> {
        let v = get(name)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InfeasibleParameters(format!("{name} must be > 0, got {v}")))
        }
    };
    let nonneg = |name: &str| -> Result<f64> {
        let v = get(name)?;
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InfeasibleParameters(format!("{name} must be >= 0, got {v}")))
        }
    };
    let kernel = |tau: f64| {
        DelayKernel::dirac(tau).map_err(|e| Error::InfeasibleParameters(e.to_string()))
    };

    let mut flags = Vec::new();
    let model = match preset {
        Preset::Goodwin => {
            let hill = FeedbackFn::HillDown {
                vmax: positive("vmax")?,
                k: positive("k")?,
                n: get("n")?,
            };
            check_fn(&hill)?;
            CyclicModel::new(vec![
                Stage::simple(FeedbackFn::Linear { alpha: nonneg("alpha_i")? }, positive("gamma_i")?),
                Stage::simple(FeedbackFn::Linear { alpha: nonneg("alpha_e")? }, positive("gamma_e")?),
                Stage::simple(hill, positive("gamma_m")?),
            ])
            .with_labels(labels(&["I", "E", "M"]))
        }
        Preset::Yildirim => {
            let tau_m = nonneg("tau_m")?;
            let tau_i = nonneg("tau_i")?;
            let nu_e = nonneg("nu_e")?;
            let nu_m = nonneg("nu_m")?;
            // F(e^{-nu_e tau_m} E) is a Hill function of E with a rescaled threshold.
            let hill = FeedbackFn::HillUp {
                vmax: positive("vmax")?,
                k: positive("k")? * (nu_e * tau_m).exp(),
                n: get("n")?,
            };
            check_fn(&hill)?;
            let gate = StateFn::SaturatingLoss {
                alpha: nonneg("alpha_e")?,
                beta: nonneg("beta_e")?,
                k: positive("k_e")?,
            };
            if get("beta_e")? > get("alpha_e")? {
                flags.push("beta_e > alpha_e: E production gate turns negative".to_string());
            }
            CyclicModel::new(vec![
                Stage::new(hill, kernel(tau_m)?, StateFn::ONE, StateFn::constant(positive("gamma_m")?)),
                Stage::new(
                    FeedbackFn::ScaledLinear {
                        alpha: nonneg("alpha_i")?,
                        exp_factor: (-nu_m * tau_i).exp(),
                    },
                    kernel(tau_i)?,
                    StateFn::ONE,
                    StateFn::constant(positive("gamma_i")?),
                ),
                Stage::new(
                    FeedbackFn::Linear { alpha: 1.0 },
                    DelayKernel::DiracAtZero,
                    gate,
                    StateFn::constant(positive("gamma_e")?),
                ),
            ])
            .with_labels(labels(&["M", "I", "E"]))
        }
        Preset::Knauer => {
            let (a1, a2) = (nonneg("a1")?, nonneg("a2")?);
            let (p1, p2) = (positive("p1")?, positive("p2")?);
            let (k, d3) = (positive("k")?, positive("d3")?);
            knauer_flags(a1, a2, &mut flags);
            CyclicModel::new(vec![
                Stage::new(
                    FeedbackFn::Zero,
                    DelayKernel::DiracAtZero,
                    StateFn::ONE,
                    renewal_clearance(a1, p1, k),
                ),
                Stage::new(
                    FeedbackFn::Linear { alpha: 1.0 },
                    DelayKernel::DiracAtZero,
                    transfer_gate(a1, p1, k),
                    renewal_clearance(a2, p2, k),
                ),
                Stage::new(
                    FeedbackFn::Linear { alpha: 1.0 },
                    DelayKernel::DiracAtZero,
                    transfer_gate(a2, p2, k),
                    StateFn::constant(d3),
                ),
            ])
            .with_labels(labels(&["u1", "u2", "u3"]))
        }
        Preset::KnauerSingular => {
            let a2 = nonneg("a2")?;
            let p2 = positive("p2")?;
            let (k, d3) = (positive("k")?, positive("d3")?);
            if 2.0 * a2 <= 1.0 {
                flags.push("positive equilibrium absent: requires 2 a2 > 1".to_string());
            }
            CyclicModel::new(vec![
                Stage::new(
                    FeedbackFn::Zero,
                    DelayKernel::DiracAtZero,
                    StateFn::ONE,
                    renewal_clearance(a2, p2, k),
                ),
                Stage::new(
                    FeedbackFn::Linear { alpha: 1.0 },
                    DelayKernel::DiracAtZero,
                    transfer_gate(a2, p2, k),
                    StateFn::constant(d3),
                ),
            ])
            .with_labels(labels(&["u2", "u3"]))
        }
    };
    Ok(PresetInstance {
        preset,
        params,
        model,
        flags,
    })
}

fn check_fn(f: &FeedbackFn) -> Result<()> {
    f.check().map_err(|e| Error::InfeasibleParameters(e.to_string()))
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `p (1 - 2a / (1 + k u))`: minus the net self-renewal rate.
fn renewal_clearance(a: f64, p: f64, k: f64) -> StateFn {
    StateFn::HillGate {
        a: -2.0 * a * p,
        k,
        offset: p,
    }
}

/// `2p (1 - a / (1 + k u))`: rate of transfer to the next compartment.
fn transfer_gate(a: f64, p: f64, k: f64) -> StateFn {
    StateFn::HillGate {
        a: -2.0 * p * a,
        k,
        offset: 2.0 * p,
    }
}

fn knauer_flags(a1: f64, a2: f64, flags: &mut Vec<String>) {
    if a2 >= a1 {
        flags.push("positive equilibrium absent: requires a2 < a1".to_string());
    }
    if 2.0 * a1 <= 1.0 {
        flags.push("positive equilibrium absent: requires 2 a1 > 1".to_string());
    }
}

/// Resolves `preset://name?key=value&...`.
pub fn preset_from_uri(uri: &str) -> Result<PresetInstance> {
    let rest = uri
        .strip_prefix("preset://")
        .ok_or_else(|| Error::UnknownPreset(uri.to_string()))?;
    let (name, query) = match rest.split_once('?') {
        Some((n, q)) => (n, q),
        None => (rest, ""),
    };
    let p: Preset = name.parse()?;
    let mut overrides = ParamMap::new();
    for pair in query.split('&').filter(|s| !s.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::MissingParameter(format!("{pair} (expected key=value)")))?;
        let value: f64 = v.parse().map_err(|_| Error::Field {
            field: k.to_string(),
            message: format!("`{v}` is not a number"),
        })?;
        overrides.insert(k.to_string(), value);
    }
    preset(p, &overrides)
}

impl PresetInstance {
    /// Canonical `preset://` reference reproducing this instance.
    pub fn uri(&self) -> String {
        let query: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v:?}")).collect();
        format!("preset://{}?{}", self.preset.name(), query.join("&"))
    }
}
