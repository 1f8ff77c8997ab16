//! Preset parameter flags (`--a1 0.9`, `--tau-m=2`) are not known to the
//! argument parser ahead of time, so they are pulled out of argv first.

use cyclic_dde::model::{ParamMap, Preset};

use crate::UsageError;

fn normalize(name: &str) -> String {
    name.to_ascii_lowercase().replace('-', "_")
}

/// Name given to `--preset`, if any.
fn preset_name(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--preset" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--preset=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Splits `args` into the arguments left for the parser and the preset
/// parameter overrides.
pub fn extract(args: &[String]) -> Result<(Vec<String>, ParamMap), UsageError> {
    let Some(name) = preset_name(args) else {
        return Ok((args.to_vec(), ParamMap::new()));
    };
    let preset: Preset = name
        .parse()
        .map_err(|e: cyclic_dde::Error| UsageError(e.to_string()))?;
    let known = preset.param_names();
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = ParamMap::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let flag = a.strip_prefix("--").filter(|_| a.len() > 2);
        let (key, inline) = match flag {
            Some(f) => match f.split_once('=') {
                Some((k, v)) => (normalize(k), Some(v.to_string())),
                None => (normalize(f), None),
            },
            None => (String::new(), None),
        };
        if flag.is_some() && known.contains(&key) {
            let value = match inline {
                Some(v) => v,
                None => {
                    i += 1;
                    args.get(i).cloned().ok_or_else(|| UsageError(format!("--{key} needs a value")))?
                }
            };
            let v: f64 = value
                .parse()
                .map_err(|_| UsageError(format!("--{key}: `{value}` is not a number")))?;
            overrides.insert(key, v);
        } else {
            rest.push(a.clone());
        }
        i += 1;
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn pulls_out_known_parameters() {
        let (rest, p) = extract(&argv("x equilibria --preset knauer --a1 0.9 --A2=0.5 --k 1 --lo 0")).unwrap();
        assert_eq!(rest, argv("x equilibria --preset knauer --lo 0"));
        assert_eq!(p["a1"], 0.9);
        assert_eq!(p["a2"], 0.5);
        assert_eq!(p["k"], 1.0);
    }

    #[test]
    fn dashes_map_to_underscores() {
        let (_, p) = extract(&argv("x simulate --preset yildirim --tau-m 2e0")).unwrap();
        assert_eq!(p["tau_m"], 2.0);
    }

    #[test]
    fn bad_value_is_a_usage_error() {
        assert!(extract(&argv("x simulate --preset knauer --a1 abc")).is_err());
        assert!(extract(&argv("x simulate --preset nope")).is_err());
    }

    #[test]
    fn no_preset_leaves_args_alone() {
        let a = argv("x simulate --model m.json --h 0.1");
        assert_eq!(extract(&a).unwrap().0, a);
    }
}
