//! Argument grammar. Defaults:
//!
//! | flag | default |
//! |------|---------|
//! | `--h` | 1e-3 |
//! | `--t-end` | 50 |
//! | `--tail-mass` | 1e-10 |
//! | `--seed` | 0 |
//! | `--lo`, `--hi`, `--brackets` | 0, 100, 2000 |
//! | `--re-min`, `--re-max`, `--im-max` | -3, 1, 20 |
//! | `--grid-re`, `--grid-im` | 24, 40 |
//! | `--tol` | 1e-3 |

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

#[derive(Debug, Parser)]
#[command(name = "cyclic-dde", version, about = "Cyclic distributed-delay models: simulation, reduction and stability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the full cyclic system from a constant history.
    Simulate(SimulateArgs),
    /// Compare the full system with its reduced or chain-expanded form.
    CheckEquivalence(EquivalenceArgs),
    /// Equilibria of the reduced scalar equation.
    Equilibria(EquilibriaArgs),
    /// Evaluate the characteristic function at one point.
    Char(CharArgs),
    /// Characteristic roots in a rectangle of the complex plane.
    Roots(RootsArgs),
    /// Sweep one preset parameter and track the rightmost root.
    Scan(ScanArgs),
    /// Structural and qualitative checks of a model.
    Validate(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::CheckEquivalence(_) => "check-equivalence",
            Command::Equilibria(_) => "equilibria",
            Command::Char(_) => "char",
            Command::Roots(_) => "roots",
            Command::Scan(_) => "scan",
            Command::Validate(_) => "validate",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) => &a.common,
            Command::CheckEquivalence(a) => &a.common,
            Command::Equilibria(a) => &a.common,
            Command::Char(a) => &a.common,
            Command::Roots(a) => &a.common,
            Command::Scan(a) => &a.common,
            Command::Validate(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON model document.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub model: Option<PathBuf>,
    /// goodwin, yildirim, knauer or knauer_singular; parameters follow as `--<name> <value>`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long = "t-end", default_value_t = 50.0)]
    pub t_end: f64,
    #[arg(long = "tail-mass", default_value_t = cyclic_dde::simulate::DEFAULT_TAIL_MASS)]
    pub tail_mass: f64,
    /// Primary output file; a `<out>.manifest.json` is written next to it.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
    /// Recorded in the manifest.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EquilibriumSearch {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 100.0)]
    pub hi: f64,
    #[arg(long, default_value_t = 2000)]
    pub brackets: usize,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long = "re-min", default_value_t = -3.0, allow_negative_numbers = true)]
    pub re_min: f64,
    #[arg(long = "re-max", default_value_t = 1.0, allow_negative_numbers = true)]
    pub re_max: f64,
    #[arg(long = "im-max", default_value_t = 20.0)]
    pub im_max: f64,
    #[arg(long = "grid-re", default_value_t = 24)]
    pub grid_re: usize,
    #[arg(long = "grid-im", default_value_t = 40)]
    pub grid_im: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Constant history `x1,...,xn`; defaults to 1.2 times the largest positive equilibrium.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub initial: Option<Vec<f64>>,
    /// Long-format `t,compartment,value` CSV for plotting tools.
    #[arg(long = "plot-data")]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Reduction,
    Lct,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Reduction)]
    pub mode: ModeArg,
    /// Stages to eliminate, by label or 1-based index (`u2` or `2`).
    #[arg(long, value_delimiter = ',')]
    pub eliminate: Option<Vec<String>>,
    #[arg(long, default_value_t = cyclic_dde::equivalence::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: EquilibriumSearch,
}

#[derive(Debug, Args)]
pub struct CharArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: EquilibriumSearch,
    /// Evaluation point, e.g. `1+2i`, `-0.5`, `3i`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda: Complex64,
}

#[derive(Debug, Args)]
pub struct RootsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: EquilibriumSearch,
    #[command(flatten)]
    pub region: RegionArgs,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: EquilibriumSearch,
    #[command(flatten)]
    pub region: RegionArgs,
    /// Preset parameter to sweep.
    #[arg(long)]
    pub param: String,
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 21)]
    pub points: usize,
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`, `a+i`).
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("`{s}` is not a complex number (expected a+bi)");
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent or the leading sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re.is_empty() { 0.0 } else { re.parse::<f64>().map_err(|_| bad())? };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}
