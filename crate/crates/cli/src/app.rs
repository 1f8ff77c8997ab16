//! Subcommand dispatch.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;
use cyclic_dde::equivalence::{check_equivalence, default_initial_state, EquivalenceConfig, EquivalenceMode};
use cyclic_dde::model::{parse_model_config, preset, ParamMap, Preset, PresetInstance};
use cyclic_dde::output::{fmt_f64, trajectory_csv_from};
use cyclic_dde::simulate::{integrate_cyclic, required_history};
use cyclic_dde::stability::{
    build_characteristic, find_equilibria, find_roots, hopf_scan, yildirim_char_oracle, EquilibriumReport, Grid, Region,
    ScanOptions,
};
use cyclic_dde::{Complex64, CyclicModel, SimConfig, Trajectory};
use serde::Serialize;

use crate::args::{
    CharArgs, Cli, Command, CommonArgs, EquilibriaArgs, EquilibriumSearch, EquivalenceArgs, ModeArg, RegionArgs, RootsArgs,
    ScanArgs, SimulateArgs,
};
use crate::manifest::{manifest_path, ModelSource, RunManifest};
use crate::{overrides, Failure, UsageError};

struct LoadedModel {
    model: CyclicModel,
    source: ModelSource,
    params: ParamMap,
    preset: Option<PresetInstance>,
}

fn load_model(common: &CommonArgs, overrides: &ParamMap) -> Result<LoadedModel, Failure> {
    if let Some(path) = &common.model {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read model file {}: {e}", path.display())))?;
        let model = parse_model_config(&text)?;
        return Ok(LoadedModel {
            model,
            source: ModelSource::File {
                path: path.display().to_string(),
            },
            params: ParamMap::new(),
            preset: None,
        });
    }
    let name = common.preset.as_deref().ok_or_else(|| UsageError("--model or --preset is required".into()))?;
    let kind: Preset = name.parse()?;
    let inst = preset(kind, overrides)?;
    Ok(LoadedModel {
        model: inst.model.clone(),
        source: ModelSource::Preset { uri: inst.uri() },
        params: inst.params.clone(),
        preset: Some(inst),
    })
}

fn sim_config(common: &CommonArgs) -> Result<SimConfig, Failure> {
    let cfg = SimConfig::new(common.h, common.t_end).with_tail_mass(common.tail_mass);
    cfg.check()?;
    Ok(cfg)
}

/// Collects primary output text and file names for the manifest.
struct Outputs {
    files: Vec<String>,
}

impl Outputs {
    fn write_file(&mut self, path: &Path, content: &str) -> Result<(), Failure> {
        fs::write(path, content).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path.display().to_string());
        Ok(())
    }

    /// Writes `content` to `-o` when given, else to stdout.
    fn primary(&mut self, out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
        match out {
            Some(p) => self.write_file(p, content),
            None => {
                print_out(content);
                Ok(())
            }
        }
    }
}

fn print_out(s: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(s.as_bytes());
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Value rounded to 12 significant digits, printed in shortest form.
fn short(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if rounded != 0.0 && !(1e-4..1e15).contains(&rounded.abs()) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

fn fmt_complex(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

/// Entry point; `argv[0]` is the program name.
pub fn run(argv: &[String]) -> Result<(), Failure> {
    let (rest, overrides) = overrides::extract(argv)?;
    let cli = match Cli::try_parse_from(&rest) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print_out(&e.to_string());
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return Err(UsageError(first.trim_start_matches("error: ").to_string()).into());
        }
    };
    let common = cli.command.common().clone();
    let loaded = load_model(&common, &overrides)?;
    let sim = sim_config(&common)?;
    let mut outputs = Outputs { files: Vec::new() };

    let result = match &cli.command {
        Command::Simulate(a) => simulate(a, &loaded, &sim, &mut outputs),
        Command::CheckEquivalence(a) => equivalence(a, &loaded, &sim, &mut outputs),
        Command::Equilibria(a) => equilibria(a, &loaded, &mut outputs),
        Command::Char(a) => characteristic(a, &loaded, &mut outputs),
        Command::Roots(a) => roots(a, &loaded, &mut outputs),
        Command::Scan(a) => scan(a, &loaded, &overrides, &mut outputs),
        Command::Validate(_) => {
            let report = loaded.model.validate();
            outputs.primary(&common.out, &to_json(&report))
        }
    };

    if let Some(first) = outputs.files.first() {
        let manifest = RunManifest {
            command: cli.command.name().to_string(),
            argv: argv.iter().skip(1).cloned().collect(),
            model_source: loaded.source.clone(),
            params: loaded.params.clone(),
            sim,
            seed: common.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: outputs.files.clone(),
        };
        let path = manifest_path(Path::new(first));
        fs::write(&path, manifest.to_json())
            .map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))?;
    }
    result
}

fn initial_state(model: &CyclicModel, given: &Option<Vec<f64>>) -> Result<Vec<f64>, Failure> {
    match given {
        Some(v) if v.len() != model.n() => Err(UsageError(format!(
            "--initial has {} values, model has {} compartments",
            v.len(),
            model.n()
        ))
        .into()),
        Some(v) => Ok(v.clone()),
        None => Ok(default_initial_state(model)),
    }
}

fn plot_csv(tr: &Trajectory, labels: &[String], first: usize) -> String {
    let mut out = String::from("t,compartment,value\n");
    for k in first..tr.len() {
        let t = fmt_f64(tr.time(k));
        for (c, label) in labels.iter().enumerate() {
            let _ = writeln!(out, "{t},{label},{}", fmt_f64(tr.column(c)[k]));
        }
    }
    out
}

fn simulate(a: &SimulateArgs, m: &LoadedModel, sim: &SimConfig, out: &mut Outputs) -> Result<(), Failure> {
    let model = &m.model;
    let initial = initial_state(model, &a.initial)?;
    let span = required_history(model, sim.h, sim.tail_mass)?;
    let history = Trajectory::constant(&initial, sim.h, span)?;
    let tr = integrate_cyclic(model, &history, sim)?;
    let first = tr.first_index_at_or_after(0.0);
    out.primary(&a.common.out, &trajectory_csv_from(&tr, model.labels(), first))?;
    if let Some(p) = &a.plot_data {
        out.write_file(p, &plot_csv(&tr, model.labels(), first))?;
    }
    Ok(())
}

fn stage_index(model: &CyclicModel, token: &str) -> Result<usize, UsageError> {
    let t = token.trim();
    if let Some(i) = model.labels().iter().position(|l| l == t) {
        return Ok(i);
    }
    match t.parse::<usize>() {
        Ok(i) if (1..=model.n()).contains(&i) => Ok(i - 1),
        _ => Err(UsageError(format!(
            "--eliminate: `{t}` is neither a label ({}) nor a stage number 1..{}",
            model.labels().join(", "),
            model.n()
        ))),
    }
}

fn equivalence(a: &EquivalenceArgs, m: &LoadedModel, sim: &SimConfig, out: &mut Outputs) -> Result<(), Failure> {
    let model = &m.model;
    let mode = match a.mode {
        ModeArg::Lct => {
            if a.eliminate.is_some() {
                return Err(UsageError("--eliminate applies to reduction mode only".into()).into());
            }
            EquivalenceMode::Lct
        }
        ModeArg::Reduction => EquivalenceMode::Reduction {
            eliminate: a
                .eliminate
                .as_ref()
                .map(|v| v.iter().map(|t| stage_index(model, t)).collect::<Result<Vec<_>, _>>())
                .transpose()?,
        },
    };
    let cfg = EquivalenceConfig {
        sim: *sim,
        mode,
        initial: a.initial.clone().map(|v| initial_state(model, &Some(v))).transpose()?,
        tolerance: a.tol,
    };
    let report = check_equivalence(model, &cfg)?;
    let mut text = String::new();
    for c in &report.compartments {
        let role = serde_json::to_value(c.role).expect("role serializes");
        let _ = writeln!(
            text,
            "{} {} deviation={:e} {}",
            c.label,
            role.as_str().unwrap_or(""),
            c.deviation,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(text, "max_deviation={:e} tolerance={:e}", report.max_deviation(), report.tolerance);
    print_out(&text);
    if let Some(p) = &a.common.out {
        out.write_file(p, &report.to_json())?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "equivalence check failed: max deviation {:e} exceeds {:e}",
            report.max_deviation(),
            report.tolerance
        )))
    }
}

fn search(model: &CyclicModel, s: &EquilibriumSearch) -> Result<EquilibriumReport, Failure> {
    Ok(find_equilibria(model, [s.lo, s.hi], s.brackets)?)
}

/// Positive equilibrium with the largest last compartment.
fn operating_point(model: &CyclicModel, s: &EquilibriumSearch) -> Result<Vec<f64>, Failure> {
    let rep = search(model, s)?;
    rep.positive()
        .max_by(|a, b| a.x_star.total_cmp(&b.x_star))
        .map(|e| e.state.clone())
        .ok_or_else(|| no_equilibrium(&rep))
}

fn no_equilibrium(rep: &EquilibriumReport) -> Failure {
    let why = if rep.flags.is_empty() { String::new() } else { format!(" ({})", rep.flags.join("; ")) };
    Failure::Domain(format!(
        "no nontrivial equilibrium in [{}, {}]{why}",
        rep.scan_interval[0], rep.scan_interval[1]
    ))
}

fn equilibria(a: &EquilibriaArgs, m: &LoadedModel, out: &mut Outputs) -> Result<(), Failure> {
    let model = &m.model;
    let rep = search(model, &a.search)?;
    let mut text = String::new();
    for (k, e) in rep.roots.iter().enumerate() {
        let kind = serde_json::to_value(e.kind).expect("kind serializes");
        let values: Vec<String> = model
            .labels()
            .iter()
            .zip(&e.state)
            .map(|(l, v)| format!("{l}*={}", short(*v)))
            .collect();
        let _ = writeln!(
            text,
            "equilibrium {} ({}): {} residual={:e}",
            k + 1,
            kind.as_str().unwrap_or(""),
            values.join(" "),
            e.residual
        );
    }
    for f in &rep.flags {
        let _ = writeln!(text, "flag: {f}");
    }
    print_out(&text);
    if let Some(p) = &a.common.out {
        out.write_file(p, &rep.to_json())?;
    }
    if rep.positive().next().is_some() {
        Ok(())
    } else {
        Err(no_equilibrium(&rep))
    }
}

#[derive(Serialize)]
struct CharReport {
    lambda: [f64; 2],
    state: Vec<f64>,
    delta: [f64; 2],
    delta_cleared: [f64; 2],
    oracle: Option<[f64; 2]>,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn characteristic(a: &CharArgs, m: &LoadedModel, out: &mut Outputs) -> Result<(), Failure> {
    let model = &m.model;
    let state = operating_point(model, &a.search)?;
    let cf = build_characteristic(model, &state)?;
    let delta = cf.eval(a.lambda)?;
    let cleared = cf.eval_cleared(a.lambda)?;
    let oracle = match &m.preset {
        Some(inst) if inst.preset == Preset::Yildirim => {
            Some(yildirim_char_oracle(&inst.params, state[2], state[1], a.lambda)?)
        }
        _ => None,
    };
    let mut text = String::new();
    let _ = writeln!(text, "lambda={}", fmt_complex(a.lambda));
    let _ = writeln!(text, "x_star={}", cf.x_star());
    let _ = writeln!(text, "delta={}", fmt_complex(delta));
    let _ = writeln!(text, "delta_cleared={}", fmt_complex(cleared));
    if let Some(o) = oracle {
        // the closed form is stated with the stage denominators cleared
        let _ = writeln!(text, "oracle={}", fmt_complex(o));
        let _ = writeln!(text, "oracle_abs_diff={:e}", (cleared - o).norm());
    }
    print_out(&text);
    if let Some(p) = &a.common.out {
        let report = CharReport {
            lambda: pair(a.lambda),
            state,
            delta: pair(delta),
            delta_cleared: pair(cleared),
            oracle: oracle.map(pair),
        };
        out.write_file(p, &to_json(&report))?;
    }
    Ok(())
}

fn region_grid(r: &RegionArgs) -> Result<(Region, Grid), Failure> {
    Ok((
        Region::new(r.re_min, r.re_max, r.im_max)?,
        Grid {
            n_re: r.grid_re,
            n_im: r.grid_im,
        },
    ))
}

fn roots(a: &RootsArgs, m: &LoadedModel, out: &mut Outputs) -> Result<(), Failure> {
    let model = &m.model;
    let state = operating_point(model, &a.search)?;
    let cf = build_characteristic(model, &state)?;
    let (region, grid) = region_grid(&a.region)?;
    let rep = find_roots(&cf, region, grid)?;
    out.primary(&a.common.out, &rep.to_csv())?;
    if a.common.out.is_some() {
        match rep.rightmost() {
            Some(r) => print_out(&format!("rightmost={} roots={}\n", fmt_complex(r.value()), rep.roots.len())),
            None => print_out("no roots in region\n"),
        }
    }
    Ok(())
}

fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![from];
    }
    (0..points).map(|k| from + (to - from) * k as f64 / (points - 1) as f64).collect()
}

fn scan(a: &ScanArgs, m: &LoadedModel, overrides: &ParamMap, out: &mut Outputs) -> Result<(), Failure> {
    let inst = m
        .preset
        .as_ref()
        .ok_or_else(|| UsageError("scan sweeps a preset parameter; use --preset".into()))?;
    let key = a.param.trim().to_ascii_lowercase().replace('-', "_");
    if !inst.params.contains_key(&key) {
        return Err(UsageError(format!(
            "--param `{}` is not a parameter of {} ({})",
            a.param,
            inst.preset,
            inst.preset.param_names().join(", ")
        ))
        .into());
    }
    if a.points == 0 || !(a.from.is_finite() && a.to.is_finite()) {
        return Err(UsageError("--points must be >= 1 and --from/--to finite".into()).into());
    }
    let (region, grid) = region_grid(&a.region)?;
    let opts = ScanOptions {
        eq_interval: [a.search.lo, a.search.hi],
        n_brackets: a.search.brackets,
        region,
        grid,
    };
    let kind = inst.preset;
    let family = |p: f64| {
        let mut params = overrides.clone();
        params.insert(key.clone(), p);
        preset(kind, &params).map(|i| i.model)
    };
    let rep = hopf_scan(&family, &linspace(a.from, a.to, a.points), &opts)?;
    out.primary(&a.common.out, &rep.to_csv())?;
    if a.common.out.is_some() {
        let mut text = String::new();
        for c in &rep.crossings {
            let _ = writeln!(
                text,
                "crossing {}={} omega={} {}",
                key,
                c.param,
                c.omega,
                if c.destabilizing { "destabilizing" } else { "stabilizing" }
            );
        }
        if rep.crossings.is_empty() {
            text.push_str("no crossing\n");
        }
        print_out(&text);
    }
    Ok(())
}
