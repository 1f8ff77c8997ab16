//! One-parameter sweeps tracking the rightmost characteristic root.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CyclicModel;

use super::characteristic::build_characteristic;
use super::equilibria::find_equilibria;
use super::roots::{find_roots, Grid, Region, RootReport};

/// Width of the parameter bracket at which crossing bisection stops.
pub const CROSSING_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub eq_interval: [f64; 2],
    pub n_brackets: usize,
    pub region: Region,
    pub grid: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub param: f64,
    pub x_star: f64,
    pub rightmost_re: f64,
    pub rightmost_im: f64,
    pub n_roots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub param: f64,
    /// Imaginary part of the rightmost root at the crossing.
    pub omega: f64,
    /// `true` when the rightmost root moves into the right half-plane as
    /// the parameter increases.
    pub destabilizing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub points: Vec<ScanPoint>,
    pub crossings: Vec<Crossing>,
    pub options: ScanOptions,
}

impl ScanReport {
    /// `param,rightmost_re,rightmost_im,n_roots_in_region`.
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .points
            .iter()
            .map(|p| vec![p.param, p.rightmost_re, p.rightmost_im, p.n_roots as f64])
            .collect();
        let mut csv = crate::output::table_csv(&["param", "rightmost_re", "rightmost_im", "n_roots_in_region"], &rows);
        // counts are integers
        csv = csv
            .lines()
            .enumerate()
            .map(|(i, line)| {
                if i == 0 {
                    return line.to_string();
                }
                let mut cells: Vec<String> = line.split(',').map(str::to_string).collect();
                if let Some(last) = cells.last_mut() {
                    *last = format!("{}", last.parse::<f64>().unwrap_or(0.0) as usize);
                }
                cells.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n");
        csv.push('\n');
        csv
    }
}

/// Rightmost roots at the positive equilibrium with the largest last
/// compartment.
pub fn analyze_point(model: &CyclicModel, param: f64, opts: &ScanOptions) -> Result<(f64, RootReport)> {
    let eq = find_equilibria(model, opts.eq_interval, opts.n_brackets)?;
    let best = eq
        .positive()
        .max_by(|a, b| a.x_star.total_cmp(&b.x_star))
        .ok_or(Error::EquilibriumLostDuringSweep(param))?;
    let cf = build_characteristic(model, &best.state)?;
    Ok((best.x_star, find_roots(&cf, opts.region, opts.grid)?))
}

fn point(family: &(dyn Fn(f64) -> Result<CyclicModel> + Sync), p: f64, opts: &ScanOptions) -> Result<ScanPoint> {
    let model = family(p)?;
    let (x_star, rep) = analyze_point(&model, p, opts)?;
    let right = rep.rightmost();
    Ok(ScanPoint {
        param: p,
        x_star,
        rightmost_re: right.map_or(f64::NEG_INFINITY, |r| r.re),
        rightmost_im: right.map_or(0.0, |r| r.im),
        n_roots: rep.roots.len(),
    })
}

/// Sweeps `params` (sorted on output), then bisects every sign change of
/// the rightmost real part to [`CROSSING_TOLERANCE`].
pub fn hopf_scan(
    family: &(dyn Fn(f64) -> Result<CyclicModel> + Sync),
    params: &[f64],
    opts: &ScanOptions,
) -> Result<ScanReport> {
    let mut sorted = params.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let points: Vec<ScanPoint> = sorted
        .par_iter()
        .map(|&p| point(family, p, opts))
        .collect::<Result<_>>()?;
    let mut crossings = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.rightmost_re < 0.0) == (b.rightmost_re < 0.0) {
            continue;
        }
        let left_stable = a.rightmost_re < 0.0;
        let (mut lo, mut hi) = (a.param, b.param);
        let mut last = b;
        while hi - lo > CROSSING_TOLERANCE * (1.0 + lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            let pm = point(family, mid, opts)?;
            if (pm.rightmost_re < 0.0) == left_stable {
                lo = mid;
            } else {
                hi = mid;
                last = pm;
            }
        }
        crossings.push(Crossing {
            param: 0.5 * (lo + hi),
            omega: last.rightmost_im,
            destabilizing: left_stable,
        });
    }
    Ok(ScanReport {
        points,
        crossings,
        options: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, ParamMap, Preset};
    use crate::stability::oracles::knauer_routh_hurwitz_crossing;

    fn knauer_family(a2: f64, p2: f64) -> impl Fn(f64) -> Result<CyclicModel> + Sync {
        move |d3: f64| {
            let p: ParamMap = [("a2".to_string(), a2), ("p2".to_string(), p2), ("d3".to_string(), d3)].into();
            Ok(preset(Preset::Knauer, &p)?.model)
        }
    }

    fn opts() -> ScanOptions {
        ScanOptions {
            eq_interval: [0.0, 10.0],
            n_brackets: 50,
            region: Region::new(-3.0, 1.0, 3.0).unwrap(),
            grid: Grid { n_re: 12, n_im: 16 },
        }
    }

    #[test]
    fn damped_sweep_has_no_crossing() {
        let fam = knauer_family(0.3, 0.3);
        let rep = hopf_scan(&fam, &[0.8, 1.0, 1.2], &opts()).unwrap();
        assert!(rep.crossings.is_empty());
        assert!(rep.points.iter().all(|p| p.rightmost_re < 0.0));
    }

    #[test]
    fn crossing_matches_routh_hurwitz() {
        let fam = knauer_family(0.3, 0.3);
        let params: Vec<f64> = (0..6).map(|i| 0.3 + 0.08 * i as f64).collect();
        let rep = hopf_scan(&fam, &params, &opts()).unwrap();
        assert_eq!(rep.crossings.len(), 1);
        let expected = knauer_routh_hurwitz_crossing(0.9, 0.3, 0.3).unwrap().unwrap();
        assert!((rep.crossings[0].param - expected).abs() <= 1e-6);
        assert!(rep.crossings[0].omega > 0.0);
        assert!(!rep.crossings[0].destabilizing);
    }

    #[test]
    fn lost_equilibrium_is_an_error() {
        let fam = |a2: f64| -> Result<CyclicModel> {
            let p: ParamMap = [("a2".to_string(), a2)].into();
            Ok(preset(Preset::Knauer, &p)?.model)
        };
        assert!(matches!(
            hopf_scan(&fam, &[0.5, 0.95], &opts()),
            Err(Error::EquilibriumLostDuringSweep(p)) if p == 0.95
        ));
    }
}
