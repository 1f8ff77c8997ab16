//! Zeros of characteristic functions in a bounded region.
//!
//! Newton iteration with a central-difference complex derivative, seeded
//! from a uniform grid over the upper half of the region. Conjugate roots
//! are implied, not listed. No completeness claim is made outside the
//! region.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::characteristic::CharacteristicFn;

const MAX_NEWTON: usize = 80;
/// Roots closer than this are merged.
pub const DEDUP_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_max: f64,
}

impl Region {
    pub fn new(re_min: f64, re_max: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_max > 0.0) || ![re_min, re_max, im_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "region needs re_min < re_max and im_max > 0, got [{re_min}, {re_max}] x [0, {im_max}]"
            )));
        }
        Ok(Region { re_min, re_max, im_max })
    }

    fn contains(&self, z: Complex64) -> bool {
        let slack = 1e-9 * (1.0 + z.norm());
        z.re >= self.re_min - slack && z.re <= self.re_max + slack && z.im.abs() <= self.im_max + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { n_re: 24, n_im: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

impl Root {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootReport {
    pub roots: Vec<Root>,
    pub rightmost_real_part: Option<f64>,
    pub region: Region,
    pub grid: Grid,
    pub seeds: usize,
    pub newton_iterations: usize,
    /// Seeds whose iteration left the region or did not converge.
    pub stalled_seeds: usize,
}

impl RootReport {
    pub fn rightmost(&self) -> Option<&Root> {
        self.roots.first()
    }

    /// `re,im,residual` with a header row.
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self.roots.iter().map(|r| vec![r.re, r.im, r.residual]).collect();
        crate::output::table_csv(&["re", "im", "residual"], &rows)
    }
}

/// Residual tolerance for accepting a root.
pub fn residual_tolerance(z: Complex64) -> f64 {
    1e-9 * (1.0 + z.norm())
}

struct Seeded {
    root: Option<Complex64>,
    iterations: usize,
}

fn newton(f: &(dyn Fn(Complex64) -> Result<Complex64> + Sync), mut z: Complex64, region: &Region) -> Seeded {
    let mut iterations = 0;
    for _ in 0..MAX_NEWTON {
        iterations += 1;
        let Ok(fz) = f(z) else { return Seeded { root: None, iterations } };
        if fz == Complex64::new(0.0, 0.0) {
            return Seeded { root: Some(z), iterations };
        }
        let h = 1e-7 * (1.0 + z.norm());
        let (Ok(fp), Ok(fm)) = (f(z + h), f(z - h)) else { return Seeded { root: None, iterations } };
        let d = (fp - fm) / (2.0 * h);
        if d.norm() == 0.0 || !d.is_finite() {
            return Seeded { root: None, iterations };
        }
        let step = fz / d;
        z -= step;
        if !z.is_finite() || z.norm() > 1e6 * (1.0 + region.im_max + region.re_max.abs() + region.re_min.abs()) {
            return Seeded { root: None, iterations };
        }
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            break;
        }
    }
    Seeded { root: Some(z), iterations }
}

/// Grid-seeded Newton search for zeros of `f` in `region`. `residual`
/// scores a candidate (`|f|` by default for [`find_roots_fn`]).
pub fn find_roots_with(
    f: &(dyn Fn(Complex64) -> Result<Complex64> + Sync),
    residual: &(dyn Fn(Complex64) -> Result<f64> + Sync),
    region: Region,
    grid: Grid,
) -> Result<RootReport> {
    if grid.n_re < 1 || grid.n_im < 1 {
        return Err(Error::InvalidConfig("root grid needs at least one point per axis".into()));
    }
    let seeds: Vec<Complex64> = (0..grid.n_re)
        .flat_map(|i| {
            (0..grid.n_im).map(move |j| {
                let re = region.re_min + (region.re_max - region.re_min) * (i as f64 + 0.5) / grid.n_re as f64;
                let im = region.im_max * (j as f64 + 0.5) / grid.n_im as f64;
                Complex64::new(re, im)
            })
        })
        .collect();
    let results: Vec<Seeded> = seeds.par_iter().map(|&z| newton(f, z, &region)).collect();

    let mut roots: Vec<Root> = Vec::new();
    let mut stalled = 0;
    let mut iterations = 0;
    for s in &results {
        iterations += s.iterations;
        let Some(mut z) = s.root else {
            stalled += 1;
            continue;
        };
        if z.im.abs() <= 1e-9 * (1.0 + z.re.abs()) {
            z.im = 0.0;
        }
        if z.im < 0.0 {
            z = z.conj();
        }
        let Ok(res) = residual(z) else {
            stalled += 1;
            continue;
        };
        if !(res <= residual_tolerance(z)) || !region.contains(z) {
            stalled += 1;
            continue;
        }
        if roots.iter().any(|r| (r.value() - z).norm() <= DEDUP_DISTANCE) {
            continue;
        }
        roots.push(Root { re: z.re, im: z.im, residual: res });
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(RootReport {
        rightmost_real_part: roots.first().map(|r| r.re),
        roots,
        region,
        grid,
        seeds: seeds.len(),
        newton_iterations: iterations,
        stalled_seeds: stalled,
    })
}

/// Zeros of an arbitrary analytic function, scored by `|f|`.
pub fn find_roots_fn(f: &(dyn Fn(Complex64) -> Result<Complex64> + Sync), region: Region, grid: Grid) -> Result<RootReport> {
    find_roots_with(f, &|z| f(z).map(|v| v.norm()), region, grid)
}

/// Zeros of `Δ`. Newton runs on the cleared function; candidates are
/// scored by `|Δ_cleared| / ∏ max(1, |λ + mu_i|)`, which equals `|Δ|` away
/// from the removable poles, and candidates on a pole are discarded.
pub fn find_roots(cf: &CharacteristicFn, region: Region, grid: Grid) -> Result<RootReport> {
    let poles = cf.poles();
    let f = |z: Complex64| cf.eval_cleared(z);
    let residual = |z: Complex64| -> Result<f64> {
        if poles.iter().any(|p| (z - p).norm() <= DEDUP_DISTANCE) && cf.eval(z + 1e-4).map(|v| v.norm()).unwrap_or(0.0) > 1e-3 {
            return Ok(f64::INFINITY);
        }
        let scale: f64 = poles.iter().map(|p| (z - p).norm().max(1.0)).product();
        Ok(cf.eval_cleared(z)?.norm() / scale)
    };
    find_roots_with(&f, &residual, region, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, CyclicModel, FeedbackFn, ParamMap, Preset, Stage};
    use crate::stability::characteristic::build_characteristic;
    use crate::stability::equilibria::find_equilibria;
    use crate::stability::oracles::{cubic_roots, knauer_jacobian_cubic};

    #[test]
    fn linear_function() {
        let rep = find_roots_fn(&|z| Ok(z + 1.0), Region::new(-3.0, 3.0, 2.0).unwrap(), Grid { n_re: 4, n_im: 4 }).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!((rep.roots[0].value() + 1.0).norm() < 1e-14);
        assert!(rep.roots[0].residual <= 1e-14);
    }

    #[test]
    fn hayes_equation_is_stable() {
        let (a, b, tau) = (2.0, 1.0, 1.0);
        let f = move |z: Complex64| Ok(z + a - b * (-z * tau).exp());
        let rep = find_roots_fn(&f, Region::new(-4.0, 2.0, 30.0).unwrap(), Grid::default()).unwrap();
        let right = rep.rightmost_real_part.unwrap();
        assert!(right < 0.0);
        // the real root of z + 2 = e^{-z}
        let real = rep.roots.iter().find(|r| r.im == 0.0).unwrap();
        assert!((real.re + 2.0 - (-real.re).exp()).abs() < 1e-12);
        // dense sign scan along the imaginary axis finds no root crossing there
        assert!(rep.roots.iter().all(|r| r.re < -0.1));
    }

    #[test]
    fn knauer_roots_match_companion_matrix() {
        let m = preset(Preset::Knauer, &ParamMap::new()).unwrap().model;
        let eq = find_equilibria(&m, [0.0, 10.0], 100).unwrap();
        let cf = build_characteristic(&m, &eq.positive().next().unwrap().state).unwrap();
        let rep = find_roots(&cf, Region::new(-3.0, 2.0, 3.0).unwrap(), Grid::default()).unwrap();
        let expected = cubic_roots(&knauer_jacobian_cubic(0.9, 0.5, 1.0, 1.0).unwrap());
        let upper: Vec<_> = expected.iter().filter(|z| z.im >= -1e-12).collect();
        assert_eq!(rep.roots.len(), upper.len());
        for z in upper {
            assert!(rep.roots.iter().any(|r| (r.value() - Complex64::new(z.re, z.im.abs())).norm() < 1e-8));
        }
    }

    #[test]
    fn zero_delay_goodwin_matches_jacobian_eigenvalues() {
        let m = preset(Preset::Goodwin, &ParamMap::new()).unwrap().model;
        let eq = find_equilibria(&m, [0.0, 5.0], 100).unwrap();
        let x = eq.roots[0].state.clone();
        let cf = build_characteristic(&m, &x).unwrap();
        let rep = find_roots(&cf, Region::new(-4.0, 2.0, 4.0).unwrap(), Grid::default()).unwrap();
        let fprime = m.stage(2).feedback.derivative(x[1]);
        let j = nalgebra::Matrix3::new(-1.0, 0.0, 1.0, 1.0, -1.0, 0.0, 0.0, fprime, -1.0);
        let ev = j.complex_eigenvalues();
        for z in ev.iter().filter(|z| z.im >= 0.0) {
            assert!(rep.roots.iter().any(|r| (r.value() - z).norm() < 1e-8), "{z}");
        }
        assert_eq!(rep.roots.len(), 2);
    }

    #[test]
    fn pure_decay_has_single_root() {
        // the last stage ignores its input; the removable pole at -mu_1 is not a root
        let m = CyclicModel::new(vec![
            Stage::simple(FeedbackFn::Linear { alpha: 1.0 }, 1.5),
            Stage::simple(FeedbackFn::Constant { value: 1.0 }, 0.5),
        ]);
        let cf = build_characteristic(&m, &[2.0 / 1.5, 2.0]).unwrap();
        let rep = find_roots(&cf, Region::new(-2.0, 1.0, 1.0).unwrap(), Grid::default()).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!((rep.roots[0].re + 0.5).abs() < 1e-12);
    }
}
