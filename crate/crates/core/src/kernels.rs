//! Delay kernels: probability densities on `[0, ∞)` weighting past states.
//!
//! Dirac masses model discrete delays, Erlang densities model a chain of
//! identical exponential transit stages, and tabulated densities cover
//! everything else. A tabulated density is the piecewise-linear
//! interpolant of its nodes, zero outside the grid. Its mass (trapezoid
//! rule), mean and Laplace transform are exact integrals of that
//! interpolant; history convolutions use the trapezoid rule like every
//! other kernel.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trapezoid mass deviation that is silently renormalised.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

/// Largest grid step of a numerically convolved density.
pub const CONVOLUTION_STEP: f64 = 2.5e-4;

/// Node budget of a numerically convolved density; longer supports get a
/// coarser step.
const CONVOLUTION_MAX_NODES: f64 = 4.0e6;

/// Tail mass dropped when an Erlang density is tabulated for convolution.
const ERLANG_TABULATION_TAIL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub enum DelayKernel {
    DiracAtZero,
    Dirac { tau: f64 },
    Erlang { shape: u32, rate: f64 },
    Tabulated { grid: Vec<f64>, density: Vec<f64> },
}

/// Wire format of a kernel, validated on conversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum KernelSpec {
    None,
    Dirac { tau: f64 },
    Erlang { shape: u32, rate: f64 },
    Tabulated { grid: Vec<f64>, density: Vec<f64> },
}

impl TryFrom<KernelSpec> for DelayKernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::None => Ok(DelayKernel::DiracAtZero),
            KernelSpec::Dirac { tau } => DelayKernel::dirac(tau),
            KernelSpec::Erlang { shape, rate } => DelayKernel::erlang(shape, rate),
            KernelSpec::Tabulated { grid, density } => DelayKernel::tabulated(grid, density),
        }
    }
}

impl From<DelayKernel> for KernelSpec {
    fn from(k: DelayKernel) -> Self {
        match k {
            DelayKernel::DiracAtZero => KernelSpec::None,
            DelayKernel::Dirac { tau } => KernelSpec::Dirac { tau },
            DelayKernel::Erlang { shape, rate } => KernelSpec::Erlang { shape, rate },
            DelayKernel::Tabulated { grid, density } => KernelSpec::Tabulated { grid, density },
        }
    }
}

impl std::fmt::Display for DelayKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DelayKernel::DiracAtZero => write!(f, "none"),
            DelayKernel::Dirac { tau } => write!(f, "dirac(tau={tau})"),
            DelayKernel::Erlang { shape, rate } => write!(f, "erlang(shape={shape}, rate={rate})"),
            DelayKernel::Tabulated { grid, .. } => write!(
                f,
                "tabulated({} nodes on [{}, {}])",
                grid.len(),
                grid[0],
                grid[grid.len() - 1]
            ),
        }
    }
}

impl DelayKernel {
    /// Point mass at `tau`. `tau == 0` gives [`DelayKernel::DiracAtZero`].
    pub fn dirac(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidKernel(format!("dirac tau must be >= 0, got {tau}")));
        }
        if tau == 0.0 {
            Ok(DelayKernel::DiracAtZero)
        } else {
            Ok(DelayKernel::Dirac { tau })
        }
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(Error::InvalidKernel("erlang shape must be >= 1".into()));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidKernel(format!("erlang rate must be > 0, got {rate}")));
        }
        Ok(DelayKernel::Erlang { shape, rate })
    }

    /// Tabulated density, linearly interpolated between nodes and zero
    /// outside the grid. Trapezoid mass within [`RENORMALIZE_TOLERANCE`] of
    /// one is rescaled to exactly one; anything further off is rejected.
    pub fn tabulated(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != density.len() {
            return Err(Error::InvalidKernel(
                "tabulated kernel needs >= 2 nodes and matching grid/density lengths".into(),
            ));
        }
        if grid[0] < 0.0 || grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidKernel("tabulated grid must be finite and >= 0".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKernel("tabulated grid must be strictly ascending".into()));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidKernel("tabulated density must be finite and >= 0".into()));
        }
        let mass = trapezoid(&grid, &density);
        if (mass - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidKernel(format!(
                "tabulated density has trapezoid mass {mass}, expected 1"
            )));
        }
        let density = if (mass - 1.0).abs() > 1e-12 {
            density.into_iter().map(|d| d / mass).collect()
        } else {
            density
        };
        Ok(DelayKernel::Tabulated { grid, density })
    }

    /// Density value `K(t)`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        match self {
            DelayKernel::DiracAtZero | DelayKernel::Dirac { .. } => {
                Err(Error::DiracDensityUndefined)
            }
            DelayKernel::Erlang { shape, rate } => Ok(erlang_pdf(*shape, *rate, t)),
            DelayKernel::Tabulated { grid, density } => Ok(interp_or_zero(grid, density, t)),
        }
    }

    /// `∫ e^{-λt} K(t) dt`.
    pub fn laplace(&self, lambda: Complex64) -> Result<Complex64> {
        match self {
            DelayKernel::DiracAtZero => Ok(Complex64::new(1.0, 0.0)),
            DelayKernel::Dirac { tau } => Ok((-lambda * tau).exp()),
            DelayKernel::Erlang { shape, rate } => {
                if lambda.re <= -rate {
                    return Err(Error::LaplaceDiverges {
                        re: lambda.re,
                        bound: -rate,
                    });
                }
                Ok((Complex64::new(*rate, 0.0) / (lambda + rate)).powi(*shape as i32))
            }
            DelayKernel::Tabulated { grid, density } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 1..grid.len() {
                    let h = grid[i] - grid[i - 1];
                    let (left, right) = hat_weights(lambda * h);
                    acc += (-lambda * grid[i - 1]).exp() * h * (left * density[i - 1] + right * density[i]);
                }
                Ok(acc)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DelayKernel::DiracAtZero => 0.0,
            DelayKernel::Dirac { tau } => *tau,
            DelayKernel::Erlang { shape, rate } => *shape as f64 / rate,
            DelayKernel::Tabulated { grid, density } => grid
                .windows(2)
                .zip(density.windows(2))
                .map(|(t, f)| (t[1] - t[0]) / 6.0 * (t[0] * (2.0 * f[0] + f[1]) + t[1] * (f[0] + 2.0 * f[1])))
                .sum(),
        }
    }

    /// Smallest `T` with `∫_T^∞ K ≤ tail_mass` (grid end for tabulated kernels).
    pub fn horizon(&self, tail_mass: f64) -> Result<f64> {
        check_tail_mass(tail_mass)?;
        Ok(match self {
            DelayKernel::DiracAtZero => 0.0,
            DelayKernel::Dirac { tau } => *tau,
            DelayKernel::Erlang { shape, rate } => erlang_horizon(*shape, *rate, tail_mass),
            DelayKernel::Tabulated { grid, .. } => grid[grid.len() - 1],
        })
    }

    pub fn mean_and_truncation(&self, tail_mass: f64) -> Result<(f64, f64)> {
        Ok((self.mean(), self.horizon(tail_mass)?))
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, DelayKernel::DiracAtZero | DelayKernel::Dirac { .. })
    }

    /// Density of the sum of two independent delays.
    pub fn convolve(&self, other: &DelayKernel) -> DelayKernel {
        use DelayKernel::*;
        match (self, other) {
            (DiracAtZero, k) | (k, DiracAtZero) => k.clone(),
            (Dirac { tau: a }, Dirac { tau: b }) => Dirac { tau: a + b },
            (Erlang { shape: j1, rate: r1 }, Erlang { shape: j2, rate: r2 }) if r1 == r2 => {
                Erlang {
                    shape: j1 + j2,
                    rate: *r1,
                }
            }
            (Dirac { tau }, k) | (k, Dirac { tau }) => match k {
                Tabulated { grid, density } => {
                    let grid = grid.iter().map(|t| t + tau).collect();
                    DelayKernel::tabulated(grid, density.clone()).expect("shifted density stays normalised")
                }
                _ => {
                    let sampled = Sampled::new(k, convolution_step(k, &DiracAtZero));
                    let (grid, density) = sampled.nodes(*tau);
                    DelayKernel::tabulated(grid, density).expect("sampled Erlang density is normalised")
                }
            },
            (a, b) => {
                let step = convolution_step(a, b);
                let (sa, sb) = (Sampled::new(a, step), Sampled::new(b, step));
                let (grid, density) = sa.convolve(&sb);
                DelayKernel::tabulated(grid, density).expect("convolution of normalised densities stays normalised")
            }
        }
    }

    /// Support as `[start, end]`; Erlang supports end at the tabulation tail.
    fn support(&self) -> (f64, f64) {
        match self {
            DelayKernel::DiracAtZero => (0.0, 0.0),
            DelayKernel::Dirac { tau } => (*tau, *tau),
            DelayKernel::Erlang { shape, rate } => (0.0, erlang_horizon(*shape, *rate, ERLANG_TABULATION_TAIL)),
            DelayKernel::Tabulated { grid, .. } => (grid[0], grid[grid.len() - 1]),
        }
    }
}

/// `∫_0^1 (1 - v) e^{-zv} dv` and `∫_0^1 v e^{-zv} dv`.
fn hat_weights(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.5 {
        hat_weights_series(z)
    } else {
        hat_weights_closed(z)
    }
}

fn hat_weights_series(z: Complex64) -> (Complex64, Complex64) {
    {
        let (mut left, mut right) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..24 {
            let kf = k as f64;
            left += term / ((kf + 1.0) * (kf + 2.0));
            right += term / (kf + 2.0);
            term *= -z / (kf + 1.0);
        }
        (left, right)
    }
}

fn hat_weights_closed(z: Complex64) -> (Complex64, Complex64) {
    {
        let e = (-z).exp();
        let total = (1.0 - e) / z;
        let right = (1.0 - (1.0 + z) * e) / (z * z);
        (total - right, right)
    }
}

fn uniform_spacing(k: &DelayKernel) -> Option<f64> {
    let DelayKernel::Tabulated { grid, .. } = k else { return None };
    let d = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    grid.windows(2).all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d).then_some(d)
}

/// Common grid step for convolving `a` and `b`: at most
/// [`CONVOLUTION_STEP`], an integer fraction of a uniform tabulated
/// spacing when there is one, and coarse enough to respect the node budget.
fn convolution_step(a: &DelayKernel, b: &DelayKernel) -> f64 {
    let span = {
        let (a0, a1) = a.support();
        let (b0, b1) = b.support();
        (a1 - a0) + (b1 - b0)
    };
    let cap = CONVOLUTION_STEP.max(span / CONVOLUTION_MAX_NODES);
    match uniform_spacing(a).or_else(|| uniform_spacing(b)) {
        Some(d) => d / (d / cap).ceil(),
        None => cap,
    }
}

/// A density sampled on `start + k step`, `k = 0..=full`, with an optional
/// shorter last cell `[start + full step, end]` ending in `end_value`.
struct Sampled {
    start: f64,
    step: f64,
    values: Vec<f64>,
    tail: Option<(f64, f64)>,
}

impl Sampled {
    fn new(k: &DelayKernel, step: f64) -> Self {
        match k {
            DelayKernel::Erlang { shape, rate } => {
                let end = k.support().1;
                let n = (end / step).ceil() as usize;
                let values = (0..=n).map(|j| erlang_pdf(*shape, *rate, j as f64 * step)).collect();
                Sampled { start: 0.0, step, values, tail: None }
            }
            DelayKernel::Tabulated { grid, density } => {
                let (start, end) = (grid[0], grid[grid.len() - 1]);
                let cells = (end - start) / step;
                let snapped = (cells.round() - cells).abs() <= 1e-9 * cells.max(1.0);
                let full = if snapped { cells.round() } else { cells.floor() } as usize;
                let values = (0..=full)
                    .map(|j| interp_or_zero(grid, density, (start + j as f64 * step).min(end)))
                    .collect();
                let tail = (!snapped).then(|| (end, density[density.len() - 1]));
                Sampled { start, step, values, tail }
            }
            _ => unreachable!("Dirac kernels are convolved analytically"),
        }
    }

    fn full_end(&self) -> f64 {
        self.start + (self.values.len() - 1) as f64 * self.step
    }

    fn end(&self) -> f64 {
        self.tail.map_or(self.full_end(), |(e, _)| e)
    }

    /// Value of the full-cell part (`with_tail == false`) or of the whole
    /// density on its closed support.
    fn eval(&self, t: f64, with_tail: bool) -> f64 {
        let full_end = self.full_end();
        if t < self.start {
            return 0.0;
        }
        if t > full_end {
            return match self.tail {
                Some((end, v_end)) if with_tail && t <= end => {
                    let v0 = self.values[self.values.len() - 1];
                    v0 + (v_end - v0) * (t - full_end) / (end - full_end)
                }
                _ => 0.0,
            };
        }
        let u = (t - self.start) / self.step;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let w = u - i as f64;
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Breakpoints of the density inside `[lo, hi]`.
    fn knots_in(&self, lo: f64, hi: f64, with_tail: bool, out: &mut Vec<f64>) {
        let last = self.values.len() - 1;
        let first = ((lo - self.start) / self.step).ceil().max(0.0) as usize;
        let upto = (((hi - self.start) / self.step).floor().max(-1.0) + 1.0) as usize;
        for j in first..upto.min(last + 1) {
            out.push(self.start + j as f64 * self.step);
        }
        if let (true, Some((end, _))) = (with_tail, self.tail) {
            if end >= lo && end <= hi {
                out.push(end);
            }
        }
    }

    /// Sampled nodes shifted by `shift`.
    fn nodes(&self, shift: f64) -> (Vec<f64>, Vec<f64>) {
        let mut grid: Vec<f64> = (0..self.values.len()).map(|j| shift + self.start + j as f64 * self.step).collect();
        let mut values = self.values.clone();
        if let Some((end, v)) = self.tail {
            grid.push(shift + end);
            values.push(v);
        }
        (grid, values)
    }

    /// Node values of the exact convolution of the two piecewise-linear
    /// densities on a grid of the common step.
    fn convolve(&self, other: &Sampled) -> (Vec<f64>, Vec<f64>) {
        let step = self.step;
        let start = self.start + other.start;
        let n_out = (((self.end() + other.end() - start) / step).ceil() as usize + 1).max(self.values.len() + other.values.len() - 1);
        let mut c = vec![0.0; n_out];
        for (k, v) in full_cell_convolution(&self.values, &other.values).into_iter().enumerate() {
            c[k] += step / 6.0 * v;
        }
        let mut knots = Vec::new();
        let mut add_tail = |tail_owner: &Sampled, against: &Sampled, against_tail: bool, c: &mut [f64]| {
            let Some((end, _)) = tail_owner.tail else { return };
            let lo = tail_owner.full_end();
            for (k, ck) in c.iter_mut().enumerate() {
                let t = start + k as f64 * step;
                // u runs over the tail cell, t - u over the other support
                let u_lo = lo.max(t - against.end());
                let u_hi = end.min(t - against.start);
                if u_hi <= u_lo {
                    continue;
                }
                knots.clear();
                knots.push(u_lo);
                knots.push(u_hi);
                let mut inner = Vec::new();
                against.knots_in(t - u_hi, t - u_lo, against_tail, &mut inner);
                knots.extend(inner.iter().map(|x| t - x).filter(|u| *u > u_lo && *u < u_hi));
                knots.sort_by(f64::total_cmp);
                let mut acc = 0.0;
                for w in knots.windows(2) {
                    let (l, r) = (w[0], w[1]);
                    if r <= l {
                        continue;
                    }
                    let m = 0.5 * (l + r);
                    let f = |u: f64| tail_owner.eval(u, true) * against.eval((t - u).clamp(against.start, against.end()), against_tail);
                    acc += (r - l) / 6.0 * (f(l) + 4.0 * f(m) + f(r));
                }
                *ck += acc;
            }
        };
        // tail of self against all of other, then full cells of self against the tail of other
        add_tail(self, other, true, &mut c);
        add_tail(other, self, false, &mut c);
        let grid = (0..n_out).map(|k| start + k as f64 * step).collect();
        (grid, c.into_iter().map(|v| v.max(0.0)).collect())
    }
}

/// `Σ_{i+p=k-1} [a_i (2b_{p+1} + b_p) + a_{i+1} (b_{p+1} + 2b_p)]`: six
/// times the exact convolution of two piecewise-linear functions over
/// their full cells, divided by the step.
fn full_cell_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    if a.len() < 2 || b.len() < 2 {
        return vec![0.0; out_len];
    }
    let left = &a[..a.len() - 1];
    let right = &a[1..];
    let x: Vec<f64> = b.windows(2).map(|w| 2.0 * w[1] + w[0]).collect();
    let y: Vec<f64> = b.windows(2).map(|w| w[1] + 2.0 * w[0]).collect();
    let (lx, ry) = if left.len().saturating_mul(x.len()) <= 1 << 20 {
        (direct_convolution(left, &x), direct_convolution(right, &y))
    } else {
        (fft_convolution(left, &x), fft_convolution(right, &y))
    };
    let mut out = vec![0.0; out_len];
    for (k, (p, q)) in lx.iter().zip(&ry).enumerate() {
        out[k + 1] = p + q;
    }
    out
}

fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn check_tail_mass(tail_mass: f64) -> Result<()> {
    if tail_mass > 0.0 && tail_mass < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTailMass(tail_mass))
    }
}

/// `V^j s^{j-1} e^{-Vs} / (j-1)!`, evaluated in log space.
pub fn erlang_pdf(shape: u32, rate: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if shape == 1 {
        return rate * (-rate * t).exp();
    }
    if t == 0.0 {
        return 0.0;
    }
    let j = shape as f64;
    let log = j * rate.ln() + (j - 1.0) * t.ln() - rate * t - ln_factorial(shape - 1);
    log.exp()
}

/// `P(X > t)` for `X ~ Erlang(shape, rate)`.
pub fn erlang_survival(shape: u32, rate: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let x = rate * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..shape {
        term *= x / k as f64;
        sum += term;
    }
    (-x + sum.ln()).exp()
}

fn erlang_horizon(shape: u32, rate: f64, tail_mass: f64) -> f64 {
    let mut hi = (shape as f64 / rate).max(1e-12);
    while erlang_survival(shape, rate, hi) > tail_mass {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erlang_survival(shape, rate, mid) > tail_mass {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub(crate) fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}

fn interp_or_zero(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let last = grid.len() - 1;
    if t < grid[0] || t > grid[last] {
        return 0.0;
    }
    let i = grid.partition_point(|&g| g <= t);
    if i == 0 {
        return values[0];
    }
    if i > last {
        return values[last];
    }
    let (t0, t1) = (grid[i - 1], grid[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] + w * (values[i] - values[i - 1])
}

pub(crate) fn fft_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let n = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(n, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa.iter().take(len).map(|z| z.re / n as f64).collect()
}
