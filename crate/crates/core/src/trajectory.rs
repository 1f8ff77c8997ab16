//! Uniformly sampled multi-compartment time series.
//!
//! Serves both as history data (`t <= origin`) and as simulation output.
//! Node times are always computed as `start + k * h` so grids never drift.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative slack (in steps) accepted when a query time sits on a grid end.
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    start: f64,
    h: f64,
    origin: f64,
    values: Vec<Vec<f64>>,
}

impl Trajectory {
    /// `values[c][k]` is compartment `c` at `start + k h`. `origin` marks
    /// the end of the history segment and must lie on the grid.
    pub fn new(start: f64, h: f64, origin: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidConfig(format!("step must be > 0, got {h}")));
        }
        if values.is_empty() || values[0].is_empty() {
            return Err(Error::InvalidConfig("trajectory needs at least one compartment and one node".into()));
        }
        let len = values[0].len();
        if values.iter().any(|v| v.len() != len) {
            return Err(Error::InvalidConfig("compartment arrays differ in length".into()));
        }
        Ok(Trajectory {
            start,
            h,
            origin,
            values,
        })
    }

    /// Constant history on `[-span, 0]`, rounded up to whole steps.
    pub fn constant(state: &[f64], h: f64, span: f64) -> Result<Self> {
        let steps = steps_for(span, h);
        let values = state.iter().map(|&v| vec![v; steps + 1]).collect();
        Trajectory::new(-(steps as f64) * h, h, 0.0, values)
    }

    /// History on `[-span, 0]` sampled from `f(t) -> state`.
    pub fn from_fn(n: usize, h: f64, span: f64, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let steps = steps_for(span, h);
        let start = -(steps as f64) * h;
        let mut values = vec![Vec::with_capacity(steps + 1); n];
        for k in 0..=steps {
            let row = f(start + k as f64 * h);
            for (c, v) in row.into_iter().take(n).enumerate() {
                values[c].push(v);
            }
        }
        Trajectory::new(start, h, 0.0, values)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.values[0].is_empty()
    }

    pub fn n_compartments(&self) -> usize {
        self.values.len()
    }

    pub fn history_span(&self) -> f64 {
        self.origin - self.start
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.h
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    pub fn last_row(&self) -> Vec<f64> {
        self.row(self.len() - 1)
    }

    /// Replaces one compartment's samples; `values` must match the grid length.
    pub fn set_column(&mut self, c: usize, values: Vec<f64>) {
        assert_eq!(values.len(), self.len(), "column length mismatch");
        self.values[c] = values;
    }

    pub fn push(&mut self, row: &[f64]) {
        for (col, &v) in self.values.iter_mut().zip(row) {
            col.push(v);
        }
    }

    /// Grid index of `t` when `t` is a node (within rounding).
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let u = (t - self.start) / self.h;
        let k = u.round();
        if (u - k).abs() <= NODE_SNAP && k >= 0.0 && (k as usize) < self.len() {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Linear interpolation; exact at nodes.
    pub fn interpolate(&self, c: usize, t: f64) -> Result<f64> {
        let u = (t - self.start) / self.h;
        let last = (self.len() - 1) as f64;
        if !(u >= -NODE_SNAP && u <= last + NODE_SNAP) {
            return Err(Error::OutOfSpan {
                t,
                start: self.start,
                end: self.end(),
            });
        }
        Ok(self.interp_unchecked(c, u.clamp(0.0, last)))
    }

    /// Interpolation at fractional grid position `u`, which must lie in range.
    #[inline]
    pub(crate) fn interp_unchecked(&self, c: usize, u: f64) -> f64 {
        let col = &self.values[c];
        let k = u.floor();
        let w = u - k;
        let k = k as usize;
        if w <= NODE_SNAP || k + 1 >= col.len() {
            col[k.min(col.len() - 1)]
        } else if w >= 1.0 - NODE_SNAP {
            col[k + 1]
        } else {
            col[k] + w * (col[k + 1] - col[k])
        }
    }

    /// Keeps only the listed compartments, in the given order.
    pub fn select(&self, compartments: &[usize]) -> Trajectory {
        Trajectory {
            start: self.start,
            h: self.h,
            origin: self.origin,
            values: compartments.iter().map(|&c| self.values[c].clone()).collect(),
        }
    }

    /// Everything up to node time `t`, re-anchored so that `t` becomes the
    /// new origin at time 0.
    pub fn restart_at(&self, t: f64) -> Result<Trajectory> {
        let k = self.node_index(t).ok_or(Error::OutOfSpan {
            t,
            start: self.start,
            end: self.end(),
        })?;
        let values = self.values.iter().map(|v| v[..=k].to_vec()).collect();
        Trajectory::new(-(k as f64) * self.h, self.h, 0.0, values)
    }

    /// Nodes with time `>= t` (within rounding), as index range start.
    pub fn first_index_at_or_after(&self, t: f64) -> usize {
        let u = (t - self.start) / self.h;
        if u <= 0.0 {
            0
        } else {
            let k = u.round();
            if (u - k).abs() <= NODE_SNAP {
                k as usize
            } else {
                u.ceil() as usize
            }
        }
    }

    /// Resamples onto step `h` over the same span (linear interpolation).
    pub fn resample(&self, h: f64) -> Result<Trajectory> {
        if (h - self.h).abs() <= 1e-12 * self.h {
            return Ok(self.clone());
        }
        let before = steps_for(self.origin - self.start, h);
        let after = ((self.end() - self.origin) / h + NODE_SNAP).floor() as usize;
        let start = self.origin - before as f64 * h;
        let values = (0..self.n_compartments())
            .map(|c| {
                (0..=before + after)
                    .map(|k| {
                        let t = (start + k as f64 * h).clamp(self.start, self.end());
                        self.interpolate(c, t).expect("clamped into span")
                    })
                    .collect()
            })
            .collect();
        Trajectory::new(start, h, self.origin, values)
    }
}

/// Whole steps needed to cover `span` (never rounding a covered span up).
pub(crate) fn steps_for(span: f64, h: f64) -> usize {
    let u = span / h;
    let r = u.round();
    if (u - r).abs() <= NODE_SNAP * r.max(1.0) {
        r as usize
    } else {
        u.ceil() as usize
    }
}
