//! CSV writers. Floats use 17 significant digits so values round-trip.

use std::fmt::Write as _;

use crate::trajectory::Trajectory;

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,<labels...>` followed by one row per grid node.
pub fn trajectory_csv(tr: &Trajectory, labels: &[String]) -> String {
    trajectory_csv_from(tr, labels, 0)
}

/// Like [`trajectory_csv`] but only rows from node `first` on.
pub fn trajectory_csv_from(tr: &Trajectory, labels: &[String], first: usize) -> String {
    let mut out = String::with_capacity((tr.len() - first) * 24 * (labels.len() + 1));
    out.push('t');
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for k in first..tr.len() {
        out.push_str(&fmt_f64(tr.time(k)));
        for c in 0..tr.n_compartments() {
            out.push(',');
            out.push_str(&fmt_f64(tr.column(c)[k]));
        }
        out.push('\n');
    }
    out
}

/// Generic table with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
