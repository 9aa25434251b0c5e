//! Tabular outputs with fixed headers.
//!
//! Floats are written in Rust's shortest round-trip exponent form; absent
//! values are empty fields.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const CONVERGENCE_HEADER: [&str; 5] = ["iteration", "n_points", "eps_train", "eps_val", "seconds"];
pub const RANKS_HEADER: [&str; 8] = [
    "rank", "n_points", "eps_train", "eps_val", "eps_rom", "eps_pod", "bound", "seconds",
];
pub const SINGULAR_VALUES_HEADER: [&str; 3] = ["iteration", "index", "sigma"];

/// One row of `convergence.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub n_points: usize,
    pub eps_train: f64,
    pub eps_val: Option<f64>,
    pub seconds: f64,
}

/// Per-rank error diagnostics, aligned across methods by `rank`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub n_points: usize,
    pub eps_train: Option<f64>,
    pub eps_val: Option<f64>,
    pub eps_rom: Option<f64>,
    pub eps_pod: Option<f64>,
    /// Greedy error bound.
    pub bound: Option<f64>,
    pub seconds: Option<f64>,
}

/// A selected training parameter and the iteration that selected it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub iteration: usize,
    pub train_index: usize,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_convergence<W: Write>(w: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CONVERGENCE_HEADER)?;
    for r in rows {
        wr.write_record([
            r.iteration.to_string(),
            r.n_points.to_string(),
            fmt_f64(r.eps_train),
            fmt_opt(r.eps_val),
            fmt_f64(r.seconds),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_points<W: Write>(w: W, rows: &[PointRow], train: &[Vec<f64>], dim: usize) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["iteration".to_string(), "train_index".to_string()];
    header.extend((1..=dim).map(|k| format!("mu_{k}")));
    wr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.iteration.to_string(), r.train_index.to_string()];
        rec.extend(train[r.train_index].iter().map(|&v| fmt_f64(v)));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_ranks<W: Write>(w: W, rows: &[RankRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(RANKS_HEADER)?;
    for r in rows {
        wr.write_record([
            r.rank.to_string(),
            r.n_points.to_string(),
            fmt_opt(r.eps_train),
            fmt_opt(r.eps_val),
            fmt_opt(r.eps_rom),
            fmt_opt(r.eps_pod),
            fmt_opt(r.bound),
            fmt_opt(r.seconds),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_singular_values<W: Write>(w: W, spectra: &[(usize, Vec<f64>)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SINGULAR_VALUES_HEADER)?;
    for (it, s) in spectra {
        for (i, v) in s.iter().enumerate() {
            wr.write_record([it.to_string(), (i + 1).to_string(), fmt_f64(*v)])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Two per-rank tables side by side; ranks missing from one side are empty fields.
pub fn write_comparison<W: Write>(w: W, labels: [&str; 2], a: &[RankRow], b: &[RankRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let cols = ["n_points", "eps_rom", "eps_pod", "eps_val", "bound"];
    let mut header = vec!["rank".to_string()];
    for l in labels {
        header.extend(cols.iter().map(|c| format!("{l}_{c}")));
    }
    wr.write_record(&header)?;
    let mut ranks: Vec<usize> = a.iter().chain(b).map(|r| r.rank).collect();
    ranks.sort_unstable();
    ranks.dedup();
    for rank in ranks {
        let mut rec = vec![rank.to_string()];
        for side in [a, b] {
            match side.iter().rfind(|r| r.rank == rank) {
                Some(r) => rec.extend([
                    r.n_points.to_string(),
                    fmt_opt(r.eps_rom),
                    fmt_opt(r.eps_pod),
                    fmt_opt(r.eps_val),
                    fmt_opt(r.bound),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), cols.len())),
            }
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Selected points of several runs in one long table.
pub fn write_comparison_points<W: Write>(
    w: W,
    runs: &[(&str, &[PointRow])],
    train: &[Vec<f64>],
    dim: usize,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["run".to_string(), "order".to_string(), "iteration".to_string(), "train_index".to_string()];
    header.extend((1..=dim).map(|k| format!("mu_{k}")));
    wr.write_record(&header)?;
    for (label, rows) in runs {
        for (order, r) in rows.iter().enumerate() {
            let mut rec = vec![
                label.to_string(),
                (order + 1).to_string(),
                r.iteration.to_string(),
                r.train_index.to_string(),
            ];
            rec.extend(train[r.train_index].iter().map(|&v| fmt_f64(v)));
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    Ok(())
}
