//! Training and validation parameter sets.
//!
//! Random generation uses `ChaCha8Rng` seeded with `seed_from_u64`, so grids
//! are reproducible across platforms for a given seed.

use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Log,
    /// Signed logarithmic spacing, `s(x) = sign(x) ln(1 + |x|/c)` sampled uniformly.
    SymLog,
}

impl FromStr for Spacing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "linear" => Ok(Spacing::Uniform),
            "log" => Ok(Spacing::Log),
            "symlog" => Ok(Spacing::SymLog),
            _ => Err(Error::Config(format!("unknown spacing '{s}'"))),
        }
    }
}

/// Linear threshold of the symmetric-log map relative to the range magnitude.
pub const SYMLOG_THRESHOLD: f64 = 1e-2;

fn symlog_c(lo: f64, hi: f64) -> f64 {
    SYMLOG_THRESHOLD * lo.abs().max(hi.abs())
}

fn symlog(x: f64, c: f64) -> f64 {
    x.signum() * (x.abs() / c).ln_1p()
}

fn symlog_inv(s: f64, c: f64) -> f64 {
    s.signum() * c * s.abs().exp_m1()
}

/// `n` evenly spaced values of `[lo, hi]` with exact endpoints. The points are
/// generated symmetrically about the midpoint, so symmetric ranges give
/// exactly symmetric grids (and an exact zero for odd `n`).
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => mid + half * (2.0 * i as f64 - m) / m,
        })
        .collect()
}

pub fn grid_1d(kind: Spacing, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!("a 1D grid needs at least 2 points, got {n}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("invalid range [{lo}, {hi}]")));
    }
    Ok(match kind {
        Spacing::Uniform => linspace(lo, hi, n),
        Spacing::Log => {
            if lo * hi <= 0.0 {
                return Err(Error::Config(format!(
                    "log spacing needs a range of one sign without zero, got [{lo}, {hi}]; use symlog"
                )));
            }
            let sign = lo.signum();
            let (a, b) = ((lo * sign).ln(), (hi * sign).ln());
            let mut v: Vec<f64> = linspace(a, b, n).into_iter().map(|s| sign * s.exp()).collect();
            v[0] = lo;
            v[n - 1] = hi;
            v.sort_by(f64::total_cmp);
            v
        }
        Spacing::SymLog => {
            let c = symlog_c(lo, hi);
            let mut v: Vec<f64> = linspace(symlog(lo, c), symlog(hi, c), n)
                .into_iter()
                .map(|s| symlog_inv(s, c))
                .collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub roles: Vec<Role>,
    pub seed: Option<u64>,
    /// Human-readable generator description per dimension.
    pub generators: Vec<String>,
    /// Axis lengths when the grid is a tensor product (last axis fastest).
    pub shape: Option<Vec<usize>>,
}

impl ParameterGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices(&self, role: Role) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn subset(&self, role: Role) -> Vec<Vec<f64>> {
        self.indices(role).into_iter().map(|i| self.points[i].clone()).collect()
    }

    pub fn train(&self) -> Vec<Vec<f64>> {
        self.subset(Role::Train)
    }

    pub fn val(&self) -> Vec<Vec<f64>> {
        self.subset(Role::Val)
    }

    /// Multi-index of point `i` of a tensor grid (points appended after the
    /// tensor block have none).
    pub fn grid_index(&self, i: usize) -> Option<Vec<usize>> {
        let shape = self.shape.as_ref()?;
        if i >= shape.iter().product() {
            return None;
        }
        let mut rest = i;
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = rest % shape[k];
            rest /= shape[k];
        }
        Some(idx)
    }

    /// Every point of `self` followed by every point of `other`; roles and the
    /// tensor shape of `self` are kept.
    pub fn concat(&self, other: &ParameterGrid) -> Result<ParameterGrid> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "cannot join {}-D and {}-D parameter sets",
                self.dim, other.dim
            )));
        }
        let mut out = self.clone();
        out.points.extend(other.points.iter().cloned());
        out.roles.extend(other.roles.iter().copied());
        Ok(out)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.roles.iter_mut().for_each(|r| *r = role);
        self
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["role".to_string()];
        header.extend((1..=self.dim).map(|k| format!("mu_{k}")));
        wr.write_record(&header)?;
        for (p, r) in self.points.iter().zip(&self.roles) {
            let mut rec = vec![r.as_str().to_string()];
            rec.extend(p.iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<ParameterGrid> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.get(0) != Some("role") {
            return Err(Error::Parse("parameter CSV must start with a 'role' column".into()));
        }
        let dim = header.len() - 1;
        let mut points = Vec::new();
        let mut roles = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            roles.push(match &rec[0] {
                "train" => Role::Train,
                "val" => Role::Val,
                other => return Err(Error::Parse(format!("row {}: unknown role '{other}'", line + 1))),
            });
            let p = (1..=dim)
                .map(|k| {
                    rec[k]
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(p);
        }
        Ok(ParameterGrid {
            dim,
            points,
            roles,
            seed: None,
            generators: vec!["imported".into(); dim],
            shape: None,
        })
    }
}

/// Cartesian product of 1D axes; the last axis varies fastest.
pub fn tensor_grid(axes: &[Vec<f64>]) -> Result<ParameterGrid> {
    if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
        return Err(Error::Config("tensor grid needs nonempty axes".into()));
    }
    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|&t| t <= 1 << 32)
        .ok_or_else(|| Error::Config("tensor grid too large".into()))?;
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let mut points = Vec::with_capacity(total);
    for i in 0..total {
        let mut rest = i;
        let mut p = vec![0.0; axes.len()];
        for k in (0..axes.len()).rev() {
            p[k] = axes[k][rest % shape[k]];
            rest /= shape[k];
        }
        points.push(p);
    }
    Ok(ParameterGrid {
        dim: axes.len(),
        points,
        roles: vec![Role::Train; total],
        seed: None,
        generators: shape.iter().map(|n| format!("tensor({n})")).collect(),
        shape: Some(shape),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// Latin hypercube sample: every dimension has exactly one point in each of
/// `n` equal strata (equal in log space for [`Scale::Log`]).
pub fn lhs(n: usize, bounds: &[(f64, f64)], scale: &[Scale], seed: u64) -> Result<ParameterGrid> {
    if n == 0 {
        return Err(Error::Config("LHS needs at least one point".into()));
    }
    if bounds.is_empty() || bounds.len() != scale.len() {
        return Err(Error::Config("LHS bounds and scales must be nonempty and of equal length".into()));
    }
    for (&(lo, hi), &s) in bounds.iter().zip(scale) {
        if !(lo < hi) || (s == Scale::Log && lo <= 0.0) {
            return Err(Error::Config(format!("invalid LHS range [{lo}, {hi}] for {s:?} scale")));
        }
    }
    let dim = bounds.len();
    let mut rng = rng(seed);
    let mut points = vec![vec![0.0; dim]; n];
    for (k, (&(lo, hi), &s)) in bounds.iter().zip(scale).enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (p, &st) in points.iter_mut().zip(&strata) {
            let u = (st as f64 + rng.random::<f64>()) / n as f64;
            p[k] = match s {
                Scale::Linear => lo + u * (hi - lo),
                Scale::Log => (lo.ln() + u * (hi.ln() - lo.ln())).exp(),
            }
            .clamp(lo, hi);
        }
    }
    Ok(ParameterGrid {
        dim,
        points,
        roles: vec![Role::Train; n],
        seed: Some(seed),
        generators: scale.iter().map(|s| format!("lhs-{s:?}").to_lowercase()).collect(),
        shape: None,
    })
}

/// Marks `n_val` randomly chosen points as validation points.
pub fn split_train_val(grid: &ParameterGrid, n_val: usize, seed: u64) -> Result<ParameterGrid> {
    if n_val >= grid.len() && n_val > 0 {
        return Err(Error::Config(format!(
            "validation size {n_val} must be smaller than the {} available points",
            grid.len()
        )));
    }
    let mut out = grid.clone();
    out.roles = vec![Role::Train; grid.len()];
    let mut rng = rng(seed);
    for i in index::sample(&mut rng, grid.len(), n_val) {
        out.roles[i] = Role::Val;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_examples() {
        assert_eq!(grid_1d(Spacing::Uniform, -1.0, 1.0, 3).unwrap(), vec![-1.0, 0.0, 1.0]);
        let g = grid_1d(Spacing::Log, 0.1, 10.0, 3).unwrap();
        assert_eq!((g[0], g[2]), (0.1, 10.0));
        assert!((g[1] - 1.0).abs() < 1e-15);
        let u = grid_1d(Spacing::Uniform, 0.1, 10.0, 50).unwrap();
        for w in u.windows(2) {
            assert!((w[1] - w[0] - 9.9 / 49.0).abs() < 1e-14);
        }
        assert!(grid_1d(Spacing::Log, -1.0, 1.0, 5).is_err());
        assert!(grid_1d(Spacing::Uniform, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn uniform_symmetric_range_is_exactly_symmetric() {
        let g = grid_1d(Spacing::Uniform, -1.0, 1.0, 40).unwrap();
        for i in 0..40 {
            assert_eq!(g[i], -g[39 - i]);
        }
    }

    #[test]
    fn symlog_is_symmetric_and_sorted() {
        let g = grid_1d(Spacing::SymLog, -1.0, 1.0, 41).unwrap();
        assert_eq!(g[20], 0.0);
        for i in 0..41 {
            assert!((g[i] + g[40 - i]).abs() < 1e-15);
        }
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tensor_order_last_axis_fastest() {
        let g = tensor_grid(&[vec![0.0, 1.0], vec![10.0, 20.0, 30.0]]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.points[1], vec![0.0, 20.0]);
        assert_eq!(g.points[3], vec![1.0, 10.0]);
        assert_eq!(g.grid_index(5), Some(vec![1, 2]));
        let big = tensor_grid(&[vec![0.0; 50], vec![0.0; 40]]).unwrap();
        assert_eq!(big.len(), 2000);
    }

    #[test]
    fn lhs_quarters() {
        let g = lhs(4, &[(0.0, 1.0)], &[Scale::Linear], 7).unwrap();
        let mut hits = [0; 4];
        for p in &g.points {
            hits[(p[0] * 4.0).floor() as usize] += 1;
        }
        assert_eq!(hits, [1; 4]);
    }

    #[test]
    fn split_counts() {
        let g = lhs(2500, &[(0.01, 10.0); 9], &[Scale::Linear; 9], 1).unwrap();
        let s = split_train_val(&g, 500, 3).unwrap();
        assert_eq!((s.indices(Role::Train).len(), s.indices(Role::Val).len()), (2000, 500));
        assert_eq!(split_train_val(&g, 0, 3).unwrap().indices(Role::Val).len(), 0);
        assert!(split_train_val(&g, 2500, 3).is_err());
        assert_eq!(s, split_train_val(&g, 500, 3).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let g = split_train_val(&lhs(10, &[(0.1, 10.0), (-1.0, 1.0)], &[Scale::Log, Scale::Linear], 5).unwrap(), 3, 1)
            .unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = ParameterGrid::read_csv(&buf[..]).unwrap();
        assert_eq!(back.points, g.points);
        assert_eq!(back.roles, g.roles);
    }

    proptest! {
        #[test]
        fn lhs_latin_property(n in 1usize..300, dim in 1usize..5, seed in any::<u64>()) {
            let bounds = vec![(0.01, 10.0); dim];
            let g = lhs(n, &bounds, &vec![Scale::Linear; dim], seed).unwrap();
            for k in 0..dim {
                let mut hits = vec![0; n];
                for p in &g.points {
                    prop_assert!(p[k] >= 0.01 && p[k] <= 10.0);
                    let s = (((p[k] - 0.01) / 9.99) * n as f64).floor() as usize;
                    hits[s.min(n - 1)] += 1;
                }
                prop_assert!(hits.iter().all(|&h| h == 1));
            }
            prop_assert_eq!(g, lhs(n, &bounds, &vec![Scale::Linear; dim], seed).unwrap());
        }
    }
}
