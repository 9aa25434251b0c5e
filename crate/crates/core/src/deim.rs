//! DEIM selection of training parameters from parametric modes.
//!
//! Rows of a mode matrix `Ψ ∈ ℝ^{N×r}` correspond to training parameters.
//! Selection resumes across calls: the interpolation system keeps every
//! column consumed so far together with the row it selected.

use faer::{Col, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, RANK_TOL};

/// Interpolation matrices with `σ_min/σ_max` below this are singular.
const SINGULAR_TOL: f64 = 1e-13;
/// Entries within this relative distance of the maximum count as ties.
const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeimVariant {
    /// Interpolate at the previously selected rows.
    #[default]
    SelectedRows,
    /// Interpolate at the leading rows `0..l`, regardless of the selection.
    LeadingRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeimEvent {
    /// Column skipped because its argmax hit an already selected index.
    Collision { iteration: usize, column: usize, index: usize },
    /// Column skipped because its interpolation residual vanished.
    NoResidual { iteration: usize, column: usize },
    /// Column dropped by history orthogonalization.
    Dropped { iteration: usize, column: usize },
    /// Modes identical to the history were reused without orthogonalization.
    Reused { iteration: usize },
}

#[derive(Debug, Clone)]
pub struct DeimState {
    /// Every selected training index in order of selection (never repeats).
    pub selected: Vec<usize>,
    /// Columns consumed by the interpolation so far, one per entry of `interp_rows`.
    pub interp_modes: Mat<f64>,
    pub interp_rows: Vec<usize>,
    /// Orthonormal parametric modes new modes are orthogonalized against.
    pub history: Mat<f64>,
    pub iteration: usize,
    pub variant: DeimVariant,
    pub log: Vec<DeimEvent>,
}

/// Lowest index whose magnitude is within the tie tolerance of the maximum.
pub fn argmax_abs(v: &[f64]) -> Option<(usize, f64)> {
    let max = v.iter().copied().map(f64::abs).fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return None;
    }
    v.iter()
        .map(|x| x.abs())
        .enumerate()
        .find(|&(_, a)| a >= max * (1.0 - TIE_TOL))
}

fn col_vec(m: MatRef<'_, f64>, j: usize) -> Col<f64> {
    m.col(j).to_owned()
}

impl DeimState {
    pub fn new(n_train: usize, variant: DeimVariant) -> Self {
        DeimState {
            selected: Vec::new(),
            interp_modes: Mat::zeros(n_train, 0),
            interp_rows: Vec::new(),
            history: Mat::zeros(n_train, 0),
            iteration: 0,
            variant,
            log: Vec::new(),
        }
    }

    pub fn n_train(&self) -> usize {
        self.interp_modes.nrows()
    }

    /// Records indices chosen outside DEIM (e.g. a random initial sketch).
    pub fn preselect(&mut self, indices: &[usize]) -> Result<()> {
        for &i in indices {
            if i >= self.n_train() || self.selected.contains(&i) {
                return Err(Error::Config(format!("invalid or repeated preselected index {i}")));
            }
            self.selected.push(i);
        }
        Ok(())
    }

    fn fit_rows(&self) -> Vec<usize> {
        match self.variant {
            DeimVariant::SelectedRows => self.interp_rows.clone(),
            DeimVariant::LeadingRows => (0..self.interp_rows.len()).collect(),
        }
    }

    /// Interpolation residual `ψ − U c` with `U[rows] c = ψ[rows]`.
    fn residual(&self, psi: &Col<f64>, column: usize) -> Result<Col<f64>> {
        let l = self.interp_rows.len();
        if l == 0 {
            return Ok(psi.clone());
        }
        let rows = self.fit_rows();
        let sub = Mat::from_fn(l, l, |i, j| self.interp_modes[(rows[i], j)]);
        let rhs = Col::from_fn(l, |i| psi[rows[i]]);
        let svd = thin_svd(sub.as_ref())?;
        let smax = svd.s[0];
        let smin = *svd.s.last().unwrap();
        if !(smin > SINGULAR_TOL * smax) {
            return Err(Error::Numerical(format!(
                "singular DEIM interpolation matrix (cond ratio {:e}) at column {column}",
                smin / smax
            )));
        }
        let mut y = svd.u.transpose() * &rhs;
        for (k, s) in svd.s.iter().enumerate() {
            y[k] /= s;
        }
        let c = &svd.v * &y;
        Ok(psi - &self.interp_modes * &c)
    }

    fn push_column(&mut self, psi: &Col<f64>, row: usize) {
        let (n, l) = (self.n_train(), self.interp_rows.len());
        let mut m = Mat::zeros(n, l + 1);
        m.get_mut(.., ..l).copy_from(&self.interp_modes);
        m.col_mut(l).copy_from(psi);
        self.interp_modes = m;
        self.interp_rows.push(row);
        self.selected.push(row);
    }

    /// Selects up to `p` new indices from the columns of `psi`, consumed in
    /// order. Returns the new indices; fewer than `p` means the columns ran out.
    pub fn select(&mut self, psi: MatRef<'_, f64>, p: usize) -> Result<Vec<usize>> {
        if psi.nrows() != self.n_train() {
            return Err(Error::Dimension(format!(
                "modes have {} rows, training set has {}",
                psi.nrows(),
                self.n_train()
            )));
        }
        if p > psi.ncols() {
            return Err(Error::Config(format!(
                "{p} points requested from {} parametric modes",
                psi.ncols()
            )));
        }
        let mut new = Vec::new();
        for j in 0..psi.ncols() {
            if new.len() == p {
                break;
            }
            let col = col_vec(psi, j);
            let r = self.residual(&col, j)?;
            let scale = col.norm_max();
            let Some((idx, val)) = argmax_abs(&r.iter().copied().collect::<Vec<_>>()) else {
                self.log.push(DeimEvent::NoResidual { iteration: self.iteration, column: j });
                continue;
            };
            if val <= RANK_TOL * scale {
                self.log.push(DeimEvent::NoResidual { iteration: self.iteration, column: j });
                continue;
            }
            if self.selected.contains(&idx) {
                log::info!("DEIM: column {j} hits already selected index {idx}, skipped");
                self.log.push(DeimEvent::Collision {
                    iteration: self.iteration,
                    column: j,
                    index: idx,
                });
                continue;
            }
            self.push_column(&col, idx);
            new.push(idx);
        }
        Ok(new)
    }

    /// Orthonormalizes `psi` against the history and against itself,
    /// dropping columns whose residual norm falls below `rank_tol` times the
    /// original norm. The returned columns are appended to the history; an
    /// empty result means the modes carry no new parametric information.
    pub fn orthogonalize_against_history(&mut self, psi: MatRef<'_, f64>, rank_tol: f64) -> Result<Mat<f64>> {
        if psi.nrows() != self.history.nrows() {
            return Err(Error::Dimension("modes and history differ in row count".into()));
        }
        let mut basis = self.history.clone();
        let h0 = basis.ncols();
        for j in 0..psi.ncols() {
            let mut v = col_vec(psi, j);
            let norm = v.norm_l2();
            for _ in 0..2 {
                if basis.ncols() > 0 {
                    let c = basis.transpose() * &v;
                    v -= &basis * &c;
                }
            }
            let rn = v.norm_l2();
            if norm == 0.0 || rn <= rank_tol * norm {
                self.log.push(DeimEvent::Dropped { iteration: self.iteration, column: j });
                continue;
            }
            v *= 1.0 / rn;
            let k = basis.ncols();
            let mut b = Mat::zeros(basis.nrows(), k + 1);
            b.get_mut(.., ..k).copy_from(&basis);
            b.col_mut(k).copy_from(&v);
            basis = b;
        }
        let out = basis.get(.., h0..).to_owned();
        self.history = basis;
        Ok(out)
    }

    /// Replaces the history with the given orthonormal modes.
    pub fn set_history(&mut self, modes: Mat<f64>) {
        self.history = modes;
    }
}

/// One-shot DEIM on `psi` with an empty state.
pub fn deim_select(psi: MatRef<'_, f64>, p: usize, variant: DeimVariant) -> Result<Vec<usize>> {
    DeimState::new(psi.nrows(), variant).select(psi, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn single_column() {
        let psi = mat(&[&[1.0], &[3.0], &[-2.0]]);
        assert_eq!(deim_select(psi.as_ref(), 1, DeimVariant::SelectedRows).unwrap(), vec![1]);
    }

    #[test]
    fn hand_executed() {
        let psi = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[0.9, 0.9]]);
        assert_eq!(deim_select(psi.as_ref(), 2, DeimVariant::SelectedRows).unwrap(), vec![0, 1]);
    }

    #[test]
    fn ties_take_lowest_index() {
        let psi = mat(&[&[0.5], &[-1.0], &[1.0]]);
        assert_eq!(deim_select(psi.as_ref(), 1, DeimVariant::SelectedRows).unwrap(), vec![1]);
    }

    #[test]
    fn too_many_points() {
        let psi = mat(&[&[1.0], &[2.0]]);
        assert!(deim_select(psi.as_ref(), 2, DeimVariant::SelectedRows).is_err());
    }

    #[test]
    fn collision_skips_column() {
        let mut st = DeimState::new(3, DeimVariant::SelectedRows);
        st.preselect(&[1]).unwrap();
        let psi = mat(&[&[1.0, 1.0], &[3.0, 0.0], &[-2.0, 0.0]]);
        assert_eq!(st.select(psi.as_ref(), 1).unwrap(), vec![0]);
        assert!(matches!(st.log[0], DeimEvent::Collision { column: 0, index: 1, .. }));
        assert_eq!(st.selected, vec![1, 0]);
    }

    #[test]
    fn history_orthogonalization() {
        let mut st = DeimState::new(3, DeimVariant::SelectedRows);
        let e1 = mat(&[&[1.0], &[0.0], &[0.0]]);
        let out = st.orthogonalize_against_history(e1.as_ref(), RANK_TOL).unwrap();
        assert_eq!(out.ncols(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = mat(&[&[s], &[s], &[0.0]]);
        let out = st.orthogonalize_against_history(v.as_ref(), RANK_TOL).unwrap();
        assert!(out[(0, 0)].abs() < 1e-15 && (out[(1, 0)] - 1.0).abs() < 1e-15);
        let again = st.orthogonalize_against_history(v.as_ref(), RANK_TOL).unwrap();
        assert_eq!(again.ncols(), 0);
    }
}
