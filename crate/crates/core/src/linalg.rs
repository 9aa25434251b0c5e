//! Thin SVD, POD truncation, Gram-Schmidt basis enrichment and projection errors.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative threshold `σ_i > rank_tol · σ_1` for the numerical rank.
pub const RANK_TOL: f64 = 1e-12;
/// Default Gram-Schmidt rejection tolerance on `‖residual‖ / ‖candidate‖`.
pub const GS_TOL: f64 = 1e-10;
const REORTH_TRIGGER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Fine,
    Coarse,
    Coefficient,
}

/// Columns are solutions (or reduced coefficients) at training parameters.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub values: Mat<f64>,
    /// Training-set index of each column.
    pub col_params: Vec<usize>,
    pub space: Space,
}

impl SnapshotMatrix {
    pub fn new(values: Mat<f64>, col_params: Vec<usize>, space: Space) -> Result<Self> {
        if col_params.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} column labels for {} columns",
                col_params.len(),
                values.ncols()
            )));
        }
        if !is_finite(values.as_ref()) {
            return Err(Error::Numerical("snapshot matrix has non-finite entries".into()));
        }
        Ok(SnapshotMatrix {
            values,
            col_params,
            space,
        })
    }

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(cols: &[Vec<f64>], col_params: Vec<usize>, space: Space) -> Result<Self> {
        let nrows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != nrows) {
            return Err(Error::Dimension("snapshot columns differ in length".into()));
        }
        Self::new(columns_to_mat(cols, nrows), col_params, space)
    }
}

pub fn columns_to_mat(cols: &[Vec<f64>], nrows: usize) -> Mat<f64> {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn is_finite(m: MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| m.col(j).iter().all(|v| v.is_finite()))
}

#[derive(Debug, Clone)]
pub struct SvdTriple {
    pub u: Mat<f64>,
    /// Nonincreasing singular values.
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

impl SvdTriple {
    /// Count of `σ_i > rank_tol · σ_1`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        match self.s.first() {
            Some(&s1) if s1 > 0.0 => self.s.iter().take_while(|&&s| s > rank_tol * s1).count(),
            _ => 0,
        }
    }
}

pub fn thin_svd(m: MatRef<'_, f64>) -> Result<SvdTriple> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Dimension("SVD of an empty matrix".into()));
    }
    let svd = m.thin_svd().map_err(|e| {
        Error::Numerical(format!("SVD of a {}x{} matrix did not converge: {e:?}", m.nrows(), m.ncols()))
    })?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let mut out = SvdTriple {
        u: svd.U().to_owned(),
        s,
        v: svd.V().to_owned(),
    };
    // guard against any backend ordering differences
    if out.s.windows(2).any(|w| w[0] < w[1]) {
        let mut order: Vec<usize> = (0..out.s.len()).collect();
        order.sort_by(|&a, &b| out.s[b].total_cmp(&out.s[a]));
        out = SvdTriple {
            u: Mat::from_fn(out.u.nrows(), order.len(), |i, j| out.u[(i, order[j])]),
            s: order.iter().map(|&j| out.s[j]).collect(),
            v: Mat::from_fn(out.v.nrows(), order.len(), |i, j| out.v[(i, order[j])]),
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    Rank(usize),
    Relative(f64),
}

/// Leading left/right singular vectors and values.
#[derive(Debug, Clone)]
pub struct PodModes {
    pub basis: Mat<f64>,
    pub modes: Mat<f64>,
    pub s: Vec<f64>,
}

pub fn pod_truncate(svd: &SvdTriple, criterion: Truncation, rank_tol: f64) -> Result<PodModes> {
    let numerical = svd.rank(rank_tol);
    let r = match criterion {
        Truncation::Rank(r) => {
            if r > numerical {
                return Err(Error::Numerical(format!(
                    "requested rank {r} exceeds the numerical rank {numerical}"
                )));
            }
            r
        }
        Truncation::Relative(tol) => svd.rank(tol),
    };
    Ok(PodModes {
        basis: svd.u.get(.., ..r).to_owned(),
        modes: svd.v.get(.., ..r).to_owned(),
        s: svd.s[..r].to_vec(),
    })
}

/// Share of `Σσ²` carried by the first `r` values.
pub fn energy_fraction(s: &[f64], r: usize) -> f64 {
    let total: f64 = s.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 1.0;
    }
    s[..r.min(s.len())].iter().map(|v| v * v).sum::<f64>() / total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub iteration: usize,
    /// Training-set index of the snapshot the column came from.
    pub train_index: usize,
}

/// Orthonormal basis with the origin of every column.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    pub phi: Mat<f64>,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnrichReport {
    /// Candidate columns appended to the basis.
    pub accepted: Vec<usize>,
    /// Candidate columns rejected as (numerically) dependent or zero.
    pub rejected: Vec<usize>,
}

impl ReducedBasis {
    pub fn empty(n: usize) -> Self {
        ReducedBasis {
            phi: Mat::zeros(n, 0),
            provenance: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn defect(&self) -> f64 {
        orthonormality_defect(self.phi.as_ref())
    }

    /// Gram-Schmidt enrichment: each candidate is orthogonalized against the
    /// current basis (including columns accepted earlier in the same call) and
    /// appended when `‖residual‖/‖candidate‖ > eps_g`.
    pub fn enrich(&mut self, candidates: &SnapshotMatrix, iteration: usize, eps_g: f64) -> Result<EnrichReport> {
        let c = &candidates.values;
        if c.nrows() != self.n() {
            return Err(Error::Dimension(format!(
                "candidates have {} rows, basis has {}",
                c.nrows(),
                self.n()
            )));
        }
        let mut report = EnrichReport::default();
        for j in 0..c.ncols() {
            let cand = c.col(j);
            let norm = cand.norm_l2();
            if norm == 0.0 {
                log::info!("Gram-Schmidt: candidate {j} is zero, skipped");
                report.rejected.push(j);
                continue;
            }
            let mut r = cand.to_owned();
            if self.rank() > 0 {
                let coef = self.phi.transpose() * &r;
                r -= &self.phi * &coef;
            }
            let rn = r.norm_l2();
            if rn / norm <= eps_g {
                log::debug!("Gram-Schmidt: candidate {j} rejected, relative residual {:e}", rn / norm);
                report.rejected.push(j);
                continue;
            }
            let mut q = r * (1.0 / rn);
            if self.rank() > 0 {
                let coef = self.phi.transpose() * &q;
                if coef.norm_max() > REORTH_TRIGGER {
                    q -= &self.phi * &coef;
                    let qn = q.norm_l2();
                    q *= 1.0 / qn;
                }
            }
            let r0 = self.rank();
            let mut phi = Mat::zeros(self.n(), r0 + 1);
            phi.get_mut(.., ..r0).copy_from(&self.phi);
            phi.col_mut(r0).copy_from(&q);
            self.phi = phi;
            self.provenance.push(Provenance {
                iteration,
                train_index: candidates.col_params[j],
            });
            report.accepted.push(j);
        }
        Ok(report)
    }
}

/// `max |ΦᵀΦ − I|`.
pub fn orthonormality_defect(phi: MatRef<'_, f64>) -> f64 {
    let g = phi.transpose() * phi;
    let mut d = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            d = d.max((g[(i, j)] - target).abs());
        }
    }
    d
}

/// Relative error `‖u − v‖ / ‖u‖`, or `None` when `u = 0`.
pub fn relative_error(u: &[f64], v: &[f64]) -> Option<f64> {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 {
        return None;
    }
    let d = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Some(d / nu)
}

/// Root-sum-square of relative errors; zero reference columns are skipped.
pub fn rss(errors: impl IntoIterator<Item = Option<f64>>) -> f64 {
    errors.into_iter().flatten().map(|e| e * e).sum::<f64>().sqrt()
}

/// Per-column relative projection errors `‖u − ΦΦᵀu‖ / ‖u‖`.
pub fn projection_errors(snapshots: MatRef<'_, f64>, phi: MatRef<'_, f64>) -> Vec<Option<f64>> {
    let proj = if phi.ncols() == 0 {
        Mat::zeros(snapshots.nrows(), snapshots.ncols())
    } else {
        phi * (phi.transpose() * snapshots)
    };
    (0..snapshots.ncols())
        .map(|j| {
            let u: Vec<f64> = snapshots.col(j).iter().copied().collect();
            let p: Vec<f64> = proj.col(j).iter().copied().collect();
            relative_error(&u, &p)
        })
        .collect()
}

/// `ε_POD = sqrt(Σ ‖u_i − ΦΦᵀu_i‖² / ‖u_i‖²)`.
pub fn projection_error(snapshots: MatRef<'_, f64>, phi: MatRef<'_, f64>) -> f64 {
    let errs = projection_errors(snapshots, phi);
    let zeros = errs.iter().filter(|e| e.is_none()).count();
    if zeros > 0 {
        log::warn!("projection error: {zeros} zero snapshot(s) excluded");
    }
    rss(errs)
}
