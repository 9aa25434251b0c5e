//! Residual-driven greedy reduced basis for affine coercive problems.
//!
//! The inner product is `X = A(μ̄)`; the error indicator is the dual norm of
//! the residual divided by the min-theta coercivity lower bound, relative to
//! the X-norm of the reduced solution.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::AffineSystem;
use crate::error::{Error, Result};
use crate::fem::{SparseLu, SparseOp};
use crate::linalg::{columns_to_mat, projection_error, rss, ReducedBasis, SnapshotMatrix, Space, GS_TOL};
use crate::mf::Status;
use crate::problem::reduced_errors;
use crate::rom::{project_affine, ReducedAffineSystem};

fn to_col(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

/// Smallest eigenvalue of `X^{-1/2} A X^{-1/2}` for symmetric `A` and SPD `X`.
pub fn min_generalized_eigenvalue(a: &SparseOp, x: &SparseOp) -> Result<f64> {
    let xd = x.to_dense();
    let l = xd
        .llt(Side::Lower)
        .map_err(|_| Error::Numerical("inner-product operator is not SPD".into()))?;
    let lm = l.L().to_owned();
    let ad = a.to_dense();
    // C = L^{-1} A L^{-T}
    let linv = lm.as_ref().partial_piv_lu().solve(Mat::<f64>::identity(lm.nrows(), lm.nrows()));
    let c = &linv * &ad * linv.transpose();
    let c = Mat::from_fn(c.nrows(), c.ncols(), |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigenvalue solver failed: {e:?}")))?;
    let s = eig.S().column_vector();
    Ok((0..s.nrows()).map(|i| s[i]).fold(f64::INFINITY, f64::min))
}

/// Affine residual data: `X` factorization and an X-orthonormal QR of the Riesz representors.
///
/// With `Z = X⁻¹[f_1.., A_1Φ.., A_2Φ..] = Q R` and `QᵀXQ = I`, the dual norm of the
/// residual is `‖R c(μ, b)‖₂`, which avoids the cancellation of the Gram expansion.
pub struct RieszBlocks {
    x: SparseOp,
    x_lu: SparseLu,
    /// Upper-trapezoidal factor, one row per retained direction.
    r: Mat<f64>,
    rank: usize,
}

impl RieszBlocks {
    pub fn new(system: &AffineSystem, x: SparseOp, phi: &Mat<f64>) -> Result<Self> {
        if !x.is_symmetric(1e-12) {
            return Err(Error::Numerical("inner-product operator must be symmetric".into()));
        }
        let x_lu = x.factorize()?;
        let mut blocks = RieszBlocks {
            x,
            x_lu,
            r: Mat::zeros(0, 0),
            rank: 0,
        };
        blocks.update(system, phi)?;
        Ok(blocks)
    }

    pub fn inner_product(&self) -> &SparseOp {
        &self.x
    }

    fn x_dot(&self, u: &[f64], v: &[f64]) -> f64 {
        let xv = self.x.matvec(v);
        u.iter().zip(&xv).map(|(a, b)| a * b).sum()
    }

    /// Recomputes the factor for a new basis.
    pub fn update(&mut self, system: &AffineSystem, phi: &Mat<f64>) -> Result<()> {
        let n = system.n();
        let rank = phi.ncols();
        let mut cols: Vec<Vec<f64>> = system.rhs.iter().map(|t| self.x_lu.solve(&t.value)).collect();
        for t in &system.lhs {
            let z = self.x_lu.solve_mat(t.value.mul_dense(phi.as_ref()).as_ref());
            cols.extend((0..rank).map(|j| (0..n).map(|i| z[(i, j)]).collect::<Vec<f64>>()));
        }
        let m = cols.len();
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (j, mut z) in cols.into_iter().enumerate() {
            let norm0 = self.x_dot(&z, &z).max(0.0).sqrt();
            let mut coef = vec![0.0; q.len()];
            for _ in 0..2 {
                for (k, qk) in q.iter().enumerate() {
                    let c = self.x_dot(qk, &z);
                    z.iter_mut().zip(qk).for_each(|(zi, qi)| *zi -= c * qi);
                    coef[k] += c;
                }
            }
            for (k, c) in coef.into_iter().enumerate() {
                rows[k][j] = c;
            }
            let norm = self.x_dot(&z, &z).max(0.0).sqrt();
            if norm > 1e-13 * norm0 && norm > 0.0 {
                z.iter_mut().for_each(|v| *v /= norm);
                q.push(z);
                let mut row = vec![0.0; m];
                row[j] = norm;
                rows.push(row);
            }
        }
        self.r = Mat::from_fn(rows.len(), m, |i, j| rows[i][j]);
        self.rank = rank;
        Ok(())
    }

    /// `‖r(μ; b)‖_{X'}` from the precomputed factor.
    pub fn dual_norm(&self, system: &AffineSystem, mu: &[f64], b: &[f64]) -> f64 {
        let mut c = system.theta_rhs(mu);
        for t in system.theta_lhs(mu) {
            c.extend((0..self.rank).map(|j| -t * b.get(j).copied().unwrap_or(0.0)));
        }
        let rc = &self.r * to_col(&c);
        rc.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖r(μ; b)‖_{X'}` by a full-order Riesz solve.
    pub fn dual_norm_direct(&self, system: &AffineSystem, phi: &Mat<f64>, mu: &[f64], b: &[f64]) -> Result<f64> {
        let a = system.operator(mu)?;
        let f = system.load(mu)?;
        let u: Vec<f64> = if b.is_empty() {
            vec![0.0; system.n()]
        } else {
            (phi * to_col(b)).iter().copied().collect()
        };
        let au = a.matvec(&u);
        let r: Vec<f64> = f.iter().zip(&au).map(|(fi, ai)| fi - ai).collect();
        let z = self.x_lu.solve(&r);
        Ok(r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
    }

    pub fn x_norm(&self, v: &[f64]) -> f64 {
        let xv = self.x.matvec(v);
        v.iter().zip(&xv).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }
}

/// Min-theta coercivity lower bound.
#[derive(Debug, Clone)]
pub struct MinTheta {
    pub mu_ref: Vec<f64>,
    pub alpha_ref: f64,
    theta_ref: Vec<f64>,
}

impl MinTheta {
    pub fn new(system: &AffineSystem, mu_ref: &[f64], alpha_ref: f64) -> Result<Self> {
        let theta_ref = system.theta_lhs(mu_ref);
        if theta_ref.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Domain(format!("nonpositive coefficient at reference parameter {mu_ref:?}")));
        }
        Ok(MinTheta {
            mu_ref: mu_ref.to_vec(),
            alpha_ref,
            theta_ref,
        })
    }

    /// `α(μ̄) · min_q θ_q(μ)/θ_q(μ̄)`.
    pub fn lower_bound(&self, system: &AffineSystem, mu: &[f64]) -> Result<f64> {
        let th = system.theta_lhs(mu);
        if th.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Domain(format!("nonpositive coefficient at {mu:?}")));
        }
        let ratio = th
            .iter()
            .zip(&self.theta_ref)
            .map(|(a, b)| a / b)
            .fold(f64::INFINITY, f64::min);
        Ok(self.alpha_ref * ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    /// Tolerance on the relative error bound `Δ(μ)/‖u_R(μ)‖_X`.
    pub tol: f64,
    pub max_iter: usize,
    pub mu_ref: Vec<f64>,
    pub eps_g: f64,
    pub timings: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            tol: 1e-6,
            max_iter: 200,
            mu_ref: vec![1.0, 1.0],
            eps_g: GS_TOL,
            timings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyIteration {
    pub iteration: usize,
    pub n_points: usize,
    pub rank: usize,
    /// Largest relative bound over the training set after this iteration's enrichment.
    pub max_indicator: f64,
    pub argmax: usize,
    /// Max relative ROM error over the validation set.
    pub eps_val: Option<f64>,
    /// RSS of relative ROM errors over the training set.
    pub eps_rom: Option<f64>,
    /// RSS of relative projection errors over the training set.
    pub eps_pod: Option<f64>,
    pub seconds: f64,
}

/// Reference snapshots for the optional error diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyDiagnostics<'a> {
    pub train_snapshots: Option<&'a [Vec<f64>]>,
    pub val: &'a [Vec<f64>],
    pub val_snapshots: Option<&'a [Vec<f64>]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyReport {
    pub status: Status,
    pub config: GreedyConfig,
    pub alpha_ref: f64,
    pub selected: Vec<usize>,
    pub iterations: Vec<GreedyIteration>,
    pub basis_rank: usize,
}

pub struct GreedyState<'a> {
    system: &'a AffineSystem,
    pub basis: ReducedBasis,
    pub riesz: RieszBlocks,
    pub coercivity: MinTheta,
    pub selected: Vec<usize>,
}

impl<'a> GreedyState<'a> {
    pub fn new(system: &'a AffineSystem, mu_ref: &[f64]) -> Result<Self> {
        system.check_mu(mu_ref)?;
        let x = system.operator(mu_ref)?;
        let alpha = min_generalized_eigenvalue(&x, &x)?;
        let coercivity = MinTheta::new(system, mu_ref, alpha)?;
        let basis = ReducedBasis::empty(system.n());
        let riesz = RieszBlocks::new(system, x, &basis.phi)?;
        Ok(GreedyState {
            system,
            basis,
            riesz,
            coercivity,
            selected: Vec::new(),
        })
    }

    pub fn reduced(&self) -> Result<ReducedAffineSystem> {
        project_affine(self.system, self.basis.phi.as_ref())
    }

    /// Absolute X-norm error bound and reduced coefficients at `μ`.
    pub fn bound(&self, rom: &ReducedAffineSystem, mu: &[f64]) -> Result<(f64, Vec<f64>)> {
        let b = if self.basis.rank() == 0 {
            Vec::new()
        } else {
            rom.solve(mu)?.coeffs
        };
        let dual = self.riesz.dual_norm(self.system, mu, &b);
        Ok((dual / self.coercivity.lower_bound(self.system, mu)?, b))
    }

    /// Relative bound `Δ/‖u_R‖_X` (absolute bound while the basis is empty).
    fn indicators(&self, train: &[Vec<f64>]) -> Result<Vec<f64>> {
        let rom = self.reduced()?;
        train
            .par_iter()
            .map(|mu| {
                let (delta, b) = self.bound(&rom, mu)?;
                if b.is_empty() {
                    return Ok(delta);
                }
                let u: Vec<f64> = (&self.basis.phi * to_col(&b)).iter().copied().collect();
                let norm = self.riesz.x_norm(&u);
                Ok(if norm > 0.0 { delta / norm } else if delta > 0.0 { f64::INFINITY } else { 0.0 })
            })
            .collect()
    }

    fn enrich(&mut self, idx: usize, train: &[Vec<f64>], iteration: usize, eps_g: f64) -> Result<()> {
        let u = self.system.solve(&train[idx])?.free;
        let cand = SnapshotMatrix::from_columns(&[u], vec![idx], Space::Fine)?;
        self.basis.enrich(&cand, iteration, eps_g)?;
        self.riesz.update(self.system, &self.basis.phi)?;
        self.selected.push(idx);
        Ok(())
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best })
}

pub fn greedy_loop(
    system: &AffineSystem,
    train: &[Vec<f64>],
    config: &GreedyConfig,
    diag: GreedyDiagnostics<'_>,
) -> Result<GreedyReport> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::Config("greedy tol and max_iter must be positive".into()));
    }
    let mut state = GreedyState::new(system, &config.mu_ref)?;
    let mut iterations = Vec::new();
    let mut status = Status::MaxIter;
    let (mut next, _) = argmax(&state.indicators(train)?);
    for iteration in 1..=config.max_iter {
        let start = Instant::now();
        if state.selected.contains(&next) {
            status = Status::Stalled;
            break;
        }
        state.enrich(next, train, iteration, config.eps_g)?;
        let ind = state.indicators(train)?;
        let (arg, max) = argmax(&ind);
        let rom = state.reduced()?;
        let phi = state.basis.phi.as_ref();
        let eps_val = match diag.val_snapshots {
            Some(vs) if !diag.val.is_empty() => {
                Some(reduced_errors(&rom, phi, diag.val, vs)?.into_iter().flatten().fold(0.0, f64::max))
            }
            _ => None,
        };
        let (eps_rom, eps_pod) = match diag.train_snapshots {
            Some(ts) => (
                Some(rss(reduced_errors(&rom, phi, train, ts)?)),
                Some(projection_error(columns_to_mat(ts, system.n()).as_ref(), phi)),
            ),
            None => (None, None),
        };
        iterations.push(GreedyIteration {
            iteration,
            n_points: state.selected.len(),
            rank: state.basis.rank(),
            max_indicator: max,
            argmax: arg,
            eps_val,
            eps_rom,
            eps_pod,
            seconds: if config.timings { start.elapsed().as_secs_f64() } else { 0.0 },
        });
        log::info!("greedy iteration {iteration}: rank {} max bound {max:.3e}", state.basis.rank());
        if max < config.tol {
            status = Status::Converged;
            break;
        }
        next = arg;
    }
    Ok(GreedyReport {
        status,
        config: config.clone(),
        alpha_ref: state.coercivity.alpha_ref,
        selected: state.selected,
        iterations,
        basis_rank: state.basis.rank(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::HeatProblem;

    #[test]
    fn reference_coercivity_is_one() {
        let p = HeatProblem::new(8, 8, 0.5).unwrap();
        let x = p.system.operator(&[1.0, 1.0]).unwrap();
        let a = min_generalized_eigenvalue(&x, &x).unwrap();
        assert!((a - 1.0).abs() < 1e-10);
        let mt = MinTheta::new(&p.system, &[1.0, 1.0], a).unwrap();
        assert!((mt.lower_bound(&p.system, &[0.1, 0.5]).unwrap() - 0.1 * a).abs() < 1e-15);
        assert_eq!(mt.lower_bound(&p.system, &[1.0, 0.5]).unwrap(), a);
    }

    #[test]
    fn zero_basis_zero_rhs() {
        let p = HeatProblem::new(8, 8, 0.5).unwrap();
        let st = GreedyState::new(&p.system, &[1.0, 1.0]).unwrap();
        assert_eq!(st.riesz.dual_norm(&p.system, &[2.0, 0.0], &[]), 0.0);
        let d1 = st.riesz.dual_norm(&p.system, &[2.0, 0.5], &[]);
        let d2 = st.riesz.dual_norm(&p.system, &[2.0, 1.0], &[]);
        assert!((2.0 * d1 - d2).abs() < 1e-14 * d2);
    }

    #[test]
    fn infinite_tolerance_stops_after_one() {
        let p = HeatProblem::new(8, 8, 0.5).unwrap();
        let train: Vec<Vec<f64>> = (0..20).map(|i| vec![0.1 + 0.5 * i as f64, 1.0 - 0.1 * i as f64]).collect();
        let cfg = GreedyConfig {
            tol: f64::INFINITY,
            ..GreedyConfig::default()
        };
        let rep = greedy_loop(&p.system, &train, &cfg, GreedyDiagnostics::default()).unwrap();
        assert_eq!(rep.selected.len(), 1);
        assert_eq!(rep.status, Status::Converged);
    }
}
