//! Galerkin reduced-order models: affine offline/online reduction and
//! assemble-then-project for non-affine operators.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, MatRef};

use crate::affine::{AffineSystem, Theta};
use crate::error::{Error, Result};
use crate::supg::AdvDiffProblem;

/// Reduced coefficients `b(μ)` of `u^R = Φ b(μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RomSolution {
    pub mu: Vec<f64>,
    pub coeffs: Vec<f64>,
}

/// Reduced affine terms `ΦᵀA_qΦ` and `Φᵀf_q`; independent of the full dimension.
#[derive(Debug, Clone)]
pub struct ReducedAffineSystem {
    pub lhs: Vec<(String, Theta, Mat<f64>)>,
    pub rhs: Vec<(String, Theta, Col<f64>)>,
    pub param_dim: usize,
}

pub fn project_affine(system: &AffineSystem, phi: MatRef<'_, f64>) -> Result<ReducedAffineSystem> {
    if phi.nrows() != system.n() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, system has {} dofs",
            phi.nrows(),
            system.n()
        )));
    }
    let lhs = system
        .lhs
        .iter()
        .map(|t| (t.tag.clone(), t.theta, t.value.project(phi)))
        .collect();
    let rhs = system
        .rhs
        .iter()
        .map(|t| {
            let f = Col::from_fn(t.value.len(), |i| t.value[i]);
            (t.tag.clone(), t.theta, phi.transpose() * &f)
        })
        .collect();
    Ok(ReducedAffineSystem {
        lhs,
        rhs,
        param_dim: system.param_dim,
    })
}

/// Dense solve of a small reduced system with a finiteness check.
pub fn solve_dense(a: MatRef<'_, f64>, f: &Col<f64>, mu: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let x = a.partial_piv_lu().solve(f);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::solver(mu, "singular reduced operator"));
    }
    Ok(x.iter().copied().collect())
}

impl ReducedAffineSystem {
    pub fn rank(&self) -> usize {
        self.lhs.first().map_or(0, |t| t.2.nrows())
    }

    /// Reduced operator and load at `μ`, restricted to the leading `r` basis columns.
    pub fn assemble(&self, mu: &[f64], r: usize) -> Result<(Mat<f64>, Col<f64>)> {
        if mu.len() != self.param_dim {
            return Err(Error::Dimension(format!(
                "parameter has {} components, expected {}",
                mu.len(),
                self.param_dim
            )));
        }
        let r = r.min(self.rank());
        let mut a = Mat::<f64>::zeros(r, r);
        for (_, th, aq) in &self.lhs {
            a += th.eval(mu) * aq.get(..r, ..r);
        }
        let mut f = Col::<f64>::zeros(r);
        for (_, th, fq) in &self.rhs {
            f += th.eval(mu) * fq.get(..r);
        }
        Ok((a, f))
    }

    pub fn solve(&self, mu: &[f64]) -> Result<RomSolution> {
        self.solve_truncated(mu, self.rank())
    }

    pub fn solve_truncated(&self, mu: &[f64], r: usize) -> Result<RomSolution> {
        let (a, f) = self.assemble(mu, r)?;
        Ok(RomSolution {
            mu: mu.to_vec(),
            coeffs: solve_dense(a.as_ref(), &f, mu)?,
        })
    }
}

/// Assembles the stabilized full operator at `μ`, projects it and solves.
/// Cost per parameter is linear in the number of full-order dofs.
pub fn solve_rom_nonaffine(problem: &AdvDiffProblem, phi: MatRef<'_, f64>, mu: &[f64]) -> Result<RomSolution> {
    if phi.nrows() != problem.n() {
        return Err(Error::Dimension("basis does not match the full-order dofs".into()));
    }
    let (a, f) = problem.assemble(mu)?;
    let ar = a.project(phi);
    let fr = phi.transpose() * Col::from_fn(f.len(), |i| f[i]);
    Ok(RomSolution {
        mu: mu.to_vec(),
        coeffs: solve_dense(ar.as_ref(), &fr, mu)?,
    })
}

/// `Φ b`.
pub fn reconstruct(phi: MatRef<'_, f64>, coeffs: &[f64]) -> Result<Vec<f64>> {
    if phi.ncols() != coeffs.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for a rank-{} basis",
            coeffs.len(),
            phi.ncols()
        )));
    }
    let b = Col::from_fn(coeffs.len(), |i| coeffs[i]);
    Ok((phi * &b).iter().copied().collect())
}
