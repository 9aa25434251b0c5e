//! Affinely parametrized linear systems `A(μ) = Σ θ_q(μ) A_q`, `f(μ) = Σ θ_q(μ) f_q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DofMap, SparseOp};

/// Scalar coefficient rule of one affine term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Theta {
    One,
    /// The parameter component with this 0-based index.
    Param(usize),
}

impl Theta {
    pub fn eval(self, mu: &[f64]) -> f64 {
        match self {
            Theta::One => 1.0,
            Theta::Param(i) => mu[i],
        }
    }
}

#[derive(Debug, Clone)]
pub struct AffineTerm<T> {
    pub tag: String,
    pub theta: Theta,
    pub value: T,
}

#[derive(Debug, Clone)]
pub struct AffineSystem {
    pub dofs: DofMap,
    pub lhs: Vec<AffineTerm<SparseOp>>,
    pub rhs: Vec<AffineTerm<Vec<f64>>>,
    pub param_dim: usize,
}

/// Full-order nodal solution at one parameter.
#[derive(Debug, Clone)]
pub struct FomSolution {
    pub mu: Vec<f64>,
    /// Values on the free dofs.
    pub free: Vec<f64>,
    /// Values on all mesh nodes, Dirichlet nodes included.
    pub nodal: Vec<f64>,
}

impl AffineSystem {
    pub fn new(
        dofs: DofMap,
        lhs: Vec<AffineTerm<SparseOp>>,
        rhs: Vec<AffineTerm<Vec<f64>>>,
        param_dim: usize,
    ) -> Result<Self> {
        let n = dofs.num_free();
        let mut tags: Vec<&str> = lhs.iter().map(|t| t.tag.as_str()).collect();
        tags.extend(rhs.iter().map(|t| t.tag.as_str()));
        let total = tags.len();
        tags.sort_unstable();
        tags.dedup();
        if tags.len() != total {
            return Err(Error::Assembly("affine term tags must be unique".into()));
        }
        if lhs.iter().any(|t| t.value.n() != n) || rhs.iter().any(|t| t.value.len() != n) {
            return Err(Error::Dimension(format!("affine terms must all have dimension {n}")));
        }
        for th in lhs.iter().map(|t| t.theta).chain(rhs.iter().map(|t| t.theta)) {
            if let Theta::Param(i) = th {
                if i >= param_dim {
                    return Err(Error::Dimension(format!(
                        "theta refers to parameter {i} of a {param_dim}-dimensional space"
                    )));
                }
            }
        }
        Ok(AffineSystem {
            dofs,
            lhs,
            rhs,
            param_dim,
        })
    }

    pub fn n(&self) -> usize {
        self.dofs.num_free()
    }

    pub fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.param_dim {
            return Err(Error::Dimension(format!(
                "parameter has {} components, expected {}",
                mu.len(),
                self.param_dim
            )));
        }
        Ok(())
    }

    pub fn theta_lhs(&self, mu: &[f64]) -> Vec<f64> {
        self.lhs.iter().map(|t| t.theta.eval(mu)).collect()
    }

    pub fn theta_rhs(&self, mu: &[f64]) -> Vec<f64> {
        self.rhs.iter().map(|t| t.theta.eval(mu)).collect()
    }

    pub fn operator(&self, mu: &[f64]) -> Result<SparseOp> {
        self.check_mu(mu)?;
        let th = self.theta_lhs(mu);
        let terms: Vec<(f64, &SparseOp)> = th.iter().copied().zip(self.lhs.iter().map(|t| &t.value)).collect();
        SparseOp::combine(&terms)
    }

    pub fn load(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_mu(mu)?;
        let mut f = vec![0.0; self.n()];
        for (term, th) in self.rhs.iter().zip(self.theta_rhs(mu)) {
            for (fi, vi) in f.iter_mut().zip(&term.value) {
                *fi += th * vi;
            }
        }
        Ok(f)
    }

    pub fn solve(&self, mu: &[f64]) -> Result<FomSolution> {
        let a = self.operator(mu)?;
        let f = self.load(mu)?;
        let free = if f.iter().all(|&v| v == 0.0) {
            vec![0.0; self.n()]
        } else {
            a.solve(&f, mu)?
        };
        let nodal = self.dofs.expand(&free, 0.0);
        Ok(FomSolution {
            mu: mu.to_vec(),
            free,
            nodal,
        })
    }
}
