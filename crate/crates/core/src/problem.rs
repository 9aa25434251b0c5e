//! Uniform interface over the benchmark problems used by the samplers.

use faer::{Mat, MatRef};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heat::HeatProblem;
use crate::linalg::relative_error;
use crate::rom::{project_affine, reconstruct, solve_rom_nonaffine, ReducedAffineSystem};
use crate::supg::{AdvDiffProblem, NUM_BLOCKS};

/// A full-order discretization whose solutions live on the free dofs.
pub trait FullOrderModel: Send + Sync {
    fn ndof(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn solve(&self, mu: &[f64]) -> Result<Vec<f64>>;
    /// Galerkin reduced model on the columns of `phi`.
    fn reduced<'a>(&'a self, phi: MatRef<'_, f64>) -> Result<Box<dyn ReducedModel + 'a>>;
}

pub trait ReducedModel: Send + Sync {
    fn rank(&self) -> usize;
    fn solve(&self, mu: &[f64]) -> Result<Vec<f64>>;
}

impl FullOrderModel for HeatProblem {
    fn ndof(&self) -> usize {
        self.system.n()
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn solve(&self, mu: &[f64]) -> Result<Vec<f64>> {
        Ok(self.system.solve(mu)?.free)
    }

    fn reduced<'a>(&'a self, phi: MatRef<'_, f64>) -> Result<Box<dyn ReducedModel + 'a>> {
        Ok(Box::new(project_affine(&self.system, phi)?))
    }
}

impl ReducedModel for ReducedAffineSystem {
    fn rank(&self) -> usize {
        ReducedAffineSystem::rank(self)
    }

    fn solve(&self, mu: &[f64]) -> Result<Vec<f64>> {
        Ok(ReducedAffineSystem::solve(self, mu)?.coeffs)
    }
}

struct NonAffineRom<'a> {
    problem: &'a AdvDiffProblem,
    phi: Mat<f64>,
}

impl ReducedModel for NonAffineRom<'_> {
    fn rank(&self) -> usize {
        self.phi.ncols()
    }

    fn solve(&self, mu: &[f64]) -> Result<Vec<f64>> {
        Ok(solve_rom_nonaffine(self.problem, self.phi.as_ref(), mu)?.coeffs)
    }
}

impl FullOrderModel for AdvDiffProblem {
    fn ndof(&self) -> usize {
        self.n()
    }

    fn param_dim(&self) -> usize {
        NUM_BLOCKS
    }

    fn solve(&self, mu: &[f64]) -> Result<Vec<f64>> {
        AdvDiffProblem::solve(self, mu)
    }

    fn reduced<'a>(&'a self, phi: MatRef<'_, f64>) -> Result<Box<dyn ReducedModel + 'a>> {
        if phi.nrows() != self.n() {
            return Err(Error::Dimension("basis does not match the full-order dofs".into()));
        }
        Ok(Box::new(NonAffineRom {
            problem: self,
            phi: phi.to_owned(),
        }))
    }
}

fn annotate(e: Error, index: usize) -> Error {
    match e {
        Error::Solver { mu, msg } => Error::Solver {
            mu,
            msg: format!("{msg} (parameter #{index})"),
        },
        other => other,
    }
}

/// Full-order solves at every parameter, in parallel, results in input order.
pub fn solve_all(model: &dyn FullOrderModel, mus: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    mus.par_iter()
        .enumerate()
        .map(|(i, mu)| model.solve(mu).map_err(|e| annotate(e, i)))
        .collect()
}

/// Reduced solves at every parameter, in parallel, results in input order.
pub fn reduced_solve_all(rom: &dyn ReducedModel, mus: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    mus.par_iter()
        .enumerate()
        .map(|(i, mu)| rom.solve(mu).map_err(|e| annotate(e, i)))
        .collect()
}

/// Relative errors of the reduced solutions `Φ b(μ)` against reference snapshots.
pub fn reduced_errors(
    rom: &dyn ReducedModel,
    phi: MatRef<'_, f64>,
    mus: &[Vec<f64>],
    snapshots: &[Vec<f64>],
) -> Result<Vec<Option<f64>>> {
    if mus.len() != snapshots.len() {
        return Err(Error::Dimension(format!(
            "{} snapshots for {} parameters",
            snapshots.len(),
            mus.len()
        )));
    }
    mus.par_iter()
        .zip(snapshots)
        .enumerate()
        .map(|(i, (mu, hf))| {
            let u = if phi.ncols() == 0 {
                vec![0.0; hf.len()]
            } else {
                reconstruct(phi, &rom.solve(mu).map_err(|e| annotate(e, i))?)?
            };
            Ok(relative_error(hf, &u))
        })
        .collect()
}
