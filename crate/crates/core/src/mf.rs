//! Iterative multi-fidelity snapshot selection.
//!
//! Each iteration extracts parametric modes from the current low-fidelity
//! data, picks new training parameters with DEIM, solves the full-order model
//! there, enriches the basis by Gram-Schmidt and replaces the low-fidelity
//! data with the reduced coefficients over the whole training set.
//!
//! The training error of an iteration is measured at the newly selected
//! parameters with the reduced model as it stood *before* their snapshots were
//! added. After enrichment the Galerkin model reproduces those snapshots up to
//! round-off, so the post-enrichment error is kept only as a consistency check.

use std::collections::BTreeMap;
use std::time::Instant;

use faer::Mat;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::deim::{DeimEvent, DeimState, DeimVariant};
use crate::error::{Error, Result};
use crate::linalg::{
    columns_to_mat, projection_error, relative_error, rss, thin_svd, ReducedBasis, SnapshotMatrix, Space, GS_TOL,
    RANK_TOL,
};
use crate::params::rng;
use crate::problem::{reduced_solve_all, solve_all, FullOrderModel};
use crate::rom::reconstruct;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sketch {
    /// Full-order model on a coarser mesh evaluated over the training set.
    Coarse,
    /// Reduced model built from `size` randomly drawn full-order snapshots.
    Random { size: usize },
}

/// Which parametric modes new modes are orthogonalized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryPolicy {
    /// Modes of the previous iteration only.
    #[default]
    Previous,
    /// Every mode returned so far.
    Accumulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub points_per_iter: usize,
    pub sketch: Sketch,
    pub seed: u64,
    pub eps_g: f64,
    pub rank_tol: f64,
    pub require_val_convergence: bool,
    pub history: HistoryPolicy,
    pub deim_variant: DeimVariant,
    /// Rotate the basis onto the left singular vectors of the coefficients.
    pub rotate_basis: bool,
    /// Record wall-clock seconds per iteration (zero otherwise).
    pub timings: bool,
}

impl Default for MfConfig {
    fn default() -> Self {
        MfConfig {
            tol: 1e-6,
            max_iter: 200,
            points_per_iter: 1,
            sketch: Sketch::Random { size: 2 },
            seed: 0,
            eps_g: GS_TOL,
            rank_tol: RANK_TOL,
            require_val_convergence: false,
            history: HistoryPolicy::Previous,
            deim_variant: DeimVariant::SelectedRows,
            rotate_basis: true,
            timings: true,
        }
    }
}

impl MfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str| Err(Error::Config(format!("'{f}' must be positive")));
        if !(self.tol > 0.0) {
            return bad("tol");
        }
        if self.max_iter == 0 {
            return bad("max_iter");
        }
        if self.points_per_iter == 0 {
            return bad("points_per_iter");
        }
        if !(self.eps_g > 0.0) {
            return bad("eps_g");
        }
        if !(self.rank_tol > 0.0) {
            return bad("rank_tol");
        }
        if let Sketch::Random { size: 0 } = self.sketch {
            return bad("sketch.size");
        }
        Ok(())
    }
}

/// Problem data the loop runs on.
pub struct MfInputs<'a> {
    pub fine: &'a dyn FullOrderModel,
    /// Required for [`Sketch::Coarse`].
    pub coarse: Option<&'a dyn FullOrderModel>,
    pub train: &'a [Vec<f64>],
    pub val: &'a [Vec<f64>],
    /// Full-order snapshots at the validation parameters; `ε_val` is skipped without them.
    pub val_snapshots: Option<Vec<Vec<f64>>>,
    /// Full-order snapshots at every training parameter, for `ε_ROM` / `ε_POD` diagnostics.
    pub train_snapshots: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Stalled,
    MaxIter,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::Stalled => 2,
            Status::MaxIter => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total parameters sampled so far, initial sketch included.
    pub n_points: usize,
    pub rank: usize,
    pub new_points: Vec<usize>,
    /// New snapshots that enlarged the basis.
    pub accepted: usize,
    pub eps_train: f64,
    pub eps_val: Option<f64>,
    pub eps_rom: Option<f64>,
    pub eps_pod: Option<f64>,
    /// Max relative error at all sampled points after enrichment.
    pub post_enrichment_error: f64,
    /// `max |ΦᵀΦ − I|` after this iteration's enrichment.
    pub orthonormality_defect: f64,
    /// Spectrum of the low-fidelity data the points were selected from.
    pub singular_values: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfReport {
    pub status: Status,
    pub config: MfConfig,
    pub iterations: Vec<IterationRecord>,
    /// Every sampled training index in order, initial sketch first.
    pub selected: Vec<usize>,
    /// Iteration that sampled each entry of `selected` (0 for the initial sketch).
    pub selected_iteration: Vec<usize>,
    pub basis_rank: usize,
    pub deim_log: Vec<DeimEvent>,
}

impl MfReport {
    pub fn total_points(&self) -> usize {
        self.selected.len()
    }

    pub fn final_eps_train(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.eps_train)
    }
}

/// Low-fidelity data over the training set, one column per parameter.
#[derive(Debug, Clone)]
pub enum LofiModel {
    CoarseSnapshots(Mat<f64>),
    Coefficients(Mat<f64>),
}

impl LofiModel {
    pub fn matrix(&self) -> &Mat<f64> {
        match self {
            LofiModel::CoarseSnapshots(m) | LofiModel::Coefficients(m) => m,
        }
    }
}

pub struct MfRun<'a> {
    inputs: MfInputs<'a>,
    pub config: MfConfig,
    pub deim: DeimState,
    pub basis: ReducedBasis,
    pub lofi: LofiModel,
    /// Full-order snapshots at the sampled parameters.
    pub snapshots: BTreeMap<usize, Vec<f64>>,
    pub records: Vec<IterationRecord>,
    selected_iteration: Vec<usize>,
}

fn max_error(errs: impl IntoIterator<Item = Option<f64>>) -> f64 {
    errs.into_iter().flatten().fold(0.0, f64::max)
}

impl<'a> MfRun<'a> {
    /// Builds the initial sketch model.
    pub fn new(inputs: MfInputs<'a>, config: MfConfig) -> Result<Self> {
        config.validate()?;
        let n_train = inputs.train.len();
        if n_train == 0 {
            return Err(Error::Config("training set is empty".into()));
        }
        let check_len = |name: &str, s: &Option<Vec<Vec<f64>>>, n: usize| match s {
            Some(v) if v.len() != n => Err(Error::Dimension(format!("{name}: {} snapshots for {n} parameters", v.len()))),
            _ => Ok(()),
        };
        check_len("validation cache", &inputs.val_snapshots, inputs.val.len())?;
        check_len("training cache", &inputs.train_snapshots, n_train)?;

        let n = inputs.fine.ndof();
        let mut run = MfRun {
            deim: DeimState::new(n_train, config.deim_variant),
            basis: ReducedBasis::empty(n),
            lofi: LofiModel::Coefficients(Mat::zeros(0, n_train)),
            snapshots: BTreeMap::new(),
            records: Vec::new(),
            selected_iteration: Vec::new(),
            inputs,
            config,
        };
        match run.config.sketch {
            Sketch::Coarse => {
                let coarse = run
                    .inputs
                    .coarse
                    .ok_or_else(|| Error::Config("coarse sketch needs a coarse model".into()))?;
                let cols = solve_all(coarse, run.inputs.train)?;
                run.lofi = LofiModel::CoarseSnapshots(columns_to_mat(&cols, coarse.ndof()));
            }
            Sketch::Random { size } => {
                if size > n_train {
                    return Err(Error::Config(format!(
                        "sketch size {size} exceeds the {n_train} training parameters"
                    )));
                }
                let mut r = rng(run.config.seed);
                let idx: Vec<usize> = index::sample(&mut r, n_train, size).into_vec();
                run.deim.preselect(&idx)?;
                let _ = run.add_snapshots(&idx, 0)?;
                run.lofi = LofiModel::Coefficients(run.reduced_coefficients()?);
            }
        }
        Ok(run)
    }

    pub fn inputs(&self) -> &MfInputs<'a> {
        &self.inputs
    }

    /// Solves the full-order model at `idx` and enriches the basis.
    fn add_snapshots(&mut self, idx: &[usize], iteration: usize) -> Result<usize> {
        let mus: Vec<Vec<f64>> = idx.iter().map(|&i| self.inputs.train[i].clone()).collect();
        let cols = match &self.inputs.train_snapshots {
            Some(all) => idx.iter().map(|&i| all[i].clone()).collect(),
            None => solve_all(self.inputs.fine, &mus)?,
        };
        let cand = SnapshotMatrix::from_columns(&cols, idx.to_vec(), Space::Fine)?;
        let rep = self.basis.enrich(&cand, iteration, self.config.eps_g)?;
        if !rep.rejected.is_empty() {
            log::info!("iteration {iteration}: {} snapshot(s) rejected by Gram-Schmidt", rep.rejected.len());
        }
        for (&i, c) in idx.iter().zip(cols) {
            self.snapshots.insert(i, c);
            self.selected_iteration.push(iteration);
        }
        Ok(rep.accepted.len())
    }

    /// Reduced coefficients `B` over the training set for the current basis.
    fn reduced_coefficients(&self) -> Result<Mat<f64>> {
        let r = self.basis.rank();
        if r == 0 {
            return Ok(Mat::zeros(0, self.inputs.train.len()));
        }
        let rom = self.inputs.fine.reduced(self.basis.phi.as_ref())?;
        let cols = reduced_solve_all(rom.as_ref(), self.inputs.train)?;
        Ok(columns_to_mat(&cols, r))
    }

    fn coeff_column(b: &Mat<f64>, j: usize) -> Vec<f64> {
        b.col(j).iter().copied().collect()
    }

    /// Max relative error of the coefficient model `B` at the given training indices.
    fn error_at(&self, b: &Mat<f64>, idx: &[usize]) -> Result<f64> {
        let mut errs = Vec::with_capacity(idx.len());
        for &i in idx {
            let hf = &self.snapshots[&i];
            let rom = if b.nrows() == 0 {
                vec![0.0; hf.len()]
            } else {
                // enrichment only appends columns, so the leading block is the basis `b` refers to
                reconstruct(self.basis.phi.get(.., ..b.nrows()), &Self::coeff_column(b, i))?
            };
            errs.push(relative_error(hf, &rom));
        }
        Ok(max_error(errs))
    }

    /// `ε_val`, when validation snapshots are available.
    pub fn error_val(&self) -> Result<Option<f64>> {
        let Some(cache) = &self.inputs.val_snapshots else {
            return Ok(None);
        };
        if self.inputs.val.is_empty() {
            return Ok(None);
        }
        let r = self.basis.rank();
        let coeffs = if r == 0 {
            vec![Vec::new(); self.inputs.val.len()]
        } else {
            let rom = self.inputs.fine.reduced(self.basis.phi.as_ref())?;
            reduced_solve_all(rom.as_ref(), self.inputs.val)?
        };
        let mut errs = Vec::with_capacity(cache.len());
        for (hf, c) in cache.iter().zip(&coeffs) {
            let u = if r == 0 {
                vec![0.0; hf.len()]
            } else {
                reconstruct(self.basis.phi.as_ref(), c)?
            };
            errs.push(relative_error(hf, &u));
        }
        Ok(Some(max_error(errs)))
    }

    /// `(ε_ROM, ε_POD)` over the training set, when all training snapshots are available.
    pub fn error_global(&self, b: &Mat<f64>) -> Result<Option<(f64, f64)>> {
        let Some(all) = &self.inputs.train_snapshots else {
            return Ok(None);
        };
        let phi = self.basis.phi.get(.., ..b.nrows());
        let mut rom_errs = Vec::with_capacity(all.len());
        for (j, hf) in all.iter().enumerate() {
            let u = if b.nrows() == 0 {
                vec![0.0; hf.len()]
            } else {
                reconstruct(phi, &Self::coeff_column(b, j))?
            };
            rom_errs.push(relative_error(hf, &u));
        }
        let s = columns_to_mat(all, self.inputs.fine.ndof());
        Ok(Some((rss(rom_errs), projection_error(s.as_ref(), phi))))
    }

    /// Parametric modes of the low-fidelity data (truncated at numerical
    /// rank) and its singular values. In coefficient mode the basis is
    /// optionally rotated onto the left singular vectors of `B`.
    fn parametric_modes(&mut self) -> Result<(Mat<f64>, Vec<f64>)> {
        let m = self.lofi.matrix();
        if m.nrows() == 0 || m.norm_max() == 0.0 {
            return Ok((Mat::zeros(m.ncols(), 0), Vec::new()));
        }
        let svd = thin_svd(m.as_ref())?;
        let r = svd.rank(self.config.rank_tol);
        if let LofiModel::Coefficients(b) = &self.lofi {
            if self.config.rotate_basis && svd.u.nrows() == svd.u.ncols() {
                let phi = &self.basis.phi * &svd.u;
                let b_rot = svd.u.transpose() * b;
                self.basis.phi = phi;
                self.lofi = LofiModel::Coefficients(b_rot);
            }
        }
        Ok((svd.v.get(.., ..r).to_owned(), svd.s))
    }

    /// One pass of the loop; `None` means the loop can make no progress.
    pub fn step(&mut self) -> Result<Option<&IterationRecord>> {
        let start = Instant::now();
        let iteration = self.records.len() + 1;
        self.deim.iteration = iteration;

        let (modes, sv) = self.parametric_modes()?;
        let new_modes = match self.config.history {
            HistoryPolicy::Accumulate => self.deim.orthogonalize_against_history(modes.as_ref(), self.config.rank_tol)?,
            HistoryPolicy::Previous => {
                let mut out = self.deim.orthogonalize_against_history(modes.as_ref(), self.config.rank_tol)?;
                if out.ncols() == 0 && modes.ncols() > 0 {
                    // the previous iteration left the low-fidelity data unchanged; resume
                    // DEIM on the same modes instead of giving up
                    log::info!("iteration {iteration}: modes unchanged, reusing them");
                    self.deim.log.push(DeimEvent::Reused { iteration });
                    out = modes.clone();
                }
                self.deim.set_history(modes.clone());
                out
            }
        };
        if new_modes.ncols() == 0 {
            log::warn!("iteration {iteration}: no new parametric information");
            return Ok(None);
        }
        let p = self.config.points_per_iter.min(new_modes.ncols());
        let new_idx = self.deim.select(new_modes.as_ref(), p)?;
        if new_idx.is_empty() {
            log::warn!("iteration {iteration}: DEIM found no admissible new parameter");
            return Ok(None);
        }

        // the coefficient model evaluated before enrichment
        let b_before = match &self.lofi {
            LofiModel::Coefficients(b) => b.clone(),
            LofiModel::CoarseSnapshots(_) => Mat::zeros(0, self.inputs.train.len()),
        };
        let accepted = self.add_snapshots(&new_idx, iteration)?;
        let eps_train = self.error_at(&b_before, &new_idx)?;

        let b = self.reduced_coefficients()?;
        let all_sampled: Vec<usize> = self.snapshots.keys().copied().collect();
        let post = self.error_at(&b, &all_sampled)?;
        let eps_val = self.error_val()?;
        let global = self.error_global(&b)?;
        self.lofi = LofiModel::Coefficients(b);

        self.records.push(IterationRecord {
            iteration,
            n_points: self.deim.selected.len(),
            rank: self.basis.rank(),
            new_points: new_idx,
            accepted,
            eps_train,
            eps_val,
            eps_rom: global.map(|g| g.0),
            eps_pod: global.map(|g| g.1),
            post_enrichment_error: post,
            orthonormality_defect: self.basis.defect(),
            singular_values: sv,
            seconds: if self.config.timings {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        let rec = self.records.last().unwrap();
        log::info!(
            "iteration {iteration}: points {} rank {} eps_train {:.3e} eps_val {:?}",
            rec.n_points,
            rec.rank,
            rec.eps_train,
            rec.eps_val
        );
        Ok(Some(rec))
    }

    fn converged(&self, rec: &IterationRecord) -> bool {
        // points whose snapshots were already in the span carry no error information
        let tol = self.config.tol;
        rec.accepted > 0
            && rec.eps_train < tol && (!self.config.require_val_convergence || rec.eps_val.is_none_or(|v| v < tol))
    }

    pub fn run(mut self) -> Result<MfReport> {
        if self.config.require_val_convergence && self.inputs.val_snapshots.is_none() && !self.inputs.val.is_empty() {
            return Err(Error::Missing(
                "validation snapshots are required for --require-val-convergence; run precompute-validation".into(),
            ));
        }
        let mut status = Status::MaxIter;
        for _ in 0..self.config.max_iter {
            match self.step()? {
                None => {
                    status = Status::Stalled;
                    break;
                }
                Some(rec) => {
                    let rec = rec.clone();
                    if self.converged(&rec) {
                        status = Status::Converged;
                        break;
                    }
                }
            }
        }
        Ok(self.into_report(status))
    }

    pub fn into_report(self, status: Status) -> MfReport {
        MfReport {
            status,
            iterations: self.records,
            selected: self.deim.selected.clone(),
            selected_iteration: self.selected_iteration,
            basis_rank: self.basis.rank(),
            deim_log: self.deim.log,
            config: self.config,
        }
    }
}

/// Full-order snapshots at every parameter of `mus` (validation cache).
pub fn precompute_snapshots(model: &dyn FullOrderModel, mus: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    solve_all(model, mus)
}
