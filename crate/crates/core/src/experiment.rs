//! Config-driven experiments: problem construction, method dispatch, trials
//! and artifact output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::affine::AffineSystem;
use crate::config::{Method, ProblemKind, RunConfig};
use crate::deim::{deim_select, DeimVariant};
use crate::error::{Error, Result};
use crate::greedy::{greedy_loop, GreedyDiagnostics, GreedyReport};
use crate::heat::HeatProblem;
use crate::linalg::{columns_to_mat, projection_error, rss, thin_svd};
use crate::mf::{MfConfig, MfInputs, MfReport, MfRun, Sketch, Status};
use crate::params::{ParameterGrid, Role};
use crate::problem::{reduced_errors, solve_all, FullOrderModel};
use crate::report::{
    write_comparison, write_comparison_points, write_convergence, write_points, write_ranks, write_singular_values,
    ConvergenceRow, PointRow, RankRow,
};
use crate::supg::AdvDiffProblem;

/// Exit code for configuration and input errors.
pub const EXIT_CONFIG: i32 = 4;
/// Exit code for numerical or I/O failures during a run.
pub const EXIT_FAILURE: i32 = 1;

pub const VALIDATION_CACHE: &str = "validation_snapshots.json";

pub enum Problem {
    Heat(HeatProblem),
    AdvDiff(AdvDiffProblem),
}

impl Problem {
    pub fn build(config: &RunConfig, cells: usize) -> Result<Self> {
        Ok(match config.problem {
            ProblemKind::Heat2d => Problem::Heat(HeatProblem::new(cells, cells, config.mesh_spec().block_side)?),
            ProblemKind::Advdiff9d => Problem::AdvDiff(AdvDiffProblem::new(cells, cells, &config.flow)?),
        })
    }

    pub fn model(&self) -> &dyn FullOrderModel {
        match self {
            Problem::Heat(p) => p,
            Problem::AdvDiff(p) => p,
        }
    }

    pub fn affine(&self) -> Option<&AffineSystem> {
        match self {
            Problem::Heat(p) => Some(&p.system),
            Problem::AdvDiff(_) => None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        match self {
            Problem::Heat(p) => p.mesh.num_nodes(),
            Problem::AdvDiff(p) => p.mesh.num_nodes(),
        }
    }
}

/// Problems, parameter sets and snapshot caches of one configuration.
pub struct Setup {
    pub config: RunConfig,
    pub grid: ParameterGrid,
    pub train: Vec<Vec<f64>>,
    pub val: Vec<Vec<f64>>,
    pub fine: Problem,
    pub coarse: Option<Problem>,
    pub val_snapshots: Option<Vec<Vec<f64>>>,
    pub train_snapshots: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCache {
    pub problem: ProblemKind,
    pub fine_cells: usize,
    pub params: Vec<Vec<f64>>,
    pub snapshots: Vec<Vec<f64>>,
}

impl Setup {
    /// Builds meshes and parameter sets; solves nothing.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let sets = config.parameter_sets()?;
        let mesh = config.mesh_spec();
        let fine = Problem::build(&config, mesh.fine)?;
        let coarse = match (config.method, config.mf.sketch) {
            (Method::Mf, Sketch::Coarse) => Some(Problem::build(&config, mesh.coarse)?),
            _ => None,
        };
        Ok(Setup {
            grid: sets.grid,
            train: sets.train,
            val: sets.val,
            fine,
            coarse,
            val_snapshots: None,
            train_snapshots: None,
            config,
        })
    }

    fn needs_train_snapshots(&self) -> bool {
        self.config.diagnostics.global || self.config.method == Method::PodDeim
    }

    /// Solves the full-order model where the configured diagnostics need it.
    pub fn prepare(&mut self) -> Result<()> {
        if self.config.diagnostics.validation && !self.val.is_empty() && self.val_snapshots.is_none() {
            self.val_snapshots = Some(solve_all(self.fine.model(), &self.val)?);
        }
        if self.needs_train_snapshots() && self.train_snapshots.is_none() {
            self.train_snapshots = Some(solve_all(self.fine.model(), &self.train)?);
        }
        Ok(())
    }

    pub fn validation_cache(&self) -> Result<ValidationCache> {
        let snapshots = match &self.val_snapshots {
            Some(s) => s.clone(),
            None => solve_all(self.fine.model(), &self.val)?,
        };
        Ok(ValidationCache {
            problem: self.config.problem,
            fine_cells: self.config.mesh_spec().fine,
            params: self.val.clone(),
            snapshots,
        })
    }

    /// Uses a cache written by `precompute-validation` when it matches this setup.
    pub fn load_validation_cache(&mut self, path: &Path) -> Result<bool> {
        if !path.exists() {
            return Ok(false);
        }
        let cache: ValidationCache = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
        let ndof = self.fine.model().ndof();
        let ok = cache.problem == self.config.problem
            && cache.fine_cells == self.config.mesh_spec().fine
            && cache.params == self.val
            && cache.snapshots.iter().all(|s| s.len() == ndof);
        if ok {
            self.val_snapshots = Some(cache.snapshots);
        } else {
            log::warn!("{} does not match this configuration; ignored", path.display());
        }
        Ok(ok)
    }

    pub fn mf_inputs(&self) -> MfInputs<'_> {
        MfInputs {
            fine: self.fine.model(),
            coarse: self.coarse.as_ref().map(|c| c.model()),
            train: &self.train,
            val: &self.val,
            val_snapshots: self.val_snapshots.clone(),
            train_snapshots: self.train_snapshots.clone(),
        }
    }

    pub fn mf_config(&self) -> MfConfig {
        MfConfig {
            timings: self.config.diagnostics.timings && self.config.mf.timings,
            ..self.config.mf.clone()
        }
    }

    /// Position of training point `i` in the generated grid.
    pub fn grid_position(&self, i: usize) -> usize {
        self.grid.indices(Role::Train)[i]
    }
}

/// POD of every training snapshot followed by DEIM on its parametric modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodDeimReport {
    pub status: Status,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub selected: Vec<usize>,
    pub rows: Vec<RankRow>,
}

/// POD reference of rank `rank`, or of the smallest rank whose training
/// projection error is below `tol` when `rank` is `None`.
pub fn pod_deim_reference(
    model: &dyn FullOrderModel,
    train: &[Vec<f64>],
    train_snapshots: &[Vec<f64>],
    val: &[Vec<f64>],
    val_snapshots: Option<&[Vec<f64>]>,
    rank: Option<usize>,
    tol: f64,
    rank_tol: f64,
) -> Result<PodDeimReport> {
    let s = columns_to_mat(train_snapshots, model.ndof());
    let svd = thin_svd(s.as_ref())?;
    let numerical = svd.rank(rank_tol);
    let max_rank = rank.unwrap_or(numerical).min(numerical);
    let mut rows = Vec::new();
    let mut status = if rank.is_some() { Status::Converged } else { Status::MaxIter };
    for k in 1..=max_rank {
        let phi = svd.u.get(.., ..k);
        let rom = model.reduced(phi)?;
        let train_errs = reduced_errors(rom.as_ref(), phi, train, train_snapshots)?;
        let eps_val = match val_snapshots {
            Some(vs) if !val.is_empty() => {
                Some(reduced_errors(rom.as_ref(), phi, val, vs)?.into_iter().flatten().fold(0.0, f64::max))
            }
            _ => None,
        };
        let eps_pod = projection_error(s.as_ref(), phi);
        rows.push(RankRow {
            rank: k,
            n_points: k,
            eps_train: Some(train_errs.iter().flatten().fold(0.0, |a: f64, &b| a.max(b))),
            eps_val,
            eps_rom: Some(rss(train_errs)),
            eps_pod: Some(eps_pod),
            ..Default::default()
        });
        if rank.is_none() && eps_pod < tol {
            status = Status::Converged;
            break;
        }
    }
    let r = rows.len();
    let selected = deim_select(svd.v.get(.., ..r), r, DeimVariant::SelectedRows)?;
    Ok(PodDeimReport {
        status,
        rank: r,
        singular_values: svd.s,
        selected,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodReport {
    Mf(MfReport),
    Greedy(GreedyReport),
    PodDeim(PodDeimReport),
}

impl MethodReport {
    pub fn status(&self) -> Status {
        match self {
            MethodReport::Mf(r) => r.status,
            MethodReport::Greedy(r) => r.status,
            MethodReport::PodDeim(r) => r.status,
        }
    }

    pub fn convergence(&self) -> Vec<ConvergenceRow> {
        match self {
            MethodReport::Mf(r) => r
                .iterations
                .iter()
                .map(|it| ConvergenceRow {
                    iteration: it.iteration,
                    n_points: it.n_points,
                    eps_train: it.eps_train,
                    eps_val: it.eps_val,
                    seconds: it.seconds,
                })
                .collect(),
            MethodReport::Greedy(r) => r
                .iterations
                .iter()
                .map(|it| ConvergenceRow {
                    iteration: it.iteration,
                    n_points: it.n_points,
                    eps_train: it.max_indicator,
                    eps_val: it.eps_val,
                    seconds: it.seconds,
                })
                .collect(),
            MethodReport::PodDeim(r) => r
                .rows
                .iter()
                .map(|row| ConvergenceRow {
                    iteration: row.rank,
                    n_points: row.n_points,
                    eps_train: row.eps_train.unwrap_or(f64::NAN),
                    eps_val: row.eps_val,
                    seconds: 0.0,
                })
                .collect(),
        }
    }

    pub fn ranks(&self) -> Vec<RankRow> {
        match self {
            MethodReport::Mf(r) => r
                .iterations
                .iter()
                .map(|it| RankRow {
                    rank: it.rank,
                    n_points: it.n_points,
                    eps_train: Some(it.eps_train),
                    eps_val: it.eps_val,
                    eps_rom: it.eps_rom,
                    eps_pod: it.eps_pod,
                    bound: None,
                    seconds: Some(it.seconds),
                })
                .collect(),
            MethodReport::Greedy(r) => r
                .iterations
                .iter()
                .map(|it| RankRow {
                    rank: it.rank,
                    n_points: it.n_points,
                    eps_train: None,
                    eps_val: it.eps_val,
                    eps_rom: it.eps_rom,
                    eps_pod: it.eps_pod,
                    bound: Some(it.max_indicator),
                    seconds: Some(it.seconds),
                })
                .collect(),
            MethodReport::PodDeim(r) => r.rows.clone(),
        }
    }

    pub fn points(&self) -> Vec<PointRow> {
        match self {
            MethodReport::Mf(r) => r
                .selected
                .iter()
                .zip(&r.selected_iteration)
                .map(|(&train_index, &iteration)| PointRow { iteration, train_index })
                .collect(),
            MethodReport::Greedy(r) => r
                .selected
                .iter()
                .enumerate()
                .map(|(k, &train_index)| PointRow {
                    iteration: k + 1,
                    train_index,
                })
                .collect(),
            MethodReport::PodDeim(r) => r
                .selected
                .iter()
                .map(|&train_index| PointRow {
                    iteration: 1,
                    train_index,
                })
                .collect(),
        }
    }

    pub fn spectra(&self) -> Vec<(usize, Vec<f64>)> {
        match self {
            MethodReport::Mf(r) => r
                .iterations
                .iter()
                .map(|it| (it.iteration, it.singular_values.clone()))
                .collect(),
            MethodReport::Greedy(_) => Vec::new(),
            MethodReport::PodDeim(r) => vec![(0, r.singular_values.clone())],
        }
    }
}

/// Runs the configured method; call [`Setup::prepare`] first for diagnostics.
pub fn run_method(setup: &Setup) -> Result<MethodReport> {
    let cfg = &setup.config;
    match cfg.method {
        Method::Mf => Ok(MethodReport::Mf(MfRun::new(setup.mf_inputs(), setup.mf_config())?.run()?)),
        Method::Greedy => {
            let system = setup
                .fine
                .affine()
                .ok_or_else(|| Error::Config("greedy needs an affine problem".into()))?;
            let gcfg = crate::greedy::GreedyConfig {
                timings: cfg.diagnostics.timings && cfg.greedy.timings,
                ..cfg.greedy.clone()
            };
            let diag = GreedyDiagnostics {
                train_snapshots: setup.train_snapshots.as_deref(),
                val: &setup.val,
                val_snapshots: setup.val_snapshots.as_deref(),
            };
            Ok(MethodReport::Greedy(greedy_loop(system, &setup.train, &gcfg, diag)?))
        }
        Method::PodDeim => {
            let ts = setup
                .train_snapshots
                .as_deref()
                .ok_or_else(|| Error::Missing("training snapshots were not computed".into()))?;
            Ok(MethodReport::PodDeim(pod_deim_reference(
                setup.fine.model(),
                &setup.train,
                ts,
                &setup.val,
                setup.val_snapshots.as_deref(),
                cfg.reference.rank,
                cfg.mf.tol,
                cfg.mf.rank_tol,
            )?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub status: Status,
    pub exit_code: i32,
    pub n_train: usize,
    pub n_val: usize,
    pub fine_nodes: usize,
    pub fine_dofs: usize,
    pub report: MethodReport,
}

pub fn summarize(setup: &Setup, report: MethodReport) -> RunSummary {
    RunSummary {
        config: setup.config.clone(),
        status: report.status(),
        exit_code: report.status().exit_code(),
        n_train: setup.train.len(),
        n_val: setup.val.len(),
        fine_nodes: setup.fine.num_nodes(),
        fine_dofs: setup.fine.model().ndof(),
        report,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_params(setup: &Setup, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    setup.grid.write_csv(create(dir, "params.csv")?)
}

/// Writes `convergence.csv`, `points.csv`, `ranks.csv`, `singular_values.csv`,
/// `params.csv` and `report.json`.
pub fn write_artifacts(setup: &Setup, summary: &RunSummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let r = &summary.report;
    let dim = setup.config.problem.param_dim();
    write_convergence(create(dir, "convergence.csv")?, &r.convergence())?;
    write_points(create(dir, "points.csv")?, &r.points(), &setup.train, dim)?;
    write_ranks(create(dir, "ranks.csv")?, &r.ranks())?;
    write_singular_values(create(dir, "singular_values.csv")?, &r.spectra())?;
    write_params(setup, dir)?;
    serde_json::to_writer_pretty(create(dir, "report.json")?, summary)?;
    Ok(())
}

/// Runs two configurations and tabulates them side by side per rank.
pub fn compare(a: &Setup, ra: &MethodReport, b: &Setup, rb: &MethodReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let la = label(&a.config, "a");
    let lb = label(&b.config, "b");
    let (la, lb) = if la == lb { (format!("{la}_a"), format!("{lb}_b")) } else { (la, lb) };
    write_comparison(create(dir, "comparison.csv")?, [&la, &lb], &ra.ranks(), &rb.ranks())?;
    if a.train == b.train {
        let (pa, pb) = (ra.points(), rb.points());
        write_comparison_points(
            create(dir, "comparison_points.csv")?,
            &[(&la, &pa), (&lb, &pb)],
            &a.train,
            a.config.problem.param_dim(),
        )?;
    } else {
        log::warn!("training sets differ; selected points are written per run only");
        for (l, s, r) in [(&la, a, ra), (&lb, b, rb)] {
            write_points(
                create(dir, &format!("points_{l}.csv"))?,
                &r.points(),
                &s.train,
                s.config.problem.param_dim(),
            )?;
        }
    }
    Ok(())
}

fn label(cfg: &RunConfig, fallback: &str) -> String {
    let base = cfg.name.clone().unwrap_or_else(|| {
        match cfg.method {
            Method::Mf => "mf",
            Method::Greedy => "greedy",
            Method::PodDeim => "pod_deim",
        }
        .to_string()
    });
    if base.is_empty() {
        fallback.to_string()
    } else {
        base.replace(',', "_")
    }
}

/// Per-iteration statistics over trials that reached the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStat {
    pub iteration: usize,
    pub count: usize,
    pub mean_eps_train: f64,
    pub std_eps_train: f64,
    pub mean_eps_val: Option<f64>,
    pub std_eps_val: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub seeds: Vec<u64>,
    pub statuses: Vec<Status>,
    pub selected: Vec<Vec<usize>>,
    pub stats: Vec<TrialStat>,
    /// `(train_index, number of trials selecting it)`, most frequent first.
    pub frequency: Vec<(usize, usize)>,
    /// Largest number of one trial's points matched in every other trial
    /// within one grid cell per axis.
    pub stable_locations: usize,
    pub reports: Vec<MfReport>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Points of one trial matched by a point of every other trial with grid
/// multi-indices differing by at most `cells` per axis; the maximum over the
/// choice of reference trial. Without a tensor grid only exact matches count.
pub fn stable_locations(selected: &[Vec<usize>], grid_index: impl Fn(usize) -> Option<Vec<usize>>, cells: usize) -> usize {
    let close = |a: usize, b: usize| match (grid_index(a), grid_index(b)) {
        (Some(x), Some(y)) => x.iter().zip(&y).all(|(p, q)| p.abs_diff(*q) <= cells),
        _ => a == b,
    };
    (0..selected.len())
        .map(|r| {
            selected[r]
                .iter()
                .filter(|&&x| {
                    selected
                        .iter()
                        .enumerate()
                        .all(|(t, pts)| t == r || pts.iter().any(|&y| close(x, y)))
                })
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// Repeats the configured multi-fidelity run over consecutive seeds.
pub fn run_trials(setup: &Setup, n_trials: usize) -> Result<TrialsReport> {
    if n_trials < 2 {
        return Err(Error::Config(format!("trials needs at least 2 runs, got {n_trials}")));
    }
    if setup.config.method != Method::Mf {
        return Err(Error::Config("trials needs method = \"mf\"".into()));
    }
    if !matches!(setup.config.mf.sketch, Sketch::Random { .. }) {
        return Err(Error::Config("trials needs the random sketch".into()));
    }
    let base = setup.mf_config();
    let seeds: Vec<u64> = (0..n_trials as u64).map(|k| base.seed + k).collect();
    let mut reports = Vec::with_capacity(n_trials);
    for &seed in &seeds {
        let cfg = MfConfig { seed, ..base.clone() };
        reports.push(MfRun::new(setup.mf_inputs(), cfg)?.run()?);
    }
    let max_it = reports.iter().map(|r| r.iterations.len()).max().unwrap_or(0);
    let stats = (0..max_it)
        .map(|k| {
            let its: Vec<_> = reports.iter().filter_map(|r| r.iterations.get(k)).collect();
            let tr: Vec<f64> = its.iter().map(|it| it.eps_train).collect();
            let va: Vec<f64> = its.iter().filter_map(|it| it.eps_val).collect();
            let (mt, st) = mean_std(&tr);
            let (mv, sv) = if va.len() == its.len() && !va.is_empty() {
                let (m, s) = mean_std(&va);
                (Some(m), Some(s))
            } else {
                (None, None)
            };
            TrialStat {
                iteration: k + 1,
                count: its.len(),
                mean_eps_train: mt,
                std_eps_train: st,
                mean_eps_val: mv,
                std_eps_val: sv,
            }
        })
        .collect();
    let selected: Vec<Vec<usize>> = reports.iter().map(|r| r.selected.clone()).collect();
    let mut counts = std::collections::BTreeMap::new();
    for s in &selected {
        for &i in s {
            *counts.entry(i).or_insert(0usize) += 1;
        }
    }
    let mut frequency: Vec<(usize, usize)> = counts.into_iter().collect();
    frequency.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let stable = stable_locations(&selected, |i| setup.grid.grid_index(setup.grid_position(i)), 1);
    Ok(TrialsReport {
        seeds,
        statuses: reports.iter().map(|r| r.status).collect(),
        selected,
        stats,
        frequency,
        stable_locations: stable,
        reports,
    })
}

/// Writes `trials.csv`, `selection_frequency.csv`, `trial_points.csv` and `trials.json`.
pub fn write_trials(setup: &Setup, rep: &TrialsReport, dir: &Path) -> Result<()> {
    use crate::report::{fmt_f64, fmt_opt};
    std::fs::create_dir_all(dir)?;
    let dim = setup.config.problem.param_dim();
    let mut wr = csv::Writer::from_writer(create(dir, "trials.csv")?);
    wr.write_record([
        "iteration",
        "count",
        "mean_eps_train",
        "std_eps_train",
        "mean_eps_val",
        "std_eps_val",
    ])?;
    for s in &rep.stats {
        wr.write_record([
            s.iteration.to_string(),
            s.count.to_string(),
            fmt_f64(s.mean_eps_train),
            fmt_f64(s.std_eps_train),
            fmt_opt(s.mean_eps_val),
            fmt_opt(s.std_eps_val),
        ])?;
    }
    wr.flush()?;
    let mu_header = || (1..=dim).map(|k| format!("mu_{k}"));
    let mut wr = csv::Writer::from_writer(create(dir, "selection_frequency.csv")?);
    let mut header = vec!["train_index".to_string(), "count".to_string()];
    header.extend(mu_header());
    wr.write_record(&header)?;
    for &(i, c) in &rep.frequency {
        let mut rec = vec![i.to_string(), c.to_string()];
        rec.extend(setup.train[i].iter().map(|&v| fmt_f64(v)));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    let mut wr = csv::Writer::from_writer(create(dir, "trial_points.csv")?);
    let mut header = vec!["seed".to_string(), "iteration".to_string(), "train_index".to_string()];
    header.extend(mu_header());
    wr.write_record(&header)?;
    for (seed, r) in rep.seeds.iter().zip(&rep.reports) {
        for (&i, &it) in r.selected.iter().zip(&r.selected_iteration) {
            let mut rec = vec![seed.to_string(), it.to_string(), i.to_string()];
            rec.extend(setup.train[i].iter().map(|&v| fmt_f64(v)));
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    write_params(setup, dir)?;
    serde_json::to_writer_pretty(create(dir, "trials.json")?, rep)?;
    Ok(())
}
