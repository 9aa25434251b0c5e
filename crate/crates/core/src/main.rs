use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfrom::config::{Method, RunConfig};
use mfrom::experiment::{
    compare, run_method, run_trials, summarize, write_artifacts, write_params, write_trials, Setup, EXIT_CONFIG,
    EXIT_FAILURE, VALIDATION_CACHE,
};
use mfrom::mf::Status;
use mfrom::Error;

#[derive(Parser)]
#[command(name = "mfrom", version, about = "Multi-fidelity snapshot selection for reduced-order models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured method and write its artifacts.
    Run(Common),
    /// Run two configurations and tabulate them per rank.
    Compare(Common),
    /// Repeat a random-sketch run over consecutive seeds.
    Trials {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        n_trials: usize,
    },
    /// Write the training and validation parameters.
    GenParams(Common),
    /// Solve the full-order model at the validation parameters and cache the snapshots.
    PrecomputeValidation(Common),
}

#[derive(Args)]
struct Common {
    /// TOML (or .json) configuration; `compare` takes it twice.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed of the random sketch.
    #[arg(long)]
    seed: Option<u64>,
    /// Stopping tolerance of the configured method.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    points_per_iter: Option<usize>,
    /// Validate the configuration and print the plan without solving.
    #[arg(long)]
    dry_run: bool,
    /// Also require the validation error below the tolerance to stop.
    #[arg(long)]
    require_val_convergence: bool,
}

impl Common {
    fn load(&self, path: &Path) -> mfrom::Result<RunConfig> {
        let mut cfg = RunConfig::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(s) = self.seed {
            cfg.mf.seed = s;
        }
        if let Some(t) = self.tol {
            match cfg.method {
                Method::Greedy => cfg.greedy.tol = t,
                Method::Mf | Method::PodDeim => cfg.mf.tol = t,
            }
        }
        if let Some(p) = self.points_per_iter {
            cfg.mf.points_per_iter = p;
        }
        if self.require_val_convergence {
            cfg.mf.require_val_convergence = true;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = Some(d.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn single(&self) -> mfrom::Result<RunConfig> {
        match self.config.as_slice() {
            [p] => self.load(p),
            _ => Err(Error::Config("expected exactly one --config".into())),
        }
    }
}

fn failure_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Missing(_) | Error::Domain(_) => EXIT_CONFIG as u8,
        _ => EXIT_FAILURE as u8,
    }
}

fn setup(cfg: RunConfig) -> mfrom::Result<Setup> {
    let dir = cfg.resolved_out_dir();
    let mut s = Setup::new(cfg)?;
    if s.config.diagnostics.validation && s.load_validation_cache(&dir.join(VALIDATION_CACHE))? {
        log::info!("using cached validation snapshots");
    }
    s.prepare()?;
    Ok(s)
}

fn run(common: &Common) -> mfrom::Result<u8> {
    let cfg = common.single()?;
    if common.dry_run {
        print!("{}", cfg.plan()?);
        return Ok(0);
    }
    let dir = cfg.resolved_out_dir();
    let s = setup(cfg)?;
    let report = run_method(&s)?;
    let summary = summarize(&s, report);
    write_artifacts(&s, &summary, &dir)?;
    let pts = summary.report.points().len();
    let last = summary.report.convergence().last().cloned();
    println!(
        "{:?}: {} points, {} iterations, eps_train {}, eps_val {} -> {}",
        summary.status,
        pts,
        summary.report.convergence().len(),
        last.as_ref().map_or("-".into(), |r| format!("{:.3e}", r.eps_train)),
        last.and_then(|r| r.eps_val).map_or("-".into(), |v| format!("{v:.3e}")),
        dir.display()
    );
    Ok(summary.status.exit_code() as u8)
}

fn run_compare(common: &Common) -> mfrom::Result<u8> {
    let [a, b] = common.config.as_slice() else {
        return Err(Error::Config("compare needs exactly two --config".into()));
    };
    let (ca, cb) = (common.load(a)?, common.load(b)?);
    if common.dry_run {
        print!("{}\n{}", ca.plan()?, cb.plan()?);
        return Ok(0);
    }
    let dir = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("out/compare"));
    let (sa, sb) = (setup(ca)?, setup(cb)?);
    let (ra, rb) = (run_method(&sa)?, run_method(&sb)?);
    compare(&sa, &ra, &sb, &rb, &dir)?;
    for (l, r) in [("a", &ra), ("b", &rb)] {
        println!("{l}: {:?}, {} points", r.status(), r.points().len());
    }
    println!("-> {}", dir.display());
    Ok([ra.status(), rb.status()]
        .into_iter()
        .find(|s| *s != Status::Converged)
        .map_or(0, |s| s.exit_code() as u8))
}

fn trials(common: &Common, n: usize) -> mfrom::Result<u8> {
    let cfg = common.single()?;
    if n < 2 {
        return Err(Error::Config(format!("--n-trials must be at least 2, got {n}")));
    }
    if common.dry_run {
        print!("{}trials       {n}\n", cfg.plan()?);
        return Ok(0);
    }
    let dir = cfg.resolved_out_dir();
    let s = setup(cfg)?;
    let rep = run_trials(&s, n)?;
    write_trials(&s, &rep, &dir)?;
    for (seed, r) in rep.seeds.iter().zip(&rep.reports) {
        println!("seed {seed}: {:?}, {} points", r.status, r.selected.len());
    }
    println!("stable locations: {} -> {}", rep.stable_locations, dir.display());
    Ok(rep
        .statuses
        .iter()
        .find(|s| **s != Status::Converged)
        .map_or(0, |s| s.exit_code() as u8))
}

fn gen_params(common: &Common) -> mfrom::Result<u8> {
    let cfg = common.single()?;
    let dir = cfg.resolved_out_dir();
    if common.dry_run {
        print!("{}", cfg.plan()?);
        return Ok(0);
    }
    let s = Setup::new(cfg)?;
    write_params(&s, &dir)?;
    println!("{} train, {} val -> {}", s.train.len(), s.val.len(), dir.join("params.csv").display());
    Ok(0)
}

fn precompute(common: &Common) -> mfrom::Result<u8> {
    let cfg = common.single()?;
    let dir = cfg.resolved_out_dir();
    if common.dry_run {
        print!("{}", cfg.plan()?);
        return Ok(0);
    }
    let s = Setup::new(cfg)?;
    if s.val.is_empty() {
        return Err(Error::Config("the configuration has no validation set".into()));
    }
    let cache = s.validation_cache()?;
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(VALIDATION_CACHE);
    serde_json::to_writer(std::io::BufWriter::new(std::fs::File::create(&path)?), &cache)?;
    println!("{} validation snapshots -> {}", cache.snapshots.len(), path.display());
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Compare(c) => run_compare(c),
        Command::Trials { common, n_trials } => trials(common, *n_trials),
        Command::GenParams(c) => gen_params(c),
        Command::PrecomputeValidation(c) => precompute(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}
