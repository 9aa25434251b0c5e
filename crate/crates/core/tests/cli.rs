use std::path::Path;
use std::process::{Command, Output};

const SMALL_HEAT: &str = r#"
problem = "heat2d"
method = "mf"

[mesh]
fine = 16
coarse = 8

[train]
kind = "tensor"
axes = [
  { spacing = "log", lo = 0.1, hi = 10.0, n = 20 },
  { spacing = "uniform", lo = -1.0, hi = 1.0, n = 10 },
]

[validation]
kind = "lhs"
n = 10
seed = 1

[diagnostics]
timings = false

[mf]
tol = 1e-6
sketch = { kind = "random", size = 2 }
"#;

fn mfrom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfrom")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn run_writes_fixed_schema_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let out = tmp.path().join("out");
    let o = mfrom(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let conv = read(out.join("convergence.csv"));
    assert!(conv.starts_with("iteration,n_points,eps_train,eps_val,seconds\n"));
    assert!(read(out.join("points.csv")).starts_with("iteration,train_index,mu_1,mu_2\n"));
    assert!(read(out.join("singular_values.csv")).starts_with("iteration,index,sigma\n"));
    let params = read(out.join("params.csv"));
    assert!(params.starts_with("role,mu_1,mu_2\n"));
    assert_eq!(params.lines().filter(|l| l.starts_with("train,")).count(), 200);
    assert_eq!(params.lines().filter(|l| l.starts_with("val,")).count(), 10);
    let report: serde_json::Value = serde_json::from_str(&read(out.join("report.json"))).unwrap();
    assert_eq!(report["status"], "converged");
    assert_eq!(report["report"]["method"], "mf");
    assert_eq!(report["config"]["mf"]["tol"], 1e-6);
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("out{k}"));
        let o = mfrom(&["run", "--config", &cfg, "--seed", "7", "--out-dir", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push((read(out.join("convergence.csv")), read(out.join("points.csv"))));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn dry_run_solves_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let out = tmp.path().join("out");
    let o = mfrom(&["run", "--config", &cfg, "--dry-run", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let plan = String::from_utf8(o.stdout).unwrap();
    assert!(plan.contains("train        200 points"), "{plan}");
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_with_code_4() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", &SMALL_HEAT.replace("fine = 16", "fine = 15"));
    let o = mfrom(&["run", "--config", &bad]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mesh.fine"));
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    assert_eq!(mfrom(&["run", "--config", &cfg, "--tol", "-1"]).status.code(), Some(4));
    assert_eq!(mfrom(&["run", "--config", &cfg, "--points-per-iter", "0"]).status.code(), Some(4));
    assert_eq!(mfrom(&["run", "--config", "/nonexistent.toml"]).status.code(), Some(4));
    assert_eq!(mfrom(&["run"]).status.code(), Some(4));
    let no_val = write_config(
        tmp.path(),
        "noval.toml",
        &SMALL_HEAT.replace("[validation]\nkind = \"lhs\"\nn = 10\nseed = 1\n", ""),
    );
    assert_eq!(mfrom(&["run", "--config", &no_val, "--require-val-convergence"]).status.code(), Some(4));
}

#[test]
fn max_iter_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", &SMALL_HEAT.replace("tol = 1e-6", "tol = 1e-6\nmax_iter = 1"));
    let out = tmp.path().join("out");
    let o = mfrom(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(read(out.join("convergence.csv")).lines().count(), 2);
}

#[test]
fn loose_tolerance_converges_at_first_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let out = tmp.path().join("out");
    let o = mfrom(&["run", "--config", &cfg, "--tol", "10", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(out.join("convergence.csv")).lines().count(), 2);
}

#[test]
fn precomputed_validation_is_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let out = tmp.path().join("out");
    let o = mfrom(&["precompute-validation", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("validation_snapshots.json").exists());
    let fresh = tmp.path().join("fresh");
    mfrom(&["run", "--config", &cfg, "--out-dir", fresh.to_str().unwrap()]);
    let o = mfrom(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(out.join("convergence.csv")), read(fresh.join("convergence.csv")));
}

#[test]
fn gen_params_writes_roles() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let out = tmp.path().join("out");
    let o = mfrom(&["gen-params", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let grid = mfrom::params::ParameterGrid::read_csv(std::fs::File::open(out.join("params.csv")).unwrap()).unwrap();
    assert_eq!((grid.train().len(), grid.val().len()), (200, 10));
    assert!(!out.join("convergence.csv").exists());
}

#[test]
fn compare_with_itself_gives_identical_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let out = tmp.path().join("cmp");
    let o = mfrom(&["compare", "--config", &cfg, "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read(out.join("comparison.csv"));
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "rank");
    let half = (header.len() - 1) / 2;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1..=half], f[half + 1..]);
    }
    assert!(read(out.join("comparison_points.csv")).starts_with("run,order,iteration,train_index,mu_1,mu_2\n"));
}

#[test]
fn trials_with_fixed_seeds_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", SMALL_HEAT);
    let mut tables = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("t{k}"));
        let o = mfrom(&["trials", "--config", &cfg, "--n-trials", "2", "--out-dir", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let t = read(out.join("trials.csv"));
        assert!(t.starts_with("iteration,count,mean_eps_train,std_eps_train,mean_eps_val,std_eps_val\n"));
        tables.push((t, read(out.join("selection_frequency.csv"))));
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(mfrom(&["trials", "--config", &cfg, "--n-trials", "1"]).status.code(), Some(4));
}

#[test]
fn greedy_and_reference_methods_run() {
    let tmp = tempfile::tempdir().unwrap();
    for method in ["greedy", "pod-deim"] {
        let cfg = write_config(
            tmp.path(),
            &format!("{method}.toml"),
            &SMALL_HEAT.replace("method = \"mf\"", &format!("method = \"{method}\"")),
        );
        let out = tmp.path().join(method);
        let o = mfrom(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(read(out.join("ranks.csv")).starts_with("rank,n_points,eps_train,eps_val,eps_rom,eps_pod,bound,seconds\n"));
    }
}

#[test]
fn exhausted_training_set_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_HEAT.replace("n = 20 }", "n = 3 }").replace("n = 10 },", "n = 2 },");
    let cfg = write_config(tmp.path(), "tiny.toml", &text);
    let out = tmp.path().join("out");
    let o = mfrom(&["run", "--config", &cfg, "--tol", "1e-300", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
}
