//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failing criteria exit nonzero only with `MFROM_ACCEPTANCE_STRICT=1`.

mod common;

use std::time::Instant;

use common::{brute_force_deim, bundled, random_mat, rel_diff};
use faer::Col;
use mfrom::config::{Method, RunConfig};
use mfrom::deim::{deim_select, DeimVariant};
use mfrom::experiment::{run_method, run_trials, stable_locations, MethodReport, Setup};
use mfrom::fem::SparseOp;
use mfrom::flow::FlowConfig;
use mfrom::greedy::{GreedyReport, GreedyState};
use mfrom::heat::{assemble_heat_at, HeatProblem};
use mfrom::linalg::{columns_to_mat, thin_svd};
use mfrom::mf::{MfReport, Status};
use mfrom::params::rng;
use mfrom::report::write_convergence;
use mfrom::rom::{project_affine, reconstruct, solve_rom_nonaffine};
use mfrom::supg::AdvDiffProblem;
use rand::Rng;

struct Suite {
    results: Vec<(usize, bool)>,
    defects: Vec<f64>,
}

impl Suite {
    fn report(&mut self, n: usize, pass: bool, what: &str, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} [{tag}] {what}: {detail}");
        self.results.push((n, pass));
    }

    fn collect(&mut self, r: &MfReport) {
        self.defects.extend(r.iterations.iter().map(|it| it.orthonormality_defect));
    }
}

struct Timed<T> {
    value: T,
    seconds: f64,
}

fn run(cfg: RunConfig) -> Timed<(Setup, MethodReport)> {
    let start = Instant::now();
    let mut setup = Setup::new(cfg).unwrap();
    setup.prepare().unwrap();
    let rep = run_method(&setup).unwrap();
    Timed {
        value: (setup, rep),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn mf(rep: &MethodReport) -> &MfReport {
    match rep {
        MethodReport::Mf(r) => r,
        _ => panic!("expected a multi-fidelity report"),
    }
}

fn greedy(rep: &MethodReport) -> &GreedyReport {
    match rep {
        MethodReport::Greedy(r) => r,
        _ => panic!("expected a greedy report"),
    }
}

fn within(v: usize, target: usize, tol: usize) -> bool {
    v.abs_diff(target) <= tol
}

/// `ε_POD ≤ ε_ROM` at every rank and both decay up to a 5% band.
fn error_ordering(r: &MfReport) -> (bool, String) {
    let rows: Vec<(usize, f64, f64)> = r
        .iterations
        .iter()
        .map(|it| (it.rank, it.eps_rom.unwrap(), it.eps_pod.unwrap()))
        .collect();
    let ordered = rows.iter().filter(|(_, rom, pod)| pod > rom).count();
    let rises = |k: usize| {
        rows.windows(2)
            .filter(|w| [w[0].1, w[0].2][k] * 1.05 < [w[1].1, w[1].2][k])
            .count()
    };
    let worst = rows
        .windows(2)
        .map(|w| (w[1].1 / w[0].1).max(w[1].2 / w[0].2))
        .fold(0.0, f64::max);
    let (rr, rp) = (rises(0), rises(1));
    (
        ordered == 0 && rr == 0 && rp == 0,
        format!(
            "{} ranks, {ordered} with eps_pod > eps_rom, rises > 5%: rom {rr}, pod {rp}, worst ratio {worst:.3}",
            rows.len()
        ),
    )
}

fn heat_config(name: &str, global: bool, timings: bool) -> RunConfig {
    let mut c = bundled(name);
    c.diagnostics.global = global;
    c.diagnostics.timings = timings;
    c
}

fn main() {
    let mut s = Suite {
        results: Vec::new(),
        defects: Vec::new(),
    };

    // 1. heat2d, random sketch
    let heat = run(heat_config("heat2d-random.toml", true, true));
    let hr = mf(&heat.value.1).clone();
    s.collect(&hr);
    let (it, pts) = (hr.iterations.len(), hr.total_points());
    s.report(
        1,
        hr.status == Status::Converged && within(it, 6, 1) && within(pts, 7, 1),
        "heat2d random sketch K=2 p=1 tol 1e-6",
        format!(
            "{:?} after {it} iterations with {pts} points, {} train, eps_val {:.2e}, {:.2}s",
            hr.status,
            heat.value.0.train.len(),
            hr.iterations.last().unwrap().eps_val.unwrap(),
            heat.seconds
        ),
    );

    // 2. heat2d, coarse sketch
    let coarse = run(heat_config("heat2d-coarse.toml", false, true));
    let cr = mf(&coarse.value.1);
    s.collect(cr);
    s.report(
        2,
        cr.status == Status::Converged && within(cr.total_points(), pts, 1),
        "heat2d coarse sketch point count matches random sketch",
        format!(
            "{:?}, {} points (random sketch {pts}), {} iterations",
            cr.status,
            cr.total_points(),
            cr.iterations.len()
        ),
    );

    // 3. greedy baseline
    let g = run(heat_config("heat2d-greedy.toml", false, true));
    let (gsetup, grep) = (&g.value.0, greedy(&g.value.1));
    let HeatProblem { system, .. } = match &gsetup.fine {
        mfrom::experiment::Problem::Heat(p) => p,
        _ => unreachable!(),
    };
    let mut state = GreedyState::new(system, &grep.config.mu_ref).unwrap();
    let snaps: Vec<Vec<f64>> = grep.selected.iter().map(|&i| system.solve(&gsetup.train[i]).unwrap().free).collect();
    state.basis.phi = thin_svd(columns_to_mat(&snaps, system.n()).as_ref()).unwrap().u;
    state.riesz.update(system, &state.basis.phi).unwrap();
    let rom = state.reduced().unwrap();
    let mut r = rng(21);
    let mut checks: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![10f64.powf(r.random::<f64>() * 2.0 - 1.0), r.random::<f64>() * 2.0 - 1.0])
        .collect();
    checks.extend(gsetup.val.iter().cloned());
    let violations = checks
        .iter()
        .filter(|mu| {
            let (bound, b) = state.bound(&rom, mu).unwrap();
            let u = system.solve(mu).unwrap().free;
            let ur = reconstruct(state.basis.phi.as_ref(), &b).unwrap();
            let e: Vec<f64> = u.iter().zip(&ur).map(|(a, b)| a - b).collect();
            bound < state.riesz.x_norm(&e) * (1.0 - 1e-8)
        })
        .count();
    let nonincreasing = grep
        .iterations
        .windows(2)
        .all(|w| w[1].max_indicator <= w[0].max_indicator);
    s.report(
        3,
        grep.status == Status::Converged && within(grep.selected.len(), 7, 1) && violations == 0 && nonincreasing,
        "greedy baseline reaches tol with 7 +- 1 functions, bound >= error",
        format!(
            "{:?} with {} functions, final bound {:.2e}, bound violations {violations}/{}, bound nonincreasing {nonincreasing}",
            grep.status,
            grep.selected.len(),
            grep.iterations.last().unwrap().max_indicator,
            checks.len()
        ),
    );

    // 5. 9D desk-scale run (also feeds 4 and 6)
    let mut desk_cfg = bundled("advdiff9d-desk.toml");
    desk_cfg.diagnostics.global = true;
    let desk = run(desk_cfg.clone());
    let dr = mf(&desk.value.1).clone();
    s.collect(&dr);

    let (hok, hdetail) = error_ordering(&hr);
    let (dok, ddetail) = error_ordering(&dr);
    s.report(
        4,
        hok && dok,
        "eps_pod <= eps_rom per rank, monotone decay within 5%",
        format!("heat2d: {hdetail}; advdiff9d: {ddetail}"),
    );

    let first = dr.iterations.first().unwrap().eps_val.unwrap();
    let last = dr.iterations.last().unwrap().eps_val.unwrap();
    let orders = (first / last).log10();
    let mut sel = dr.selected.clone();
    sel.sort_unstable();
    sel.dedup();
    let distinct = sel.len() == dr.selected.len();
    s.report(
        5,
        dr.status == Status::Converged && orders >= 3.0 && distinct && desk.seconds <= 900.0,
        "advdiff9d desk scale (500/100 LHS, 1600 nodes, tol 1e-4, K=20, p=5)",
        format!(
            "{:?} after {} iterations with {} points, eps_val {first:.2e} -> {last:.2e} ({orders:.2} orders), distinct {distinct}, {:.0}s",
            dr.status,
            dr.iterations.len(),
            dr.total_points(),
            desk.seconds
        ),
    );

    // 6. smaller p at matched tolerance
    let mut p2_cfg = desk_cfg.clone();
    p2_cfg.diagnostics.global = false;
    p2_cfg.mf.points_per_iter = 2;
    let p2 = run(p2_cfg);
    let pr = mf(&p2.value.1);
    s.collect(pr);
    s.report(
        6,
        pr.status == Status::Converged
            && pr.total_points() <= dr.total_points()
            && pr.iterations.len() > dr.iterations.len(),
        "greediness trade-off p=2 vs p=5",
        format!(
            "p=2: {} points / {} iterations ({:?}); p=5: {} points / {} iterations",
            pr.total_points(),
            pr.iterations.len(),
            pr.status,
            dr.total_points(),
            dr.iterations.len()
        ),
    );

    // 7. DEIM against an independent implementation
    let mut r = rng(7);
    let mut mismatches = 0;
    for _ in 0..200 {
        let cols = r.random_range(1..=6);
        let rows = r.random_range(cols..=12);
        let psi = random_mat(&mut r, rows, cols);
        if deim_select(psi.as_ref(), cols, DeimVariant::SelectedRows).unwrap() != brute_force_deim(&psi) {
            mismatches += 1;
        }
    }
    s.report(
        7,
        mismatches == 0,
        "DEIM equals brute-force reference on 200 random matrices",
        format!("{mismatches} mismatches"),
    );

    // 8. analytic heat solution and mu_2 linearity
    let hp = HeatProblem::new(28, 28, 0.5).unwrap();
    let sol = hp.system.solve(&[1.0, 1.0]).unwrap();
    let nodal_err = hp
        .mesh
        .nodes
        .iter()
        .zip(&sol.nodal)
        .map(|(x, u)| (u - (1.0 - x[1])).abs())
        .fold(0.0, f64::max);
    let lin = (0..5)
        .map(|k| {
            let mu1 = 0.1 * 10f64.powf(0.5 * k as f64);
            let a = hp.system.solve(&[mu1, 0.4]).unwrap().free;
            let b = hp.system.solve(&[mu1, 0.8]).unwrap().free;
            let twice: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
            rel_diff(&b, &twice)
        })
        .fold(0.0, f64::max);
    s.report(
        8,
        nodal_err <= 1e-12 && lin <= 1e-12,
        "heat2d u = 1 - y at mu = (1,1), linear in mu_2",
        format!("max nodal error {nodal_err:.1e}, linearity error {lin:.1e}"),
    );

    // 10. trial stability (runs before 9 so its bases count toward the orthonormality check)
    let mut tcfg = heat_config("heat2d-random.toml", false, false);
    tcfg.method = Method::Mf;
    let mut tsetup = Setup::new(tcfg).unwrap();
    tsetup.prepare().unwrap();
    let trials = run_trials(&tsetup, 10).unwrap();
    for rep in &trials.reports {
        s.collect(rep);
    }
    let sizes: Vec<usize> = trials.selected.iter().map(|v| v.len()).collect();
    let modal = {
        let mut c = sizes.clone();
        c.sort_unstable();
        c[c.len() / 2]
    };
    let deim_only: Vec<Vec<usize>> = trials
        .reports
        .iter()
        .map(|r| r.selected.iter().zip(&r.selected_iteration).filter(|(_, &it)| it > 0).map(|(&i, _)| i).collect())
        .collect();
    let deim_stable = stable_locations(&deim_only, |i| tsetup.grid.grid_index(tsetup.grid_position(i)), 1);
    s.report(
        10,
        trials.stable_locations >= 6,
        "heat2d 10 trials: >= 6 locations stable within one grid cell",
        format!(
            "{} of {modal} locations matched in all trials ({deim_stable} among DEIM picks only); points per trial {sizes:?}; statuses converged {}",
            trials.stable_locations,
            trials.statuses.iter().filter(|s| **s == Status::Converged).count()
        ),
    );

    // 9. invariants
    let worst_defect = s.defects.iter().copied().fold(0.0, f64::max);
    let mut r = rng(9);
    let affine = (0..5)
        .map(|_| {
            let mu = [10f64.powf(r.random::<f64>() * 2.0 - 1.0), r.random::<f64>() * 2.0 - 1.0];
            let (d, _) = assemble_heat_at(&hp.mesh, &hp.system, &mu).unwrap();
            let a = hp.system.operator(&mu).unwrap();
            let (d, a) = (d.to_dense(), a.to_dense());
            (&d - &a).norm_max() / d.norm_max()
        })
        .fold(0.0, f64::max);
    let galerkin = |a: &SparseOp, f: &[f64], phi: &faer::Mat<f64>, b: &[f64]| {
        let u = reconstruct(phi.as_ref(), b).unwrap();
        let au = a.matvec(&u);
        let res: Vec<f64> = f.iter().zip(&au).map(|(x, y)| x - y).collect();
        let pr = phi.transpose() * Col::from_fn(res.len(), |i| res[i]);
        let pf = phi.transpose() * Col::from_fn(f.len(), |i| f[i]);
        pr.norm_l2() / pf.norm_l2()
    };
    let heat_snaps: Vec<Vec<f64>> = hr.selected.iter().map(|&i| heat.value.0.train_snapshots.as_ref().unwrap()[i].clone()).collect();
    let hphi = thin_svd(columns_to_mat(&heat_snaps, hp.system.n()).as_ref()).unwrap().u;
    let hrom = project_affine(&hp.system, hphi.as_ref()).unwrap();
    let mut orth: f64 = 0.0;
    for mu in heat.value.0.val.iter().take(10) {
        let b = hrom.solve(mu).unwrap().coeffs;
        orth = orth.max(galerkin(&hp.system.operator(mu).unwrap(), &hp.system.load(mu).unwrap(), &hphi, &b));
    }
    let adv = AdvDiffProblem::new(39, 39, &FlowConfig::default()).unwrap();
    let dsnaps: Vec<Vec<f64>> = dr.selected.iter().take(30).map(|&i| desk.value.0.train_snapshots.as_ref().unwrap()[i].clone()).collect();
    let dphi = thin_svd(columns_to_mat(&dsnaps, adv.n()).as_ref()).unwrap().u;
    for mu in desk.value.0.val.iter().take(5) {
        let b = solve_rom_nonaffine(&adv, dphi.as_ref(), mu).unwrap().coeffs;
        let (a, f) = adv.assemble(mu).unwrap();
        orth = orth.max(galerkin(&a, &f, &dphi, &b));
    }
    let csv = |rep: &MethodReport| {
        let mut buf = Vec::new();
        write_convergence(&mut buf, &rep.convergence()).unwrap();
        buf
    };
    let d1 = run(heat_config("heat2d-random.toml", false, false));
    let d2 = run(heat_config("heat2d-random.toml", false, false));
    let identical = csv(&d1.value.1) == csv(&d2.value.1);
    s.report(
        9,
        worst_defect <= 1e-10 && affine <= 1e-13 && orth <= 1e-9 && identical,
        "invariants: orthonormality, affine consistency, Galerkin orthogonality, determinism",
        format!(
            "max defect {worst_defect:.1e} over {} enrichments, affine {affine:.1e}, Galerkin {orth:.1e}, byte-identical convergence.csv {identical}",
            s.defects.len()
        ),
    );

    s.results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = s.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        s.results.len() - failed.len(),
        s.results.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if !failed.is_empty() && std::env::var("MFROM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
