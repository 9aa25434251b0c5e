#![allow(dead_code)]

use std::path::PathBuf;

use faer::Mat;
use mfrom::config::RunConfig;
use rand::Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn bundled(name: &str) -> RunConfig {
    RunConfig::from_path(&config_path(name)).unwrap()
}

pub fn random_mat(rng: &mut impl Rng, m: usize, n: usize) -> Mat<f64> {
    Mat::from_fn(m, n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / n
}

/// Standard DEIM written directly from its definition: at step `l`, solve
/// `Ψ[P, :l] c = Ψ[P, l]` by Gaussian elimination with partial pivoting and
/// take the row of largest `|Ψ[:, l] − Ψ[:, :l] c|`.
pub fn brute_force_deim(psi: &Mat<f64>) -> Vec<usize> {
    let (n, m) = (psi.nrows(), psi.ncols());
    let mut p: Vec<usize> = Vec::new();
    for l in 0..m {
        let mut r: Vec<f64> = (0..n).map(|i| psi[(i, l)]).collect();
        if l > 0 {
            let mut a: Vec<Vec<f64>> = (0..l).map(|i| (0..l).map(|j| psi[(p[i], j)]).collect()).collect();
            let mut b: Vec<f64> = (0..l).map(|i| psi[(p[i], l)]).collect();
            for k in 0..l {
                let piv = (k..l).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs())).unwrap();
                a.swap(k, piv);
                b.swap(k, piv);
                for i in k + 1..l {
                    let f = a[i][k] / a[k][k];
                    for j in k..l {
                        a[i][j] -= f * a[k][j];
                    }
                    b[i] -= f * b[k];
                }
            }
            let mut c = vec![0.0; l];
            for k in (0..l).rev() {
                let s: f64 = (k + 1..l).map(|j| a[k][j] * c[j]).sum();
                c[k] = (b[k] - s) / a[k][k];
            }
            for (i, ri) in r.iter_mut().enumerate() {
                *ri -= (0..l).map(|j| psi[(i, j)] * c[j]).sum::<f64>();
            }
        }
        let mut best = 0;
        for i in 1..n {
            if r[i].abs() > r[best].abs() {
                best = i;
            }
        }
        p.push(best);
    }
    p
}
