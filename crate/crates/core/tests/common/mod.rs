//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use itertools::Itertools;
use musel::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_instance(n: usize, p: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DenseMatrix::new(n, p, (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (z, y)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// `c = (1/n)Zᵀy`, `A = (1/n)ZᵀZ − diag(d)` by explicit loops.
pub fn constraint_data(z: &DenseMatrix, y: &[f64], d: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, p) = (z.rows(), z.cols());
    let nf = n as f64;
    let c = (0..p).map(|j| (0..n).map(|i| z.get(i, j) * y[i]).sum::<f64>() / nf).collect();
    let a = (0..p)
        .map(|j| {
            (0..p)
                .map(|k| (0..n).map(|i| z.get(i, j) * z.get(i, k)).sum::<f64>() / nf - if j == k { d[j] } else { 0.0 })
                .collect()
        })
        .collect();
    (c, a)
}

/// Rows `r·θ ≤ b` describing `{θ ≥ 0 : |c − Aθ|_∞ ≤ μΣθ + τ}`.
fn cmu_rows(c: &[f64], a: &[Vec<f64>], mu: f64, tau: f64) -> Vec<(Vec<f64>, f64)> {
    let p = c.len();
    let mut rows = Vec::new();
    for i in 0..p {
        rows.push((a[i].iter().map(|v| -v - mu).collect(), tau - c[i]));
        rows.push((a[i].iter().map(|v| v - mu).collect(), tau + c[i]));
    }
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    rows
}

fn feasible(rows: &[(Vec<f64>, f64)], theta: &[f64], tol: f64) -> bool {
    rows.iter().all(|(r, b)| r.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>() <= b + tol)
}

/// `min Σθ` over the nonnegative compensated selector set, by brute force.
///
/// A grid over a box locates feasible points; the minimum is then refined
/// exactly over every vertex of the polytope (intersections of `p` active
/// constraint planes). Returns `None` when the set is empty. Panics if a
/// grid point ever beats the refined minimum.
pub fn cmu_grid_oracle(c: &[f64], a: &[Vec<f64>], mu: f64, tau: f64, grid: usize) -> Option<f64> {
    let p = c.len();
    let rows = cmu_rows(c, a, mu, tau);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for active in (0..rows.len()).combinations(p) {
        let m: Vec<Vec<f64>> = active.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = active.iter().map(|&i| rows[i].1).collect();
        let Some(theta) = solve_square(m, b) else { continue };
        if !feasible(&rows, &theta, 1e-9) {
            continue;
        }
        let obj: f64 = theta.iter().sum();
        if best.as_ref().is_none_or(|(v, _)| obj < *v) {
            best = Some((obj, theta));
        }
    }
    let (opt, theta) = best?;
    let side = 2.0 * theta.iter().copied().fold(0.0, f64::max).max(1e-3);
    for idx in (0..p).map(|_| 0..=grid).multi_cartesian_product() {
        let pt: Vec<f64> = idx.iter().map(|&k| side * k as f64 / grid as f64).collect();
        if feasible(&rows, &pt, 0.0) {
            let obj: f64 = pt.iter().sum();
            assert!(obj >= opt - 1e-9 * (1.0 + opt), "grid point {pt:?} beats refined optimum {opt}");
        }
    }
    Some(opt)
}
