//! Brute-force approximation of the restricted eigenvalue
//!
//! ```text
//! κ_RE(s) = min_{|J| ≤ s} min_{Δ ∈ C_J \ {0}} |ΔᵀΨΔ| / |Δ_J|₂²
//! ```
//!
//! for small positive semidefinite Ψ. The ratio is scale free, so `Δ_J = v`
//! ranges over the unit sphere in `R^s`, searched on a grid of hyperspherical
//! angles followed by a pattern search. For fixed `v` the remaining problem
//! over `u = Δ_{J^c}` with `|u|₁ ≤ |v|₁` is a convex quadratic, solved by
//! accelerated projected gradient. Every reported value is attained by the
//! returned vector, so the result is an upper bound on `κ_RE(s)` that
//! tightens as the grid is refined. Intended as a test oracle.

use crate::error::{MuselError, Result};
use crate::matrix::{dot, norm1};
use crate::model::GramMatrix;
use crate::sensitivity::{binomial, SensitivityKind};
use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MAX_P: usize = 8;
const MAX_EVALUATIONS: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReEstimate {
    pub value: f64,
    pub kind: SensitivityKind,
    /// `Δ` attaining `value`, scaled so that `|Δ_J|₂ = 1`.
    pub certificate: Vec<f64>,
    pub support: Vec<usize>,
}

/// Euclidean projection onto `{|x|₁ ≤ r}` by sorting.
pub fn project_l1_ball(x: &[f64], r: f64) -> Vec<f64> {
    if norm1(x) <= r {
        return x.to_vec();
    }
    if r <= 0.0 {
        return vec![0.0; x.len()];
    }
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        cum += ai;
        let t = (cum - r) / (i + 1) as f64;
        if ai > t {
            theta = t;
        } else {
            break;
        }
    }
    x.iter().map(|v| v.signum() * (v.abs() - theta).max(0.0)).collect()
}

struct Block {
    j: Vec<usize>,
    jc: Vec<usize>,
    /// `Ψ_{J^c J^c}`, row-major.
    c: Vec<f64>,
    lipschitz: f64,
}

impl Block {
    fn new(psi: &GramMatrix, j: Vec<usize>) -> Self {
        let jc: Vec<usize> = (0..psi.dim()).filter(|i| !j.contains(i)).collect();
        let m = jc.len();
        let c: Vec<f64> = jc.iter().flat_map(|&a| jc.iter().map(move |&b| (a, b))).map(|(a, b)| psi.get(a, b)).collect();
        let gersh = (0..m).map(|r| c[r * m..(r + 1) * m].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        Self { j, jc, c, lipschitz: (2.0 * gersh).max(1e-12) }
    }

    fn quad_c(&self, u: &[f64]) -> Vec<f64> {
        let m = self.jc.len();
        (0..m).map(|r| dot(&self.c[r * m..(r + 1) * m], u)).collect()
    }

    /// `(min value, minimizer u)` of `vᵀΨ_JJ v + 2uᵀΨ_{J^c J}v + uᵀΨ_{J^c J^c}u`.
    fn inner(&self, psi: &GramMatrix, v: &[f64]) -> (f64, Vec<f64>) {
        let base: f64 = self
            .j
            .iter()
            .zip(v)
            .map(|(&a, va)| va * self.j.iter().zip(v).map(|(&b, vb)| psi.get(a, b) * vb).sum::<f64>())
            .sum();
        let m = self.jc.len();
        if m == 0 {
            return (base, vec![]);
        }
        let lin: Vec<f64> =
            self.jc.iter().map(|&a| self.j.iter().zip(v).map(|(&b, vb)| psi.get(a, b) * vb).sum()).collect();
        let value = |u: &[f64]| base + 2.0 * dot(&lin, u) + dot(u, &self.quad_c(u));
        let r = norm1(v);
        let step = 1.0 / self.lipschitz;
        let mut x = vec![0.0; m];
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut best = (value(&x), x.clone());
        for _ in 0..5000 {
            let cy = self.quad_c(&y);
            let grad: Vec<f64> = lin.iter().zip(&cy).map(|(l, c)| 2.0 * (l + c)).collect();
            let target: Vec<f64> = y.iter().zip(&grad).map(|(yi, g)| yi - step * g).collect();
            let x_new = project_l1_ball(&target, r);
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let moved: f64 = x_new.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
            y = x_new.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / t_new * (a - b)).collect();
            x = x_new;
            t = t_new;
            let val = value(&x);
            if val < best.0 {
                best = (val, x.clone());
            }
            if moved <= 1e-13 * (1.0 + r) {
                break;
            }
        }
        best
    }
}

/// Unit vector from hyperspherical angles.
fn sphere_point(angles: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(angles.len() + 1);
    let mut prod = 1.0;
    for &a in angles {
        v.push(prod * a.cos());
        prod *= a.sin();
    }
    v.push(prod);
    v
}

/// Approximates `κ_RE(s)` for positive semidefinite `psi` with `p ≤ 8`.
/// `grid_resolution` is the number of grid steps per angle.
pub fn re_constant_bruteforce(psi: &GramMatrix, s: usize, grid_resolution: usize) -> Result<ReEstimate> {
    let p = psi.dim();
    if p > MAX_P {
        return Err(MuselError::TooLarge(format!("brute-force RE needs p <= {MAX_P}, got {p}")));
    }
    if s == 0 || s > p {
        return Err(MuselError::InvalidArgument(format!("s must lie in [1, {p}], got {s}")));
    }
    let res = grid_resolution.max(1);
    let grid = (res as u128).saturating_pow((s - 1) as u32);
    let needed = binomial(p, s).saturating_mul(grid);
    if needed > MAX_EVALUATIONS {
        return Err(MuselError::TooLarge(format!("{needed} grid evaluations exceed {MAX_EVALUATIONS}")));
    }

    let per_j: Vec<(f64, Vec<f64>, Vec<usize>)> = (0..p)
        .combinations(s)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let block = Block::new(psi, j);
            let eval = |angles: &[f64]| -> (f64, Vec<f64>) {
                let v = sphere_point(angles);
                let (val, u) = block.inner(psi, &v);
                let mut delta = vec![0.0; p];
                for (&i, vi) in block.j.iter().zip(&v) {
                    delta[i] = *vi;
                }
                for (&i, ui) in block.jc.iter().zip(&u) {
                    delta[i] = *ui;
                }
                (val.abs(), delta)
            };
            let dims = s - 1;
            let h = PI / res as f64;
            // Δ ↦ −Δ leaves the ratio unchanged, so the last angle covers [0, π).
            let mut best_angles = vec![0.0; dims];
            let mut best = eval(&best_angles);
            for idx in (0..dims).map(|_| 0..res).multi_cartesian_product() {
                let angles: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
                let cand = eval(&angles);
                if cand.0 < best.0 {
                    best = cand;
                    best_angles = angles;
                }
            }
            let mut step = h;
            while dims > 0 && step > 1e-7 {
                let mut improved = false;
                for d in 0..dims {
                    for dir in [1.0, -1.0] {
                        let mut a = best_angles.clone();
                        a[d] += dir * step;
                        let cand = eval(&a);
                        if cand.0 < best.0 {
                            best = cand;
                            best_angles = a;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            (best.0, best.1, block.j)
        })
        .collect();

    let (value, certificate, support) = per_j
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one subset");
    Ok(ReEstimate { value, kind: SensitivityKind::BruteForceApprox, certificate, support })
}
