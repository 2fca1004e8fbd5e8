//! Design entries missing at random.
//!
//! The observed matrix is `Z̃ = X ∘ η` with independent `η_ij ~ Bernoulli(1 − π_j)`.
//! A missing entry is stored as an exact `0.0`, so a true zero in `X` is
//! indistinguishable from a missing one and inflates `π̂`.

use crate::error::{MuselError, Result};
use crate::matrix::DenseMatrix;
use crate::rng::Rng;
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedDesign {
    pub z_tilde: DenseMatrix,
    /// Per-column missingness probabilities, when known.
    pub pi: Option<Vec<f64>>,
    /// The 0/1 mask, kept by simulations for diagnostics.
    pub eta: Option<DenseMatrix>,
}

impl MaskedDesign {
    /// Wraps an observed matrix with unknown missingness rates.
    pub fn observed(z_tilde: DenseMatrix) -> Self {
        Self { z_tilde, pi: None, eta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PiMode {
    #[default]
    Pooled,
    PerColumn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationDiagonal {
    pub sigma_hat_sq: Vec<f64>,
    pub pi_used: Vec<f64>,
}

fn check_pi(pi: &[f64], p: usize) -> Result<()> {
    if pi.len() != p {
        return Err(MuselError::Dimension(format!("{} missingness rates for {p} columns", pi.len())));
    }
    match pi.iter().position(|v| !(0.0..1.0).contains(v)) {
        Some(j) => Err(MuselError::InvalidArgument(format!(
            "missingness rate of column {j} must lie in [0, 1), got {}",
            pi[j]
        ))),
        None => Ok(()),
    }
}

/// Broadcasts a scalar rate to `p` columns.
pub fn uniform_pi(pi: f64, p: usize) -> Vec<f64> {
    vec![pi; p]
}

pub fn apply_mask(x: &DenseMatrix, pi: &[f64], seed: u64) -> Result<MaskedDesign> {
    apply_mask_with(x, pi, &mut Rng::seed_from_u64(seed))
}

/// Masks `x` drawing the Bernoulli variables row by row from `rng`.
pub fn apply_mask_with(x: &DenseMatrix, pi: &[f64], rng: &mut Rng) -> Result<MaskedDesign> {
    let (n, p) = (x.rows(), x.cols());
    check_pi(pi, p)?;
    let mut z = x.clone();
    let mut eta = DenseMatrix::zeros(n, p);
    for i in 0..n {
        for (j, &pj) in pi.iter().enumerate() {
            let keep = pj == 0.0 || !rng.random_bool(pj);
            if keep {
                eta.set(i, j, 1.0);
            } else {
                z.set(i, j, 0.0);
            }
        }
    }
    Ok(MaskedDesign { z_tilde: z, pi: Some(pi.to_vec()), eta: Some(eta) })
}

/// `Z_ij = Z̃_ij / (1 − π_j)`.
pub fn rescale(masked: &MaskedDesign, pi: &[f64]) -> Result<DenseMatrix> {
    let (n, p) = (masked.z_tilde.rows(), masked.z_tilde.cols());
    check_pi(pi, p)?;
    let mut z = masked.z_tilde.clone();
    for i in 0..n {
        for (j, &pj) in pi.iter().enumerate() {
            z.set(i, j, z.get(i, j) / (1.0 - pj));
        }
    }
    Ok(z)
}

/// Empirical frequency of exact zeros, pooled (one value) or per column.
pub fn estimate_pi(masked: &MaskedDesign, mode: PiMode) -> Vec<f64> {
    let z = &masked.z_tilde;
    let (n, p) = (z.rows(), z.cols());
    let mut zeros = vec![0usize; p];
    for i in 0..n {
        for (j, c) in zeros.iter_mut().enumerate() {
            if z.get(i, j) == 0.0 {
                *c += 1;
            }
        }
    }
    match mode {
        PiMode::Pooled => vec![zeros.iter().sum::<usize>() as f64 / (n * p) as f64],
        PiMode::PerColumn => zeros.iter().map(|&c| c as f64 / n as f64).collect(),
    }
}

/// Index of the first column whose entries are all zero.
pub fn fully_missing_column(z_tilde: &DenseMatrix) -> Option<usize> {
    (0..z_tilde.cols()).find(|&j| (0..z_tilde.rows()).all(|i| z_tilde.get(i, j) == 0.0))
}

/// `σ̂_j² = (1/n) Σ_i Z̃_ij² π_j / (1 − π_j)²`.
pub fn sigma_hat(z_tilde: &DenseMatrix, pi: &[f64]) -> Result<CompensationDiagonal> {
    let (n, p) = (z_tilde.rows(), z_tilde.cols());
    check_pi(pi, p)?;
    let sq = column_mean_squares(z_tilde);
    let sigma_hat_sq = sq
        .iter()
        .zip(pi)
        .map(|(m, &pj)| m * pj / ((1.0 - pj) * (1.0 - pj)))
        .collect();
    debug_assert!(n > 0);
    Ok(CompensationDiagonal { sigma_hat_sq, pi_used: pi.to_vec() })
}

/// `σ_j² = (1/n) Σ_i X_ij² π_j / (1 − π_j)`.
pub fn sigma_true(x: &DenseMatrix, pi: &[f64]) -> Result<Vec<f64>> {
    check_pi(pi, x.cols())?;
    Ok(column_mean_squares(x)
        .iter()
        .zip(pi)
        .map(|(m, &pj)| m * pj / (1.0 - pj))
        .collect())
}

pub fn column_mean_squares(m: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v * v;
        }
    }
    let inv = 1.0 / m.rows().max(1) as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

/// `max_j (1/n) Σ_i X_ij⁴`.
pub fn max_fourth_moment(m: &DenseMatrix) -> f64 {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v.powi(4);
        }
    }
    out.iter().fold(0.0f64, |a, &b| a.max(b)) / m.rows().max(1) as f64
}
