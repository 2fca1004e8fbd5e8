//! Core model types: Gram matrices, design normalization, coherence and the
//! stochastic error matrices of the errors-in-variables model
//! `y = Xθ* + ξ`, `Z = X + Ξ`.

use crate::error::{MuselError, Result};
use crate::matrix::{norm2, DenseMatrix};
use serde::{Deserialize, Serialize};

/// Constraint set for the regression vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `θ ∈ R₊^p`; every selector is an exact LP here.
    #[default]
    NonnegativeOrthant,
    /// `θ ∈ R^p`.
    AllReals,
}

impl Domain {
    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        match self {
            Domain::AllReals => true,
            Domain::NonnegativeOrthant => theta.iter().all(|&t| t >= -tol),
        }
    }
}

/// Symmetric `p×p` matrix of the form `XᵀX/n` (or an estimate of it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix(DenseMatrix);

impl GramMatrix {
    pub const SYMMETRY_TOL: f64 = 1e-12;

    /// Wraps a square matrix, checking symmetry to a relative tolerance.
    pub fn new(m: DenseMatrix) -> Result<Self> {
        Self::with_tolerance(m, Self::SYMMETRY_TOL)
    }

    pub fn with_tolerance(m: DenseMatrix, rel_tol: f64) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(MuselError::Dimension(format!(
                "Gram matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let scale = m.max_abs().max(1.0);
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                if (m.get(i, j) - m.get(j, i)).abs() > rel_tol * scale {
                    return Err(MuselError::InvalidArgument(format!(
                        "Gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn identity(p: usize) -> Self {
        Self(DenseMatrix::identity(p))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.0.mul_vec(v)
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        crate::matrix::dot(v, &self.mul_vec(v))
    }
}

/// `(1/n) XᵀX`.
pub fn gram(x: &DenseMatrix) -> Result<GramMatrix> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(MuselError::Dimension(format!(
            "gram needs a non-empty matrix, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let mut g = x.tr_mul(x)?;
    g.scale(1.0 / x.rows() as f64);
    // Exact symmetry: copy the upper triangle onto the lower one.
    let p = g.cols();
    for i in 0..p {
        for j in 0..i {
            let v = g.get(j, i);
            g.set(i, j, v);
        }
    }
    Ok(GramMatrix(g))
}

/// Centers every column and rescales it so that the Gram matrix has unit
/// diagonal.
pub fn normalize_design(x: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 || p == 0 {
        return Err(MuselError::Dimension("empty design".into()));
    }
    let mut out = x.clone();
    for j in 0..p {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss: f64 = centered.iter().map(|v| v * v).sum();
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if ss <= 1e-24 * scale * scale * n as f64 || ss == 0.0 {
            return Err(MuselError::ConstantColumn(j));
        }
        let factor = (n as f64 / ss).sqrt();
        for (i, c) in centered.iter().enumerate() {
            out.set(i, j, c * factor);
        }
    }
    Ok(out)
}

/// Coherence `ρ = max_{i≠j} |Ψ_ij|`; requires a unit diagonal.
pub fn coherence(psi: &GramMatrix) -> Result<f64> {
    coherence_with_tol(psi, 1e-8)
}

pub fn coherence_with_tol(psi: &GramMatrix, diag_tol: f64) -> Result<f64> {
    let p = psi.dim();
    for i in 0..p {
        let d = psi.get(i, i);
        if (d - 1.0).abs() > diag_tol {
            return Err(MuselError::NonUnitDiagonal { index: i, value: d });
        }
    }
    let mut rho = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                rho = rho.max(psi.get(i, j).abs());
            }
        }
    }
    Ok(rho)
}

/// The stochastic error terms `M⁽¹⁾ … M⁽⁵⁾`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMatrices {
    /// `(1/n) XᵀΞ`
    pub m1: DenseMatrix,
    /// `(1/n) Xᵀξ`
    pub m2: Vec<f64>,
    /// `(1/n) Ξᵀξ`
    pub m3: Vec<f64>,
    /// `(1/n) (ΞᵀΞ − Diag{ΞᵀΞ})`, zero diagonal.
    pub m4: DenseMatrix,
    /// Diagonal of `(1/n) Diag{ΞᵀΞ} − D`.
    pub m5: Vec<f64>,
}

impl ErrorMatrices {
    pub fn m5_matrix(&self) -> DenseMatrix {
        DenseMatrix::diag(&self.m5)
    }

    /// `|M⁽ⁱ⁾|_∞` for `i = 1..5`.
    pub fn sup_norms(&self) -> [f64; 5] {
        use crate::matrix::norm_inf;
        [
            self.m1.max_abs(),
            norm_inf(&self.m2),
            norm_inf(&self.m3),
            self.m4.max_abs(),
            norm_inf(&self.m5),
        ]
    }
}

/// Splits a square matrix into `Diag{A}` and `A − Diag{A}`.
pub fn split_diagonal(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let p = a.rows();
    let mut diag = DenseMatrix::zeros(p, p);
    let mut off = a.clone();
    for i in 0..p {
        diag.set(i, i, a.get(i, i));
        off.set(i, i, 0.0);
    }
    (diag, off)
}

pub fn error_matrices(
    x: &DenseMatrix,
    xi_mat: &DenseMatrix,
    xi: &[f64],
    d: &[f64],
) -> Result<ErrorMatrices> {
    let (n, p) = (x.rows(), x.cols());
    if xi_mat.rows() != n || xi_mat.cols() != p || xi.len() != n || d.len() != p || n == 0 {
        return Err(MuselError::Dimension(format!(
            "error_matrices: X {}x{}, Ξ {}x{}, ξ {}, D {}",
            n,
            p,
            xi_mat.rows(),
            xi_mat.cols(),
            xi.len(),
            d.len()
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mut m1 = x.tr_mul(xi_mat)?;
    m1.scale(inv_n);
    let m2: Vec<f64> = x.tr_mul_vec(xi).into_iter().map(|v| v * inv_n).collect();
    let m3: Vec<f64> = xi_mat.tr_mul_vec(xi).into_iter().map(|v| v * inv_n).collect();
    let mut xtx = xi_mat.tr_mul(xi_mat)?;
    xtx.scale(inv_n);
    let (diag, m4) = split_diagonal(&xtx);
    let m5 = (0..p).map(|j| diag.get(j, j) - d[j]).collect();
    Ok(ErrorMatrices { m1, m2, m3, m4, m5 })
}

/// Simulation-side quantities that are never observed in practice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub x: DenseMatrix,
    pub xi_mat: DenseMatrix,
    pub xi: Vec<f64>,
    pub theta_star: Vec<f64>,
}

/// Observed data plus an optional ground truth for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub z: DenseMatrix,
    pub y: Vec<f64>,
    pub domain: Domain,
    pub truth: Option<GroundTruth>,
}

impl ProblemInstance {
    pub fn new(
        z: DenseMatrix,
        y: Vec<f64>,
        domain: Domain,
        truth: Option<GroundTruth>,
    ) -> Result<Self> {
        crate::matrix::check_finite(&y, "y")?;
        if z.rows() != y.len() {
            return Err(MuselError::Dimension(format!(
                "Z has {} rows but y has {} entries",
                z.rows(),
                y.len()
            )));
        }
        if let Some(t) = &truth {
            let (n, p) = (z.rows(), z.cols());
            if t.x.rows() != n
                || t.x.cols() != p
                || t.xi_mat.rows() != n
                || t.xi_mat.cols() != p
                || t.xi.len() != n
                || t.theta_star.len() != p
            {
                return Err(MuselError::Dimension("ground truth dimensions".into()));
            }
            let fit = t.x.mul_vec(&t.theta_star);
            let resid: Vec<f64> = y
                .iter()
                .zip(fit.iter().zip(&t.xi))
                .map(|(yi, (f, e))| yi - f - e)
                .collect();
            if norm2(&resid) > 1e-10 * norm2(&y).max(f64::MIN_POSITIVE) {
                return Err(MuselError::InvalidArgument(
                    "y does not equal Xθ* + ξ".into(),
                ));
            }
            let zr = z.sub(&t.x)?.sub(&t.xi_mat)?;
            if zr.max_abs() > 1e-10 * z.max_abs().max(1.0) {
                return Err(MuselError::InvalidArgument("Z does not equal X + Ξ".into()));
            }
        }
        Ok(Self {
            z,
            y,
            domain,
            truth,
        })
    }

    pub fn n(&self) -> usize {
        self.z.rows()
    }

    pub fn p(&self) -> usize {
        self.z.cols()
    }
}
