//! ℓ1-minimizing selectors over the feasible set
//!
//! ```text
//! A(μ, τ) = { θ ∈ Θ : |(1/n)Zᵀ(y − Zθ) + D̂θ|_∞ ≤ μ|θ|₁ + τ }
//! ```
//!
//! With `D̂ = 0` this is the MU selector, with `μ = 0` as well it is the
//! Dantzig selector, and with a compensation diagonal `D̂` it is the
//! compensated MU selector.
//!
//! Over `Θ = R₊^p` the set is polyhedral and one LP gives the exact
//! minimizer. Over `Θ = R^p` the term `μ|θ|₁` is not linear; the solver
//! searches for the crossing point of `r ↦ f(r) − r`, where `f(r)` is the
//! minimal ℓ1 norm under the relaxed bound `μr + τ` (an LP after splitting
//! `θ` into positive and negative parts).

use crate::error::{MuselError, Result};
use crate::lp::{solve_lp, LinearProgram, LpOptions, LpStatus};
use crate::matrix::{check_finite, norm1, norm_inf, DenseMatrix};
use crate::model::Domain;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub mu: f64,
    pub tau: f64,
    /// Diagonal of `D̂`; `None` means no compensation.
    pub compensation: Option<Vec<f64>>,
    pub domain: Domain,
    pub nonzero_threshold: f64,
    pub lp: LpOptions,
    pub fixed_point_max_rounds: usize,
    pub fixed_point_tol: f64,
}

impl SelectorConfig {
    pub fn new(mu: f64, tau: f64) -> Self {
        Self {
            mu,
            tau,
            compensation: None,
            domain: Domain::NonnegativeOrthant,
            nonzero_threshold: 1e-8,
            lp: LpOptions::default(),
            fixed_point_max_rounds: 50,
            fixed_point_tol: 1e-8,
        }
    }

    pub fn with_compensation(mut self, d_hat: Vec<f64>) -> Self {
        self.compensation = Some(d_hat);
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(MuselError::InvalidArgument(format!("mu must be finite and >= 0, got {}", self.mu)));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(MuselError::InvalidArgument(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        if let Some(d) = &self.compensation {
            check_finite(d, "compensation")?;
            if let Some(j) = d.iter().position(|&v| v < 0.0) {
                return Err(MuselError::InvalidArgument(format!(
                    "compensation entry {j} is negative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub status: LpStatus,
    /// Simplex iterations summed over every LP solved.
    pub iterations: usize,
    pub lp_solves: usize,
    /// Upper bound on `|θ̂|₁ − min`, reported by the `Θ = R^p` search.
    pub optimality_gap: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub theta: Vec<f64>,
    pub l1_norm: f64,
    pub support: Vec<usize>,
    /// Witness `u` of the equivalent pair formulation.
    pub pair_u: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    fn new(theta: Vec<f64>, threshold: f64, diagnostics: Diagnostics) -> Self {
        let support = support_of(&theta, threshold);
        Self {
            l1_norm: norm1(&theta),
            theta,
            support,
            pair_u: None,
            diagnostics,
        }
    }

    pub fn status(&self) -> LpStatus {
        self.diagnostics.status
    }
}

pub fn support_of(theta: &[f64], threshold: f64) -> Vec<usize> {
    theta
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > threshold)
        .map(|(j, _)| j)
        .collect()
}

/// The data that enters the constraint: `N(θ) = c − Aθ` with
/// `c = (1/n)Zᵀy` and `A = (1/n)ZᵀZ − D̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorProblem {
    c: Vec<f64>,
    a: DenseMatrix,
}

impl SelectorProblem {
    pub fn new(z: &DenseMatrix, y: &[f64], compensation: Option<&[f64]>) -> Result<Self> {
        let (n, p) = (z.rows(), z.cols());
        if y.len() != n {
            return Err(MuselError::Dimension(format!(
                "Z has {n} rows but y has {} entries",
                y.len()
            )));
        }
        if n == 0 || p == 0 {
            return Err(MuselError::Dimension("empty design".into()));
        }
        check_finite(y, "y")?;
        let inv_n = 1.0 / n as f64;
        let c: Vec<f64> = z.tr_mul_vec(y).into_iter().map(|v| v * inv_n).collect();
        let mut a = crate::model::gram(z)?.into_matrix();
        if let Some(d) = compensation {
            if d.len() != p {
                return Err(MuselError::Dimension(format!(
                    "compensation has {} entries, expected {p}",
                    d.len()
                )));
            }
            for (j, &dj) in d.iter().enumerate() {
                a.set(j, j, a.get(j, j) - dj);
            }
        }
        Ok(Self { c, a })
    }

    /// Builds the problem from `c` and `A` directly.
    pub fn from_parts(c: Vec<f64>, a: DenseMatrix) -> Result<Self> {
        if a.rows() != c.len() || a.cols() != c.len() {
            return Err(MuselError::Dimension("A must be p×p with p = len(c)".into()));
        }
        check_finite(&c, "c")?;
        Ok(Self { c, a })
    }

    /// The same problem with `D̂` subtracted from the diagonal of `A`.
    pub fn with_compensation(&self, d_hat: &[f64]) -> Result<Self> {
        if d_hat.len() != self.p() {
            return Err(MuselError::Dimension(format!(
                "compensation has {} entries, expected {}",
                d_hat.len(),
                self.p()
            )));
        }
        let mut a = self.a.clone();
        for (j, &dj) in d_hat.iter().enumerate() {
            a.set(j, j, a.get(j, j) - dj);
        }
        Ok(Self { c: self.c.clone(), a })
    }

    pub fn p(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    /// `N(θ) = (1/n)Zᵀ(y − Zθ) + D̂θ`.
    pub fn constraint_vector(&self, theta: &[f64]) -> Vec<f64> {
        let at = self.a.mul_vec(theta);
        self.c.iter().zip(at).map(|(c, v)| c - v).collect()
    }

    /// Exact LP over `R₊^p`: `min Σθ` subject to
    /// `±(c − Aθ) ≤ μΣθ + τ`, `θ ≥ 0`.
    pub fn direct_lp(&self, mu: f64, tau: f64) -> LinearProgram {
        let p = self.p();
        let mut lp = LinearProgram::new(vec![1.0; p]);
        for i in 0..p {
            let ai = self.a.row(i);
            lp.add_le(ai.iter().map(|v| -v - mu).collect(), tau - self.c[i]);
        }
        for i in 0..p {
            let ai = self.a.row(i);
            lp.add_le(ai.iter().map(|v| v - mu).collect(), tau + self.c[i]);
        }
        lp
    }

    /// The pair formulation over `(θ, u) ∈ R₊^p × R^p`:
    /// `|N(θ) + u|_∞ ≤ τ`, `|u|_∞ ≤ μΣθ`. Rows come in four blocks of `p`.
    pub fn pair_lp(&self, mu: f64, tau: f64) -> LinearProgram {
        let p = self.p();
        let mut obj = vec![1.0; p];
        obj.extend(std::iter::repeat_n(0.0, p));
        let mut lp = LinearProgram::new(obj);
        for j in p..2 * p {
            lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
        }
        let unit = |i: usize, s: f64| {
            let mut e = vec![0.0; p];
            e[i] = s;
            e
        };
        for i in 0..p {
            let mut row: Vec<f64> = self.a.row(i).iter().map(|v| -v).collect();
            row.extend(unit(i, 1.0));
            lp.add_le(row, tau - self.c[i]);
        }
        for i in 0..p {
            let mut row: Vec<f64> = self.a.row(i).to_vec();
            row.extend(unit(i, -1.0));
            lp.add_le(row, tau + self.c[i]);
        }
        for sign in [1.0, -1.0] {
            for i in 0..p {
                let mut row = vec![-mu; p];
                row.extend(unit(i, sign));
                lp.add_le(row, 0.0);
            }
        }
        lp
    }

    /// Sign-split LP over `R^p` with the relaxing radius held fixed:
    /// `min Σ(θ⁺ + θ⁻)` subject to `|c − A(θ⁺ − θ⁻)|_∞ ≤ bound`.
    pub fn split_lp(&self, bound: f64) -> LinearProgram {
        let p = self.p();
        let mut lp = LinearProgram::new(vec![1.0; 2 * p]);
        for i in 0..p {
            let ai = self.a.row(i);
            let mut row: Vec<f64> = ai.iter().map(|v| -v).collect();
            row.extend_from_slice(ai);
            lp.add_le(row, bound - self.c[i]);
        }
        for i in 0..p {
            let ai = self.a.row(i);
            let mut row = ai.to_vec();
            row.extend(ai.iter().map(|v| -v));
            lp.add_le(row, bound + self.c[i]);
        }
        lp
    }

    pub fn feasibility(&self, theta: &[f64], cfg: &SelectorConfig) -> Feasibility {
        let n_vec = self.constraint_vector(theta);
        let residual = norm_inf(&n_vec) - (cfg.mu * norm1(theta) + cfg.tau);
        let tol = self.feasibility_tol(cfg);
        Feasibility {
            residual,
            feasible: residual <= tol && cfg.domain.contains(theta, tol),
        }
    }

    fn feasibility_tol(&self, cfg: &SelectorConfig) -> f64 {
        10.0 * cfg.lp.feas_tol * (1.0 + cfg.tau + norm_inf(&self.c))
    }

    /// The `u` that pairs with a feasible `θ` in the pair formulation.
    pub fn lift_to_pair(&self, theta: &[f64], cfg: &SelectorConfig) -> Result<Vec<f64>> {
        let f = self.feasibility(theta, cfg);
        if !f.feasible {
            return Err(MuselError::Infeasible(format!(
                "θ violates the selector constraint by {:.3e}",
                f.residual
            )));
        }
        let radius = cfg.mu * norm1(theta);
        Ok(self
            .constraint_vector(theta)
            .into_iter()
            .map(|ni| {
                if ni.abs() <= radius {
                    -ni
                } else {
                    -ni.signum() * radius
                }
            })
            .collect())
    }

    /// Whether `(θ, u)` satisfies `|N(θ) + u|_∞ ≤ τ` and `|u|_∞ ≤ μ|θ|₁`.
    pub fn in_pair_set(&self, theta: &[f64], u: &[f64], cfg: &SelectorConfig) -> bool {
        let tol = self.feasibility_tol(cfg);
        let n_vec = self.constraint_vector(theta);
        let shifted = n_vec.iter().zip(u).map(|(a, b)| a + b).fold(0.0f64, |m, v| m.max(v.abs()));
        shifted <= cfg.tau + tol
            && norm_inf(u) <= cfg.mu * norm1(theta) + tol
            && cfg.domain.contains(theta, tol)
    }

    pub fn solve(&self, cfg: &SelectorConfig) -> Result<Estimate> {
        cfg.validate()?;
        let mut est = match cfg.domain {
            Domain::NonnegativeOrthant => self.solve_nonneg(cfg)?,
            Domain::AllReals => self.solve_free(cfg)?,
        };
        if matches!(est.status(), LpStatus::Optimal | LpStatus::IterationLimit) {
            est.pair_u = self.lift_to_pair(&est.theta, cfg).ok();
        }
        Ok(est)
    }

    fn solve_nonneg(&self, cfg: &SelectorConfig) -> Result<Estimate> {
        let sol = solve_lp(&self.direct_lp(cfg.mu, cfg.tau), &cfg.lp)?;
        let theta: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
        let diagnostics = Diagnostics {
            status: sol.status,
            iterations: sol.iterations,
            lp_solves: 1,
            optimality_gap: None,
            warning: None,
        };
        Ok(Estimate::new(theta, cfg.nonzero_threshold, diagnostics))
    }

    fn solve_split(&self, bound: f64, cfg: &SelectorConfig) -> Result<(LpStatus, Vec<f64>, usize)> {
        let p = self.p();
        let sol = solve_lp(&self.split_lp(bound), &cfg.lp)?;
        let theta = (0..p).map(|j| sol.x[j] - sol.x[p + j]).collect();
        Ok((sol.status, theta, sol.iterations))
    }

    fn solve_free(&self, cfg: &SelectorConfig) -> Result<Estimate> {
        let (mu, tau) = (cfg.mu, cfg.tau);
        let mut iterations = 0;
        let mut lp_solves = 0;

        if mu == 0.0 {
            let (status, theta, it) = self.solve_split(tau, cfg)?;
            let diagnostics = Diagnostics {
                status,
                iterations: it,
                lp_solves: 1,
                optimality_gap: (status == LpStatus::Optimal).then_some(0.0),
                warning: None,
            };
            return Ok(Estimate::new(theta, cfg.nonzero_threshold, diagnostics));
        }

        // h(r) = f(r) − r is strictly decreasing. Every r with h(r) > 0 (or
        // an infeasible LP) is a lower bound on the optimal ℓ1 norm; every
        // LP solution that satisfies the true constraint is a candidate.
        let mut eval = |r: f64| -> Result<(Option<f64>, Vec<f64>)> {
            let (status, theta, it) = self.solve_split(mu * r + tau, cfg)?;
            iterations += it;
            lp_solves += 1;
            match status {
                LpStatus::Optimal => Ok((Some(norm1(&theta)), theta)),
                LpStatus::Infeasible => Ok((None, theta)),
                other => Err(MuselError::Infeasible(format!(
                    "inner LP ended with status {other:?}"
                ))),
            }
        };

        let mut lower = 0.0f64;
        let mut best: Option<Vec<f64>> = None;
        let consider = |theta: Vec<f64>, best: &mut Option<Vec<f64>>| {
            if self.feasibility(&theta, cfg).feasible
                && best.as_ref().is_none_or(|b| norm1(&theta) < norm1(b))
            {
                *best = Some(theta);
            }
        };

        let (f0, theta0) = eval(0.0)?;
        // (r, h(r)) pairs bracketing the crossing; Illinois halves the
        // stored value of an end that is retained twice in a row.
        let mut lo: (f64, Option<f64>) = (0.0, f0);
        let mut hi: (f64, f64);
        match f0 {
            Some(v0) => {
                consider(theta0, &mut best);
                if v0 == 0.0 {
                    return Ok(self.finish_free(best, 0.0, iterations, lp_solves, cfg));
                }
                let (f1, theta1) = eval(v0)?;
                let f1 = f1.expect("LP feasible at r = 0 stays feasible for larger r");
                if f1 >= v0 {
                    consider(theta1, &mut best);
                    return Ok(self.finish_free(best, v0, iterations, lp_solves, cfg));
                }
                hi = (v0, f1 - v0);
            }
            None => {
                let r_big = ((norm_inf(&self.c) - tau) / mu).max(0.0);
                hi = (r_big, -r_big);
                if r_big == 0.0 {
                    consider(vec![0.0; self.p()], &mut best);
                    return Ok(self.finish_free(best, 0.0, iterations, lp_solves, cfg));
                }
            }
        }
        lower = lower.max(lo.0);

        let mut last_hi: Option<Vec<f64>> = None;
        let mut side = 0i32;
        for _ in 0..cfg.fixed_point_max_rounds {
            if let Some(b) = &best {
                if norm1(b) - lower <= cfg.fixed_point_tol * lower.max(1.0) {
                    break;
                }
            }
            if hi.0 - lo.0 <= cfg.fixed_point_tol * hi.0.max(1.0) {
                break;
            }
            // Illinois-modified regula falsi when both ends are finite.
            let r = match lo.1 {
                Some(hl) => {
                    let cand = lo.0 + hl * (hi.0 - lo.0) / (hl - hi.1);
                    if cand > lo.0 && cand < hi.0 {
                        cand
                    } else {
                        0.5 * (lo.0 + hi.0)
                    }
                }
                None => 0.5 * (lo.0 + hi.0),
            };
            let (fr, theta) = eval(r)?;
            match fr {
                Some(v) if v >= r => {
                    consider(theta, &mut best);
                    lo = (r, Some(v - r));
                    lower = lower.max(r);
                    if side == 1 {
                        hi.1 *= 0.5;
                    }
                    side = 1;
                }
                Some(v) => {
                    consider(theta.clone(), &mut best);
                    last_hi = Some(theta);
                    hi = (r, v - r);
                    if side == -1 {
                        lo.1 = lo.1.map(|h| h * 0.5);
                    }
                    side = -1;
                }
                None => {
                    lo = (r, None);
                    lower = lower.max(r);
                    side = 0;
                }
            }
        }
        let converged = |best: &Option<Vec<f64>>| {
            best.as_ref()
                .is_some_and(|b| norm1(b) - lower <= cfg.fixed_point_tol * lower.max(1.0))
        };
        if !converged(&best) {
            // The relaxed LPs can stall where their minimizers undershoot the
            // radius; the exact LP inside one sign orthant always gives a
            // feasible point to compare against the lower bound.
            let seeds: Vec<Vec<f64>> = best.iter().cloned().chain(last_hi).collect();
            for seed in seeds {
                let sigma: Vec<f64> = seed
                    .iter()
                    .zip(&self.c)
                    .map(|(&t, &c)| {
                        let v = if t.abs() > cfg.nonzero_threshold { t } else { c };
                        if v < 0.0 { -1.0 } else { 1.0 }
                    })
                    .collect();
                let sol = solve_lp(&self.orthant_lp(&sigma, mu, tau), &cfg.lp)?;
                iterations += sol.iterations;
                lp_solves += 1;
                if sol.status == LpStatus::Optimal {
                    let theta = sol.x.iter().zip(&sigma).map(|(w, s)| w.max(0.0) * s).collect();
                    consider(theta, &mut best);
                }
            }
        }
        Ok(self.finish_free(best, lower, iterations, lp_solves, cfg))
    }

    /// Exact LP restricted to the orthant `{σ_j θ_j ≥ 0}`, in `w = σ∘θ ≥ 0`.
    fn orthant_lp(&self, sigma: &[f64], mu: f64, tau: f64) -> LinearProgram {
        let p = self.p();
        let mut lp = LinearProgram::new(vec![1.0; p]);
        for i in 0..p {
            let ai = self.a.row(i);
            lp.add_le(ai.iter().zip(sigma).map(|(v, s)| -v * s - mu).collect(), tau - self.c[i]);
        }
        for i in 0..p {
            let ai = self.a.row(i);
            lp.add_le(ai.iter().zip(sigma).map(|(v, s)| v * s - mu).collect(), tau + self.c[i]);
        }
        lp
    }

    fn finish_free(
        &self,
        best: Option<Vec<f64>>,
        lower: f64,
        iterations: usize,
        lp_solves: usize,
        cfg: &SelectorConfig,
    ) -> Estimate {
        match best {
            Some(theta) => {
                let gap = (norm1(&theta) - lower).max(0.0);
                let converged = gap <= cfg.fixed_point_tol * lower.max(1.0);
                let diagnostics = Diagnostics {
                    status: if converged {
                        LpStatus::Optimal
                    } else {
                        LpStatus::IterationLimit
                    },
                    iterations,
                    lp_solves,
                    optimality_gap: Some(gap),
                    warning: (!converged).then(|| {
                        format!("fixed-point search stopped with optimality gap {gap:.3e}")
                    }),
                };
                Estimate::new(theta, cfg.nonzero_threshold, diagnostics)
            }
            None => {
                let diagnostics = Diagnostics {
                    status: LpStatus::IterationLimit,
                    iterations,
                    lp_solves,
                    optimality_gap: None,
                    warning: Some("no feasible point found by the fixed-point search".into()),
                };
                Estimate::new(vec![0.0; self.p()], cfg.nonzero_threshold, diagnostics)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `|N(θ)|_∞ − (μ|θ|₁ + τ)`.
    pub residual: f64,
    pub feasible: bool,
}

/// LP over the pair formulation; requires `Θ = R₊^p`.
pub fn build_cmu_lp(z: &DenseMatrix, y: &[f64], cfg: &SelectorConfig) -> Result<LinearProgram> {
    cfg.validate()?;
    if cfg.domain != Domain::NonnegativeOrthant {
        return Err(MuselError::InvalidArgument(
            "the pair LP is exact only over the nonnegative orthant".into(),
        ));
    }
    let prob = SelectorProblem::new(z, y, cfg.compensation.as_deref())?;
    Ok(prob.pair_lp(cfg.mu, cfg.tau))
}

/// Compensated MU selector; `cfg.compensation` must hold `D̂`.
pub fn solve_compensated_mu(z: &DenseMatrix, y: &[f64], cfg: &SelectorConfig) -> Result<Estimate> {
    let d = cfg.compensation.as_deref().ok_or_else(|| {
        MuselError::InvalidArgument("compensated selector needs a compensation diagonal".into())
    })?;
    SelectorProblem::new(z, y, Some(d))?.solve(cfg)
}

/// MU selector: the compensation in `cfg` is ignored.
pub fn solve_mu_selector(z: &DenseMatrix, y: &[f64], cfg: &SelectorConfig) -> Result<Estimate> {
    let cfg = SelectorConfig {
        compensation: None,
        ..cfg.clone()
    };
    SelectorProblem::new(z, y, None)?.solve(&cfg)
}

pub fn solve_dantzig(z: &DenseMatrix, y: &[f64], tau: f64, domain: Domain) -> Result<Estimate> {
    let cfg = SelectorConfig::new(0.0, tau).with_domain(domain);
    SelectorProblem::new(z, y, None)?.solve(&cfg)
}

pub fn feasibility_check(
    theta: &[f64],
    z: &DenseMatrix,
    y: &[f64],
    cfg: &SelectorConfig,
) -> Result<Feasibility> {
    if theta.len() != z.cols() {
        return Err(MuselError::Dimension("θ length must equal the number of columns".into()));
    }
    Ok(SelectorProblem::new(z, y, cfg.compensation.as_deref())?.feasibility(theta, cfg))
}

pub fn lift_to_pair(
    theta: &[f64],
    z: &DenseMatrix,
    y: &[f64],
    cfg: &SelectorConfig,
) -> Result<Vec<f64>> {
    if theta.len() != z.cols() {
        return Err(MuselError::Dimension("θ length must equal the number of columns".into()));
    }
    SelectorProblem::new(z, y, cfg.compensation.as_deref())?.lift_to_pair(theta, cfg)
}

/// How the missingness rate enters the observed-scale selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiSpec {
    Known(f64),
    /// Pooled zero frequency of `Z̃`.
    Estimated,
}

/// Selector problem in the scale of the masked matrix `Z̃`:
/// `N(θ) = (1/n)Z̃ᵀ(y(1 − π) − Z̃θ) + D̃θ` with `D̃_j = π (1/n)Σ_i Z̃_ij²`,
/// the unbiased correction of the diagonal of `Z̃ᵀZ̃/n` in this scale.
pub fn missing_data_problem(z_tilde: &DenseMatrix, y: &[f64], pi: f64) -> Result<SelectorProblem> {
    if !(0.0..1.0).contains(&pi) {
        return Err(MuselError::InvalidArgument(format!("pi must lie in [0, 1), got {pi}")));
    }
    if let Some(j) = crate::missing::fully_missing_column(z_tilde) {
        return Err(MuselError::MissingColumn(j));
    }
    let d: Vec<f64> = crate::missing::column_mean_squares(z_tilde)
        .into_iter()
        .map(|m| pi * m)
        .collect();
    let mut prob = SelectorProblem::new(z_tilde, y, Some(&d))?;
    prob.c.iter_mut().for_each(|c| *c *= 1.0 - pi);
    Ok(prob)
}

/// `(μ̃, τ̃)` that make the observed-scale selector select over the same set
/// as the rescaled-matrix selector with `(μ, τ)`.
pub fn observed_scale_constants(mu: f64, tau: f64, pi: f64) -> (f64, f64) {
    let f = (1.0 - pi) * (1.0 - pi);
    (mu * f, tau * f)
}

/// Missing-data selector on the masked matrix. `cfg.mu` and `cfg.tau` are
/// used as `μ̃, τ̃` directly; `cfg.compensation` is ignored.
pub fn solve_missing_data_cmu(
    z_tilde: &DenseMatrix,
    y: &[f64],
    pi: PiSpec,
    cfg: &SelectorConfig,
) -> Result<Estimate> {
    let pi = match pi {
        PiSpec::Known(v) => v,
        PiSpec::Estimated => {
            let masked = crate::missing::MaskedDesign::observed(z_tilde.clone());
            crate::missing::estimate_pi(&masked, crate::missing::PiMode::Pooled)[0]
        }
    };
    let prob = missing_data_problem(z_tilde, y, pi)?;
    let cfg = SelectorConfig { compensation: None, ..cfg.clone() };
    prob.solve(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn random_instance(n: usize, p: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DenseMatrix::new(n, p, (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (z, y)
    }

    #[test]
    fn zero_is_feasible_for_trivial_lp() {
        let z = m(&[vec![1.0]]);
        let cfg = SelectorConfig::new(0.0, 1.0).with_compensation(vec![0.0]);
        let lp = build_cmu_lp(&z, &[0.0], &cfg).unwrap();
        assert_eq!(lp.num_vars(), 2);
        assert_eq!(lp.ineq.len(), 4);
        let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.x[0], 0.0);
    }

    #[test]
    fn pair_lp_entries_match_hand_assembly() {
        // n = 2, p = 2, D̂ = diag(0.1, 0.2), μ = 0.3, τ = 0.05.
        let z = m(&[vec![1.0, 2.0], vec![3.0, -1.0]]);
        let y = [1.0, -2.0];
        let cfg = SelectorConfig::new(0.3, 0.05).with_compensation(vec![0.1, 0.2]);
        let lp = build_cmu_lp(&z, &y, &cfg).unwrap();
        // (1/n)ZᵀZ = [[5, -0.5], [-0.5, 2.5]]; A = [[4.9, -0.5], [-0.5, 2.3]].
        // c = (1/n)Zᵀy = (-2.5, 2).
        let expected: [([f64; 4], f64); 8] = [
            ([-4.9, 0.5, 1.0, 0.0], 0.05 + 2.5),
            ([0.5, -2.3, 0.0, 1.0], 0.05 - 2.0),
            ([4.9, -0.5, -1.0, 0.0], 0.05 - 2.5),
            ([-0.5, 2.3, 0.0, -1.0], 0.05 + 2.0),
            ([-0.3, -0.3, 1.0, 0.0], 0.0),
            ([-0.3, -0.3, 0.0, 1.0], 0.0),
            ([-0.3, -0.3, -1.0, 0.0], 0.0),
            ([-0.3, -0.3, 0.0, -1.0], 0.0),
        ];
        assert_eq!(lp.ineq.len(), 8);
        for (k, (row, rhs)) in expected.iter().enumerate() {
            for j in 0..4 {
                assert!((lp.ineq[k].row[j] - row[j]).abs() < 1e-14, "row {k} col {j}");
            }
            assert!((lp.ineq[k].rhs - rhs).abs() < 1e-14, "rhs {k}");
        }
        assert_eq!(lp.objective, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(lp.lower[2], f64::NEG_INFINITY);
    }

    #[test]
    fn mu_zero_pair_lp_is_dantzig() {
        let (z, y) = random_instance(6, 3, 4);
        let cfg = SelectorConfig::new(0.0, 0.1).with_compensation(vec![0.0; 3]);
        let pair = solve_lp(&build_cmu_lp(&z, &y, &cfg).unwrap(), &cfg.lp).unwrap();
        assert!(pair.x[3..].iter().all(|u| u.abs() < 1e-12));
        let dz = solve_dantzig(&z, &y, 0.1, Domain::NonnegativeOrthant).unwrap();
        assert!((pair.objective_value - dz.l1_norm).abs() < 1e-10);
    }

    #[test]
    fn pair_lp_rejects_free_domain() {
        let (z, y) = random_instance(4, 2, 1);
        let cfg = SelectorConfig::new(0.1, 0.1).with_domain(Domain::AllReals);
        assert!(build_cmu_lp(&z, &y, &cfg).is_err());
    }

    #[test]
    fn exactly_determined_scalar() {
        let cfg = SelectorConfig::new(0.0, 0.0).with_compensation(vec![0.0]);
        let est = solve_compensated_mu(&m(&[vec![1.0]]), &[1.0], &cfg).unwrap();
        assert_eq!(est.status(), LpStatus::Optimal);
        assert!((est.theta[0] - 1.0).abs() < 1e-12);
        assert_eq!(est.support, vec![0]);
    }

    #[test]
    fn zero_response_gives_zero() {
        let (z, _) = random_instance(5, 4, 2);
        for domain in [Domain::NonnegativeOrthant, Domain::AllReals] {
            let cfg = SelectorConfig::new(0.2, 0.0)
                .with_compensation(vec![0.1; 4])
                .with_domain(domain);
            let est = solve_compensated_mu(&z, &[0.0; 5], &cfg).unwrap();
            assert_eq!(est.theta, vec![0.0; 4]);
            assert_eq!(est.l1_norm, 0.0);
        }
    }

    #[test]
    fn compensated_requires_diagonal() {
        let (z, y) = random_instance(4, 2, 3);
        assert!(solve_compensated_mu(&z, &y, &SelectorConfig::new(0.1, 0.1)).is_err());
        let bad = SelectorConfig::new(0.1, 0.1).with_compensation(vec![-1.0, 0.0]);
        assert!(solve_compensated_mu(&z, &y, &bad).is_err());
        assert!(solve_mu_selector(&z, &y, &SelectorConfig::new(-0.1, 0.1)).is_err());
    }

    #[test]
    fn square_system_solved_exactly() {
        // Z invertible, θ* = (0.5, 1) ≥ 0, μ = τ = 0 forces Zθ = y.
        let z = m(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let theta = [0.5, 1.0];
        let y = z.mul_vec(&theta);
        let est = solve_mu_selector(&z, &y, &SelectorConfig::new(0.0, 0.0)).unwrap();
        assert_eq!(est.status(), LpStatus::Optimal);
        for j in 0..2 {
            assert!((est.theta[j] - theta[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn dantzig_zero_when_tau_dominates() {
        let (z, y) = random_instance(6, 4, 9);
        let c = z.tr_mul_vec(&y).iter().map(|v| v / 6.0).collect::<Vec<_>>();
        let est = solve_dantzig(&z, &y, norm_inf(&c), Domain::AllReals).unwrap();
        assert_eq!(est.l1_norm, 0.0);
    }

    #[test]
    fn dantzig_equals_cmu_with_zero_mu_and_compensation() {
        for seed in 0..20 {
            let (z, y) = random_instance(8, 5, 100 + seed);
            let d = solve_dantzig(&z, &y, 0.05, Domain::NonnegativeOrthant).unwrap();
            let cfg = SelectorConfig::new(0.0, 0.05).with_compensation(vec![0.0; 5]);
            let c = solve_compensated_mu(&z, &y, &cfg).unwrap();
            assert_eq!(d.theta, c.theta);
        }
    }

    #[test]
    fn estimates_are_feasible_and_lift() {
        for seed in 0..10 {
            let (z, y) = random_instance(7, 4, 200 + seed);
            for domain in [Domain::NonnegativeOrthant, Domain::AllReals] {
                let cfg = SelectorConfig::new(0.1, 0.05)
                    .with_compensation(vec![0.05; 4])
                    .with_domain(domain);
                let est = solve_compensated_mu(&z, &y, &cfg).unwrap();
                if est.status() == LpStatus::Infeasible {
                    assert_eq!(domain, Domain::NonnegativeOrthant);
                    continue;
                }
                assert_eq!(est.status(), LpStatus::Optimal, "{:?}", est.diagnostics);
                let f = feasibility_check(&est.theta, &z, &y, &cfg).unwrap();
                assert!(f.feasible, "residual {}", f.residual);
                let u = est.pair_u.as_ref().unwrap();
                let prob = SelectorProblem::new(&z, &y, cfg.compensation.as_deref()).unwrap();
                assert!(prob.in_pair_set(&est.theta, u, &cfg));
            }
        }
    }

    #[test]
    fn lift_scalar_example() {
        // N = 0.5 at θ = 0.3 with μ = 1: radius 0.3, u = −0.3, |N + u| = 0.2.
        let prob = SelectorProblem::from_parts(vec![0.5], m(&[vec![0.0]])).unwrap();
        let cfg = SelectorConfig::new(1.0, 0.2);
        let u = prob.lift_to_pair(&[0.3], &cfg).unwrap();
        assert!((u[0] + 0.3).abs() < 1e-15);
        assert!(prob.in_pair_set(&[0.3], &u, &cfg));
        let zero = SelectorProblem::from_parts(vec![0.0], m(&[vec![1.0]])).unwrap();
        assert_eq!(zero.lift_to_pair(&[0.0], &cfg).unwrap(), vec![0.0]);
        assert!(prob.lift_to_pair(&[0.0], &SelectorConfig::new(0.0, 0.1)).is_err());
    }

    #[test]
    fn free_domain_matches_nonneg_when_solution_is_nonneg() {
        // Orthogonal design with positive correlations: the ℓ1 minimizer over
        // R^p is nonnegative, so both domains agree.
        let z = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = [1.0, 0.6];
        let cfg = SelectorConfig::new(0.2, 0.01);
        let a = solve_mu_selector(&z, &y, &cfg).unwrap();
        let b = solve_mu_selector(&z, &y, &cfg.clone().with_domain(Domain::AllReals)).unwrap();
        assert_eq!(b.status(), LpStatus::Optimal);
        assert!((a.l1_norm - b.l1_norm).abs() < 1e-7, "{} vs {}", a.l1_norm, b.l1_norm);
    }

    #[test]
    fn free_domain_matches_orthant_enumeration() {
        // Over R^p the minimum is the best of the 2^p exact orthant LPs.
        for seed in 0..30 {
            let (z, y) = random_instance(7, 4, 300 + seed);
            let prob = SelectorProblem::new(&z, &y, Some(&[0.05; 4])).unwrap();
            let mut brute = f64::INFINITY;
            for mask in 0..16u32 {
                let sigma: Vec<f64> =
                    (0..4).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
                let sol = solve_lp(&prob.orthant_lp(&sigma, 0.1, 0.05), &LpOptions::default()).unwrap();
                if sol.status == LpStatus::Optimal {
                    brute = brute.min(sol.objective_value);
                }
            }
            let cfg = SelectorConfig::new(0.1, 0.05)
                .with_compensation(vec![0.05; 4])
                .with_domain(Domain::AllReals);
            let est = prob.solve(&cfg).unwrap();
            assert_eq!(est.status(), LpStatus::Optimal, "seed {seed}: {:?}", est.diagnostics);
            assert!((est.l1_norm - brute).abs() <= 1e-7 * (1.0 + brute), "seed {seed}: {} vs {brute}", est.l1_norm);
        }
    }

    #[test]
    fn missing_path_without_missingness_is_mu() {
        let (z, y) = random_instance(8, 4, 40);
        let cfg = SelectorConfig::new(0.05, 0.05);
        let a = solve_missing_data_cmu(&z, &y, PiSpec::Estimated, &cfg).unwrap();
        let b = solve_mu_selector(&z, &y, &cfg).unwrap();
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn missing_path_rejects_empty_column() {
        let mut z = DenseMatrix::zeros(3, 2);
        z.set(0, 0, 1.0);
        let err = solve_missing_data_cmu(&z, &[1.0, 0.0, 0.0], PiSpec::Known(0.1), &SelectorConfig::new(0.1, 0.1));
        assert!(matches!(err, Err(MuselError::MissingColumn(1))));
    }

    #[test]
    fn observed_scale_matches_rescaled_path() {
        // With π known, the observed-scale constraint is the rescaled one
        // multiplied by (1 − π)², so both selectors coincide.
        use crate::missing::{apply_mask, rescale, sigma_hat, uniform_pi};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = DenseMatrix::new(20, 5, (0..100).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = x.mul_vec(&[0.5, 0.0, 0.0, 0.3, 0.0]);
        let pi = uniform_pi(0.1, 5);
        let masked = apply_mask(&x, &pi, 78).unwrap();
        let z = rescale(&masked, &pi).unwrap();
        let d = sigma_hat(&masked.z_tilde, &pi).unwrap().sigma_hat_sq;
        let cfg = SelectorConfig::new(0.1, 0.05).with_compensation(d);
        let a = solve_compensated_mu(&z, &y, &cfg).unwrap();
        let (mt, tt) = observed_scale_constants(0.1, 0.05, 0.1);
        let b = solve_missing_data_cmu(&masked.z_tilde, &y, PiSpec::Known(0.1), &SelectorConfig::new(mt, tt)).unwrap();
        assert!((a.l1_norm - b.l1_norm).abs() < 1e-8 * (1.0 + a.l1_norm), "{} vs {}", a.l1_norm, b.l1_norm);
    }

    #[test]
    fn infeasible_reported() {
        // Compensation makes A singular-negative: c − Aθ = 1 − (−1)θ ≥ 1 > τ.
        let prob = SelectorProblem::from_parts(vec![1.0], m(&[vec![-1.0]])).unwrap();
        let est = prob.solve(&SelectorConfig::new(0.0, 0.5)).unwrap();
        assert_eq!(est.status(), LpStatus::Infeasible);
    }
}
