//! Monte Carlo harness: Gaussian design with missing entries, sparse
//! nonnegative signal, MU / compensated MU / Dantzig selectors over a grid of
//! `μ = (1 + δ)δ`.
//!
//! Randomness: the design for each sparsity level comes from
//! `(seed, s, DESIGN)`, and everything drawn per replication (signal,
//! response noise, mask) from `(seed, s, rep)`. All estimators and all `δ`
//! values of a replication therefore see the same data.

use crate::error::{MuselError, Result};
use crate::estimators::{
    missing_data_problem, observed_scale_constants, Estimate, SelectorConfig, SelectorProblem,
};
use crate::lp::LpStatus;
use crate::matrix::{norm2, DenseMatrix};
use crate::missing::{self, PiMode};
use crate::model::{normalize_design, Domain};
use crate::rng::{rng_for, Rng};
use rand::seq::index::sample;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const DESIGN_TAG: u64 = 0x6465_7369_676e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "MU")]
    Mu,
    #[serde(rename = "CMU")]
    Cmu,
    #[serde(rename = "Dantzig")]
    Dantzig,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Mu => "MU",
            Self::Cmu => "CMU",
            Self::Dantzig => "Dantzig",
        }
    }
}

/// `τ = factor · noise_sd · √(2 log(2p/confidence)/n) · max_j √((1/n) Σ_i Z_ij²)`,
/// or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TauRule {
    NoiseScaled { factor: f64, confidence: f64 },
    Fixed(f64),
}

impl Default for TauRule {
    fn default() -> Self {
        Self::NoiseScaled { factor: 0.75, confidence: 0.05 }
    }
}

impl TauRule {
    pub fn tau(&self, z: &DenseMatrix, noise_sd: f64) -> f64 {
        match *self {
            Self::Fixed(t) => t,
            Self::NoiseScaled { factor, confidence } => {
                let (n, p) = (z.rows() as f64, z.cols() as f64);
                let col = missing::column_mean_squares(z)
                    .into_iter()
                    .fold(0.0f64, f64::max)
                    .sqrt();
                factor * noise_sd * (2.0 * (2.0 * p / confidence).ln() / n).sqrt() * col
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PiHandling {
    /// Rescale by the true rate and compensate with `σ̂²` at that rate.
    #[default]
    Known,
    /// Pooled `π̂`; CMU runs on the masked matrix directly.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub s_list: Vec<usize>,
    pub theta_value: f64,
    pub noise_sd: f64,
    pub pi_star: f64,
    pub delta_list: Vec<f64>,
    pub tau_rule: TauRule,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub pi_handling: PiHandling,
    /// Draw a new design for every replication.
    pub fresh_design: bool,
    pub nonzero_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 500,
            s_list: vec![1, 2, 3, 5, 10],
            theta_value: 0.5,
            noise_sd: 0.05 / 1.96,
            pi_star: 0.1,
            delta_list: vec![0.0, 0.01, 0.05, 0.075, 0.1],
            tau_rule: TauRule::default(),
            reps: 100,
            seed: 0,
            estimators: vec![EstimatorKind::Mu, EstimatorKind::Cmu],
            pi_handling: PiHandling::Known,
            fresh_design: false,
            nonzero_threshold: 1e-8,
        }
    }
}

pub const PRESETS: [&str; 7] = [
    "table1", "table2", "table3", "table4", "table5", "reduced", "reduced-estimated-pi",
];

impl SimConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let table = |s| Self { s_list: vec![s], ..Self::default() };
        Ok(match name {
            "table1" => table(1),
            "table2" => table(2),
            "table3" => table(3),
            "table4" => table(5),
            "table5" => table(10),
            "reduced" => Self { n: 40, p: 120, s_list: vec![1, 2], reps: 30, ..Self::default() },
            "reduced-estimated-pi" => Self {
                pi_handling: PiHandling::Estimated,
                ..Self::preset("reduced")?
            },
            other => {
                return Err(MuselError::InvalidArgument(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MuselError::InvalidArgument(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if let Some(&s) = self.s_list.iter().find(|&&s| s > self.p) {
            return bad(format!("s = {s} exceeds p = {}", self.p));
        }
        if !(0.0..1.0).contains(&self.pi_star) {
            return bad(format!("pi_star must lie in [0, 1), got {}", self.pi_star));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and >= 0".into());
        }
        if self.delta_list.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("delta values must be finite and >= 0".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        match self.tau_rule {
            TauRule::Fixed(t) if !(t >= 0.0 && t.is_finite()) => bad("fixed tau must be >= 0".into()),
            TauRule::NoiseScaled { factor, confidence }
                if !(factor >= 0.0 && confidence > 0.0 && confidence < 1.0) =>
            {
                bad("tau rule needs factor >= 0 and confidence in (0, 1)".into())
            }
            _ => Ok(()),
        }
    }
}

pub fn mu_of_delta(delta: f64) -> f64 {
    (1.0 + delta) * delta
}

/// Standard Gaussian entries, centered and scaled to unit Gram diagonal.
pub fn gen_design(n: usize, p: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    if n < 2 {
        return Err(MuselError::InvalidArgument("design needs n >= 2".into()));
    }
    let data = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    normalize_design(&DenseMatrix::new(n, p, data)?)
}

/// `s` coordinates chosen uniformly without replacement, set to `value`.
pub fn gen_theta(p: usize, s: usize, value: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if s > p {
        return Err(MuselError::InvalidArgument(format!("s = {s} exceeds p = {p}")));
    }
    let mut theta = vec![0.0; p];
    for j in sample(rng, p, s) {
        theta[j] = value;
    }
    Ok(theta)
}

pub fn gen_response(x: &DenseMatrix, theta: &[f64], noise_sd: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let mut y = x.mul_vec(theta);
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).map_err(|e| MuselError::InvalidArgument(e.to_string()))?;
        y.iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub err1: f64,
    pub err2: f64,
    pub err2_over_n: f64,
    pub nb1: usize,
    pub nb2: usize,
    pub exact: bool,
}

/// `Err₁ = |θ̂ − θ*|₂²`, `Err₂ = |X(θ̂ − θ*)|₂²`, support counts.
pub fn metrics(theta_hat: &[f64], theta_star: &[f64], x: &DenseMatrix, threshold: f64) -> RunMetrics {
    let diff: Vec<f64> = theta_hat.iter().zip(theta_star).map(|(a, b)| a - b).collect();
    let err1 = norm2(&diff).powi(2);
    let err2 = norm2(&x.mul_vec(&diff)).powi(2);
    let mut nb1 = 0;
    let mut nb2 = 0;
    let mut exact = true;
    for (h, t) in theta_hat.iter().zip(theta_star) {
        let (in_hat, in_star) = (h.abs() > threshold, *t != 0.0);
        nb1 += in_hat as usize;
        nb2 += (in_hat && in_star) as usize;
        exact &= in_hat == in_star;
    }
    RunMetrics { err1, err2, err2_over_n: err2 / x.rows() as f64, nb1, nb2, exact }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub s: usize,
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub delta: f64,
    pub mu: f64,
    pub tau: f64,
    pub status: LpStatus,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

/// One replication's data: design, truth and the observed quantities.
#[derive(Debug, Clone)]
pub struct RepData {
    pub x: DenseMatrix,
    pub theta_star: Vec<f64>,
    pub y: Vec<f64>,
    pub z_tilde: DenseMatrix,
}

pub fn design_for(cfg: &SimConfig, s: usize, rep: usize) -> Result<DenseMatrix> {
    let labels: &[u64] = if cfg.fresh_design {
        &[s as u64, rep as u64, DESIGN_TAG]
    } else {
        &[s as u64, DESIGN_TAG]
    };
    gen_design(cfg.n, cfg.p, &mut rng_for(cfg.seed, labels))
}

pub fn rep_data(cfg: &SimConfig, x: DenseMatrix, s: usize, rep: usize) -> Result<RepData> {
    let mut rng = rng_for(cfg.seed, &[s as u64, rep as u64]);
    let theta_star = gen_theta(cfg.p, s, cfg.theta_value, &mut rng)?;
    let y = gen_response(&x, &theta_star, cfg.noise_sd, &mut rng)?;
    let masked = missing::apply_mask_with(&x, &missing::uniform_pi(cfg.pi_star, cfg.p), &mut rng)?;
    Ok(RepData { x, theta_star, y, z_tilde: masked.z_tilde })
}

/// Solves every (estimator, δ) cell for one replication.
pub fn run_rep(cfg: &SimConfig, data: &RepData, s: usize, rep: usize) -> Vec<RepRecord> {
    let mut out = Vec::with_capacity(cfg.estimators.len() * cfg.delta_list.len());
    let fail = |est, delta, msg: String| RepRecord {
        s,
        rep,
        estimator: est,
        delta,
        mu: mu_of_delta(delta),
        tau: f64::NAN,
        status: LpStatus::Infeasible,
        metrics: None,
        error: Some(msg),
    };
    let problems = match Problems::build(cfg, data) {
        Ok(p) => p,
        Err(e) => return failed_records(cfg, s, rep, &e.to_string()),
    };
    for &est in &cfg.estimators {
        for &delta in &cfg.delta_list {
            let mu = if est == EstimatorKind::Dantzig { 0.0 } else { mu_of_delta(delta) };
            let result = problems.solve(cfg, est, mu);
            out.push(match result {
                Ok(e) => {
                    let ok = e.status() == LpStatus::Optimal;
                    RepRecord {
                        s,
                        rep,
                        estimator: est,
                        delta,
                        mu,
                        tau: problems.tau,
                        status: e.status(),
                        metrics: ok.then(|| {
                            metrics(&e.theta, &data.theta_star, &data.x, cfg.nonzero_threshold)
                        }),
                        error: (!ok).then(|| format!("solver status {:?}", e.status())),
                    }
                }
                Err(e) => fail(est, delta, e.to_string()),
            });
        }
    }
    out
}

fn failed_records(cfg: &SimConfig, s: usize, rep: usize, msg: &str) -> Vec<RepRecord> {
    let mut out = Vec::new();
    for &estimator in &cfg.estimators {
        for &delta in &cfg.delta_list {
            out.push(RepRecord {
                s,
                rep,
                estimator,
                delta,
                mu: mu_of_delta(delta),
                tau: f64::NAN,
                status: LpStatus::Infeasible,
                metrics: None,
                error: Some(msg.to_string()),
            });
        }
    }
    out
}

struct Problems {
    plain: SelectorProblem,
    compensated: SelectorProblem,
    /// Multiplier taking `(μ, τ)` to the scale of `compensated`.
    comp_scale: f64,
    tau: f64,
}

impl Problems {
    fn build(cfg: &SimConfig, data: &RepData) -> Result<Self> {
        let masked = missing::MaskedDesign::observed(data.z_tilde.clone());
        let pi = match cfg.pi_handling {
            PiHandling::Known => cfg.pi_star,
            PiHandling::Estimated => missing::estimate_pi(&masked, PiMode::Pooled)[0],
        };
        let pis = missing::uniform_pi(pi, cfg.p);
        let z = missing::rescale(&masked, &pis)?;
        let tau = cfg.tau_rule.tau(&z, cfg.noise_sd);
        let plain = SelectorProblem::new(&z, &data.y, None)?;
        let (compensated, comp_scale) = match cfg.pi_handling {
            PiHandling::Known => {
                let d = missing::sigma_hat(&data.z_tilde, &pis)?.sigma_hat_sq;
                (plain.with_compensation(&d)?, 1.0)
            }
            PiHandling::Estimated => (
                missing_data_problem(&data.z_tilde, &data.y, pi)?,
                observed_scale_constants(1.0, 1.0, pi).0,
            ),
        };
        Ok(Self { plain, compensated, comp_scale, tau })
    }

    fn solve(&self, cfg: &SimConfig, est: EstimatorKind, mu: f64) -> Result<Estimate> {
        let make = |mu, tau| SelectorConfig {
            nonzero_threshold: cfg.nonzero_threshold,
            ..SelectorConfig::new(mu, tau).with_domain(Domain::NonnegativeOrthant)
        };
        match est {
            EstimatorKind::Mu | EstimatorKind::Dantzig => self.plain.solve(&make(mu, self.tau)),
            EstimatorKind::Cmu => self
                .compensated
                .solve(&make(mu * self.comp_scale, self.tau * self.comp_scale)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (`n − 1` denominator).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub s: usize,
    pub estimator: EstimatorKind,
    pub delta: f64,
    pub mu: f64,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub tau_mean: f64,
    pub err1: MeanSd,
    pub err2: MeanSd,
    pub err2_over_n: MeanSd,
    pub nb1: MeanSd,
    pub nb2: MeanSd,
    pub exact: usize,
}

impl TableRow {
    /// Row label in the style `δ=0.1` / `C-δ=0.1`.
    pub fn label(&self) -> String {
        match self.estimator {
            EstimatorKind::Mu => format!("δ={}", self.delta),
            EstimatorKind::Cmu => format!("C-δ={}", self.delta),
            EstimatorKind::Dantzig => "Dantzig".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub config: SimConfig,
    pub rows: Vec<TableRow>,
    pub records: Vec<RepRecord>,
}

pub fn aggregate(cfg: &SimConfig, records: &[RepRecord]) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for &s in &cfg.s_list {
        for &est in &cfg.estimators {
            for &delta in &cfg.delta_list {
                let cell: Vec<&RepRecord> = records
                    .iter()
                    .filter(|r| r.s == s && r.estimator == est && r.delta.to_bits() == delta.to_bits())
                    .collect();
                let ok: Vec<&RunMetrics> = cell.iter().filter_map(|r| r.metrics.as_ref()).collect();
                let col = |f: &dyn Fn(&RunMetrics) -> f64| {
                    MeanSd::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>())
                };
                let taus: Vec<f64> = cell.iter().map(|r| r.tau).filter(|t| t.is_finite()).collect();
                rows.push(TableRow {
                    s,
                    estimator: est,
                    delta,
                    mu: if est == EstimatorKind::Dantzig { 0.0 } else { mu_of_delta(delta) },
                    reps_ok: ok.len(),
                    reps_failed: cell.len() - ok.len(),
                    tau_mean: MeanSd::of(&taus).mean,
                    err1: col(&|m| m.err1),
                    err2: col(&|m| m.err2),
                    err2_over_n: col(&|m| m.err2_over_n),
                    nb1: col(&|m| m.nb1 as f64),
                    nb2: col(&|m| m.nb2 as f64),
                    exact: ok.iter().filter(|m| m.exact).count(),
                });
            }
        }
    }
    rows
}

/// Runs every replication on the current rayon pool. Records come back in
/// `(s, rep, estimator, δ)` order regardless of scheduling.
pub fn run_experiment(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let mut records = Vec::new();
    for &s in &cfg.s_list {
        let shared = if cfg.fresh_design { None } else { Some(design_for(cfg, s, 0)?) };
        let per_rep: Vec<Vec<RepRecord>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let x = match &shared {
                    Some(x) => Ok(x.clone()),
                    None => design_for(cfg, s, rep),
                };
                match x.and_then(|x| rep_data(cfg, x, s, rep)) {
                    Ok(data) => run_rep(cfg, &data, s, rep),
                    Err(e) => failed_records(cfg, s, rep, &e.to_string()),
                }
            })
            .collect();
        records.extend(per_rep.into_iter().flatten());
    }
    let rows = aggregate(cfg, &records);
    Ok(SimOutput { config: cfg.clone(), rows, records })
}

/// Runs on a dedicated pool; `threads = 0` lets rayon choose.
pub fn run_experiment_with_threads(cfg: &SimConfig, threads: usize) -> Result<SimOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MuselError::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

/// Tables with `mean (sd)` cells, one table per sparsity level.
pub fn render_markdown(rows: &[TableRow]) -> String {
    let mut out = String::new();
    let mut levels: Vec<usize> = rows.iter().map(|r| r.s).collect();
    levels.dedup();
    for s in levels {
        let _ = writeln!(out, "### s = {s}\n");
        let _ = writeln!(out, "| | Err1 | Err2 | Nb1 | Nb2 | Exact | failed |");
        let _ = writeln!(out, "|---|---|---|---|---|---|---|");
        for r in rows.iter().filter(|r| r.s == s) {
            let _ = writeln!(
                out,
                "| {} | {:.4} ({:.4}) | {:.4} ({:.4}) | {:.2} ({:.2}) | {:.2} ({:.2}) | {} | {} |",
                r.label(),
                r.err1.mean,
                r.err1.sd,
                r.err2.mean,
                r.err2.sd,
                r.nb1.mean,
                r.nb1.sd,
                r.nb2.mean,
                r.nb2.sd,
                r.exact,
                r.reps_failed
            );
        }
        out.push('\n');
    }
    out
}
