//! Command-line front end.
//!
//! Exit codes: 0 success, 1 malformed input or invalid value, 2 infeasible
//! constraint set, 3 iteration limit, 4 enumeration budget exceeded,
//! 64 usage error. Indices in command output are 1-based.

use crate::error::MuselError;
use crate::estimators::{
    solve_compensated_mu, solve_dantzig, solve_missing_data_cmu, solve_mu_selector, Estimate, PiSpec,
    SelectorConfig, SelectorProblem,
};
use crate::io::{read_matrix_csv, read_vector_csv, table_rows_to_csv, to_json, write_atomic};
use crate::lp::LpStatus;
use crate::missing::{self, MaskedDesign};
use crate::model::{Domain, GramMatrix};
use crate::sensitivity::{empirical_gram, sensitivity, QIndex, SensitivityOptions, SensitivityResult};
use crate::sim::{render_markdown, run_experiment_with_threads, SimConfig, TauRule, PRESETS};
use crate::thresholds::{thresholds, NoiseParams, ThresholdReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MALFORMED: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_ITERATION_LIMIT: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "musel", version, about = "Compensated MU selector for sparse regression with a noisy design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a selector to a design and response.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo study.
    Simulate(SimulateArgs),
    /// Compute a cone sensitivity of a Gram matrix.
    Sensitivity(SensitivityArgs),
    /// Evaluate the noise thresholds.
    Thresholds(ThresholdArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Mu,
    Cmu,
    Dantzig,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Nonneg,
    Free,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Design matrix (CSV, n rows, p columns).
    #[arg(long)]
    pub design: PathBuf,
    /// Response (CSV, one column or one row).
    #[arg(long)]
    pub response: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long)]
    pub tau: f64,
    /// Known missingness rate; zeros in the design are treated as missing.
    #[arg(long, conflicts_with = "estimate_pi")]
    pub pi: Option<f64>,
    /// Estimate the missingness rate from the zeros of the design.
    #[arg(long)]
    pub estimate_pi: bool,
    /// Compensation diagonal for `cmu` (CSV vector).
    #[arg(long)]
    pub dhat: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nonneg")]
    pub domain: DomainArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON configuration; keys not listed in the documentation are rejected.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Draw a new design for every replication.
    #[arg(long)]
    pub fresh_design: bool,
    /// Multiplier of the noise-scaled tau rule.
    #[arg(long)]
    pub tau_factor: Option<f64>,
    /// Table CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-replication records as JSON next to `--out`.
    #[arg(long, requires = "out")]
    pub raw: bool,
    /// Also write markdown tables next to `--out`.
    #[arg(long, requires = "out")]
    pub markdown: bool,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Gram matrix (CSV, p × p).
    #[arg(long, required_unless_present = "empirical", conflicts_with = "empirical")]
    pub gram: Option<PathBuf>,
    /// Use Ψ̂ = ZᵀZ/n − D̂ built from `--design` and `--dhat`.
    #[arg(long, requires_all = ["design", "dhat"])]
    pub empirical: bool,
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long)]
    pub dhat: Option<PathBuf>,
    #[arg(long)]
    pub s: usize,
    /// `1`, `2`, `inf`, a real q ≥ 1, or `star:k` (1-based k).
    #[arg(long)]
    pub q: String,
    /// Fall back to a linear-programming lower bound when exact
    /// enumeration exceeds the budget.
    #[arg(long)]
    pub lower_bound: bool,
    /// Maximum number of LPs for exact enumeration.
    #[arg(long, default_value_t = 100_000)]
    pub budget: u128,
    /// Report wall-clock time (makes the output nondeterministic).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long = "gamma-xi")]
    pub gamma_xi: f64,
    #[arg(long = "gamma-Xi")]
    pub gamma_big_xi: f64,
    #[arg(long)]
    pub m2: f64,
    #[arg(long, requires = "pi")]
    pub m4: Option<f64>,
    #[arg(long, requires = "m4")]
    pub pi: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<MuselError> for CliError {
    fn from(e: MuselError) -> Self {
        let code = match &e {
            MuselError::Infeasible(_) => EXIT_INFEASIBLE,
            MuselError::BudgetExceeded { .. } | MuselError::TooLarge(_) => EXIT_BUDGET,
            _ => EXIT_MALFORMED,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_MALFORMED, message: e.to_string() }
    }
}

type CliResult = std::result::Result<i32, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Sensitivity(a) => cmd_sensitivity(&a),
        Command::Thresholds(a) => cmd_thresholds(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if e.code == EXIT_BUDGET {
                eprintln!("hint: pass --lower-bound to accept a lower bound, or raise --budget");
            }
            e.code
        }
    }
}

/// Worker count from `MUSEL_THREADS`; `0` or unset lets the pool decide.
pub fn threads_from_env() -> std::result::Result<usize, CliError> {
    match std::env::var("MUSEL_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("MUSEL_THREADS must be a nonnegative integer, got {v:?}"))),
    }
}

fn emit(out: Option<&Path>, text: &str) -> std::result::Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(|e| CliError {
            code: EXIT_MALFORMED,
            message: format!("{}: {e}", p.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

#[derive(Debug, Serialize)]
struct EstimateOutput<'a> {
    theta: &'a [f64],
    l1: f64,
    support: Vec<usize>,
    status: LpStatus,
    feasibility_residual: Option<f64>,
    pi_used: Option<f64>,
    iterations: usize,
    lp_solves: usize,
    optimality_gap: Option<f64>,
    warning: Option<&'a str>,
}

fn cmd_estimate(a: &EstimateArgs) -> CliResult {
    let z = read_matrix_csv(&a.design)?;
    let y = read_vector_csv(&a.response)?;
    if y.len() != z.rows() {
        return Err(MuselError::Dimension(format!("{} responses for {} design rows", y.len(), z.rows())).into());
    }
    let domain = match a.domain {
        DomainArg::Nonneg => Domain::NonnegativeOrthant,
        DomainArg::Free => Domain::AllReals,
    };
    let base = SelectorConfig::new(a.mu, a.tau).with_domain(domain);
    base.validate()?;
    let (est, residual, pi_used): (Estimate, Option<f64>, Option<f64>) = match a.mode {
        Mode::Mu | Mode::Dantzig => {
            let est = if a.mode == Mode::Mu {
                solve_mu_selector(&z, &y, &base)?
            } else {
                solve_dantzig(&z, &y, a.tau, domain)?
            };
            let cfg = if a.mode == Mode::Mu { base.clone() } else { SelectorConfig { mu: 0.0, ..base.clone() } };
            let res = SelectorProblem::new(&z, &y, None)?.feasibility(&est.theta, &cfg).residual;
            (est, Some(res), None)
        }
        Mode::Cmu => {
            let pi_arg = match (a.pi, a.estimate_pi) {
                (Some(pi), _) => Some(pi),
                (None, true) => Some(missing::estimate_pi(&MaskedDesign::observed(z.clone()), missing::PiMode::Pooled)[0]),
                (None, false) => None,
            };
            let (zz, d, pi) = match (&a.dhat, pi_arg) {
                (Some(path), None) => (z, read_vector_csv(path)?, None),
                (None, Some(pi)) => {
                    let pis = missing::uniform_pi(pi, z.cols());
                    let d = missing::sigma_hat(&z, &pis)?.sigma_hat_sq;
                    (missing::rescale(&MaskedDesign::observed(z.clone()), &pis)?, d, Some(pi))
                }
                _ => return Err(CliError::usage("cmu mode needs exactly one of --dhat, --pi or --estimate-pi")),
            };
            let cfg = base.clone().with_compensation(d);
            let est = solve_compensated_mu(&zz, &y, &cfg)?;
            let res = SelectorProblem::new(&zz, &y, cfg.compensation.as_deref())?.feasibility(&est.theta, &cfg).residual;
            (est, Some(res), pi)
        }
        Mode::Missing => {
            let spec = match (a.pi, a.estimate_pi) {
                (Some(pi), false) => PiSpec::Known(pi),
                (None, true) => PiSpec::Estimated,
                _ => return Err(CliError::usage("missing mode needs --pi or --estimate-pi")),
            };
            let pi = match spec {
                PiSpec::Known(v) => v,
                PiSpec::Estimated => missing::estimate_pi(&MaskedDesign::observed(z.clone()), missing::PiMode::Pooled)[0],
            };
            let est = solve_missing_data_cmu(&z, &y, spec, &base)?;
            let res = crate::estimators::missing_data_problem(&z, &y, pi)?.feasibility(&est.theta, &base).residual;
            (est, Some(res), Some(pi))
        }
    };
    let status = est.status();
    let out = EstimateOutput {
        theta: &est.theta,
        l1: est.l1_norm,
        support: est.support.iter().map(|j| j + 1).collect(),
        status,
        feasibility_residual: if status == LpStatus::Infeasible { None } else { residual },
        pi_used,
        iterations: est.diagnostics.iterations,
        lp_solves: est.diagnostics.lp_solves,
        optimality_gap: est.diagnostics.optimality_gap,
        warning: est.diagnostics.warning.as_deref(),
    };
    emit(a.out.as_deref(), &to_json(&out))?;
    Ok(match status {
        LpStatus::Optimal => EXIT_OK,
        LpStatus::Infeasible => EXIT_INFEASIBLE,
        LpStatus::IterationLimit | LpStatus::Unbounded => EXIT_ITERATION_LIMIT,
    })
}

fn load_sim_config(a: &SimulateArgs) -> std::result::Result<SimConfig, CliError> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError { code: EXIT_MALFORMED, message: format!("{}: {e}", path.display()) })?;
            serde_json::from_str(&text).map_err(|e| CliError {
                code: EXIT_MALFORMED,
                message: format!("{}: {e}", path.display()),
            })?
        }
        (None, Some(name)) => SimConfig::preset(name)?,
        (None, None) => SimConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if a.fresh_design {
        cfg.fresh_design = true;
    }
    if let Some(f) = a.tau_factor {
        cfg.tau_rule = match cfg.tau_rule {
            TauRule::NoiseScaled { confidence, .. } => TauRule::NoiseScaled { factor: f, confidence },
            TauRule::Fixed(_) => return Err(CliError::usage("--tau-factor needs the noise-scaled tau rule")),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult {
    let cfg = load_sim_config(a)?;
    let threads = threads_from_env()?;
    let output = run_experiment_with_threads(&cfg, threads)?;
    let csv = table_rows_to_csv(&output.rows);
    // Side files first so the table appears only once everything succeeded.
    if let Some(out) = &a.out {
        if a.raw {
            emit(Some(&sibling(out, "raw.json")), &to_json(&output))?;
        }
        if a.markdown {
            emit(Some(&sibling(out, "md")), &render_markdown(&output.rows))?;
        }
    }
    emit(a.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SensitivityOutput {
    #[serde(flatten)]
    result: SensitivityResult,
    wall_time: Option<f64>,
}

fn cmd_sensitivity(a: &SensitivityArgs) -> CliResult {
    let q: QIndex = a.q.parse()?;
    let psi = if a.empirical {
        let (Some(design), Some(dhat)) = (&a.design, &a.dhat) else {
            return Err(CliError::usage("--empirical needs --design and --dhat"));
        };
        let z = read_matrix_csv(design)?;
        empirical_gram(&z, &read_vector_csv(dhat)?)?
    } else {
        let path = a.gram.as_ref().ok_or_else(|| CliError::usage("--gram or --empirical is required"))?;
        GramMatrix::with_tolerance(read_matrix_csv(path)?, 1e-9)?
    };
    let opts = SensitivityOptions { budget: a.budget, ..SensitivityOptions::default() };
    let threads = threads_from_env()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError { code: EXIT_MALFORMED, message: e.to_string() })?;
    let start = Instant::now();
    let result = pool.install(|| sensitivity(&psi, a.s, q, a.lower_bound, &opts))?;
    let wall_time = a.timing.then(|| start.elapsed().as_secs_f64());
    emit(a.out.as_deref(), &to_json(&SensitivityOutput { result, wall_time }))?;
    Ok(EXIT_OK)
}

fn cmd_thresholds(a: &ThresholdArgs) -> CliResult {
    let mut params = NoiseParams::new(a.gamma_xi, a.gamma_big_xi, a.m2, a.eps, a.n, a.p);
    if let Some(g) = a.gamma0 {
        params.gamma0 = g;
    }
    if let Some(t) = a.t0 {
        params.t0 = t;
    }
    if let Some(m4) = a.m4 {
        params.m4 = m4;
    }
    let t = thresholds(&params, a.pi)?;
    let report = ThresholdReport { params, pi_star: a.pi, thresholds: t };
    emit(a.out.as_deref(), &to_json(&report))?;
    Ok(EXIT_OK)
}
