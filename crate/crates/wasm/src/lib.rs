//! Browser bindings for the selector library. Every export takes plain
//! strings and numbers and returns a JSON string, so the page needs no
//! generated TypeScript types.

use musel::estimators::{solve_compensated_mu, solve_mu_selector, SelectorConfig, SelectorProblem};
use musel::io::parse_matrix_csv;
use musel::missing::{rescale, sigma_hat, uniform_pi, MaskedDesign};
use musel::sensitivity::{sensitivity as compute_sensitivity, QIndex, SensitivityOptions};
use musel::thresholds::{thresholds as compute_thresholds, NoiseParams, ThresholdReport};
use musel::{Domain, GramMatrix, MuselError};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps the demo responsive; the CLI allows far larger searches.
const DEMO_BUDGET: u128 = 20_000;

fn js_err(e: MuselError) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string_pretty(v).map_err(|e| JsError::new(&e.to_string()))
}

#[derive(Serialize)]
struct EstimateOut {
    theta: Vec<f64>,
    l1: f64,
    support: Vec<usize>,
    status: String,
    feasibility_residual: f64,
}

/// Fits the selector. `mode` is `"mu"` or `"cmu"`; for `"cmu"` the design
/// is treated as having entries missing at rate `pi` (zeros mark gaps).
#[wasm_bindgen]
pub fn estimate(design_csv: &str, response_csv: &str, mode: &str, mu: f64, tau: f64, pi: f64, free_domain: bool) -> Result<String, JsError> {
    let z = parse_matrix_csv(design_csv, "design").map_err(js_err)?;
    let y = parse_matrix_csv(response_csv, "response").map_err(js_err)?.into_vec();
    if y.len() != z.rows() {
        return Err(JsError::new(&format!("{} responses for {} design rows", y.len(), z.rows())));
    }
    let domain = if free_domain { Domain::AllReals } else { Domain::NonnegativeOrthant };
    let base = SelectorConfig::new(mu, tau).with_domain(domain);
    let (zz, cfg) = match mode {
        "mu" => (z, base),
        "cmu" => {
            let pis = uniform_pi(pi, z.cols());
            let d = sigma_hat(&z, &pis).map_err(js_err)?.sigma_hat_sq;
            let zz = rescale(&MaskedDesign::observed(z), &pis).map_err(js_err)?;
            (zz, base.with_compensation(d))
        }
        other => return Err(JsError::new(&format!("unknown mode {other:?}"))),
    };
    let est = if cfg.compensation.is_some() {
        solve_compensated_mu(&zz, &y, &cfg)
    } else {
        solve_mu_selector(&zz, &y, &cfg)
    }
    .map_err(js_err)?;
    let residual = SelectorProblem::new(&zz, &y, cfg.compensation.as_deref())
        .map_err(js_err)?
        .feasibility(&est.theta, &cfg)
        .residual;
    json(&EstimateOut {
        l1: est.l1_norm,
        support: est.support.iter().map(|j| j + 1).collect(),
        status: format!("{:?}", est.status()),
        feasibility_residual: residual,
        theta: est.theta,
    })
}

/// Sensitivity of a Gram matrix. `q` accepts `1`, `2`, `inf`, `1.5` or
/// `star:k` with 1-based `k`. Falls back to a lower bound past the budget.
#[wasm_bindgen]
pub fn sensitivity(gram_csv: &str, s: usize, q: &str) -> Result<String, JsError> {
    let psi = GramMatrix::with_tolerance(parse_matrix_csv(gram_csv, "gram").map_err(js_err)?, 1e-9).map_err(js_err)?;
    let q: QIndex = q.parse().map_err(js_err)?;
    let opts = SensitivityOptions { budget: DEMO_BUDGET, ..SensitivityOptions::default() };
    json(&compute_sensitivity(&psi, s, q, true, &opts).map_err(js_err)?)
}

/// Noise thresholds for subgaussian errors, with `pi` ignored when negative.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn thresholds(gamma_xi: f64, gamma_big_xi: f64, m2: f64, m4: f64, pi: f64, eps: f64, n: usize, p: usize) -> Result<String, JsError> {
    let mut params = NoiseParams::new(gamma_xi, gamma_big_xi, m2, eps, n, p);
    params.m4 = m4;
    let pi_star = (pi >= 0.0).then_some(pi);
    let t = compute_thresholds(&params, pi_star).map_err(js_err)?;
    json(&ThresholdReport { params, pi_star, thresholds: t })
}
