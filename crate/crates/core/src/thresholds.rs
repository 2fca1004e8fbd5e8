//! Noise thresholds for subgaussian design and response errors.
//!
//! All logarithms are natural.

use crate::error::{MuselError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Subgaussian constant of the response noise.
    pub gamma_xi: f64,
    /// Subgaussian constant of the design noise.
    #[serde(rename = "gamma_Xi")]
    pub gamma_big_xi: f64,
    pub gamma0: f64,
    pub t0: f64,
    /// `max_j (1/n) Σ_i X_ij²`.
    pub m2: f64,
    /// `max_j (1/n) Σ_i X_ij⁴`.
    pub m4: f64,
    pub epsilon: f64,
    pub n: usize,
    pub p: usize,
}

impl NoiseParams {
    /// Parameters with the default subexponential constants
    /// `γ₀ = 4γ_Ξ max(γ_Ξ, γ_ξ)` and `t₀ = 1/γ₀`.
    pub fn new(gamma_xi: f64, gamma_big_xi: f64, m2: f64, epsilon: f64, n: usize, p: usize) -> Self {
        let (gamma0, t0) = default_subexp_constants(gamma_xi, gamma_big_xi);
        Self {
            gamma_xi,
            gamma_big_xi,
            gamma0,
            t0,
            m2,
            m4: 0.0,
            epsilon,
            n,
            p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        for (name, v) in [
            ("gamma_xi", self.gamma_xi),
            ("gamma_Xi", self.gamma_big_xi),
            ("gamma0", self.gamma0),
            ("t0", self.t0),
        ] {
            if !(v > 0.0) || v.is_nan() {
                return Err(MuselError::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("m2", self.m2), ("m4", self.m4)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MuselError::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.n == 0 || self.p == 0 {
            return Err(MuselError::InvalidArgument("n and p must be positive".into()));
        }
        Ok(())
    }
}

pub fn default_subexp_constants(gamma_xi: f64, gamma_big_xi: f64) -> (f64, f64) {
    let g0 = 4.0 * gamma_big_xi * gamma_big_xi.max(gamma_xi);
    (g0, 1.0 / g0)
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(MuselError::InvalidArgument(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

/// `δ̄(ε, N) = max(γ₀ √(2 log(N/ε)/n), 2 log(N/ε)/(t₀ n))`.
pub fn delta_bar(epsilon: f64, count: usize, gamma0: f64, t0: f64, n: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    if count == 0 {
        return Err(MuselError::InvalidArgument("delta_bar needs N >= 1".into()));
    }
    let l = (count as f64 / epsilon).ln();
    let n = n as f64;
    Ok((gamma0 * (2.0 * l / n).sqrt()).max(2.0 * l / (t0 * n)))
}

/// `(δ₁, …, δ₅)`; `δ₄ = 0` when `p = 1` since there are no off-diagonal terms.
pub fn subgaussian_deltas(params: &NoiseParams) -> Result<[f64; 5]> {
    params.validate()?;
    let NoiseParams { epsilon: eps, n, p, m2, gamma0, t0, .. } = *params;
    let (pf, nf) = (p as f64, n as f64);
    let d1 = params.gamma_big_xi * (2.0 * m2 * (2.0 * pf * pf / eps).ln() / nf).sqrt();
    let d2 = params.gamma_xi * (2.0 * m2 * (2.0 * pf / eps).ln() / nf).sqrt();
    let d3 = delta_bar(eps, 2 * p, gamma0, t0, n)?;
    let d4 = if p == 1 {
        0.0
    } else {
        delta_bar(eps, p * (p - 1), gamma0, t0, n)?
    };
    Ok([d1, d2, d3, d4, d3])
}

/// `b(ε) = π*/(1−π*)² √(m₄ log(2p/ε)/(2n))`.
pub fn b_missing(epsilon: f64, pi_star: f64, m4: f64, n: usize, p: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(0.0..1.0).contains(&pi_star) {
        return Err(MuselError::InvalidArgument(format!("pi must lie in [0, 1), got {pi_star}")));
    }
    if n == 0 || p == 0 {
        return Err(MuselError::InvalidArgument("n and p must be positive".into()));
    }
    let factor = pi_star / ((1.0 - pi_star) * (1.0 - pi_star));
    Ok(factor * (m4 * (2.0 * p as f64 / epsilon).ln() / (2.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub delta: [f64; 5],
    pub b: f64,
    pub mu_eps: f64,
    pub tau_eps: f64,
}

pub fn assemble_thresholds(delta: [f64; 5], b: f64) -> Thresholds {
    Thresholds {
        delta,
        b,
        mu_eps: delta[0] + delta[3] + delta[4] + b,
        tau_eps: delta[1] + delta[2],
    }
}

/// Thresholds with `b = 0` unless a missingness rate is supplied.
pub fn thresholds(params: &NoiseParams, pi_star: Option<f64>) -> Result<Thresholds> {
    let delta = subgaussian_deltas(params)?;
    let b = match pi_star {
        Some(pi) => b_missing(params.epsilon, pi, params.m4, params.n, params.p)?,
        None => 0.0,
    };
    Ok(assemble_thresholds(delta, b))
}

/// `ν(ε) = 2(μ(ε) + δ₁(ε))|θ*|₁ + 2τ(ε)`.
pub fn nu_bound(t: &Thresholds, l1_theta_star: f64) -> Result<f64> {
    if !(l1_theta_star >= 0.0) {
        return Err(MuselError::InvalidArgument("|θ*|₁ must be >= 0".into()));
    }
    Ok(2.0 * (t.mu_eps + t.delta[0]) * l1_theta_star + 2.0 * t.tau_eps)
}

/// Echo of every input next to the computed thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub params: NoiseParams,
    pub pi_star: Option<f64>,
    pub thresholds: Thresholds,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_bar_branches() {
        let v = delta_bar(0.1, 2, 1.0, 0.001, 10).unwrap();
        assert!((v - 2.0 * 20f64.ln() / 0.01).abs() < 1e-9);
        assert!((v - 599.146).abs() < 1e-3);
        let g = delta_bar(0.1, 2, 1.0, 1e12, 10).unwrap();
        assert_eq!(g, (2.0 * 20f64.ln() / 10.0).sqrt());
        assert!(delta_bar(0.999, 1, 1e-9, 1e9, 1000).unwrap() > 0.0);
        assert!(delta_bar(1.0, 2, 1.0, 1.0, 10).is_err());
        assert!(delta_bar(0.0, 2, 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn delta_one_example() {
        let mut params = NoiseParams::new(0.5, 1.0, 1.0, 0.05, 100, 2);
        let d = subgaussian_deltas(&params).unwrap();
        assert_eq!(d[0], (2.0 * 160f64.ln() / 100.0).sqrt());
        // Quoted to five digits as 0.31861; the exact value is 0.318596…
        assert!((d[0] - 0.31861).abs() < 1e-4);
        let d2 = d[1];
        params.gamma_big_xi = 2.0;
        let dd = subgaussian_deltas(&params).unwrap();
        assert_eq!(dd[0], 2.0 * d[0]);
        assert_eq!(dd[1], d2);
        assert_eq!(d[2], d[4]);
    }

    #[test]
    fn delta_four_vanishes_for_single_column() {
        let d = subgaussian_deltas(&NoiseParams::new(1.0, 1.0, 1.0, 0.1, 50, 1)).unwrap();
        assert_eq!(d[3], 0.0);
        assert!(d[2] > 0.0);
    }

    #[test]
    fn b_examples() {
        assert_eq!(b_missing(0.05, 0.0, 1.0, 100, 500).unwrap(), 0.0);
        let b = b_missing(0.05, 0.1, 1.0, 100, 500).unwrap();
        assert!((b - 0.1 / 0.81 * (20000f64.ln() / 200.0).sqrt()).abs() < 1e-15);
        assert!((b - 0.027475).abs() < 1e-5);
        let vals: Vec<f64> = [0.05, 0.2, 0.5]
            .iter()
            .map(|&pi| b_missing(0.05, pi, 1.0, 100, 500).unwrap())
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2]);
        assert!(b_missing(0.05, 1.0, 1.0, 100, 500).is_err());
    }

    #[test]
    fn assembly_sums() {
        let t = assemble_thresholds([0.0; 5], 0.0);
        assert_eq!((t.mu_eps, t.tau_eps), (0.0, 0.0));
        let t = assemble_thresholds([1.0, 2.0, 3.0, 4.0, 5.0], 6.0);
        assert_eq!((t.mu_eps, t.tau_eps), (16.0, 5.0));
    }

    #[test]
    fn mu_decreases_with_n() {
        let at = |n| {
            let mut p = NoiseParams::new(0.05 / 1.96, 0.1, 1.0, 0.05, n, 500);
            p.m4 = 3.0;
            thresholds(&p, Some(0.1)).unwrap()
        };
        let (a, b) = (at(100), at(400));
        assert!(a.mu_eps.is_finite() && a.mu_eps > 0.0 && a.tau_eps > 0.0);
        assert!(b.mu_eps < a.mu_eps);
    }

    #[test]
    fn gamma_branch_scales_as_inverse_sqrt_n() {
        let at = |n| subgaussian_deltas(&NoiseParams::new(0.3, 0.2, 1.0, 0.05, n, 20)).unwrap();
        let (a, b) = (at(100), at(400));
        for i in 0..5 {
            let r = b[i] / a[i];
            assert!((0.45..=0.55).contains(&r), "δ{} ratio {r}", i + 1);
        }
    }

    #[test]
    fn nu_examples() {
        let t = Thresholds { delta: [0.02, 0.0, 0.0, 0.0, 0.0], b: 0.0, mu_eps: 0.1, tau_eps: 0.01 };
        assert!((nu_bound(&t, 1.5).unwrap() - 0.38).abs() < 1e-15);
        assert_eq!(nu_bound(&t, 0.0).unwrap(), 0.02);
        let slope = nu_bound(&t, 2.0).unwrap() - nu_bound(&t, 1.0).unwrap();
        assert!((slope - 0.24).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = NoiseParams::new(1.0, 1.0, 1.0, 0.05, 10, 3);
        p.gamma0 = 0.0;
        assert!(subgaussian_deltas(&p).is_err());
        assert!(subgaussian_deltas(&NoiseParams::new(1.0, 1.0, 1.0, 1.5, 10, 3)).is_err());
    }
}
