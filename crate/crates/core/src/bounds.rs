//! Error bounds and confidence intervals driven by the sensitivities.
//!
//! A nonpositive denominator yields an infinite bound with `vacuous` set,
//! never an error, except for the coherence bound which is refused outside
//! its range.

use crate::error::{MuselError, Result};
use crate::matrix::norm1;
use crate::sensitivity::{QIndex, SensitivityKind, SensitivityResult};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub vacuous: bool,
}

impl Bound {
    /// `num / den` with `1/0 = ∞` and `0/x = 0`.
    pub fn ratio(num: f64, den: f64) -> Self {
        if num == 0.0 {
            Self { value: 0.0, vacuous: false }
        } else if den <= 0.0 {
            Self { value: f64::INFINITY, vacuous: true }
        } else {
            Self { value: num / den, vacuous: false }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub q: QIndex,
    pub bound: Bound,
    /// True when the sensitivity was only a lower bound (the bound stays valid).
    pub conservative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub nu: f64,
    pub norms: Vec<NormBound>,
    /// Bound on `(1/n)|X(θ̂ − θ*)|₂²`.
    pub prediction: Bound,
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(MuselError::InvalidArgument(format!("{name} must be >= 0, got {v}")))
    }
}

/// `|θ̂ − θ*|_q ≤ ν/κ_q(s)`, coordinatewise `ν/κ_k*(s)`, and prediction
/// error `≤ min{ν²/κ₁(s), 2ν|θ*|₁}`.
pub fn theorem1_bounds(nu: f64, kappas: &[SensitivityResult], l1_theta_star: f64) -> Result<Theorem1Report> {
    check_nonneg("nu", nu)?;
    check_nonneg("|θ*|₁", l1_theta_star)?;
    let norms: Vec<NormBound> = kappas
        .iter()
        .map(|k| NormBound {
            q: k.q,
            bound: Bound::ratio(nu, k.value),
            conservative: k.kind != SensitivityKind::Exact,
        })
        .collect();
    let trivial = 2.0 * nu * l1_theta_star;
    let prediction = kappas
        .iter()
        .filter(|k| k.q == QIndex::Norm(1.0))
        .map(|k| Bound::ratio(nu * nu, k.value))
        .fold(Bound { value: trivial, vacuous: false }, |acc, b| if b.value < acc.value { b } else { acc });
    Ok(Theorem1Report { nu, norms, prediction })
}

/// `C(q) = 2^{−1/q−1/2} (1 + (q−1)^{−1/q})^{−1}` for `1 < q ≤ 2`.
pub fn c_q(q: f64) -> Result<f64> {
    if !(q > 1.0 && q <= 2.0) {
        return Err(MuselError::InvalidArgument(format!("C(q) needs 1 < q <= 2, got {q}")));
    }
    Ok(2f64.powf(-1.0 / q - 0.5) / (1.0 + (q - 1.0).powf(-1.0 / q)))
}

fn inv_q(q: f64) -> f64 {
    if q.is_infinite() {
        0.0
    } else {
        1.0 / q
    }
}

/// `|θ̂ − θ*|_q < (2s)^{1/q} ν/(1 − 2ρs)`, refused unless `ρ < 1/(2s)`.
pub fn coherence_bound(nu: f64, s: usize, q: f64, rho: f64) -> Result<f64> {
    check_nonneg("nu", nu)?;
    let s = s as f64;
    if !(rho >= 0.0 && rho < 1.0 / (2.0 * s)) {
        return Err(MuselError::Refused(format!(
            "coherence bound needs rho < 1/(2s) = {}, got rho = {rho}",
            1.0 / (2.0 * s)
        )));
    }
    Ok((2.0 * s).powf(inv_q(q)) * nu / (1.0 - 2.0 * rho * s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBound {
    /// `"l1"`, `"prediction"`, or `"lq"`.
    pub target: String,
    /// The assumption behind the bound: `"RE(s)"`, `"RE(2s)"`, or `"C"`.
    pub assumption: String,
    pub q: Option<f64>,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub bounds: Vec<LabeledBound>,
    pub refused: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Inputs {
    pub nu: f64,
    pub s: usize,
    pub q: f64,
    pub p: Option<usize>,
    pub kappa_re_s: Option<f64>,
    pub kappa_re_2s: Option<f64>,
    pub rho: Option<f64>,
}

/// Bounds implied by restricted eigenvalue or coherence assumptions; only
/// the assumptions whose constants are supplied contribute.
pub fn theorem2_bounds(inp: &Theorem2Inputs) -> Result<Theorem2Report> {
    check_nonneg("nu", inp.nu)?;
    if inp.s == 0 {
        return Err(MuselError::InvalidArgument("s must be >= 1".into()));
    }
    let (nu, s) = (inp.nu, inp.s as f64);
    let mut bounds = Vec::new();
    let mut refused = Vec::new();
    if let Some(k) = inp.kappa_re_s {
        bounds.push(LabeledBound {
            target: "l1".into(),
            assumption: "RE(s)".into(),
            q: Some(1.0),
            bound: Bound::ratio(4.0 * nu * s, k),
        });
        bounds.push(LabeledBound {
            target: "prediction".into(),
            assumption: "RE(s)".into(),
            q: None,
            bound: Bound::ratio(4.0 * nu * nu * s, k),
        });
    }
    if let Some(k) = inp.kappa_re_2s {
        if !(inp.q > 1.0 && inp.q <= 2.0) {
            refused.push(format!("RE(2s) bound needs 1 < q <= 2, got q = {}", inp.q));
        } else if inp.p.is_some_and(|p| 2 * inp.s > p) {
            refused.push("RE(2s) bound needs s <= p/2".into());
        } else {
            bounds.push(LabeledBound {
                target: "lq".into(),
                assumption: "RE(2s)".into(),
                q: Some(inp.q),
                bound: Bound::ratio(4.0 * nu * s.powf(1.0 / inp.q), k),
            });
        }
    }
    if let Some(rho) = inp.rho {
        match coherence_bound(nu, inp.s, inp.q, rho) {
            Ok(v) => bounds.push(LabeledBound {
                target: "lq".into(),
                assumption: "C".into(),
                q: Some(inp.q),
                bound: Bound { value: v, vacuous: false },
            }),
            Err(e) => refused.push(e.to_string()),
        }
    }
    Ok(Theorem2Report { bounds, refused })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateInterval {
    pub index: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub radius: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    /// Sparsity used for the sensitivities; any `s′ ≥ s` stays valid.
    pub s: usize,
    /// `2(μ|θ̂|₁ + τ)`.
    pub numerator: f64,
    /// `(1 − μ/κ̂₁)₊`.
    pub factor: f64,
    pub norms: Vec<(QIndex, Bound)>,
    pub coordinates: Vec<CoordinateInterval>,
}

fn ci_radius(numerator: f64, kappa: f64, factor: f64) -> Bound {
    let den = kappa * factor;
    if den <= 0.0 {
        Bound { value: f64::INFINITY, vacuous: true }
    } else {
        Bound { value: numerator / den, vacuous: false }
    }
}

/// Radii `2(μ|θ̂|₁ + τ) / (κ̂ (1 − μ/κ̂₁)₊)` for each supplied norm
/// sensitivity and, when given, per-coordinate intervals from `κ̂_k*`.
pub fn theorem3_ci(
    theta_hat: &[f64],
    mu: f64,
    tau: f64,
    s: usize,
    kappa_q: &[(QIndex, f64)],
    kappa_1: f64,
    kappa_star: Option<&[f64]>,
) -> Result<CiReport> {
    check_nonneg("mu", mu)?;
    check_nonneg("tau", tau)?;
    check_nonneg("kappa_1", kappa_1)?;
    let numerator = 2.0 * (mu * norm1(theta_hat) + tau);
    let ratio = if mu == 0.0 {
        0.0
    } else if kappa_1 == 0.0 {
        f64::INFINITY
    } else {
        mu / kappa_1
    };
    let factor = (1.0 - ratio).max(0.0);
    let norms = kappa_q.iter().map(|&(q, k)| (q, ci_radius(numerator, k, factor))).collect();
    let coordinates = match kappa_star {
        None => Vec::new(),
        Some(ks) => {
            if ks.len() != theta_hat.len() {
                return Err(MuselError::Dimension(format!(
                    "{} coordinate sensitivities for {} coefficients",
                    ks.len(),
                    theta_hat.len()
                )));
            }
            theta_hat
                .iter()
                .zip(ks)
                .enumerate()
                .map(|(index, (&est, &k))| {
                    let radius = ci_radius(numerator, k, factor);
                    CoordinateInterval { index, estimate: est, lower: est - radius.value, upper: est + radius.value, radius }
                })
                .collect()
        }
    };
    Ok(CiReport { s, numerator, factor, norms, coordinates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kappa(q: QIndex, value: f64) -> SensitivityResult {
        SensitivityResult {
            value,
            kind: SensitivityKind::Exact,
            certificate: None,
            upper_bound: None,
            s: 1,
            q,
            lp_count: 0,
        }
    }

    #[test]
    fn theorem1_examples() {
        let r = theorem1_bounds(0.38, &[kappa(QIndex::Norm(1.0), 0.5)], 1.5).unwrap();
        assert!((r.norms[0].bound.value - 0.76).abs() < 1e-15);
        assert!((r.prediction.value - 0.2888).abs() < 1e-12);
        let zero = theorem1_bounds(0.0, &[kappa(QIndex::Infinity, 0.0), kappa(QIndex::Norm(1.0), 0.3)], 2.0).unwrap();
        assert!(zero.norms.iter().all(|b| b.bound.value == 0.0));
        assert_eq!(zero.prediction.value, 0.0);
        let vac = theorem1_bounds(0.1, &[kappa(QIndex::Norm(2.0), 0.0)], 1.0).unwrap();
        assert!(vac.norms[0].bound.vacuous && vac.norms[0].bound.value.is_infinite());
        assert!((vac.prediction.value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn theorem2_examples() {
        let r = theorem2_bounds(&Theorem2Inputs {
            nu: 1.0,
            s: 1,
            q: 2.0,
            p: None,
            kappa_re_s: Some(1.0),
            kappa_re_2s: None,
            rho: None,
        })
        .unwrap();
        assert_eq!(r.bounds[0].bound.value, 4.0);
        assert_eq!(c_q(2.0).unwrap(), 0.25);
        assert!(c_q(1.0).is_err() && c_q(2.5).is_err());
        assert!((coherence_bound(1.0, 1, f64::INFINITY, 0.4).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(coherence_bound(1.0, 1, 2.0, 0.5), Err(MuselError::Refused(_))));
        let r = theorem2_bounds(&Theorem2Inputs {
            nu: 1.0,
            s: 2,
            q: 1.5,
            p: Some(3),
            kappa_re_s: None,
            kappa_re_2s: Some(0.5),
            rho: Some(0.3),
        })
        .unwrap();
        assert!(r.bounds.is_empty());
        assert_eq!(r.refused.len(), 2);
    }

    #[test]
    fn theorem3_examples() {
        let r = theorem3_ci(&[1.0, 0.0], 0.05, 0.01, 1, &[(QIndex::Norm(2.0), 0.5)], 0.5, None).unwrap();
        assert!((r.norms[0].1.value - 0.12 / 0.45).abs() < 1e-15);
        assert!((r.norms[0].1.value - 0.2667).abs() < 1e-4);
        let d = theorem3_ci(&[3.0], 0.0, 0.02, 1, &[(QIndex::Infinity, 0.4)], 0.0, Some(&[0.8])).unwrap();
        assert!((d.norms[0].1.value - 0.1).abs() < 1e-15);
        assert!((d.coordinates[0].upper - 3.05).abs() < 1e-15);
        let inf = theorem3_ci(&[1.0], 0.1, 0.01, 1, &[(QIndex::Infinity, 0.4)], 0.1, Some(&[0.4])).unwrap();
        assert_eq!(inf.factor, 0.0);
        assert!(inf.norms[0].1.vacuous && inf.coordinates[0].radius.value.is_infinite());
    }
}
