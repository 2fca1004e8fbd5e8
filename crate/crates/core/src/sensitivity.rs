//! Sensitivities of a Gram matrix over the cones
//! `C_J = {Δ : |Δ_{J^c}|₁ ≤ |Δ_J|₁}`, `|J| = s`:
//!
//! ```text
//! κ_q(s)  = min_J min { |ΨΔ|_∞ : Δ ∈ C_J, |Δ|_q = 1 }
//! κ_k*(s) = min_J min { |ΨΔ|_∞ : Δ ∈ C_J, Δ_k = 1 }
//! ```
//!
//! The cones nest (`C_J ⊆ C_{J'}` for `J ⊆ J'`), so only `|J| = s` is
//! enumerated. Inside one cone the ℓ1 mass of `Δ_J` becomes linear once a
//! sign pattern is fixed on `J`; the mass on `J^c` is carried by a
//! nonnegative split `w⁺ − w⁻` whose total is bounded by the mass on `J`.
//! Every problem is symmetric under `Δ ↦ −Δ`, which halves the enumeration.

use crate::error::{MuselError, Result};
use crate::lp::{solve_lp, LinearProgram, LpOptions, LpStatus};
use crate::matrix::{norm1, norm_inf, norm_q, DenseMatrix};
use crate::model::{gram, GramMatrix};
use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityKind {
    Exact,
    LowerBound,
    BruteForceApprox,
}

/// Which sensitivity: an ℓq norm or a coordinate (0-based internally,
/// written `star:k` with 1-based `k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum QIndex {
    Norm(f64),
    Infinity,
    Coordinate(usize),
}

impl fmt::Display for QIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Norm(q) => write!(f, "{q}"),
            Self::Infinity => f.write_str("inf"),
            Self::Coordinate(k) => write!(f, "star:{}", k + 1),
        }
    }
}

impl FromStr for QIndex {
    type Err = MuselError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || MuselError::Parse(format!("expected 1, 2, inf, a real q >= 1, or star:k; got {s:?}"));
        if s == "inf" {
            return Ok(Self::Infinity);
        }
        if let Some(k) = s.strip_prefix("star:") {
            let k: usize = k.parse().map_err(|_| bad())?;
            return if k == 0 { Err(bad()) } else { Ok(Self::Coordinate(k - 1)) };
        }
        let q: f64 = s.parse().map_err(|_| bad())?;
        if q.is_infinite() && q > 0.0 {
            Ok(Self::Infinity)
        } else if q >= 1.0 {
            Ok(Self::Norm(q))
        } else {
            Err(bad())
        }
    }
}

impl From<QIndex> for String {
    fn from(q: QIndex) -> String {
        q.to_string()
    }
}

impl TryFrom<String> for QIndex {
    type Error = MuselError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub value: f64,
    pub kind: SensitivityKind,
    /// A cone vector attaining `value`, normalized as in the definition.
    pub certificate: Option<Vec<f64>>,
    /// Value attained by a feasible vector when `value` is only a bound.
    pub upper_bound: Option<f64>,
    pub s: usize,
    pub q: QIndex,
    pub lp_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityOptions {
    /// Maximum number of LPs an exact enumeration may use.
    pub budget: u128,
    /// Maximum number of candidate vertices for [`kappa_q_vertex`].
    pub vertex_budget: u128,
    pub lp: LpOptions,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        Self {
            budget: 100_000,
            vertex_budget: 2_000_000,
            lp: LpOptions::default(),
        }
    }
}

pub fn in_cone(delta: &[f64], j: &[usize]) -> bool {
    let on: f64 = j.iter().map(|&i| delta[i].abs()).sum();
    let off = norm1(delta) - on;
    off <= on + 1e-12
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_s(psi: &GramMatrix, s: usize) -> Result<()> {
    if s == 0 || s > psi.dim() {
        return Err(MuselError::InvalidArgument(format!(
            "s must lie in [1, {}], got {s}",
            psi.dim()
        )));
    }
    Ok(())
}

fn check_budget(needed: u128, cap: u128) -> Result<()> {
    if needed > cap {
        Err(MuselError::BudgetExceeded { needed, cap })
    } else {
        Ok(())
    }
}

/// Moves a vector that sits within LP tolerance of the cone boundary onto
/// the cone by shrinking its `J^c` part.
fn project_into_cone(delta: &mut [f64], j: &[usize]) {
    let on: f64 = j.iter().map(|&i| delta[i].abs()).sum();
    let off = norm1(delta) - on;
    if off > on && off > 0.0 {
        let f = on / off;
        for (i, d) in delta.iter_mut().enumerate() {
            if !j.contains(&i) {
                *d *= f;
            }
        }
    }
}

/// Variable layout `[a_J | w⁺_{J^c} | w⁻_{J^c} | t]` with `Δ_J = σ ∘ a`.
struct ConeLayout {
    p: usize,
    j: Vec<usize>,
    jc: Vec<usize>,
}

impl ConeLayout {
    fn new(p: usize, j: &[usize]) -> Self {
        let jc = (0..p).filter(|i| !j.contains(i)).collect();
        Self { p, j: j.to_vec(), jc }
    }

    fn nvars(&self) -> usize {
        self.j.len() + 2 * self.jc.len() + 1
    }

    fn t(&self) -> usize {
        self.nvars() - 1
    }

    fn a(&self, pos: usize) -> usize {
        pos
    }

    fn wp(&self, pos: usize) -> usize {
        self.j.len() + pos
    }

    fn wm(&self, pos: usize) -> usize {
        self.j.len() + self.jc.len() + pos
    }

    /// Coefficients of `(ΨΔ)_i`.
    fn psi_row(&self, psi: &GramMatrix, i: usize, sigma: &[f64]) -> Vec<f64> {
        let mut row = vec![0.0; self.nvars()];
        for (pos, &c) in self.j.iter().enumerate() {
            row[self.a(pos)] = psi.get(i, c) * sigma[pos];
        }
        for (pos, &c) in self.jc.iter().enumerate() {
            row[self.wp(pos)] = psi.get(i, c);
            row[self.wm(pos)] = -psi.get(i, c);
        }
        row
    }

    fn delta(&self, x: &[f64], sigma: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.p];
        for (pos, &c) in self.j.iter().enumerate() {
            d[c] = sigma[pos] * x[self.a(pos)];
        }
        for (pos, &c) in self.jc.iter().enumerate() {
            d[c] = x[self.wp(pos)] - x[self.wm(pos)];
        }
        d
    }

    /// `min t` subject to the cone row and `|ΨΔ|_∞ ≤ t`; split and `J`
    /// variables are bounded by `cap`.
    fn epigraph_lp(&self, psi: &GramMatrix, sigma: &[f64], cap: f64) -> LinearProgram {
        let n = self.nvars();
        let mut obj = vec![0.0; n];
        obj[self.t()] = 1.0;
        let mut lp = LinearProgram::new(obj);
        for v in 0..n - 1 {
            lp.set_bounds(v, 0.0, cap);
        }
        let mut cone = vec![0.0; n];
        for pos in 0..self.j.len() {
            cone[self.a(pos)] = -1.0;
        }
        for pos in 0..self.jc.len() {
            cone[self.wp(pos)] = 1.0;
            cone[self.wm(pos)] = 1.0;
        }
        lp.add_le(cone, 0.0);
        for i in 0..self.p {
            let mut row = self.psi_row(psi, i, sigma);
            row[self.t()] = -1.0;
            lp.add_le(row.clone(), 0.0);
            for v in row.iter_mut().take(n - 1) {
                *v = -*v;
            }
            lp.add_le(row, 0.0);
        }
        lp
    }

    /// Fixes `Δ_k = 1`; `None` when the sign pattern forbids it.
    fn anchor(&self, lp: &mut LinearProgram, sigma: &[f64], k: usize) -> Option<()> {
        if let Some(pos) = self.j.iter().position(|&c| c == k) {
            if sigma[pos] < 0.0 {
                return None;
            }
            lp.set_bounds(self.a(pos), 1.0, 1.0);
        } else {
            let pos = self.jc.iter().position(|&c| c == k)?;
            lp.set_bounds(self.wp(pos), 1.0, 1.0);
            lp.set_bounds(self.wm(pos), 0.0, 0.0);
        }
        Some(())
    }
}

fn sign_pattern(mask: usize, len: usize) -> Vec<f64> {
    (0..len).map(|b| if mask >> b & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    delta: Vec<f64>,
    j: Vec<usize>,
}

/// Keeps the first strictly smallest candidate so the result does not
/// depend on scheduling.
fn fold_min(results: Vec<(Option<Candidate>, usize)>) -> (Option<Candidate>, usize) {
    let mut lps = 0;
    let mut best: Option<Candidate> = None;
    for (cand, n) in results {
        lps += n;
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.value < b.value) {
                best = Some(c);
            }
        }
    }
    (best, lps)
}

fn subsets(p: usize, s: usize) -> Vec<Vec<usize>> {
    (0..p).combinations(s).collect()
}

/// Finishes a candidate: projects onto its cone, rescales so that
/// `norm(Δ) = 1`, and recomputes `|ΨΔ|_∞`.
fn normalize_candidate(psi: &GramMatrix, mut c: Candidate, norm: impl Fn(&[f64]) -> f64) -> Candidate {
    project_into_cone(&mut c.delta, &c.j);
    let scale = norm(&c.delta);
    if scale > 0.0 {
        c.delta.iter_mut().for_each(|d| *d /= scale);
    }
    c.value = norm_inf(&psi.mul_vec(&c.delta));
    c
}

/// Exact `κ_∞(s)`: anchors `Δ_k = 1` with `|Δ|_∞ ≤ 1` for every `k` and
/// every sign pattern on `J`.
pub fn kappa_inf_exact(psi: &GramMatrix, s: usize, opts: &SensitivityOptions) -> Result<SensitivityResult> {
    check_s(psi, s)?;
    let p = psi.dim();
    check_budget(binomial(p, s) * (1u128 << s.min(100)) * p as u128, opts.budget)?;
    let results: Vec<_> = subsets(p, s)
        .into_par_iter()
        .map(|j| -> Result<(Option<Candidate>, usize)> {
            let layout = ConeLayout::new(p, &j);
            let mut best: Option<Candidate> = None;
            let mut lps = 0;
            for mask in 0..1usize << s {
                let sigma = sign_pattern(mask, s);
                let base = layout.epigraph_lp(psi, &sigma, 1.0);
                for k in 0..p {
                    let mut lp = base.clone();
                    if layout.anchor(&mut lp, &sigma, k).is_none() {
                        continue;
                    }
                    let sol = solve_lp(&lp, &opts.lp)?;
                    lps += 1;
                    if sol.status != LpStatus::Optimal {
                        return Err(MuselError::Infeasible(format!(
                            "sensitivity subproblem ended with {:?}",
                            sol.status
                        )));
                    }
                    let t = sol.x[layout.t()];
                    if best.as_ref().is_none_or(|b| t < b.value) {
                        best = Some(Candidate { value: t, delta: layout.delta(&sol.x, &sigma), j: j.clone() });
                    }
                }
            }
            Ok((best, lps))
        })
        .collect::<Result<_>>()?;
    let (best, lps) = fold_min(results);
    let best = normalize_candidate(psi, best.expect("at least one subproblem"), norm_inf);
    Ok(SensitivityResult {
        value: best.value,
        kind: SensitivityKind::Exact,
        certificate: Some(best.delta),
        upper_bound: None,
        s,
        q: QIndex::Infinity,
        lp_count: lps,
    })
}

/// `κ_k*(s)` (0-based `k`). Exact by LP enumeration while
/// `C(p, s)·2^s` fits the budget; otherwise the value of
/// [`kappa_lower_bound`], which is below `κ_∞(s) ≤ κ_k*(s)`.
pub fn kappa_star(psi: &GramMatrix, s: usize, k: usize, opts: &SensitivityOptions) -> Result<SensitivityResult> {
    check_s(psi, s)?;
    let p = psi.dim();
    if k >= p {
        return Err(MuselError::InvalidArgument(format!("coordinate {} out of range 1..={p}", k + 1)));
    }
    if binomial(p, s) * (1u128 << s.min(100)) > opts.budget {
        let lb = kappa_lower_bound(psi, s, opts)?;
        return Ok(SensitivityResult { q: QIndex::Coordinate(k), ..lb });
    }
    let results: Vec<_> = subsets(p, s)
        .into_par_iter()
        .map(|j| -> Result<(Option<Candidate>, usize)> {
            let layout = ConeLayout::new(p, &j);
            let mut best: Option<Candidate> = None;
            let mut lps = 0;
            for mask in 0..1usize << s {
                let sigma = sign_pattern(mask, s);
                let mut lp = layout.epigraph_lp(psi, &sigma, f64::INFINITY);
                if layout.anchor(&mut lp, &sigma, k).is_none() {
                    continue;
                }
                let sol = solve_lp(&lp, &opts.lp)?;
                lps += 1;
                if sol.status != LpStatus::Optimal {
                    return Err(MuselError::Infeasible(format!(
                        "sensitivity subproblem ended with {:?}",
                        sol.status
                    )));
                }
                let t = sol.x[layout.t()];
                if best.as_ref().is_none_or(|b| t < b.value) {
                    best = Some(Candidate { value: t, delta: layout.delta(&sol.x, &sigma), j: j.clone() });
                }
            }
            Ok((best, lps))
        })
        .collect::<Result<_>>()?;
    let (best, lps) = fold_min(results);
    let best = normalize_candidate(psi, best.expect("at least one subproblem"), |d| d[k]);
    Ok(SensitivityResult {
        value: best.value,
        kind: SensitivityKind::Exact,
        certificate: Some(best.delta),
        upper_bound: None,
        s,
        q: QIndex::Coordinate(k),
        lp_count: lps,
    })
}

/// Lower bound on `κ_∞(s)` over the convex relaxation
/// `{Δ_k = 1, |Δ|_∞ ≤ 1, |Δ|₁ ≤ 2s}`, one LP per `k`.
pub fn kappa_lower_bound(psi: &GramMatrix, s: usize, opts: &SensitivityOptions) -> Result<SensitivityResult> {
    check_s(psi, s)?;
    let p = psi.dim();
    // Variables [u⁺ (p) | u⁻ (p) | t].
    let n = 2 * p + 1;
    let mut base = LinearProgram::new((0..n).map(|v| if v == n - 1 { 1.0 } else { 0.0 }).collect());
    for v in 0..2 * p {
        base.set_bounds(v, 0.0, 1.0);
    }
    let mut l1 = vec![1.0; n];
    l1[n - 1] = 0.0;
    base.add_le(l1, 2.0 * s as f64);
    for i in 0..p {
        let mut row = vec![0.0; n];
        for c in 0..p {
            row[c] = psi.get(i, c);
            row[p + c] = -psi.get(i, c);
        }
        row[n - 1] = -1.0;
        base.add_le(row.clone(), 0.0);
        for v in row.iter_mut().take(2 * p) {
            *v = -*v;
        }
        base.add_le(row, 0.0);
    }
    let values: Vec<f64> = (0..p)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut lp = base.clone();
            lp.set_bounds(k, 1.0, 1.0);
            lp.set_bounds(p + k, 0.0, 0.0);
            let sol = solve_lp(&lp, &opts.lp)?;
            match sol.status {
                LpStatus::Optimal => Ok(sol.objective_value.max(0.0)),
                other => Err(MuselError::Infeasible(format!("lower-bound LP ended with {other:?}"))),
            }
        })
        .collect::<Result<_>>()?;
    Ok(SensitivityResult {
        value: values.iter().copied().fold(f64::INFINITY, f64::min),
        kind: SensitivityKind::LowerBound,
        certificate: None,
        upper_bound: None,
        s,
        q: QIndex::Infinity,
        lp_count: p,
    })
}

/// One orthant `Δ = σ ∘ w`, `w ≥ 0`, inside `C_J`:
/// rows `Σ_{J^c} w − Σ_J w ≤ 0` and `±(Ψ diag(σ) w) ≤ 1`.
fn orthant_rows(psi: &GramMatrix, sigma: &[f64], j: &[usize]) -> Vec<(Vec<f64>, f64)> {
    let p = psi.dim();
    let mut rows = Vec::with_capacity(2 * p + 1);
    rows.push(((0..p).map(|c| if j.contains(&c) { -1.0 } else { 1.0 }).collect(), 0.0));
    for i in 0..p {
        let r: Vec<f64> = (0..p).map(|c| psi.get(i, c) * sigma[c]).collect();
        rows.push((r.iter().map(|v| -v).collect(), 1.0));
        rows.push((r, 1.0));
    }
    rows
}

/// `max Σw` over one orthant piece; `None` when unbounded.
fn orthant_l1_max(
    psi: &GramMatrix,
    sigma: &[f64],
    j: &[usize],
    lp_opts: &LpOptions,
) -> Result<Option<(f64, Vec<f64>)>> {
    let p = psi.dim();
    let mut lp = LinearProgram::new(vec![-1.0; p]);
    for (row, rhs) in orthant_rows(psi, sigma, j) {
        lp.add_le(row, rhs);
    }
    let sol = solve_lp(&lp, lp_opts)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some((-sol.objective_value, sol.x))),
        LpStatus::Unbounded => Ok(None),
        other => Err(MuselError::Infeasible(format!("orthant LP ended with {other:?}"))),
    }
}

/// `κ₁(s)`. Exact by orthant enumeration (`κ₁ = 1 / max |Δ|₁` over
/// `C_J ∩ {|ΨΔ|_∞ ≤ 1}`, linear inside each orthant) while
/// `2^{p−1}·C(p, s)` fits the budget. Otherwise the split LP with
/// `|Δ_J|₁ + Σ(w⁺ + w⁻) = 1`: the split can carry mass that cancels, so
/// its value is a lower bound; it is promoted to exact when the best
/// certificate closes the gap to 1e-5.
pub fn kappa_one(psi: &GramMatrix, s: usize, opts: &SensitivityOptions) -> Result<SensitivityResult> {
    check_s(psi, s)?;
    let p = psi.dim();
    let orthants = if p >= 100 { u128::MAX } else { 1u128 << (p - 1) };
    if binomial(p, s).saturating_mul(orthants) <= opts.budget {
        kappa_one_orthants(psi, s, opts)
    } else {
        check_budget(binomial(p, s) * (1u128 << s.min(100)), opts.budget)?;
        kappa_one_split(psi, s, opts)
    }
}

fn kappa_one_orthants(psi: &GramMatrix, s: usize, opts: &SensitivityOptions) -> Result<SensitivityResult> {
    let p = psi.dim();
    let results: Vec<_> = subsets(p, s)
        .into_par_iter()
        .map(|j| -> Result<(Option<Candidate>, usize)> {
            // Largest ℓ1 mass wins; stored negated so `fold_min` applies.
            let mut best: Option<Candidate> = None;
            let mut lps = 0;
            for mask in 0..1usize << (p - 1) {
                let sigma: Vec<f64> = std::iter::once(1.0).chain(sign_pattern(mask, p - 1)).collect();
                lps += 1;
                match orthant_l1_max(psi, &sigma, &j, &opts.lp)? {
                    None => {
                        return Ok((Some(Candidate { value: f64::NEG_INFINITY, delta: vec![], j }), lps))
                    }
                    Some((m, w)) => {
                        if best.as_ref().is_none_or(|b| -m < b.value) {
                            let delta = w.iter().zip(&sigma).map(|(a, b)| a * b).collect();
                            best = Some(Candidate { value: -m, delta, j: j.clone() });
                        }
                    }
                }
            }
            Ok((best, lps))
        })
        .collect::<Result<_>>()?;
    let (best, lps) = fold_min(results);
    let best = best.expect("at least one orthant");
    if best.value == f64::NEG_INFINITY {
        return Ok(SensitivityResult {
            value: 0.0,
            kind: SensitivityKind::Exact,
            certificate: None,
            upper_bound: None,
            s,
            q: QIndex::Norm(1.0),
            lp_count: lps,
        });
    }
    let best = normalize_candidate(psi, best, norm1);
    Ok(SensitivityResult {
        value: best.value,
        kind: SensitivityKind::Exact,
        certificate: Some(best.delta),
        upper_bound: None,
        s,
        q: QIndex::Norm(1.0),
        lp_count: lps,
    })
}

fn kappa_one_split(psi: &GramMatrix, s: usize, opts: &SensitivityOptions) -> Result<SensitivityResult> {
    let p = psi.dim();
    let results: Vec<_> = subsets(p, s)
        .into_par_iter()
        .map(|j| -> Result<(Option<Candidate>, usize)> {
            let layout = ConeLayout::new(p, &j);
            let mut best: Option<Candidate> = None;
            let mut lps = 0;
            for mask in 0..1usize << s {
                let sigma = sign_pattern(mask, s);
                let mut lp = layout.epigraph_lp(psi, &sigma, f64::INFINITY);
                let mut total = vec![1.0; layout.nvars()];
                total[layout.t()] = 0.0;
                lp.add_eq(total, 1.0);
                let sol = solve_lp(&lp, &opts.lp)?;
                lps += 1;
                if sol.status != LpStatus::Optimal {
                    return Err(MuselError::Infeasible(format!("κ₁ LP ended with {:?}", sol.status)));
                }
                let t = sol.x[layout.t()];
                if best.as_ref().is_none_or(|b| t < b.value) {
                    best = Some(Candidate { value: t, delta: layout.delta(&sol.x, &sigma), j: j.clone() });
                }
            }
            Ok((best, lps))
        })
        .collect::<Result<_>>()?;
    let (best, lps) = fold_min(results);
    let best = best.expect("at least one subproblem");
    let lower = best.value.max(0.0);
    let attained = normalize_candidate(psi, best, norm1);
    let exact = attained.value - lower <= 1e-5 * lower.max(1.0);
    Ok(if exact {
        SensitivityResult {
            value: attained.value,
            kind: SensitivityKind::Exact,
            certificate: Some(attained.delta),
            upper_bound: None,
            s,
            q: QIndex::Norm(1.0),
            lp_count: lps,
        }
    } else {
        SensitivityResult {
            value: lower,
            kind: SensitivityKind::LowerBound,
            certificate: None,
            upper_bound: Some(attained.value),
            s,
            q: QIndex::Norm(1.0),
            lp_count: lps,
        }
    })
}

/// Gaussian elimination with partial pivoting on an `n × n` row-major system.
fn solve_square(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-11 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r * n + c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r * n + r];
    }
    Some(x)
}

/// Exact `κ_q(s)` for any `q ≥ 1` on small `p`: `|Δ|_q` is convex, so its
/// maximum over each bounded polytope `C_J ∩ orthant ∩ {|ΨΔ|_∞ ≤ 1}` sits
/// at a vertex; all vertices are enumerated.
pub fn kappa_q_vertex(psi: &GramMatrix, s: usize, q: f64, opts: &SensitivityOptions) -> Result<SensitivityResult> {
    check_s(psi, s)?;
    if !(q >= 1.0) {
        return Err(MuselError::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    let p = psi.dim();
    if p > 12 {
        return Err(MuselError::TooLarge(format!("vertex enumeration needs p <= 12, got {p}")));
    }
    let m = 3 * p + 1;
    let needed = (1u128 << (p - 1)) * binomial(p, s) * binomial(m, p);
    check_budget(needed, opts.vertex_budget)?;
    let qidx = if q.is_infinite() { QIndex::Infinity } else { QIndex::Norm(q) };

    let results: Vec<_> = subsets(p, s)
        .into_par_iter()
        .map(|j| -> Result<(Option<Candidate>, usize)> {
            let mut best: Option<Candidate> = None;
            let mut lps = 0;
            for mask in 0..1usize << (p - 1) {
                let sigma: Vec<f64> = std::iter::once(1.0).chain(sign_pattern(mask, p - 1)).collect();
                lps += 1;
                if orthant_l1_max(psi, &sigma, &j, &opts.lp)?.is_none() {
                    return Ok((Some(Candidate { value: f64::NEG_INFINITY, delta: vec![], j }), lps));
                }
                // Constraints `row · w ≤ rhs`, including `−w ≤ 0`.
                let mut cons = orthant_rows(psi, &sigma, &j);
                for c in 0..p {
                    let mut e = vec![0.0; p];
                    e[c] = -1.0;
                    cons.push((e, 0.0));
                }
                for active in (0..cons.len()).combinations(p) {
                    let a: Vec<f64> = active.iter().flat_map(|&i| cons[i].0.iter().copied()).collect();
                    let b: Vec<f64> = active.iter().map(|&i| cons[i].1).collect();
                    let Some(w) = solve_square(a, b, p) else { continue };
                    let feasible = cons.iter().all(|(row, rhs)| {
                        let lhs: f64 = row.iter().zip(&w).map(|(r, v)| r * v).sum();
                        lhs <= rhs + 1e-9
                    });
                    if !feasible {
                        continue;
                    }
                    let val = norm_q(&w, q);
                    if best.as_ref().is_none_or(|b| -val < b.value) {
                        let delta = w.iter().zip(&sigma).map(|(a, b)| a * b).collect();
                        best = Some(Candidate { value: -val, delta, j: j.clone() });
                    }
                }
            }
            Ok((best, lps))
        })
        .collect::<Result<_>>()?;
    let (best, lps) = fold_min(results);
    let best = best.expect("at least one orthant");
    if best.value == f64::NEG_INFINITY {
        return Ok(SensitivityResult {
            value: 0.0,
            kind: SensitivityKind::Exact,
            certificate: None,
            upper_bound: None,
            s,
            q: qidx,
            lp_count: lps,
        });
    }
    let best = normalize_candidate(psi, best, |d| norm_q(d, q));
    Ok(SensitivityResult {
        value: best.value,
        kind: SensitivityKind::Exact,
        certificate: Some(best.delta),
        upper_bound: None,
        s,
        q: qidx,
        lp_count: lps,
    })
}

/// `(2s)^{−1/q} κ_∞(s)`, a lower bound on `κ_q(s)`.
pub fn kappa_q_from_inf(kappa_inf: f64, s: usize, q: f64) -> f64 {
    if q.is_infinite() {
        kappa_inf
    } else {
        (2.0 * s as f64).powf(-1.0 / q) * kappa_inf
    }
}

/// `Ψ̂ = (1/n)ZᵀZ − D̂`; may be indefinite.
pub fn empirical_gram(z: &DenseMatrix, d_hat: &[f64]) -> Result<GramMatrix> {
    if d_hat.len() != z.cols() {
        return Err(MuselError::Dimension(format!(
            "compensation has {} entries for {} columns",
            d_hat.len(),
            z.cols()
        )));
    }
    let mut m = gram(z)?.into_matrix();
    for (j, d) in d_hat.iter().enumerate() {
        m.set(j, j, m.get(j, j) - d);
    }
    GramMatrix::new(m)
}

/// Computes the sensitivity named by `q`: exact where the budget allows,
/// otherwise an error (or, with `allow_lower_bound`, a lower bound).
pub fn sensitivity(
    psi: &GramMatrix,
    s: usize,
    q: QIndex,
    allow_lower_bound: bool,
    opts: &SensitivityOptions,
) -> Result<SensitivityResult> {
    let fallback = |e: MuselError| -> Result<SensitivityResult> {
        match e {
            MuselError::BudgetExceeded { .. } if allow_lower_bound => {
                let lb = kappa_lower_bound(psi, s, opts)?;
                Ok(match q {
                    QIndex::Norm(qq) => SensitivityResult {
                        value: kappa_q_from_inf(lb.value, s, qq),
                        q,
                        ..lb
                    },
                    _ => SensitivityResult { q, ..lb },
                })
            }
            other => Err(other),
        }
    };
    let exact = match q {
        QIndex::Infinity => kappa_inf_exact(psi, s, opts),
        QIndex::Coordinate(k) => kappa_star(psi, s, k, opts),
        QIndex::Norm(qq) if qq == 1.0 => kappa_one(psi, s, opts),
        QIndex::Norm(qq) => kappa_q_vertex(psi, s, qq, opts),
    };
    exact.or_else(fallback)
}
