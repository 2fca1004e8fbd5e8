//! Dense bounded-variable simplex solver.
//!
//! Problems have the form
//!
//! ```text
//! minimize    cᵀx
//! subject to  aᵢ·x ≤ bᵢ   (inequality rows)
//!             eₖ·x = fₖ   (equality rows)
//!             l ≤ x ≤ u   (l may be −∞, u may be +∞)
//! ```
//!
//! Every inequality row gets a slack column. The starting basis is made of
//! slacks and, where needed, artificial columns. When that basis is dual
//! feasible (for instance when every cost is nonnegative and every variable
//! starts at its lower bound) the dual simplex runs directly from it; all
//! other problems go through a two-phase primal simplex. Pricing is
//! Dantzig's rule, falling back to Bland's rule after a run of degenerate
//! pivots. Ties are always broken by the lowest variable index, so a solve is
//! a deterministic function of its input.

use crate::error::{MuselError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};

/// One linear constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub row: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    /// Minimized objective coefficients.
    pub objective: Vec<f64>,
    /// Rows with `row·x ≤ rhs`.
    pub ineq: Vec<Constraint>,
    /// Rows with `row·x = rhs`.
    pub eq: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// A program over `x ≥ 0` with no constraints yet.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            ineq: Vec::new(),
            eq: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.ineq.len() + self.eq.len()
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq.push(Constraint { row, rhs });
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq.push(Constraint {
            row: row.into_iter().map(|v| -v).collect(),
            rhs: -rhs,
        });
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq.push(Constraint { row, rhs });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(MuselError::Dimension("bound vectors must match objective".into()));
        }
        if let Some(j) = self.objective.iter().position(|v| !v.is_finite()) {
            return Err(MuselError::NonFinite(format!("objective[{j}]")));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(MuselError::NonFinite(format!("bounds of variable {j}")));
            }
            if l > u {
                return Err(MuselError::InvalidArgument(format!(
                    "variable {j} has lower bound {l} above upper bound {u}"
                )));
            }
        }
        for (kind, rows) in [("ineq", &self.ineq), ("eq", &self.eq)] {
            for (i, c) in rows.iter().enumerate() {
                if c.row.len() != n {
                    return Err(MuselError::Dimension(format!(
                        "{kind} row {i} has {} coefficients, expected {n}",
                        c.row.len()
                    )));
                }
                if !c.rhs.is_finite() || c.row.iter().any(|v| !v.is_finite()) {
                    return Err(MuselError::NonFinite(format!("{kind} row {i}")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.ineq {
            worst = worst.max(dot(&c.row, x) - c.rhs);
        }
        for c in &self.eq {
            worst = worst.max((dot(&c.row, x) - c.rhs).abs());
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }
}

impl fmt::Display for LinearProgram {
    /// Plain-text dump, one row per line, meant for bug reports.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row_text = |row: &[f64]| {
            let mut s = String::new();
            for v in row {
                let _ = write!(s, " {v:>12.6e}");
            }
            s
        };
        writeln!(
            f,
            "LP {} vars, {} ineq, {} eq",
            self.num_vars(),
            self.ineq.len(),
            self.eq.len()
        )?;
        writeln!(f, "min {}", row_text(&self.objective))?;
        for c in &self.ineq {
            writeln!(f, "le  {} | {:.6e}", row_text(&c.row), c.rhs)?;
        }
        for c in &self.eq {
            writeln!(f, "eq  {} | {:.6e}", row_text(&c.row), c.rhs)?;
        }
        writeln!(f, "lo  {}", row_text(&self.lower))?;
        writeln!(f, "up  {}", row_text(&self.upper))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LpMethod {
    /// Dual simplex when the starting basis is dual feasible, primal otherwise.
    #[default]
    Auto,
    /// Always the two-phase primal simplex.
    Primal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// `None` means `50·(vars + constraints)`.
    pub max_iters: Option<usize>,
    pub method: LpMethod,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            max_iters: None,
            method: LpMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    /// Constraint multipliers (inequality rows first, then equality rows)
    /// such that `c − Aᵀy` are the reduced costs. Meaningful when optimal.
    pub duals: Vec<f64>,
    /// On infeasibility: row multipliers whose combination of the
    /// constraints cannot be satisfied together with the bounds.
    pub farkas: Option<Vec<f64>>,
    /// Largest constraint or bound violation of `x`.
    pub max_violation: f64,
}

pub fn solve_lp(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let max_iters = opts
        .max_iters
        .unwrap_or(50 * (lp.num_vars() + lp.num_constraints()).max(1));
    let mut tab = Tableau::build(lp, opts);
    let status = tab.run(max_iters);
    let x = tab.structural_values();
    let max_violation = lp.max_violation(&x);
    if status == LpStatus::Optimal {
        debug_assert!(
            max_violation <= opts.feas_tol * (1.0 + tab.b_scale) * 10.0,
            "optimal LP point violates constraints by {max_violation}"
        );
    }
    Ok(LpSolution {
        status,
        objective_value: lp.objective_at(&x),
        iterations: tab.iterations,
        duals: tab.duals(),
        farkas: tab.farkas.clone(),
        max_violation,
        x,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const PIVOT_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 50;
const MAX_REINVERSIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable sitting at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pricing {
    Dantzig,
    Bland,
}

enum Step {
    Optimal,
    Continue,
    Unbounded,
    Infeasible,
}

struct Tableau {
    m: usize,
    nc: usize,
    n_struct: usize,
    n_ineq: usize,
    /// Row-major `m × nc`, equals `B⁻¹A'` where `A'` is the row-flipped system.
    t: Vec<f64>,
    /// `B⁻¹b'`.
    rhs: Vec<f64>,
    a0: Vec<f64>,
    b0: Vec<f64>,
    flip: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    /// Column of the artificial variable for each row, if any.
    art_of_row: Vec<Option<usize>>,
    art_start: usize,
    feas_tol: f64,
    opt_tol: f64,
    b_scale: f64,
    dual_mode: bool,
    iterations: usize,
    pricing: Pricing,
    degenerate_run: usize,
    farkas: Option<Vec<f64>>,
    struct_cost: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram, opts: &LpOptions) -> Self {
        let n = lp.num_vars();
        let n_ineq = lp.ineq.len();
        let m = n_ineq + lp.eq.len();
        let rows: Vec<&Constraint> = lp.ineq.iter().chain(lp.eq.iter()).collect();

        // Starting positions of the structural variables.
        let mut state = Vec::with_capacity(n);
        let mut xval = Vec::with_capacity(n);
        for j in 0..n {
            let (l, u, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
            let st = match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    if c >= 0.0 {
                        VarState::Lower
                    } else {
                        VarState::Upper
                    }
                }
                (true, false) => VarState::Lower,
                (false, true) => VarState::Upper,
                (false, false) => VarState::Free,
            };
            xval.push(match st {
                VarState::Lower => l,
                VarState::Upper => u,
                _ => 0.0,
            });
            state.push(st);
        }

        let dual_feasible = (0..n).all(|j| {
            let c = lp.objective[j];
            if lp.lower[j] == lp.upper[j] {
                return true;
            }
            match state[j] {
                VarState::Lower => c >= 0.0,
                VarState::Upper => c <= 0.0,
                VarState::Free => c == 0.0,
                VarState::Basic => unreachable!(),
            }
        });
        let dual_mode = dual_feasible && opts.method == LpMethod::Auto;

        let residual: Vec<f64> = rows.iter().map(|c| c.rhs - dot(&c.row, &xval)).collect();
        let mut flip = vec![1.0; m];
        let mut needs_art = vec![false; m];
        for i in 0..m {
            let is_eq = i >= n_ineq;
            if is_eq || (!dual_mode && residual[i] < 0.0) {
                needs_art[i] = true;
                if !dual_mode && residual[i] < 0.0 {
                    flip[i] = -1.0;
                }
            }
        }
        let n_art = needs_art.iter().filter(|&&b| b).count();
        let art_start = n + n_ineq;
        let nc = art_start + n_art;

        let mut a0 = vec![0.0; m * nc];
        let mut b0 = vec![0.0; m];
        let mut art_of_row = vec![None; m];
        let mut next_art = art_start;
        for (i, c) in rows.iter().enumerate() {
            let f = flip[i];
            let dst = &mut a0[i * nc..(i + 1) * nc];
            for (d, &v) in dst[..n].iter_mut().zip(&c.row) {
                *d = f * v;
            }
            if i < n_ineq {
                dst[n + i] = f;
            }
            if needs_art[i] {
                dst[next_art] = 1.0;
                art_of_row[i] = Some(next_art);
                next_art += 1;
            }
            b0[i] = f * c.rhs;
        }

        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        lo.extend(std::iter::repeat_n(0.0, n_ineq));
        hi.extend(std::iter::repeat_n(f64::INFINITY, n_ineq));
        let art_hi = if dual_mode { 0.0 } else { f64::INFINITY };
        lo.extend(std::iter::repeat_n(0.0, n_art));
        hi.extend(std::iter::repeat_n(art_hi, n_art));

        state.extend(std::iter::repeat_n(VarState::Lower, nc - n));
        let mut basis = vec![0; m];
        let mut xb = vec![0.0; m];
        for i in 0..m {
            let col = art_of_row[i].unwrap_or(n + i);
            basis[i] = col;
            state[col] = VarState::Basic;
            xb[i] = flip[i] * residual[i];
        }

        let b_scale = b0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Self {
            m,
            nc,
            n_struct: n,
            n_ineq,
            t: a0.clone(),
            rhs: b0.clone(),
            a0,
            b0,
            flip,
            lo,
            hi,
            state,
            basis,
            xb,
            cost: vec![0.0; nc],
            d: vec![0.0; nc],
            art_of_row,
            art_start,
            feas_tol: opts.feas_tol,
            opt_tol: opts.opt_tol,
            b_scale,
            dual_mode,
            iterations: 0,
            pricing: Pricing::Dantzig,
            degenerate_run: 0,
            farkas: None,
            struct_cost: lp.objective.clone(),
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.nc..(i + 1) * self.nc]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lo[j],
            VarState::Upper => self.hi[j],
            VarState::Free | VarState::Basic => 0.0,
        }
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, &tij) in d.iter_mut().zip(self.row(i)) {
                    *dj -= cb * tij;
                }
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        self.d = d;
    }

    fn phase2_cost(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.nc];
        c[..self.n_struct].copy_from_slice(&self.struct_cost);
        c
    }

    fn run(&mut self, max_iters: usize) -> LpStatus {
        let mut status = if self.dual_mode {
            self.set_cost(self.phase2_cost());
            self.dual_loop(max_iters)
        } else {
            self.two_phase(max_iters)
        };
        let mut reinversions = 0;
        while status == LpStatus::Optimal && reinversions < MAX_REINVERSIONS {
            if self.verify_primal() {
                break;
            }
            reinversions += 1;
            if !self.reinvert() {
                break;
            }
            status = if self.primal_feasible() {
                self.primal_loop(max_iters)
            } else if self.dual_feasible() {
                self.dual_loop(max_iters)
            } else {
                // Both slightly off after refactoring; the primal loop can
                // only improve the objective from here.
                self.primal_loop(max_iters)
            };
        }
        status
    }

    fn two_phase(&mut self, max_iters: usize) -> LpStatus {
        let has_art = self.art_of_row.iter().any(Option::is_some);
        if has_art {
            let mut c1 = vec![0.0; self.nc];
            for j in self.art_start..self.nc {
                c1[j] = 1.0;
            }
            self.set_cost(c1);
            let st = self.primal_loop(max_iters);
            if st == LpStatus::IterationLimit {
                return st;
            }
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.art_start)
                .map(|i| self.xb[i].max(0.0))
                .sum();
            if infeas > self.feas_tol * (1.0 + self.b_scale) {
                self.farkas = Some(self.duals());
                return LpStatus::Infeasible;
            }
            for j in self.art_start..self.nc {
                self.hi[j] = 0.0;
                if self.state[j] != VarState::Basic {
                    self.state[j] = VarState::Lower;
                }
            }
            self.drive_out_artificials();
        }
        self.set_cost(self.phase2_cost());
        self.pricing = Pricing::Dantzig;
        self.degenerate_run = 0;
        self.primal_loop(max_iters)
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.art_start {
                continue;
            }
            let row = self.row(r);
            let q = (0..self.art_start)
                .find(|&j| self.state[j] != VarState::Basic && row[j].abs() > PIVOT_TOL);
            if let Some(q) = q {
                // Degenerate pivot: the artificial sits at zero.
                let leaving = self.basis[r];
                let xq = self.nonbasic_value(q);
                self.pivot(r, q);
                self.state[leaving] = VarState::Lower;
                self.xb[r] = xq;
                self.state[q] = VarState::Basic;
                self.basis[r] = q;
            }
        }
    }

    fn primal_loop(&mut self, max_iters: usize) -> LpStatus {
        loop {
            if self.iterations >= max_iters {
                return LpStatus::IterationLimit;
            }
            match self.primal_step() {
                Step::Optimal => return LpStatus::Optimal,
                Step::Unbounded => return LpStatus::Unbounded,
                Step::Infeasible => return LpStatus::Infeasible,
                Step::Continue => self.iterations += 1,
            }
        }
    }

    fn dual_loop(&mut self, max_iters: usize) -> LpStatus {
        loop {
            if self.iterations >= max_iters {
                return LpStatus::IterationLimit;
            }
            match self.dual_step() {
                Step::Optimal => return LpStatus::Optimal,
                Step::Unbounded => return LpStatus::Unbounded,
                Step::Infeasible => return LpStatus::Infeasible,
                Step::Continue => self.iterations += 1,
            }
        }
    }

    fn note_step(&mut self, degenerate: bool) {
        if degenerate {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_STREAK {
                self.pricing = Pricing::Bland;
            }
        } else {
            self.degenerate_run = 0;
            self.pricing = Pricing::Dantzig;
        }
    }

    fn primal_step(&mut self) -> Step {
        // Pricing.
        let mut entering: Option<(usize, f64)> = None;
        let mut best = 0.0;
        for j in 0..self.nc {
            let st = self.state[j];
            if st == VarState::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = match st {
                VarState::Lower if dj < -self.opt_tol => 1.0,
                VarState::Upper if dj > self.opt_tol => -1.0,
                VarState::Free if dj.abs() > self.opt_tol => -dj.signum(),
                _ => continue,
            };
            if self.pricing == Pricing::Bland {
                entering = Some((j, dir));
                break;
            }
            if dj.abs() > best {
                best = dj.abs();
                entering = Some((j, dir));
            }
        }
        let Some((q, dir)) = entering else {
            return Step::Optimal;
        };

        // Ratio test.
        let range = self.hi[q] - self.lo[q];
        let mut step = if range.is_finite() { range } else { f64::INFINITY };
        let mut leave: Option<usize> = None;
        for i in 0..self.m {
            let alpha = dir * self.t[i * self.nc + q];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let limit = if alpha > 0.0 {
                if self.lo[b] == f64::NEG_INFINITY {
                    continue;
                }
                (self.xb[i] - self.lo[b]) / alpha
            } else {
                if self.hi[b] == f64::INFINITY {
                    continue;
                }
                (self.hi[b] - self.xb[i]) / -alpha
            };
            let limit = limit.max(0.0);
            let better = match leave {
                _ if limit < step - TIE_TOL => true,
                Some(cur) => (limit - step).abs() <= TIE_TOL && b < self.basis[cur],
                None => false,
            };
            if better {
                step = limit;
                leave = Some(i);
            }
        }
        if step == f64::INFINITY {
            return Step::Unbounded;
        }

        let xq_old = self.nonbasic_value(q);
        for i in 0..self.m {
            let tiq = self.t[i * self.nc + q];
            if tiq != 0.0 {
                self.xb[i] -= dir * step * tiq;
            }
        }
        self.note_step(step <= TIE_TOL);
        match leave {
            None => {
                self.state[q] = if dir > 0.0 {
                    VarState::Upper
                } else {
                    VarState::Lower
                };
            }
            Some(r) => {
                let alpha = dir * self.t[r * self.nc + q];
                let leaving = self.basis[r];
                self.pivot(r, q);
                self.state[leaving] = if alpha > 0.0 {
                    VarState::Lower
                } else {
                    VarState::Upper
                };
                self.basis[r] = q;
                self.state[q] = VarState::Basic;
                self.xb[r] = xq_old + dir * step;
            }
        }
        Step::Continue
    }

    fn dual_step(&mut self) -> Step {
        // Leaving row: largest bound violation.
        let mut leave: Option<(usize, bool)> = None;
        let mut worst = 0.0;
        for i in 0..self.m {
            let b = self.basis[i];
            let tol = self.feas_tol * (1.0 + self.xb[i].abs().min(1e6));
            let (viol, to_lower) = if self.xb[i] < self.lo[b] - tol {
                (self.lo[b] - self.xb[i], true)
            } else if self.xb[i] > self.hi[b] + tol {
                (self.xb[i] - self.hi[b], false)
            } else {
                continue;
            };
            let better = match (self.pricing, leave) {
                (_, None) => true,
                (Pricing::Bland, Some((cur, _))) => b < self.basis[cur],
                (Pricing::Dantzig, Some((cur, _))) => {
                    viol > worst || (viol == worst && b < self.basis[cur])
                }
            };
            if better {
                worst = viol;
                leave = Some((i, to_lower));
            }
        }
        let Some((r, to_lower)) = leave else {
            return Step::Optimal;
        };

        // Entering column: dual ratio test on row r.
        let row = &self.t[r * self.nc..(r + 1) * self.nc];
        let mut entering: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for j in 0..self.nc {
            let st = self.state[j];
            if st == VarState::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let a = row[j];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            // Moving x_j in its admissible direction must push x_B(r) toward
            // the violated bound.
            let eligible = match st {
                VarState::Lower => (a < 0.0) == to_lower,
                VarState::Upper => (a > 0.0) == to_lower,
                VarState::Free => true,
                VarState::Basic => false,
            };
            if !eligible {
                continue;
            }
            let ratio = (self.d[j].abs() / a.abs()).max(0.0);
            if ratio < best_ratio - TIE_TOL {
                best_ratio = ratio;
                entering = Some(j);
            }
        }
        let Some(q) = entering else {
            self.farkas = Some(self.row_certificate(r));
            return Step::Infeasible;
        };

        let leaving = self.basis[r];
        let target = if to_lower {
            self.lo[leaving]
        } else {
            self.hi[leaving]
        };
        let alpha = self.t[r * self.nc + q];
        let delta_q = (self.xb[r] - target) / alpha;
        let xq_old = self.nonbasic_value(q);
        for i in 0..self.m {
            let tiq = self.t[i * self.nc + q];
            if tiq != 0.0 {
                self.xb[i] -= tiq * delta_q;
            }
        }
        self.note_step(best_ratio <= TIE_TOL);
        self.pivot(r, q);
        self.state[leaving] = if to_lower {
            VarState::Lower
        } else {
            VarState::Upper
        };
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
        self.xb[r] = xq_old + delta_q;
        Step::Continue
    }

    /// Gauss-Jordan pivot on `(r, q)`; updates the tableau, rhs and reduced
    /// costs but not the basic values.
    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.nc;
        let piv = self.t[r * nc + q];
        let inv = 1.0 / piv;
        {
            let prow = &mut self.t[r * nc..(r + 1) * nc];
            for v in prow.iter_mut() {
                *v *= inv;
            }
            prow[q] = 1.0;
        }
        self.rhs[r] *= inv;
        let prow: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        let nz: Vec<usize> = prow
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect();
        let dense = nz.len() * 3 > nc;
        let prhs = self.rhs[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let dst = &mut self.t[i * nc..(i + 1) * nc];
            if dense {
                for (dv, &pv) in dst.iter_mut().zip(&prow) {
                    *dv -= f * pv;
                }
            } else {
                for &j in &nz {
                    dst[j] -= f * prow[j];
                }
            }
            dst[q] = 0.0;
            self.rhs[i] -= f * prhs;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &j in &nz {
                self.d[j] -= dq * prow[j];
            }
            self.d[q] = 0.0;
        }
    }

    fn primal_feasible(&self) -> bool {
        (0..self.m).all(|i| {
            let b = self.basis[i];
            let tol = self.feas_tol * (1.0 + self.xb[i].abs());
            self.xb[i] >= self.lo[b] - tol && self.xb[i] <= self.hi[b] + tol
        })
    }

    fn dual_feasible(&self) -> bool {
        (0..self.nc).all(|j| {
            if self.lo[j] == self.hi[j] {
                return true;
            }
            match self.state[j] {
                VarState::Basic => true,
                VarState::Lower => self.d[j] >= -self.opt_tol,
                VarState::Upper => self.d[j] <= self.opt_tol,
                VarState::Free => self.d[j].abs() <= self.opt_tol,
            }
        })
    }

    /// Checks the current point against the original, unfactored system.
    fn verify_primal(&self) -> bool {
        let x = self.all_values();
        for i in 0..self.m {
            let r = &self.a0[i * self.nc..(i + 1) * self.nc];
            let lhs = dot(r, &x);
            if (lhs - self.b0[i]).abs() > self.feas_tol * (1.0 + self.b0[i].abs()) * 10.0 {
                return false;
            }
        }
        (0..self.nc).all(|j| {
            let tol = self.feas_tol * (1.0 + x[j].abs()) * 10.0;
            x[j] >= self.lo[j] - tol && x[j] <= self.hi[j] + tol
        })
    }

    /// Rebuilds `B⁻¹A` from the original rows for the current basis.
    fn reinvert(&mut self) -> bool {
        let nc = self.nc;
        self.t.copy_from_slice(&self.a0);
        self.rhs.copy_from_slice(&self.b0);
        let cols: Vec<usize> = self.basis.clone();
        let mut assigned = vec![false; self.m];
        let mut new_basis = vec![usize::MAX; self.m];
        // Pivot reduced costs along with the tableau but discard them after.
        self.d = vec![0.0; nc];
        for &q in &cols {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if assigned[i] {
                    continue;
                }
                let v = self.t[i * nc + q].abs();
                if v > PIVOT_TOL && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((i, v));
                }
            }
            let Some((r, _)) = best else {
                return false;
            };
            self.pivot(r, q);
            assigned[r] = true;
            new_basis[r] = q;
        }
        self.basis = new_basis;
        let xn: Vec<f64> = (0..nc)
            .map(|j| {
                if self.state[j] == VarState::Basic {
                    0.0
                } else {
                    self.nonbasic_value(j)
                }
            })
            .collect();
        for i in 0..self.m {
            self.xb[i] = self.rhs[i] - dot(self.row(i), &xn);
        }
        self.recompute_reduced_costs();
        self.pricing = Pricing::Dantzig;
        self.degenerate_run = 0;
        true
    }

    fn all_values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.nc).map(|j| self.nonbasic_value(j)).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.xb[i];
        }
        x
    }

    fn structural_values(&self) -> Vec<f64> {
        let mut x = self.all_values();
        x.truncate(self.n_struct);
        x
    }

    /// Multipliers `y` in the original row orientation.
    fn duals(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                if i < self.n_ineq {
                    -self.d[self.n_struct + i]
                } else {
                    let a = self.art_of_row[i].expect("equality rows carry an artificial");
                    self.flip[i] * (self.cost[a] - self.d[a])
                }
            })
            .collect()
    }

    fn row_certificate(&self, r: usize) -> Vec<f64> {
        let row = self.row(r);
        (0..self.m)
            .map(|i| {
                if i < self.n_ineq {
                    row[self.n_struct + i]
                } else {
                    let a = self.art_of_row[i].expect("equality rows carry an artificial");
                    row[a] * self.flip[i]
                }
            })
            .collect()
    }
}
