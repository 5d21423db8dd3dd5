//! Small dense linear-program solver.
//!
//! Problems have the form
//!
//! ```text
//! maximize    c·p
//! subject to  A_ub p ≤ b_ub
//!             A_eq p = b_eq
//!             l ≤ p ≤ u        (l finite, default 0; u optional)
//! ```
//!
//! and are solved by a two-phase tableau simplex. Pricing uses the largest
//! reduced cost and falls back to Bland's rule (lowest index for both the
//! entering column and ratio ties) once pivots stall on a degenerate vertex.
//! Outside Bland mode the leaving row comes from a two-pass ratio test that
//! prefers large pivots. Each phase ends by refactoring the tableau from the
//! original data, and optimal points are checked against the constraints
//! before they are returned. If any of this fails numerically, the problem
//! is solved again from scratch under Bland's rule with the plain minimum
//! ratio test, which is slower but keeps basic values exactly in step with
//! the tableau. Every returned status carries a
//! certificate: duals for optimal solutions, a Farkas multiplier vector for
//! infeasible ones and an improving ray for unbounded ones.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default iteration limit across both phases.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

const PIVOT_TOL: f64 = 1e-9;

/// Primal feasibility tolerance used by the ratio test and refactoring.
const FEAS_TOL: f64 = 1e-9;

/// Refactor-and-reoptimize rounds allowed per phase.
const MAX_REFACTORS: usize = 8;

/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const DEGENERATE_STREAK: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    /// Objective coefficients (maximized).
    pub objective: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    /// Finite lower bound per variable.
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Dual multipliers, one per constraint row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub ub: Vec<f64>,
    pub eq: Vec<f64>,
    /// Multipliers of the finite upper bounds, indexed by variable (zero
    /// where no upper bound exists).
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal value; `-inf` when infeasible and `+inf` when unbounded.
    pub value: f64,
    /// Optimal point (empty unless optimal).
    pub point: Vec<f64>,
    /// Row duals; for infeasible problems these hold the Farkas multipliers.
    pub duals: Duals,
    /// Improving ray for unbounded problems.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl LinearProgram {
    /// A program over `n = objective.len()` variables with bounds `p ≥ 0`.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![None; n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::maximize(objective.into_iter().map(|c| -c).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn leq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn geq(self, row: Vec<f64>, rhs: f64) -> Self {
        self.leq(row.into_iter().map(|a| -a).collect(), -rhs)
    }

    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn with_lower(mut self, lower: Vec<f64>) -> Self {
        self.lower = lower;
        self
    }

    pub fn with_upper(mut self, j: usize, u: f64) -> Self {
        self.upper[j] = Some(u);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |msg: String| Err(Error::InvalidProgram(msg));
        if self.a_ub.len() != self.b_ub.len() {
            return bad(format!(
                "{} inequality rows but {} right-hand sides",
                self.a_ub.len(),
                self.b_ub.len()
            ));
        }
        if self.a_eq.len() != self.b_eq.len() {
            return bad(format!(
                "{} equality rows but {} right-hand sides",
                self.a_eq.len(),
                self.b_eq.len()
            ));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors do not match the number of variables".into());
        }
        for (i, row) in self.a_ub.iter().chain(self.a_eq.iter()).enumerate() {
            if row.len() != n {
                return bad(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            if row.iter().any(|a| !a.is_finite()) {
                return bad(format!("row {i} has a non-finite entry"));
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !finite(&self.b_ub) || !finite(&self.b_eq) {
            return bad("non-finite objective or right-hand side".into());
        }
        if !finite(&self.lower) {
            return bad("lower bounds must be finite".into());
        }
        if self.upper.iter().flatten().any(|u| !u.is_finite()) {
            return bad("upper bounds must be finite when present".into());
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `p`.
    pub fn primal_residual(&self, p: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for (row, b) in self.a_ub.iter().zip(&self.b_ub) {
            r = r.max(dot(row, p) - b);
        }
        for (row, b) in self.a_eq.iter().zip(&self.b_eq) {
            r = r.max((dot(row, p) - b).abs());
        }
        for j in 0..p.len() {
            r = r.max(self.lower[j] - p[j]);
            if let Some(u) = self.upper[j] {
                r = r.max(p[j] - u);
            }
        }
        r
    }

    /// `z = A_ubᵀ y_ub + A_eqᵀ y_eq + y_upper − c`, the bound multipliers
    /// implied by a set of row duals.
    pub fn reduced_costs(&self, duals: &Duals) -> Vec<f64> {
        let mut z: Vec<f64> = self.objective.iter().map(|c| -c).collect();
        for (row, y) in self.a_ub.iter().zip(&duals.ub) {
            axpy(&mut z, *y, row);
        }
        for (row, y) in self.a_eq.iter().zip(&duals.eq) {
            axpy(&mut z, *y, row);
        }
        for (zj, yu) in z.iter_mut().zip(&duals.upper) {
            *zj += yu;
        }
        z
    }

    /// Objective of the dual program at the given duals.
    pub fn dual_value(&self, duals: &Duals) -> f64 {
        let z = self.reduced_costs(duals);
        let mut v = dot(&self.b_ub, &duals.ub) + dot(&self.b_eq, &duals.eq);
        for j in 0..self.num_vars() {
            if let Some(u) = self.upper[j] {
                v += u * duals.upper[j];
            }
            v -= self.lower[j] * z[j];
        }
        v
    }

    /// Sum of |multiplier × slack| over all rows and bounds.
    pub fn complementary_slackness(&self, p: &[f64], duals: &Duals) -> f64 {
        let z = self.reduced_costs(duals);
        let mut s = 0.0;
        for ((row, b), y) in self.a_ub.iter().zip(&self.b_ub).zip(&duals.ub) {
            s += (y * (b - dot(row, p))).abs();
        }
        for j in 0..p.len() {
            if let Some(u) = self.upper[j] {
                s += (duals.upper[j] * (u - p[j])).abs();
            }
            s += (z[j] * (p[j] - self.lower[j])).abs();
        }
        s
    }

    /// Checks a Farkas certificate of infeasibility: `y_ub ≥ 0`,
    /// `y_upper ≥ 0`, `v = Aᵀy ≥ 0` and `y·b − v·l < 0`.
    pub fn is_farkas_certificate(&self, y: &Duals, tol: f64) -> bool {
        if y.ub.iter().chain(&y.upper).any(|v| *v < -tol) {
            return false;
        }
        let mut v = vec![0.0; self.num_vars()];
        for (row, m) in self.a_ub.iter().zip(&y.ub) {
            axpy(&mut v, *m, row);
        }
        for (row, m) in self.a_eq.iter().zip(&y.eq) {
            axpy(&mut v, *m, row);
        }
        for (vj, m) in v.iter_mut().zip(&y.upper) {
            *vj += m;
        }
        if v.iter().any(|x| *x < -tol) {
            return false;
        }
        let mut gap = dot(&self.b_ub, &y.ub) + dot(&self.b_eq, &y.eq) - dot(&v, &self.lower);
        for j in 0..self.num_vars() {
            if let Some(u) = self.upper[j] {
                gap += u * y.upper[j];
            }
        }
        gap < -tol
    }

    /// Checks an improving ray: feasible direction with positive objective.
    pub fn is_improving_ray(&self, d: &[f64], tol: f64) -> bool {
        self.a_ub.iter().all(|row| dot(row, d) <= tol)
            && self.a_eq.iter().all(|row| dot(row, d).abs() <= tol)
            && d.iter().all(|x| *x >= -tol)
            && (0..d.len()).all(|j| self.upper[j].is_none() || d[j] <= tol)
            && dot(&self.objective, d) > tol
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(SolveOptions::default())
    }

    /// Solves with the fast pricing first and, if that loses numerical
    /// control, once more with Bland's rule and the plain ratio test.
    pub fn solve_with(&self, opts: SolveOptions) -> Result<LpSolution> {
        self.validate()?;
        match Tableau::build(self).run(self, opts) {
            Err(Error::NumericallyStalled { iterations, .. }) if iterations < opts.max_iterations => {
                let mut t = Tableau::build(self);
                t.safe = true;
                t.run(self, opts)
            }
            r => r,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        for (s, v) in acc.iter_mut().zip(x) {
            *s += a * v;
        }
    }
}

/// Where each standard-form row came from.
#[derive(Debug, Clone, Copy)]
enum RowKind {
    Ub(usize),
    Upper(usize),
    Eq(usize),
}

struct Tableau {
    /// m rows of width `cols + 1`; the last entry is the right-hand side.
    t: Vec<Vec<f64>>,
    /// The tableau as built, used to refactor from scratch.
    t0: Vec<Vec<f64>>,
    n: usize,
    cols: usize,
    /// First artificial column; columns at or beyond it are artificial.
    first_art: usize,
    basis: Vec<usize>,
    /// Column that formed the identity in row r initially.
    init_col: Vec<usize>,
    sign: Vec<f64>,
    kinds: Vec<RowKind>,
    rhs_scale: f64,
    iterations: usize,
    /// Bland's rule with the plain ratio test from the first pivot.
    safe: bool,
}

enum PhaseEnd {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.num_vars();
        let mut rows: Vec<(Vec<f64>, f64, RowKind, bool)> = Vec::new();
        let shift = |row: &[f64], b: f64| b - dot(row, &lp.lower);
        for (i, (row, b)) in lp.a_ub.iter().zip(&lp.b_ub).enumerate() {
            rows.push((row.clone(), shift(row, *b), RowKind::Ub(i), true));
        }
        for j in 0..n {
            if let Some(u) = lp.upper[j] {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                rows.push((row, u - lp.lower[j], RowKind::Upper(j), true));
            }
        }
        for (i, (row, b)) in lp.a_eq.iter().zip(&lp.b_eq).enumerate() {
            rows.push((row.clone(), shift(row, *b), RowKind::Eq(i), false));
        }
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.3).count();
        let first_art = n + n_slack;
        let sign: Vec<f64> = rows
            .iter()
            .map(|r| if r.1 < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let n_art = rows
            .iter()
            .zip(&sign)
            .filter(|(r, s)| !r.3 || **s < 0.0)
            .count();
        let cols = first_art + n_art;
        let mut t = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = first_art;
        let mut kinds = Vec::with_capacity(m);
        for (r, (row, b, kind, has_slack)) in rows.into_iter().enumerate() {
            let s = sign[r];
            for j in 0..n {
                t[r][j] = s * row[j];
            }
            t[r][cols] = s * b;
            if has_slack {
                t[r][slack] = s;
                if s > 0.0 {
                    basis[r] = slack;
                }
                slack += 1;
            }
            if !has_slack || s < 0.0 {
                t[r][art] = 1.0;
                basis[r] = art;
                art += 1;
            }
            kinds.push(kind);
        }
        let rhs_scale = 1.0
            + lp
                .b_ub
                .iter()
                .chain(&lp.b_eq)
                .chain(lp.upper.iter().flatten())
                .fold(0.0_f64, |a, b| a.max(b.abs()));
        Tableau {
            init_col: basis.clone(),
            t0: t.clone(),
            t,
            n,
            cols,
            first_art,
            basis,
            sign,
            kinds,
            rhs_scale,
            iterations: 0,
            safe: false,
        }
    }

    fn m(&self) -> usize {
        self.t.len()
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let width = self.cols + 1;
        let p = self.t[r][q];
        for j in 0..width {
            self.t[r][j] /= p;
        }
        self.t[r][q] = 1.0;
        let pivot_row = self.t[r].clone();
        for (k, row) in self.t.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for j in 0..width {
                    row[j] -= f * pivot_row[j];
                }
                row[q] = 0.0;
                if row[width - 1] < 0.0 && row[width - 1] > -FEAS_TOL * self.rhs_scale {
                    row[width - 1] = 0.0;
                }
            }
        }
        self.basis[r] = q;
    }

    /// Simplex iterations maximizing `cost · x` over columns `< allowed`.
    ///
    /// Entering columns follow the largest reduced cost (ties to the lowest
    /// index) until `DEGENERATE_STREAK` consecutive degenerate pivots occur;
    /// from then on the phase uses Bland's rule, which cannot cycle.
    fn optimize(&mut self, cost: &[f64], allowed: usize, max_iter: usize) -> Result<PhaseEnd> {
        let cscale = 1.0 + cost.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        let rc_tol = 1e-10 * cscale;
        let m = self.m();
        let mut is_basic = vec![false; self.cols];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        let mut streak = 0usize;
        let mut bland = self.safe;
        loop {
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..allowed {
                if is_basic[j] {
                    continue;
                }
                let mut rc = cost[j];
                for k in 0..m {
                    let cb = cost[self.basis[k]];
                    if cb != 0.0 {
                        rc -= cb * self.t[k][j];
                    }
                }
                if rc > rc_tol && entering.is_none_or(|(_, best)| rc > best) {
                    entering = Some((j, rc));
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let leave = if bland {
                self.ratio_lowest_index(q)
            } else {
                self.ratio_harris(q)
            };
            let Some((r, ratio)) = leave else {
                return Ok(PhaseEnd::Unbounded(q));
            };
            if self.iterations >= max_iter {
                return Err(Error::NumericallyStalled {
                    iterations: self.iterations,
                    reason: "iteration limit reached".into(),
                });
            }
            if ratio <= 0.0 {
                streak += 1;
                bland |= streak >= DEGENERATE_STREAK;
            } else {
                streak = 0;
            }
            is_basic[self.basis[r]] = false;
            is_basic[q] = true;
            self.pivot(r, q);
            self.iterations += 1;
        }
    }

    /// Minimum-ratio row, ties to the lowest basic index.
    fn ratio_lowest_index(&self, q: usize) -> Option<(usize, f64)> {
        let rhs = self.cols;
        let mut leave: Option<(usize, f64)> = None;
        for k in 0..self.m() {
            let a = self.t[k][q];
            if a > PIVOT_TOL {
                let ratio = self.t[k][rhs].max(0.0) / a;
                match leave {
                    None => leave = Some((k, ratio)),
                    Some((kb, best)) => {
                        let tie = 1e-12 * (1.0 + best.abs());
                        if ratio < best - tie
                            || (ratio <= best + tie && self.basis[k] < self.basis[kb])
                        {
                            leave = Some((k, ratio));
                        }
                    }
                }
            }
        }
        leave
    }

    /// Two-pass ratio test: among rows whose ratio is within the
    /// feasibility tolerance of the minimum, take the largest pivot (ties to
    /// the lowest basic index).
    fn ratio_harris(&self, q: usize) -> Option<(usize, f64)> {
        let rhs = self.cols;
        let mut bound = f64::INFINITY;
        for k in 0..self.m() {
            let a = self.t[k][q];
            if a > PIVOT_TOL {
                bound = bound.min((self.t[k][rhs].max(0.0) + FEAS_TOL) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut leave: Option<(usize, f64, f64)> = None;
        for k in 0..self.m() {
            let a = self.t[k][q];
            if a > PIVOT_TOL {
                let ratio = self.t[k][rhs].max(0.0) / a;
                if ratio <= bound {
                    let better = match leave {
                        None => true,
                        Some((kb, _, ab)) => a > ab || (a == ab && self.basis[k] < self.basis[kb]),
                    };
                    if better {
                        leave = Some((k, ratio, a));
                    }
                }
            }
        }
        leave.map(|(k, r, _)| (k, r))
    }

    /// Recomputes the tableau as `B⁻¹·t0` for the current basis by Gaussian
    /// elimination with partial pivoting, discarding accumulated round-off.
    fn reinvert(&mut self) -> Result<()> {
        let m = self.m();
        let width = self.cols + 1;
        let mut aug: Vec<Vec<f64>> = (0..m)
            .map(|r| {
                let mut row: Vec<f64> = self.basis.iter().map(|&b| self.t0[r][b]).collect();
                row.extend_from_slice(&self.t0[r]);
                row
            })
            .collect();
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs()))
                .unwrap();
            if aug[p][c].abs() < 1e-13 {
                return Err(Error::NumericallyStalled {
                    iterations: self.iterations,
                    reason: "basis matrix became singular".into(),
                });
            }
            aug.swap(c, p);
            let piv = aug[c][c];
            for v in aug[c].iter_mut() {
                *v /= piv;
            }
            let prow = aug[c].clone();
            for (r, row) in aug.iter_mut().enumerate() {
                if r != c && row[c] != 0.0 {
                    let f = row[c];
                    for (v, pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                }
            }
        }
        for (k, row) in aug.into_iter().enumerate() {
            self.t[k] = row[m..m + width].to_vec();
            for (j, &b) in self.basis.iter().enumerate() {
                self.t[k][b] = if j == k { 1.0 } else { 0.0 };
            }
            let r = &mut self.t[k][width - 1];
            if *r < 0.0 && *r > -FEAS_TOL * self.rhs_scale {
                *r = 0.0;
            }
        }
        Ok(())
    }

    /// Runs [`Self::optimize`], refactoring after each pass until a pass
    /// ends without pivoting.
    fn optimize_stable(&mut self, cost: &[f64], allowed: usize, max_iter: usize) -> Result<PhaseEnd> {
        for _ in 0..MAX_REFACTORS {
            let before = self.iterations;
            let end = self.optimize(cost, allowed, max_iter)?;
            let pivoted = self.iterations > before;
            self.reinvert()?;
            if let Some(k) = (0..self.m()).find(|&k| self.t[k][self.cols] < -FEAS_TOL * self.rhs_scale) {
                return Err(Error::NumericallyStalled {
                    iterations: self.iterations,
                    reason: format!("basic variable in row {k} turned infeasible after refactoring"),
                });
            }
            if !pivoted || matches!(end, PhaseEnd::Unbounded(_)) {
                return Ok(end);
            }
        }
        Err(Error::NumericallyStalled {
            iterations: self.iterations,
            reason: "no stable optimum after repeated refactoring".into(),
        })
    }

    /// Row multipliers `w = c_B B⁻¹` read from the initial identity columns,
    /// mapped back to original (unsigned) rows.
    fn row_duals(&self, cost: &[f64], lp: &LinearProgram) -> Duals {
        let m = self.m();
        let mut d = Duals {
            ub: vec![0.0; lp.a_ub.len()],
            eq: vec![0.0; lp.a_eq.len()],
            upper: vec![0.0; lp.num_vars()],
        };
        for r in 0..m {
            let c0 = self.init_col[r];
            let mut w = 0.0;
            for k in 0..m {
                w += cost[self.basis[k]] * self.t[k][c0];
            }
            let y = self.sign[r] * w;
            match self.kinds[r] {
                RowKind::Ub(i) => d.ub[i] = y,
                RowKind::Upper(j) => d.upper[j] = y,
                RowKind::Eq(i) => d.eq[i] = y,
            }
        }
        d
    }

    fn run(mut self, lp: &LinearProgram, opts: SolveOptions) -> Result<LpSolution> {
        let m = self.m();
        let rhs = self.cols;
        // Phase I.
        if self.first_art < self.cols {
            let mut cost1 = vec![0.0; self.cols];
            for c in cost1.iter_mut().skip(self.first_art) {
                *c = -1.0;
            }
            match self.optimize_stable(&cost1, self.first_art, opts.max_iterations)? {
                PhaseEnd::Unbounded(_) => {
                    return Err(Error::NumericallyStalled {
                        iterations: self.iterations,
                        reason: "phase I reported an unbounded direction".into(),
                    })
                }
                PhaseEnd::Optimal => {}
            }
            let infeas: f64 = (0..m)
                .filter(|&k| self.basis[k] >= self.first_art)
                .map(|k| self.t[k][rhs])
                .sum();
            if infeas > 1e-9 * self.rhs_scale {
                let mut farkas = self.row_duals(&cost1, lp);
                let scale = farkas
                    .ub
                    .iter()
                    .chain(&farkas.eq)
                    .chain(&farkas.upper)
                    .fold(0.0_f64, |a, v| a.max(v.abs()));
                if scale > 0.0 {
                    for v in farkas
                        .ub
                        .iter_mut()
                        .chain(farkas.eq.iter_mut())
                        .chain(farkas.upper.iter_mut())
                    {
                        *v /= scale;
                    }
                }
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    value: f64::NEG_INFINITY,
                    point: Vec::new(),
                    duals: farkas,
                    ray: None,
                    iterations: self.iterations,
                });
            }
            // Drive zero-level artificials out of the basis where possible.
            for k in 0..m {
                if self.basis[k] >= self.first_art {
                    let q = (0..self.first_art)
                        .filter(|j| !self.basis.contains(j))
                        .find(|&j| self.t[k][j].abs() > 1e-9);
                    if let Some(q) = q {
                        self.pivot(k, q);
                        self.iterations += 1;
                    }
                }
            }
        }
        // Phase II.
        let mut cost2 = vec![0.0; self.cols];
        cost2[..self.n].copy_from_slice(&lp.objective);
        match self.optimize_stable(&cost2, self.first_art, opts.max_iterations)? {
            PhaseEnd::Unbounded(q) => {
                let mut ray = vec![0.0; self.cols];
                ray[q] = 1.0;
                for k in 0..m {
                    ray[self.basis[k]] = -self.t[k][q];
                }
                ray.truncate(self.n);
                Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    value: f64::INFINITY,
                    point: Vec::new(),
                    duals: Duals::default(),
                    ray: Some(ray),
                    iterations: self.iterations,
                })
            }
            PhaseEnd::Optimal => {
                let mut x = vec![0.0; self.cols];
                for k in 0..m {
                    x[self.basis[k]] = self.t[k][rhs].max(0.0);
                }
                let point: Vec<f64> = (0..self.n).map(|j| lp.lower[j] + x[j]).collect();
                let residual = lp.primal_residual(&point);
                if residual > FEAS_TOL * self.rhs_scale {
                    return Err(Error::NumericallyStalled {
                        iterations: self.iterations,
                        reason: format!("optimal basis violates the constraints by {residual:e}"),
                    });
                }
                let duals = self.row_duals(&cost2, lp);
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    value: dot(&lp.objective, &point),
                    point,
                    duals,
                    ray: None,
                    iterations: self.iterations,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_vertex_of_segment() {
        let lp = LinearProgram::maximize(vec![1.0, 0.0]).eq(vec![1.0, 1.0], 1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.point[0] - 1.0).abs() < 1e-12 && s.point[1].abs() < 1e-12);
    }

    #[test]
    fn second_moment_over_zero_mean_unit_variance() {
        // grid {-1, 0, 1}: maximize Σ p x² s.t. mean = 0, E[x²] ≤ 1.
        let xs = [-1.0, 0.0, 1.0];
        let lp = LinearProgram::maximize(xs.iter().map(|x| x * x).collect())
            .leq(xs.to_vec(), 0.0)
            .leq(xs.iter().map(|x| -x).collect(), 0.0)
            .leq(xs.iter().map(|x| x * x - 1.0).collect(), 0.0)
            .eq(vec![1.0; 3], 1.0);
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.point[0] - 0.5).abs() < 1e-12);
        assert!(s.point[1].abs() < 1e-12);
        assert!((s.point[2] - 0.5).abs() < 1e-12);
        assert!((lp.dual_value(&s.duals) - s.value).abs() < 1e-9);
    }

    #[test]
    fn negative_upper_limit_is_infeasible() {
        let lp = LinearProgram::maximize(vec![1.0]).leq(vec![1.0], -1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(lp.is_farkas_certificate(&s.duals, 1e-9));
    }

    #[test]
    fn unbounded_has_ray() {
        let lp = LinearProgram::maximize(vec![1.0, 1.0]).leq(vec![1.0, -1.0], 1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
        assert!(lp.is_improving_ray(s.ray.as_ref().unwrap(), 1e-9));
    }

    #[test]
    fn bounds_are_shifted_and_honoured() {
        // maximize p0 - p1 with 1 ≤ p0 ≤ 3, -2 ≤ p1, p0 + p1 ≤ 2.
        let lp = LinearProgram::maximize(vec![1.0, -1.0])
            .leq(vec![1.0, 1.0], 2.0)
            .with_lower(vec![1.0, -2.0])
            .with_upper(0, 3.0);
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 5.0).abs() < 1e-12);
        assert!((lp.dual_value(&s.duals) - 5.0).abs() < 1e-9);
        assert!(lp.complementary_slackness(&s.point, &s.duals) < 1e-8);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let lp = LinearProgram::maximize(vec![1.0, 0.0]).leq(vec![1.0], 1.0);
        assert!(matches!(lp.solve(), Err(Error::InvalidProgram(_))));
    }

    #[test]
    fn iteration_limit_is_reported() {
        let lp = LinearProgram::maximize(vec![1.0, 1.0])
            .leq(vec![1.0, 0.0], 1.0)
            .leq(vec![0.0, 1.0], 1.0);
        let err = lp.solve_with(SolveOptions { max_iterations: 1 }).unwrap_err();
        assert!(matches!(err, Error::NumericallyStalled { .. }));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::maximize(vec![1.0, 2.0])
            .eq(vec![1.0, 1.0], 1.0)
            .eq(vec![2.0, 2.0], 2.0);
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 2.0).abs() < 1e-12);
        assert!((lp.dual_value(&s.duals) - 2.0).abs() < 1e-9);
    }
}
