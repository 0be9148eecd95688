//! Self-contained LP solver for restricted master problems.
//!
//! Maximizes over continuous nonnegative variables subject to equality and
//! less-equal rows, returning primal values and exact-complementary dual
//! prices. The implementation is a dense two-phase revised simplex with an
//! explicit basis inverse: master problems here stay small (one row per
//! flight plus one per belt), so no sparse machinery is warranted.
//!
//! Every optimal result is certified before it is returned: primal and dual
//! feasibility, objective agreement, and complementary slackness. A result
//! that fails certification comes back as [`LpStatus::NumericalFailure`],
//! never as a silently wrong answer.

use std::sync::atomic::{AtomicU64, Ordering};

/// Number of optimality certificates checked (diagnostics).
pub static CERT_CHECKS: AtomicU64 = AtomicU64::new(0);
/// Number of certificates that failed (diagnostics; always 0 in a healthy run).
pub static CERT_FAILURES: AtomicU64 = AtomicU64::new(0);

const RC_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const CS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    /// Sparse (column, coefficient) pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Objective coefficient per column (maximization).
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Per-column primal values (empty unless optimal).
    pub primal: Vec<f64>,
    /// Per-row dual prices (empty unless optimal). Equality duals are free;
    /// less-equal duals are nonnegative up to tolerance.
    pub duals: Vec<f64>,
    pub objective: f64,
    /// Optimal basis, reusable as a starting point after appending columns.
    pub warm: Option<WarmStart>,
    /// Diagnostic detail for `NumericalFailure`.
    pub failure: Option<String>,
}

impl LpResult {
    fn failed(detail: String) -> Self {
        LpResult {
            status: LpStatus::NumericalFailure,
            primal: Vec::new(),
            duals: Vec::new(),
            objective: f64::NAN,
            warm: None,
            failure: Some(detail),
        }
    }

    fn status_only(status: LpStatus) -> Self {
        LpResult {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            objective: f64::NAN,
            warm: None,
            failure: None,
        }
    }
}

/// One basis slot, named independently of internal column numbering so a
/// basis survives appending structural columns to the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Structural(usize),
    Slack(usize),
    Artificial(usize),
}

/// An optimal basis of a previously solved problem. Valid as a warm start
/// for any problem with the same rows whose column list extends the original
/// one: the old basic solution stays primal-feasible, so phase 1 is skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarmStart {
    rows: Vec<BasisVar>,
}

/// Solves the problem with a deterministic pivot order: largest reduced cost
/// first, falling back to Bland's rule after a degeneracy stall so the solver
/// terminates on every input.
pub fn solve_lp(problem: &LpProblem) -> LpResult {
    solve_lp_warm(problem, None)
}

/// As [`solve_lp`], optionally resuming from a previous optimal basis. An
/// unusable warm start falls back to a cold start.
pub fn solve_lp_warm(problem: &LpProblem, warm: Option<&WarmStart>) -> LpResult {
    match Simplex::new(problem) {
        Ok(mut simplex) => simplex.run(problem, warm),
        Err(detail) => LpResult::failed(detail),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InternalRel {
    Eq,
    Le,
    Ge,
}

struct Simplex {
    nrows: usize,
    n_struct: usize,
    n_art: usize,
    /// Dense columns: structural, then slack/surplus, then artificial.
    cols: Vec<Vec<f64>>,
    /// Phase-2 objective per column.
    obj: Vec<f64>,
    /// Normalized right-hand side (nonnegative).
    rhs: Vec<f64>,
    /// Sign flip applied to each original row during normalization.
    row_sign: Vec<f64>,
    slack_of_row: Vec<Option<usize>>,
    art_of_row: Vec<Option<usize>>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    bland: bool,
    pivots_since_refactor: usize,
}

impl Simplex {
    fn new(problem: &LpProblem) -> Result<Self, String> {
        let nrows = problem.rows.len();
        if nrows == 0 {
            return Err("problem has no rows".into());
        }
        let n_struct = problem.objective.len();
        for (idx, row) in problem.rows.iter().enumerate() {
            for &(col, coeff) in &row.coeffs {
                if col >= n_struct {
                    return Err(format!("row {idx} references column {col} out of range"));
                }
                if !coeff.is_finite() {
                    return Err(format!("row {idx} has non-finite coefficient"));
                }
            }
            if !row.rhs.is_finite() {
                return Err(format!("row {idx} has non-finite rhs"));
            }
        }
        if problem.objective.iter().any(|c| !c.is_finite()) {
            return Err("objective has non-finite coefficient".into());
        }

        // Normalize so every rhs is nonnegative; Le rows with negative rhs
        // become Ge rows.
        let mut row_sign = vec![1.0f64; nrows];
        let mut relations = Vec::with_capacity(nrows);
        let mut rhs = Vec::with_capacity(nrows);
        for (idx, row) in problem.rows.iter().enumerate() {
            let flip = row.rhs < 0.0;
            if flip {
                row_sign[idx] = -1.0;
            }
            rhs.push(row.rhs.abs());
            relations.push(match (row.relation, flip) {
                (Relation::Eq, _) => InternalRel::Eq,
                (Relation::Le, false) => InternalRel::Le,
                (Relation::Le, true) => InternalRel::Ge,
            });
        }

        let mut cols: Vec<Vec<f64>> = vec![vec![0.0; nrows]; n_struct];
        for (r, row) in problem.rows.iter().enumerate() {
            for &(col, coeff) in &row.coeffs {
                cols[col][r] += coeff * row_sign[r];
            }
        }

        // Slack (+1) for Le, surplus (-1) for Ge.
        let mut obj: Vec<f64> = problem.objective.clone();
        for (r, rel) in relations.iter().enumerate() {
            match rel {
                InternalRel::Le => {
                    let mut col = vec![0.0; nrows];
                    col[r] = 1.0;
                    cols.push(col);
                    obj.push(0.0);
                }
                InternalRel::Ge => {
                    let mut col = vec![0.0; nrows];
                    col[r] = -1.0;
                    cols.push(col);
                    obj.push(0.0);
                }
                InternalRel::Eq => {}
            }
        }

        // Artificial basis columns for Eq and Ge rows; Le rows start on
        // their slack.
        let mut basis = Vec::with_capacity(nrows);
        let mut n_art = 0;
        let mut slack_of_row = vec![None; nrows];
        let mut art_of_row = vec![None; nrows];
        {
            let mut slack_idx = n_struct;
            for (r, rel) in relations.iter().enumerate() {
                if matches!(rel, InternalRel::Le | InternalRel::Ge) {
                    slack_of_row[r] = Some(slack_idx);
                    slack_idx += 1;
                }
            }
            for (r, rel) in relations.iter().enumerate() {
                match rel {
                    InternalRel::Le => basis.push(slack_of_row[r].unwrap()),
                    InternalRel::Eq | InternalRel::Ge => {
                        let mut col = vec![0.0; nrows];
                        col[r] = 1.0;
                        cols.push(col);
                        obj.push(0.0);
                        art_of_row[r] = Some(cols.len() - 1);
                        basis.push(cols.len() - 1);
                        n_art += 1;
                    }
                }
            }
        }

        let binv = identity(nrows);
        Ok(Simplex {
            nrows,
            n_struct,
            n_art,
            cols,
            obj,
            rhs,
            row_sign,
            slack_of_row,
            art_of_row,
            basis,
            binv,
            bland: false,
            pivots_since_refactor: 0,
        })
    }

    /// Installs a previous optimal basis: maps its slots to the current
    /// column numbering, refactorizes, and accepts it only if the basic
    /// solution is primal-feasible (it is whenever the problem gained
    /// columns but kept its rows). Returns false on any mismatch.
    fn apply_warm(&mut self, warm: &WarmStart) -> bool {
        if warm.rows.len() != self.nrows {
            return false;
        }
        let mut basis = Vec::with_capacity(self.nrows);
        for slot in &warm.rows {
            let col = match *slot {
                BasisVar::Structural(c) if c < self.n_struct => c,
                BasisVar::Slack(r) => match self.slack_of_row.get(r).copied().flatten() {
                    Some(c) => c,
                    None => return false,
                },
                BasisVar::Artificial(r) => match self.art_of_row.get(r).copied().flatten() {
                    Some(c) => c,
                    None => return false,
                },
                BasisVar::Structural(_) => return false,
            };
            basis.push(col);
        }
        let saved = std::mem::replace(&mut self.basis, basis);
        if self.refactorize().is_err() {
            self.basis = saved;
            self.binv = identity(self.nrows);
            return false;
        }
        if self.basic_values().iter().any(|&v| v < -FEAS_TOL) {
            self.basis = saved;
            self.binv = identity(self.nrows);
            return false;
        }
        true
    }

    fn warm_start(&self) -> WarmStart {
        let rows = self
            .basis
            .iter()
            .map(|&col| {
                if col < self.n_struct {
                    BasisVar::Structural(col)
                } else if let Some(r) = self.slack_of_row.iter().position(|&s| s == Some(col)) {
                    BasisVar::Slack(r)
                } else {
                    let r = self
                        .art_of_row
                        .iter()
                        .position(|&a| a == Some(col))
                        .expect("basis column is structural, slack, or artificial");
                    BasisVar::Artificial(r)
                }
            })
            .collect();
        WarmStart { rows }
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn first_artificial(&self) -> usize {
        self.ncols() - self.n_art
    }

    fn basic_values(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| (0..self.nrows).map(|k| self.binv[r][k] * self.rhs[k]).sum())
            .collect()
    }

    fn dual_values(&self, costs: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|k| (0..self.nrows).map(|r| costs[self.basis[r]] * self.binv[r][k]).sum())
            .collect()
    }

    fn column_direction(&self, col: usize) -> Vec<f64> {
        let a = &self.cols[col];
        (0..self.nrows)
            .map(|r| {
                let row = &self.binv[r];
                let mut acc = 0.0;
                for k in 0..self.nrows {
                    let v = a[k];
                    if v != 0.0 {
                        acc += row[k] * v;
                    }
                }
                acc
            })
            .collect()
    }

    fn refactorize(&mut self) -> Result<(), String> {
        let m = self.nrows;
        // Gauss-Jordan inversion of the basis matrix with partial pivoting.
        let mut work: Vec<Vec<f64>> = (0..m)
            .map(|r| {
                let mut row: Vec<f64> = (0..m).map(|c| self.cols[self.basis[c]][r]).collect();
                row.extend((0..m).map(|c| if c == r { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for col in 0..m {
            let pivot_row = (col..m)
                .max_by(|&a, &b| work[a][col].abs().total_cmp(&work[b][col].abs()))
                .unwrap();
            if work[pivot_row][col].abs() < 1e-11 {
                return Err("singular basis during refactorization".into());
            }
            work.swap(col, pivot_row);
            let pivot = work[col][col];
            for v in work[col].iter_mut() {
                *v /= pivot;
            }
            for r in 0..m {
                if r != col {
                    let factor = work[r][col];
                    if factor != 0.0 {
                        for k in 0..2 * m {
                            let delta = factor * work[col][k];
                            work[r][k] -= delta;
                        }
                    }
                }
            }
        }
        for r in 0..m {
            for k in 0..m {
                self.binv[r][k] = work[r][m + k];
            }
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, leaving_row: usize, entering: usize, direction: &[f64]) {
        let pivot = direction[leaving_row];
        let m = self.nrows;
        for k in 0..m {
            self.binv[leaving_row][k] /= pivot;
        }
        for r in 0..m {
            if r != leaving_row {
                let factor = direction[r];
                if factor != 0.0 {
                    for k in 0..m {
                        let delta = factor * self.binv[leaving_row][k];
                        self.binv[r][k] -= delta;
                    }
                }
            }
        }
        self.basis[leaving_row] = entering;
        self.pivots_since_refactor += 1;
    }

    /// One simplex phase. `allowed` bounds the entering-eligible columns.
    fn optimize(&mut self, costs: &[f64], allowed: usize, guard_artificials: bool) -> Result<PhaseEnd, String> {
        let mut in_basis = vec![false; self.ncols()];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        let max_iters = 50_000 + 200 * (self.nrows + self.ncols());
        let stall_limit = 5 * (self.nrows + self.ncols());
        let mut stall = 0usize;
        let first_art = self.first_artificial();
        let mut last_obj = f64::NEG_INFINITY;

        for _ in 0..max_iters {
            if self.pivots_since_refactor >= 64 {
                self.refactorize()?;
            }
            let x_b = self.basic_values();
            let obj: f64 = (0..self.nrows).map(|r| costs[self.basis[r]] * x_b[r]).sum();
            if obj > last_obj + 1e-12 * (1.0 + obj.abs()) {
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    self.bland = true;
                }
            }
            last_obj = obj;

            let y = self.dual_values(costs);
            let entering = self.choose_entering(costs, allowed, &in_basis, &y);
            let Some(entering) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let direction = self.column_direction(entering);
            let leaving = self.choose_leaving(&direction, &x_b, first_art, guard_artificials);
            let Some(leaving_row) = leaving else {
                return Ok(PhaseEnd::Unbounded);
            };

            in_basis[self.basis[leaving_row]] = false;
            in_basis[entering] = true;
            self.pivot(leaving_row, entering, &direction);
        }
        Err("iteration limit exceeded".into())
    }

    fn choose_entering(&self, costs: &[f64], allowed: usize, in_basis: &[bool], y: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..allowed {
            if in_basis[j] {
                continue;
            }
            let a = &self.cols[j];
            let mut rc = costs[j];
            for k in 0..self.nrows {
                let v = a[k];
                if v != 0.0 {
                    rc -= y[k] * v;
                }
            }
            if rc > RC_TOL {
                if self.bland {
                    return Some(j);
                }
                match best {
                    Some((_, b)) if b >= rc => {}
                    _ => best = Some((j, rc)),
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn choose_leaving(
        &self,
        direction: &[f64],
        x_b: &[f64],
        first_art: usize,
        guard_artificials: bool,
    ) -> Option<usize> {
        // A basic artificial pinned at zero must not drift positive: if the
        // entering column touches its row, pivot it out immediately.
        if guard_artificials {
            for r in 0..self.nrows {
                if self.basis[r] >= first_art && direction[r].abs() > 1e-7 {
                    return Some(r);
                }
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.nrows {
            let d = direction[r];
            if d > PIVOT_TOL {
                let ratio = (x_b[r].max(0.0)) / d;
                let better = match best {
                    None => true,
                    Some((br, bratio)) => {
                        if ratio < bratio - 1e-12 {
                            true
                        } else if ratio > bratio + 1e-12 {
                            false
                        } else if self.bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            d.abs() > direction[br].abs()
                        }
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn run(&mut self, problem: &LpProblem, warm: Option<&WarmStart>) -> LpResult {
        let warmed = warm.is_some_and(|w| self.apply_warm(w));
        // Phase 1: drive the artificial variables to zero. A warm basis is
        // already primal-feasible, so it skips straight to phase 2.
        if !warmed && self.n_art > 0 {
            let mut phase1 = vec![0.0; self.ncols()];
            for j in self.first_artificial()..self.ncols() {
                phase1[j] = -1.0;
            }
            match self.optimize(&phase1, self.ncols(), false) {
                Ok(PhaseEnd::Optimal) => {}
                Ok(PhaseEnd::Unbounded) => {
                    return LpResult::failed("phase 1 reported unbounded".into());
                }
                Err(detail) => return LpResult::failed(format!("phase 1: {detail}")),
            }
            let x_b = self.basic_values();
            let infeas: f64 = (0..self.nrows)
                .filter(|&r| self.basis[r] >= self.first_artificial())
                .map(|r| x_b[r].max(0.0))
                .sum();
            if infeas > FEAS_TOL {
                return LpResult::status_only(LpStatus::Infeasible);
            }
        }

        // Phase 2: the real objective; artificials may not enter and are
        // pivoted out of the basis whenever the entering direction allows.
        let costs = self.obj.clone();
        match self.optimize(&costs, self.first_artificial(), true) {
            Ok(PhaseEnd::Optimal) => {}
            Ok(PhaseEnd::Unbounded) => return LpResult::status_only(LpStatus::Unbounded),
            Err(detail) => return LpResult::failed(format!("phase 2: {detail}")),
        }
        if let Err(detail) = self.refactorize() {
            return LpResult::failed(detail);
        }

        let x_b = self.basic_values();
        let mut primal = vec![0.0; self.n_struct];
        for r in 0..self.nrows {
            if self.basis[r] < self.n_struct {
                primal[self.basis[r]] = x_b[r];
            }
        }
        let y = self.dual_values(&costs);
        // Duals are reported against the original row orientation.
        let duals: Vec<f64> = (0..self.nrows).map(|r| y[r] * self.row_sign[r]).collect();
        let objective: f64 = primal
            .iter()
            .zip(&problem.objective)
            .map(|(x, c)| x * c)
            .sum();

        let result = LpResult {
            status: LpStatus::Optimal,
            primal,
            duals,
            objective,
            warm: Some(self.warm_start()),
            failure: None,
        };
        match certify(problem, &result) {
            Ok(()) => result,
            Err(detail) => LpResult::failed(detail),
        }
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|r| (0..n).map(|c| if c == r { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Verifies the optimality certificate of a solved problem: primal and dual
/// feasibility within 1e-7, primal/dual objective agreement within
/// 1e-6 * (1 + |obj|), and complementary slackness within 1e-6.
fn certify(problem: &LpProblem, result: &LpResult) -> Result<(), String> {
    CERT_CHECKS.fetch_add(1, Ordering::Relaxed);
    let fail = |detail: String| {
        CERT_FAILURES.fetch_add(1, Ordering::Relaxed);
        Err(detail)
    };

    for (j, &x) in result.primal.iter().enumerate() {
        if x < -FEAS_TOL {
            return fail(format!("column {j} negative: {x}"));
        }
    }

    let mut dual_obj = 0.0;
    for (i, row) in problem.rows.iter().enumerate() {
        let activity: f64 = row.coeffs.iter().map(|&(c, v)| v * result.primal[c]).sum();
        let dual = result.duals[i];
        dual_obj += dual * row.rhs;
        let scale = row.rhs.abs().max(1.0);
        match row.relation {
            Relation::Eq => {
                if (activity - row.rhs).abs() > FEAS_TOL * scale {
                    return fail(format!("equality row {i} violated by {}", activity - row.rhs));
                }
            }
            Relation::Le => {
                if activity > row.rhs + FEAS_TOL * scale {
                    return fail(format!("row {i} exceeds rhs by {}", activity - row.rhs));
                }
                if dual < -FEAS_TOL {
                    return fail(format!("row {i} dual negative: {dual}"));
                }
                let slack = row.rhs - activity;
                if (dual * slack).abs() > CS_TOL {
                    return fail(format!("row {i} complementary slackness violated"));
                }
            }
        }
    }

    // Reduced costs per column: c_j - y . A_j <= tol, and rc * x ~ 0.
    let mut rc = problem.objective.clone();
    for (i, row) in problem.rows.iter().enumerate() {
        let dual = result.duals[i];
        if dual != 0.0 {
            for &(c, v) in &row.coeffs {
                rc[c] -= dual * v;
            }
        }
    }
    for (j, (&r, &x)) in rc.iter().zip(&result.primal).enumerate() {
        if r > FEAS_TOL {
            return fail(format!("column {j} dual-infeasible: reduced cost {r}"));
        }
        if (r * x).abs() > CS_TOL {
            return fail(format!("column {j} complementary slackness violated"));
        }
    }

    let gap = (result.objective - dual_obj).abs();
    if gap > 1e-6 * (1.0 + result.objective.abs()) {
        return fail(format!(
            "duality gap {gap}: primal {} vs dual {dual_obj}",
            result.objective
        ));
    }
    Ok(())
}
