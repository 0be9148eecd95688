//! Restricted master management and the column-generation loop.
//!
//! The master is a set-partitioning LP over single-belt schedule columns:
//! one equality row per flight (covered exactly once) and one convexity row
//! per belt (at most one schedule). Each belt carries a dummy column covering
//! every flight at a prohibitively negative profit, so the master is feasible
//! at every node of the search tree. Pricing adds the best
//! positive-reduced-cost schedule per belt per round until none prices out;
//! the converged LP value is the node's upper bound.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use crate::bnp::BranchConstraints;
use crate::lp::{solve_lp, solve_lp_warm, LpProblem, LpRow, LpStatus, Relation, WarmStart};
use crate::model::{Assignment, BeltIdx, FlightIdx, Instance, Solution};
use crate::pricing::{solve_pricing, PricingInput};
use crate::profit::ProfitTable;

/// Columns are accepted when their reduced cost exceeds this.
pub const REDUCED_COST_TOL: f64 = 1e-9;
/// An LP value counts as integral within this distance of 1.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// One flight placed within a single-belt schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScheduledFlight {
    pub flight: FlightIdx,
    pub start: u32,
    pub duration: u32,
}

/// One feasible schedule for one belt, with its total profit and the set of
/// flights it covers. Dummy columns cover every flight and carry profit
/// `-BIG` so any dummy-free feasible point beats any dummy-using one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleColumn {
    pub belt: BeltIdx,
    /// Ordered by flight index; intervals are disjoint and within the
    /// horizon, each start at or after the flight's requested time.
    pub assignments: Vec<ScheduledFlight>,
    pub profit: i64,
    /// Sorted flight indices; equals the assignment flights except for
    /// dummies, which cover everything.
    pub coverage: Vec<FlightIdx>,
    pub is_dummy: bool,
}

impl ScheduleColumn {
    pub fn from_assignments(belt: BeltIdx, assignments: Vec<ScheduledFlight>, profit: i64) -> Self {
        let coverage = assignments.iter().map(|a| a.flight).collect();
        ScheduleColumn { belt, assignments, profit, coverage, is_dummy: false }
    }

    pub fn dummy(belt: BeltIdx, num_flights: usize, big: i64) -> Self {
        ScheduleColumn {
            belt,
            assignments: Vec::new(),
            profit: -big,
            coverage: (0..num_flights).collect(),
            is_dummy: true,
        }
    }

    pub fn covers(&self, flight: FlightIdx) -> bool {
        self.coverage.binary_search(&flight).is_ok()
    }

    /// Admissible under the node's branching decisions: no covered flight is
    /// forbidden on this belt or forced to a different one. Dummies are
    /// always kept.
    pub fn admissible(&self, constraints: &BranchConstraints) -> bool {
        if self.is_dummy {
            return true;
        }
        self.coverage.iter().all(|&fl| {
            !constraints.is_forbidden(fl, self.belt)
                && constraints.forced_belt(fl).is_none_or(|b| b == self.belt)
        })
    }
}

/// Dual prices from the master: one free-signed price per flight row, one
/// nonnegative price per belt row.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPrices {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
}

/// Per-belt column lists plus dedup keys. Every belt always holds its dummy
/// at index 0.
#[derive(Debug, Clone)]
pub struct ColumnPool {
    num_flights: usize,
    big: i64,
    per_belt: Vec<Vec<ScheduleColumn>>,
    seen: Vec<HashSet<Vec<ScheduledFlight>>>,
}

impl ColumnPool {
    /// Seeds one dummy per belt. `BIG` is one more than the largest total
    /// profit any solution could reach.
    pub fn with_dummies(inst: &Instance, profits: &ProfitTable) -> Self {
        let big = 1 + inst.num_flights() as i64 * profits.max_profit().max(0);
        let per_belt = (0..inst.num_belts())
            .map(|b| vec![ScheduleColumn::dummy(b, inst.num_flights(), big)])
            .collect();
        let seen = (0..inst.num_belts()).map(|_| HashSet::new()).collect();
        ColumnPool { num_flights: inst.num_flights(), big, per_belt, seen }
    }

    pub fn big(&self) -> i64 {
        self.big
    }

    pub fn num_belts(&self) -> usize {
        self.per_belt.len()
    }

    pub fn belt_columns(&self, belt: BeltIdx) -> &[ScheduleColumn] {
        &self.per_belt[belt]
    }

    pub fn column(&self, belt: BeltIdx, index: usize) -> &ScheduleColumn {
        &self.per_belt[belt][index]
    }

    pub fn total_columns(&self) -> usize {
        self.per_belt.iter().map(|v| v.len()).sum()
    }

    /// Adds a column unless an identical (belt, assignments) column exists.
    pub fn insert(&mut self, column: ScheduleColumn) -> bool {
        debug_assert!(!column.is_dummy, "dummies are seeded at construction");
        if self.seen[column.belt].insert(column.assignments.clone()) {
            self.per_belt[column.belt].push(column);
            true
        } else {
            false
        }
    }

    /// Drops columns inadmissible under the constraints; dummies stay.
    pub fn retain_admissible(&mut self, constraints: &BranchConstraints) {
        for (belt, columns) in self.per_belt.iter_mut().enumerate() {
            let seen = &mut self.seen[belt];
            columns.retain(|col| {
                let keep = col.admissible(constraints);
                if !keep {
                    seen.remove(&col.assignments);
                }
                keep
            });
        }
    }
}

/// A master LP over the admissible pool columns plus the mapping from LP
/// column index back to the pool.
#[derive(Debug, Clone)]
pub struct Rmp {
    pub lp: LpProblem,
    /// LP column -> (belt, index within the belt's pool list).
    pub columns: Vec<(BeltIdx, usize)>,
}

/// Builds the restricted master: one LP column per admissible pooled
/// schedule, `n` equality rows then `m` convexity rows, in deterministic
/// order.
pub fn build_rmp(pool: &ColumnPool, constraints: &BranchConstraints, inst: &Instance) -> Rmp {
    let mut rmp = IncrementalRmp::new(inst);
    rmp.sync(pool, constraints, inst);
    Rmp { lp: rmp.lp, columns: rmp.columns }
}

/// The master grown in place across generation rounds: column indices are
/// append-only, so the previous optimal basis stays valid as a warm start.
struct IncrementalRmp {
    lp: LpProblem,
    columns: Vec<(BeltIdx, usize)>,
    /// Per belt, how many pool entries have been examined already.
    examined: Vec<usize>,
}

impl IncrementalRmp {
    fn new(inst: &Instance) -> Self {
        let n = inst.num_flights();
        let m = inst.num_belts();
        let rows: Vec<LpRow> = (0..n)
            .map(|_| LpRow { coeffs: Vec::new(), relation: Relation::Eq, rhs: 1.0 })
            .chain((0..m).map(|_| LpRow { coeffs: Vec::new(), relation: Relation::Le, rhs: 1.0 }))
            .collect();
        IncrementalRmp {
            lp: LpProblem { objective: Vec::new(), rows },
            columns: Vec::new(),
            examined: vec![0; m],
        }
    }

    /// Appends LP columns for pool entries not yet examined, skipping any
    /// the node constraints rule out.
    fn sync(&mut self, pool: &ColumnPool, constraints: &BranchConstraints, inst: &Instance) {
        let n = inst.num_flights();
        for belt in 0..inst.num_belts() {
            let cols = pool.belt_columns(belt);
            for idx in self.examined[belt]..cols.len() {
                let col = &cols[idx];
                if !col.admissible(constraints) {
                    continue;
                }
                let lp_col = self.lp.objective.len();
                self.lp.objective.push(col.profit as f64);
                self.columns.push((belt, idx));
                for &fl in &col.coverage {
                    self.lp.rows[fl].coeffs.push((lp_col, 1.0));
                }
                self.lp.rows[n + belt].coeffs.push((lp_col, 1.0));
            }
            self.examined[belt] = cols.len();
        }
    }
}

/// A positive-valued column in an LP solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalColumn {
    pub belt: BeltIdx,
    pub index: usize,
    pub value: f64,
}

impl FractionalColumn {
    pub fn is_fractional(&self) -> bool {
        self.value > INTEGRALITY_TOL && self.value < 1.0 - INTEGRALITY_TOL
    }
}

/// Result of running column generation to (or towards) LP optimality.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    /// LP optimum of the last solved master. A proven node bound only when
    /// `ub_proven` is set (no schedule prices out).
    pub ub: f64,
    /// False when the deadline interrupted generation.
    pub ub_proven: bool,
    /// Positive-value columns of the final LP solution.
    pub fractional: Vec<FractionalColumn>,
    /// Best integral dummy-free master solution observed along the
    /// iterations, if any.
    pub incumbent: Option<Solution>,
    pub iterations: usize,
    pub columns_added: usize,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum CgError {
    /// Some belt cannot schedule all flights forced to it; the node is
    /// infeasible.
    #[error("node infeasible: belt {belt} cannot schedule its forced flights")]
    NodeInfeasible { belt: BeltIdx },
    #[error("master LP failed: {0}")]
    Numerical(String),
}

/// Assembles the pricing subproblem for one belt under the node constraints:
/// eligible flights keep the global order, minus flights forbidden here or
/// forced elsewhere; flights forced to this belt must be selected.
pub fn pricing_input<'a>(
    inst: &'a Instance,
    profits: &'a ProfitTable,
    belt: BeltIdx,
    constraints: &BranchConstraints,
    duals: &'a DualPrices,
) -> PricingInput<'a> {
    let eligible: Vec<FlightIdx> = (0..inst.num_flights())
        .filter(|&fl| {
            inst.is_compatible(belt, fl)
                && !constraints.is_forbidden(fl, belt)
                && constraints.forced_belt(fl).is_none_or(|b| b == belt)
        })
        .collect();
    let forced: Vec<FlightIdx> = eligible
        .iter()
        .copied()
        .filter(|&fl| constraints.forced_belt(fl) == Some(belt))
        .collect();
    PricingInput { belt, eligible, forced, duals, instance: inst, profits }
}

/// The column-generation loop: solve the master, price every belt, add each
/// improving schedule, repeat until none prices out or the deadline passes.
pub fn run_colgen(
    inst: &Instance,
    profits: &ProfitTable,
    pool: &mut ColumnPool,
    constraints: &BranchConstraints,
    deadline: Option<Instant>,
) -> Result<CgOutcome, CgError> {
    let mut iterations = 0;
    let mut columns_added = 0;
    let mut best_integer: Option<Solution> = None;
    let mut prev_obj = f64::NEG_INFINITY;
    let mut rmp = IncrementalRmp::new(inst);
    let mut warm: Option<WarmStart> = None;

    loop {
        iterations += 1;
        rmp.sync(pool, constraints, inst);
        let res = solve_lp_warm(&rmp.lp, warm.as_ref());
        if res.status != LpStatus::Optimal {
            return Err(CgError::Numerical(format!(
                "master LP status {:?}: {}",
                res.status,
                res.failure.unwrap_or_default()
            )));
        }
        // Adding columns to a maximization master can only raise the LP
        // optimum; a drop means the solver went wrong.
        assert!(
            res.objective >= prev_obj - 1e-6 * (1.0 + res.objective.abs()),
            "master objective decreased: {} -> {}",
            prev_obj,
            res.objective
        );
        prev_obj = res.objective;
        warm = res.warm;

        let positives: Vec<FractionalColumn> = rmp
            .columns
            .iter()
            .zip(&res.primal)
            .filter(|&(_, &v)| v > INTEGRALITY_TOL)
            .map(|(&(belt, index), &value)| FractionalColumn { belt, index, value })
            .collect();

        if let Some(sol) = extract_integer(&positives, pool) {
            if best_integer.as_ref().is_none_or(|b| sol.objective > b.objective) {
                best_integer = Some(sol);
            }
        }

        let duals = DualPrices {
            y: res.duals[..inst.num_flights()].to_vec(),
            u: res.duals[inst.num_flights()..].to_vec(),
        };

        let mut added_this_round = 0;
        for belt in 0..inst.num_belts() {
            let input = pricing_input(inst, profits, belt, constraints, &duals);
            let Some(priced) = solve_pricing(&input) else {
                return Err(CgError::NodeInfeasible { belt });
            };
            if priced.reduced_cost > REDUCED_COST_TOL && pool.insert(priced.column) {
                added_this_round += 1;
                columns_added += 1;
            }
        }

        if added_this_round == 0 {
            return Ok(CgOutcome {
                ub: res.objective,
                ub_proven: true,
                fractional: positives,
                incumbent: best_integer,
                iterations,
                columns_added,
            });
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(CgOutcome {
                ub: res.objective,
                ub_proven: false,
                fractional: positives,
                incumbent: best_integer,
                iterations,
                columns_added,
            });
        }
    }
}

/// Turns an LP solution into a [`Solution`] when it is integral, dummy-free,
/// and its columns partition the flights; returns None otherwise.
pub fn extract_integer(positives: &[FractionalColumn], pool: &ColumnPool) -> Option<Solution> {
    let mut counts: HashMap<FlightIdx, usize> = HashMap::new();
    let mut assignments = Vec::new();
    let mut objective = 0i64;
    for entry in positives {
        if entry.value < 1.0 - INTEGRALITY_TOL {
            return None;
        }
        let col = pool.column(entry.belt, entry.index);
        if col.is_dummy {
            return None;
        }
        objective += col.profit;
        for sf in &col.assignments {
            *counts.entry(sf.flight).or_default() += 1;
            assignments.push(Assignment {
                flight: sf.flight,
                belt: col.belt,
                start: sf.start,
                duration: sf.duration,
            });
        }
    }
    let n = pool.num_flights;
    if counts.len() != n || counts.values().any(|&c| c != 1) {
        return None;
    }
    assignments.sort_by_key(|a| a.flight);
    Some(Solution { assignments, objective })
}
