//! Branch-and-price search: best-first tree over flight-to-belt branching
//! decisions, column inheritance, integer-dominance pruning, and global
//! bound accounting.
//!
//! Each node carries the branching decisions made so far and the column pool
//! inherited from its parent (minus columns the decisions forbid). A node is
//! processed by running column generation to LP optimality; an integral
//! master solution closes the node, otherwise the search branches on the
//! flight covered by the most fractional columns, creating one child per
//! compatible belt. Profits are integers, so a node whose bound rounds down
//! to at most the incumbent objective can be pruned.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::time::{Duration, Instant};

use crate::colgen::{
    extract_integer, run_colgen, CgError, ColumnPool, FractionalColumn, ScheduleColumn,
};
use crate::model::{validate_instance, Assignment, BeltIdx, FlightIdx, Instance, Solution, Violation};
use crate::profit::ProfitTable;

/// Branching decisions accumulated along a path of the tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BranchConstraints {
    forced: BTreeMap<FlightIdx, BeltIdx>,
    forbidden: BTreeSet<(FlightIdx, BeltIdx)>,
}

impl BranchConstraints {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn forced_belt(&self, flight: FlightIdx) -> Option<BeltIdx> {
        self.forced.get(&flight).copied()
    }

    pub fn is_forbidden(&self, flight: FlightIdx, belt: BeltIdx) -> bool {
        self.forbidden.contains(&(flight, belt))
    }

    pub fn forced(&self) -> &BTreeMap<FlightIdx, BeltIdx> {
        &self.forced
    }

    /// Child decisions: fix `flight` to `belt` and forbid it everywhere else.
    pub fn with_forced(&self, flight: FlightIdx, belt: BeltIdx, num_belts: usize) -> Self {
        debug_assert!(self.forced_belt(flight).is_none(), "flight already forced");
        debug_assert!(!self.is_forbidden(flight, belt), "forcing a forbidden pair");
        let mut child = self.clone();
        child.forced.insert(flight, belt);
        for other in (0..num_belts).filter(|&b| b != belt) {
            child.forbidden.insert((flight, other));
        }
        child
    }
}

/// One open node of the search tree.
#[derive(Debug, Clone)]
pub struct BnpNode {
    pub constraints: BranchConstraints,
    /// Columns inherited from the parent, already filtered to the node's
    /// constraints; dummies always present.
    pub pool: ColumnPool,
    /// Bound inherited from the parent's converged master (infinite at the
    /// root); replaced by this node's own bound once its generation converges.
    pub ub: f64,
    pub depth: u32,
}

struct HeapEntry {
    node: BnpNode,
    seq: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    /// Largest bound first; on ties deeper nodes, then FIFO.
    fn cmp(&self, other: &Self) -> Ordering {
        self.node
            .ub
            .total_cmp(&other.node.ub)
            .then_with(|| self.node.depth.cmp(&other.node.depth))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Mutable search bookkeeping: the open queue, the incumbent, and counters.
pub struct SearchState {
    open: BinaryHeap<HeapEntry>,
    incumbent: Option<Solution>,
    nodes_explored: u64,
    next_seq: u64,
    deadline: Option<Instant>,
}

impl SearchState {
    fn push(&mut self, node: BnpNode) {
        self.open.push(HeapEntry { node, seq: self.next_seq });
        self.next_seq += 1;
    }

    fn peek_ub(&self) -> Option<f64> {
        self.open.peek().map(|e| e.node.ub)
    }

    fn update_incumbent(&mut self, sol: Solution) -> bool {
        if self.incumbent.as_ref().is_none_or(|b| sol.objective > b.objective) {
            self.incumbent = Some(sol);
            true
        } else {
            false
        }
    }
}

/// Picks the flight covered by the most fractional columns (ties to the
/// lowest index); `None` when no column is fractional.
pub fn select_branch_flight(fractional: &[FractionalColumn], pool: &ColumnPool) -> Option<FlightIdx> {
    select_among(fractional, pool, |_| true)
}

fn select_among(
    fractional: &[FractionalColumn],
    pool: &ColumnPool,
    eligible: impl Fn(FlightIdx) -> bool,
) -> Option<FlightIdx> {
    let mut counts: BTreeMap<FlightIdx, usize> = BTreeMap::new();
    for entry in fractional {
        if !entry.is_fractional() {
            continue;
        }
        for &fl in &pool.column(entry.belt, entry.index).coverage {
            if eligible(fl) {
                *counts.entry(fl).or_default() += 1;
            }
        }
    }
    // BTreeMap iterates in flight order, so `>` keeps the lowest index on ties.
    counts
        .into_iter()
        .fold(None, |best: Option<(FlightIdx, usize)>, (fl, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((fl, c)),
        })
        .map(|(fl, _)| fl)
}

/// Creates one child per compatible, non-forbidden belt: the child forces the
/// flight onto that belt, forbids it everywhere else, and inherits every
/// parent column the new decisions do not forbid (dummies always survive).
pub fn branch(node: &BnpNode, flight: FlightIdx, inst: &Instance) -> Vec<BnpNode> {
    debug_assert!(node.constraints.forced_belt(flight).is_none());
    let mut children = Vec::new();
    for belt in 0..inst.num_belts() {
        if !inst.is_compatible(belt, flight) || node.constraints.is_forbidden(flight, belt) {
            continue;
        }
        let constraints = node.constraints.with_forced(flight, belt, inst.num_belts());
        let mut pool = node.pool.clone();
        pool.retain_admissible(&constraints);
        children.push(BnpNode { constraints, pool, ub: node.ub, depth: node.depth + 1 });
    }
    children
}

/// Per-node progress snapshot for reporting hooks.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub nodes_explored: u64,
    pub best_ub: f64,
    pub incumbent_objective: Option<i64>,
    pub elapsed: Duration,
}

/// Final search report.
#[derive(Debug, Clone)]
pub struct BnpReport {
    pub incumbent: Option<Solution>,
    /// Proven optimal objective on natural termination; otherwise the best
    /// bound over the incumbent and all still-open nodes.
    pub best_ub: f64,
    /// The root node's converged LP bound (when the root finished).
    pub root_ub: Option<f64>,
    /// `(best_ub / incumbent - 1) * 100`; zero when proven optimal,
    /// infinite without an incumbent.
    pub gap_percent: f64,
    /// Nodes on which column generation ran.
    pub node_count: u64,
    pub proven_optimal: bool,
    pub elapsed: Duration,
}

impl BnpReport {
    /// Proven infeasible: the tree was exhausted without any solution.
    pub fn is_infeasible(&self) -> bool {
        self.proven_optimal && self.incumbent.is_none()
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error("instance failed validation: {0:?}")]
    InvalidInstance(Vec<Violation>),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Solves the instance to proven optimality or until the time limit.
pub fn solve(inst: &Instance, time_limit: Option<Duration>) -> Result<BnpReport, SolveError> {
    solve_with_hook(inst, time_limit, |_| {})
}

/// Integer-dominance pruning: profits are integral, so a node is dead as
/// soon as its bound rounds down to the incumbent objective or less.
fn dominated(ub: f64, incumbent: &Option<Solution>) -> bool {
    incumbent
        .as_ref()
        .is_some_and(|inc| (ub + 1e-6).floor() as i64 <= inc.objective)
}

/// As [`solve`], additionally invoking `hook` after each processed node.
pub fn solve_with_hook(
    inst: &Instance,
    time_limit: Option<Duration>,
    mut hook: impl FnMut(&Progress),
) -> Result<BnpReport, SolveError> {
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(SolveError::InvalidInstance(violations));
    }
    let start = Instant::now();
    let deadline = time_limit.map(|d| start + d);
    let profits = ProfitTable::build(inst);

    let mut state = SearchState {
        open: BinaryHeap::new(),
        incumbent: None,
        nodes_explored: 0,
        next_seq: 0,
        deadline,
    };
    state.push(BnpNode {
        constraints: BranchConstraints::empty(),
        pool: ColumnPool::with_dummies(inst, &profits),
        ub: f64::INFINITY,
        depth: 0,
    });

    let mut root_ub = None;
    // Bound of the node whose generation a deadline interrupted; it is still
    // open for accounting purposes.
    let mut interrupted_ub: Option<f64> = None;

    while let Some(entry) = state.open.pop() {
        let mut node = entry.node;
        if state.deadline.is_some_and(|d| Instant::now() >= d) {
            interrupted_ub = Some(node.ub);
            break;
        }
        if dominated(node.ub, &state.incumbent) {
            continue;
        }

        let outcome = match run_colgen(inst, &profits, &mut node.pool, &node.constraints, state.deadline) {
            Ok(outcome) => outcome,
            Err(CgError::NodeInfeasible { .. }) => {
                // The belt cannot hold all flights forced onto it.
                state.nodes_explored += 1;
                hook(&Progress {
                    nodes_explored: state.nodes_explored,
                    best_ub: running_best_ub(&state, node.ub),
                    incumbent_objective: state.incumbent.as_ref().map(|s| s.objective),
                    elapsed: start.elapsed(),
                });
                continue;
            }
            Err(CgError::Numerical(detail)) => return Err(SolveError::Numerical(detail)),
        };
        state.nodes_explored += 1;
        if node.depth == 0 && outcome.ub_proven {
            root_ub = Some(outcome.ub);
        }

        // A child's bound can never exceed its parent's: the child master is
        // a restriction of the parent's.
        assert!(
            outcome.ub <= node.ub + 1e-6 * (1.0 + outcome.ub.abs()),
            "child bound {} above parent bound {}",
            outcome.ub,
            node.ub
        );

        if let Some(sol) = outcome.incumbent.clone() {
            state.update_incumbent(sol);
        }
        hook(&Progress {
            nodes_explored: state.nodes_explored,
            best_ub: running_best_ub(&state, outcome.ub),
            incumbent_objective: state.incumbent.as_ref().map(|s| s.objective),
            elapsed: start.elapsed(),
        });

        if !outcome.ub_proven {
            // Deadline hit mid-generation; the node's inherited bound is the
            // only valid bound it still has.
            interrupted_ub = Some(node.ub);
            break;
        }
        node.ub = outcome.ub;
        if dominated(node.ub, &state.incumbent) {
            continue;
        }

        if let Some(sol) = extract_integer(&outcome.fractional, &node.pool) {
            // Integral master: the node is solved to optimality.
            state.update_incumbent(sol);
            continue;
        }
        if !outcome.fractional.iter().any(|e| e.is_fractional()) {
            // Integral but supported by a dummy: no feasible completion in
            // this subtree.
            continue;
        }

        let forced = node.constraints.clone();
        match select_among(&outcome.fractional, &node.pool, |fl| forced.forced_belt(fl).is_none()) {
            Some(flight) => {
                for child in branch(&node, flight, inst) {
                    state.push(child);
                }
            }
            None => {
                // Every fractionally covered flight is already forced. The
                // fractional columns of each belt then cover exactly its
                // forced set and tie in profit, so the node bound is attained
                // integrally by keeping the best column per belt.
                let sol = collapse_equal_coverage(&outcome.fractional, &node.pool, inst);
                assert!(
                    (sol.objective as f64 - node.ub).abs() <= 1e-4 * (1.0 + node.ub.abs()),
                    "collapsed solution {} does not attain the node bound {}",
                    sol.objective,
                    node.ub
                );
                state.update_incumbent(sol);
            }
        }
    }

    let natural = state.open.is_empty() && interrupted_ub.is_none();
    let incumbent_value = state.incumbent.as_ref().map(|s| s.objective as f64);
    let best_ub = if natural {
        incumbent_value.unwrap_or(f64::NEG_INFINITY)
    } else {
        let mut ub = incumbent_value.unwrap_or(f64::NEG_INFINITY);
        if let Some(u) = interrupted_ub {
            ub = ub.max(u);
        }
        for e in state.open.iter() {
            ub = ub.max(e.node.ub);
        }
        ub
    };
    let gap_percent = if natural {
        0.0
    } else {
        match &state.incumbent {
            Some(inc) if inc.objective > 0 => (best_ub / inc.objective as f64 - 1.0) * 100.0,
            _ => f64::INFINITY,
        }
    };

    Ok(BnpReport {
        incumbent: state.incumbent,
        best_ub,
        root_ub,
        gap_percent,
        node_count: state.nodes_explored,
        proven_optimal: natural,
        elapsed: start.elapsed(),
    })
}

fn running_best_ub(state: &SearchState, current: f64) -> f64 {
    let mut ub = current;
    if let Some(peek) = state.peek_ub() {
        ub = ub.max(peek);
    }
    if let Some(inc) = &state.incumbent {
        ub = ub.max(inc.objective as f64);
    }
    ub
}

/// Fallback extraction when all fractional flights are forced: per belt,
/// the fractional columns provably share one coverage set and one profit;
/// keep the first and combine with the integral columns.
fn collapse_equal_coverage(
    positives: &[FractionalColumn],
    pool: &ColumnPool,
    inst: &Instance,
) -> Solution {
    let mut chosen: Vec<&ScheduleColumn> = Vec::new();
    let mut fractional_by_belt: BTreeMap<BeltIdx, Vec<&ScheduleColumn>> = BTreeMap::new();
    for entry in positives {
        let col = pool.column(entry.belt, entry.index);
        if entry.is_fractional() {
            assert!(!col.is_dummy, "a fractional dummy implies an unforced fractional flight");
            fractional_by_belt.entry(entry.belt).or_default().push(col);
        } else {
            assert!(!col.is_dummy, "an integral dummy cannot coexist with covered flights");
            chosen.push(col);
        }
    }
    for (belt, cols) in fractional_by_belt {
        let first = cols[0];
        for other in &cols[1..] {
            assert_eq!(
                first.coverage, other.coverage,
                "belt {belt}: fractional columns with different coverage"
            );
            assert_eq!(
                first.profit, other.profit,
                "belt {belt}: fractional columns with different profit at an LP optimum"
            );
        }
        chosen.push(first);
    }

    let mut covered = vec![0usize; inst.num_flights()];
    let mut assignments = Vec::new();
    let mut objective = 0i64;
    for col in chosen {
        objective += col.profit;
        for sf in &col.assignments {
            covered[sf.flight] += 1;
            assignments.push(Assignment {
                flight: sf.flight,
                belt: col.belt,
                start: sf.start,
                duration: sf.duration,
            });
        }
    }
    assert!(covered.iter().all(|&c| c == 1), "collapsed columns must partition the flights");
    assignments.sort_by_key(|a| a.flight);
    Solution { assignments, objective }
}
