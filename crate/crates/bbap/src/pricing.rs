//! Exact pricing: the position-dependent knapsack dynamic program.
//!
//! For one belt, find the single-belt schedule maximizing the sum of reduced
//! profits `p - y` over its flights, subject to per-flight start windows,
//! admissible durations, the fairness precedence order, non-overlap, and the
//! horizon. Because eligible flights are processed in requested-time order,
//! the recursion over (time budget, flight prefix) implicitly satisfies both
//! precedence and non-overlap:
//!
//! ```text
//! f(t, j) = max( f(t, j-1),                    // flight j not selected
//!                f(t - 1, j),                  // nothing new finishes at t
//!                max over w: f(t - w, j-1) + (p[j, t-w, w] - y[j])
//!                    where t_req[j] <= t - w ) // j finishes exactly at t
//! ```
//!
//! with `f(0, j) = f(t, 0) = 0`. Time `O(n * w_max * t_max)`, space
//! `O(n * t_max)` including the backtracking parents.
//!
//! Branching support: flights forced onto the belt get a uniform profit lift
//! added to every (t, w) choice, large enough that any schedule containing
//! all forced flights beats any schedule missing one; the lift is subtracted
//! again from the returned objective. If the backtracked optimum still lacks
//! a forced flight, no schedule can carry them all and the caller prunes the
//! node.

use crate::colgen::{DualPrices, ScheduleColumn, ScheduledFlight};
use crate::model::{BeltIdx, FlightIdx, Instance};
use crate::profit::ProfitTable;

/// Pricing subproblem for one belt.
#[derive(Debug, Clone)]
pub struct PricingInput<'a> {
    pub belt: BeltIdx,
    /// Eligible flights in global (requested-time) order: the belt's
    /// compatible flights minus those forbidden here or forced elsewhere.
    pub eligible: Vec<FlightIdx>,
    /// Flights that must appear in the schedule; a subset of `eligible`.
    pub forced: Vec<FlightIdx>,
    pub duals: &'a DualPrices,
    pub instance: &'a Instance,
    pub profits: &'a ProfitTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parent {
    /// Value copied from f(t, j-1).
    Skip,
    /// Value copied from f(t-1, j).
    Shift,
    /// Flight j taken with this duration, finishing at t.
    Take(u32),
}

/// The filled value table plus backtracking parents.
#[derive(Debug, Clone)]
pub struct DpTable {
    t_max: usize,
    values: Vec<f64>,
    parents: Vec<Parent>,
}

impl DpTable {
    fn idx(&self, t: usize, j: usize) -> usize {
        j * (self.t_max + 1) + t
    }

    /// `f(t, j)`: best reduced profit using the first `j` eligible flights
    /// within time `t`.
    pub fn value(&self, t: u32, j: usize) -> f64 {
        self.values[self.idx(t as usize, j)]
    }

    pub fn final_value(&self, input: &PricingInput) -> f64 {
        self.value(input.instance.t_max, input.eligible.len())
    }
}

/// Selection lift guaranteeing forced flights are chosen whenever feasible:
/// strictly larger than the largest possible gap between any two schedule
/// values, i.e. 1 + 2 * sum over eligible flights of max |p - y|.
fn forced_lift(input: &PricingInput) -> f64 {
    let mut swing = 0.0f64;
    for &fl in &input.eligible {
        let Some(pair) = input.profits.pair(input.belt, fl) else { continue };
        let y = input.duals.y[fl];
        let mut m = 0.0f64;
        for (w_idx, _) in pair.durations.iter().enumerate() {
            for &p in pair.row(w_idx) {
                debug_assert!(p != i64::MIN, "pricing requires a complete profit table");
                m = m.max((p as f64 - y).abs());
            }
        }
        swing += m;
    }
    1.0 + 2.0 * swing
}

/// Fills the recursion table. Forced flights have the selection lift folded
/// into every take option; with no forced flights the table is exactly the
/// reduced-profit recursion.
pub fn dp_fill(input: &PricingInput) -> DpTable {
    let t_max = input.instance.t_max as usize;
    let k = input.eligible.len();
    let width = t_max + 1;
    let mut table = DpTable {
        t_max,
        values: vec![0.0; width * (k + 1)],
        parents: vec![Parent::Skip; width * (k + 1)],
    };
    let lift = if input.forced.is_empty() { 0.0 } else { forced_lift(input) };

    for (pos, &fl) in input.eligible.iter().enumerate() {
        let j = pos + 1;
        let y = input.duals.y[fl];
        let bonus = if input.forced.contains(&fl) { lift } else { 0.0 };
        let pair = input
            .profits
            .pair(input.belt, fl)
            .expect("eligible flights are compatible with the belt");
        let t_req = pair.t_req as usize;
        let base = j * width;
        let prev = (j - 1) * width;
        for t in 1..=t_max {
            // Candidates in reverse preference order (skip, shift, then take
            // with growing durations) so ties resolve to take the largest w.
            let mut best = table.values[prev + t];
            let mut parent = Parent::Skip;
            let shifted = table.values[base + t - 1];
            if shifted >= best {
                best = shifted;
                parent = Parent::Shift;
            }
            for (w_idx, &w) in pair.durations.iter().enumerate() {
                let w = w as usize;
                if w > t {
                    break;
                }
                let start = t - w;
                if start < t_req {
                    continue;
                }
                let p = pair.row(w_idx)[start - t_req];
                let candidate = table.values[prev + start] + (p as f64 - y) + bonus;
                if candidate >= best {
                    best = candidate;
                    parent = Parent::Take(w as u32);
                }
            }
            table.values[base + t] = best;
            table.parents[base + t] = parent;
        }
    }
    table
}

/// Recovers the schedule achieving `f(t_max, |eligible|)` by walking the
/// parent records; assignments come out in flight order.
pub fn backtrack(table: &DpTable, input: &PricingInput) -> Vec<ScheduledFlight> {
    let mut t = table.t_max;
    let mut j = input.eligible.len();
    let mut out = Vec::new();
    while j > 0 && t > 0 {
        match table.parents[table.idx(t, j)] {
            Parent::Skip => j -= 1,
            Parent::Shift => t -= 1,
            Parent::Take(w) => {
                let start = t - w as usize;
                out.push(ScheduledFlight {
                    flight: input.eligible[j - 1],
                    start: start as u32,
                    duration: w,
                });
                t = start;
                j -= 1;
            }
        }
    }
    out.reverse();
    out
}

/// The best column priced for one belt.
#[derive(Debug, Clone)]
pub struct PricedColumn {
    pub column: ScheduleColumn,
    /// `f(t_max, |eligible|) - u_belt`, with any forced-flight lift removed.
    pub reduced_cost: f64,
}

/// Solves the pricing problem. Returns `None` exactly when the forced
/// flights cannot all be scheduled on the belt.
pub fn solve_pricing(input: &PricingInput) -> Option<PricedColumn> {
    debug_assert!(input.eligible.windows(2).all(|p| p[0] < p[1]), "eligible must be sorted");
    let table = dp_fill(input);
    let schedule = backtrack(&table, input);

    if !input
        .forced
        .iter()
        .all(|f| schedule.iter().any(|sf| sf.flight == *f))
    {
        return None;
    }

    let u = input.duals.u[input.belt];
    let mut profit = 0i64;
    let reduced_cost = if input.forced.is_empty() {
        for sf in &schedule {
            profit += input
                .profits
                .get(input.belt, sf.flight, sf.start, sf.duration)
                .expect("backtracked tuples are admissible");
        }
        table.final_value(input) - u
    } else {
        // Re-score without the lift so the reported value never includes it.
        let mut reduced = 0.0;
        for sf in &schedule {
            let p = input
                .profits
                .get(input.belt, sf.flight, sf.start, sf.duration)
                .expect("backtracked tuples are admissible");
            profit += p;
            reduced += p as f64 - input.duals.y[sf.flight];
        }
        reduced - u
    };

    Some(PricedColumn {
        column: ScheduleColumn::from_assignments(input.belt, schedule, profit),
        reduced_cost,
    })
}
