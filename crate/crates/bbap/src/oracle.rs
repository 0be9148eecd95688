//! Independent exact solver for small instances, used as ground truth.
//!
//! Enumerates every flight-to-belt map and, for each belt, schedules its
//! fixed flight subset optimally with a forced-selection recursion over
//! (position in subset, time). The code shares only the core data types and
//! the profit table with the branch-and-price path: integer arithmetic
//! throughout, no dual prices, no skip branch, so a defect in the pricing
//! recursion cannot hide here.

use crate::colgen::ScheduledFlight;
use crate::model::{validate_instance, Assignment, BeltIdx, FlightIdx, Instance, Solution, Violation};
use crate::profit::ProfitTable;

/// Hard size limits; enumeration is exponential in the flight count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_flights: usize,
    pub max_belts: usize,
    pub max_tmax: u32,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_flights: 8, max_belts: 3, max_tmax: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance exceeds oracle limits: {detail}")]
    LimitsExceeded { detail: String },
    #[error("instance is invalid: {0:?}")]
    InvalidInstance(Vec<Violation>),
}

/// Solves the instance exactly by exhaustive enumeration, or returns `None`
/// when no feasible solution exists.
pub fn oracle_solve(inst: &Instance, limits: &OracleLimits) -> Result<Option<Solution>, OracleError> {
    if inst.num_flights() > limits.max_flights
        || inst.num_belts() > limits.max_belts
        || inst.t_max > limits.max_tmax
    {
        return Err(OracleError::LimitsExceeded {
            detail: format!(
                "n={} (max {}), m={} (max {}), t_max={} (max {})",
                inst.num_flights(),
                limits.max_flights,
                inst.num_belts(),
                limits.max_belts,
                inst.t_max,
                limits.max_tmax
            ),
        });
    }
    let violations = validate_instance(inst);
    if !violations.is_empty() {
        return Err(OracleError::InvalidInstance(violations));
    }

    let profits = ProfitTable::build(inst);
    let n = inst.num_flights();
    let compatible: Vec<Vec<BeltIdx>> = (0..n)
        .map(|fl| (0..inst.num_belts()).filter(|&b| inst.is_compatible(b, fl)).collect())
        .collect();

    let mut best: Option<(i64, Vec<BeltIdx>)> = None;
    let mut map = vec![0usize; n];
    enumerate_maps(inst, &profits, &compatible, &mut map, 0, &mut best);

    let Some((_, belt_of)) = best else { return Ok(None) };
    let mut assignments = Vec::with_capacity(n);
    let mut objective = 0i64;
    for belt in 0..inst.num_belts() {
        let flights: Vec<FlightIdx> = (0..n).filter(|&f| belt_of[f] == belt).collect();
        let (value, schedule) =
            best_forced_schedule(belt, &flights, inst, &profits).expect("best map is feasible");
        objective += value;
        for sf in schedule {
            assignments.push(Assignment { flight: sf.flight, belt, start: sf.start, duration: sf.duration });
        }
    }
    assignments.sort_by_key(|a| a.flight);
    Ok(Some(Solution { assignments, objective }))
}

fn enumerate_maps(
    inst: &Instance,
    profits: &ProfitTable,
    compatible: &[Vec<BeltIdx>],
    map: &mut Vec<BeltIdx>,
    flight: usize,
    best: &mut Option<(i64, Vec<BeltIdx>)>,
) {
    if flight == map.len() {
        let mut total = 0i64;
        for belt in 0..inst.num_belts() {
            let flights: Vec<FlightIdx> = (0..map.len()).filter(|&f| map[f] == belt).collect();
            match best_forced_schedule(belt, &flights, inst, profits) {
                Some((value, _)) => total += value,
                None => return,
            }
        }
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            *best = Some((total, map.clone()));
        }
        return;
    }
    for &belt in &compatible[flight] {
        map[flight] = belt;
        enumerate_maps(inst, profits, compatible, map, flight + 1, best);
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Stay,
    Take(u32),
}

/// Optimal schedule of a fixed flight subset on one belt, every flight
/// mandatory, or `None` when the horizon cannot hold them.
fn best_forced_schedule(
    belt: BeltIdx,
    flights: &[FlightIdx],
    inst: &Instance,
    profits: &ProfitTable,
) -> Option<(i64, Vec<ScheduledFlight>)> {
    let t_max = inst.t_max as usize;
    let k = flights.len();
    let width = t_max + 1;
    let mut values = vec![i64::MIN; width * (k + 1)];
    let mut steps = vec![Step::Stay; width * (k + 1)];
    for t in 0..width {
        values[t] = 0;
    }

    for (pos, &fl) in flights.iter().enumerate() {
        let row = (pos + 1) * width;
        let prev = pos * width;
        let pair = profits.pair(belt, fl).expect("validated instance");
        let set = inst.duration_set(belt, fl).expect("validated instance");
        let t_req = inst.flights[fl].t_req as usize;
        for t in 1..=t_max {
            let mut value = values[row + t - 1];
            let mut step = Step::Stay;
            for (w_idx, &w) in set.values.iter().enumerate() {
                let w = w as usize;
                if w > t {
                    break;
                }
                let start = t - w;
                if start < t_req {
                    continue;
                }
                let before = values[prev + start];
                if before == i64::MIN {
                    continue;
                }
                let candidate = before + pair.row(w_idx)[start - t_req];
                if candidate > value {
                    value = candidate;
                    step = Step::Take(w as u32);
                }
            }
            values[row + t] = value;
            steps[row + t] = step;
        }
    }

    let total = values[k * width + t_max];
    if total == i64::MIN {
        return None;
    }
    let mut schedule = Vec::with_capacity(k);
    let mut pos = k;
    let mut t = t_max;
    while pos > 0 {
        match steps[pos * width + t] {
            Step::Stay => t -= 1,
            Step::Take(w) => {
                let start = t - w as usize;
                schedule.push(ScheduledFlight {
                    flight: flights[pos - 1],
                    start: start as u32,
                    duration: w,
                });
                t = start;
                pos -= 1;
            }
        }
    }
    schedule.reverse();
    Some((total, schedule))
}
