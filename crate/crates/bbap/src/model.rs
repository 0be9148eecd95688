//! Problem data types, feasibility semantics, and solution checking.
//!
//! An [`Instance`] describes a set of arriving flights that must each be
//! assigned a baggage belt, a delivery start time and an unloading duration
//! within a discrete horizon `0..t_max`. Belts serve at most one flight at a
//! time, and flights sharing a belt must be served in non-decreasing order of
//! their requested start times (fairness precedence). Flights are stored
//! sorted by `(t_req, original position)` so precedence coincides with index
//! order.

use std::collections::BTreeSet;
use std::fmt;

use crate::profit::ProfitSource;

pub type FlightIdx = usize;
pub type BeltIdx = usize;

/// One arriving flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flight {
    /// Position in the instance's sorted flight order.
    pub id: FlightIdx,
    /// Expected number of bags to unload.
    pub bags: u32,
    /// Requested delivery start time (minute within the horizon).
    pub t_req: u32,
}

/// One baggage reclaim belt.
#[derive(Debug, Clone, PartialEq)]
pub struct Belt {
    pub id: BeltIdx,
    /// Unloading speed in bags per minute.
    pub productivity: f64,
    /// Flights that may be assigned to this belt.
    pub compatible_flights: BTreeSet<FlightIdx>,
    /// When set, flights with at least this many bags are unloaded at twice
    /// the productivity (second unloading station).
    pub dual_station_threshold: Option<u32>,
}

/// Admissible unloading durations for one (belt, flight) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationSet {
    /// The unhurried unloading time; always a member of `values`.
    pub nominal: u32,
    /// Sorted, distinct, positive durations.
    pub values: Vec<u32>,
}

impl DurationSet {
    pub fn min(&self) -> u32 {
        *self.values.first().expect("duration set is never empty")
    }

    pub fn max(&self) -> u32 {
        *self.values.last().expect("duration set is never empty")
    }

    pub fn contains(&self, w: u32) -> bool {
        self.values.binary_search(&w).is_ok()
    }
}

/// A full problem statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub flights: Vec<Flight>,
    pub belts: Vec<Belt>,
    /// Horizon length; start times live in `0..t_max` and every assignment
    /// must finish by `t_max`.
    pub t_max: u32,
    pub profit: ProfitSource,
    /// `durations[belt][flight]`, present exactly for compatible pairs.
    pub durations: Vec<Vec<Option<DurationSet>>>,
}

impl Instance {
    pub fn num_flights(&self) -> usize {
        self.flights.len()
    }

    pub fn num_belts(&self) -> usize {
        self.belts.len()
    }

    pub fn is_compatible(&self, belt: BeltIdx, flight: FlightIdx) -> bool {
        self.belts
            .get(belt)
            .is_some_and(|b| b.compatible_flights.contains(&flight))
    }

    pub fn duration_set(&self, belt: BeltIdx, flight: FlightIdx) -> Option<&DurationSet> {
        self.durations.get(belt)?.get(flight)?.as_ref()
    }
}

/// One flight placed on one belt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub flight: FlightIdx,
    pub belt: BeltIdx,
    pub start: u32,
    pub duration: u32,
}

/// First minute after the assignment's interval.
pub fn finish(a: &Assignment) -> u32 {
    a.start + a.duration
}

/// A complete assignment of every flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    /// One entry per flight, sorted by flight index.
    pub assignments: Vec<Assignment>,
    pub objective: i64,
}

/// A violated instance invariant, named after the offending entity and rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BagsZero { flight: FlightIdx },
    TReqOutOfRange { flight: FlightIdx, t_req: u32 },
    FlightIdMismatch { position: usize, id: FlightIdx },
    FlightsNotSorted { position: usize },
    BeltIdMismatch { position: usize, id: BeltIdx },
    ProductivityNotPositive { belt: BeltIdx },
    DualStationThresholdZero { belt: BeltIdx },
    CompatibleFlightOutOfRange { belt: BeltIdx, flight: FlightIdx },
    NoCompatibleBelt { flight: FlightIdx },
    MissingDurationSet { belt: BeltIdx, flight: FlightIdx },
    DurationSetForIncompatiblePair { belt: BeltIdx, flight: FlightIdx },
    DurationValuesInvalid { belt: BeltIdx, flight: FlightIdx },
    NominalNotInValues { belt: BeltIdx, flight: FlightIdx },
    /// No admissible duration fits between `t_req` and the horizon.
    UnschedulableFlight { flight: FlightIdx, belt: BeltIdx },
    ProfitParamsInvalid { detail: String },
    ProfitTableIncomplete { belt: BeltIdx, flight: FlightIdx, t: u32, w: u32 },
    TMaxZero,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BagsZero { flight } => write!(f, "flight {flight}: bags must be >= 1"),
            Violation::TReqOutOfRange { flight, t_req } => {
                write!(f, "flight {flight}: t_req {t_req} out of range")
            }
            Violation::FlightIdMismatch { position, id } => {
                write!(f, "flight at position {position} has id {id}")
            }
            Violation::FlightsNotSorted { position } => {
                write!(f, "flights not sorted by t_req at position {position}")
            }
            Violation::BeltIdMismatch { position, id } => {
                write!(f, "belt at position {position} has id {id}")
            }
            Violation::ProductivityNotPositive { belt } => {
                write!(f, "belt {belt}: productivity must be positive")
            }
            Violation::DualStationThresholdZero { belt } => {
                write!(f, "belt {belt}: dual station threshold must be >= 1")
            }
            Violation::CompatibleFlightOutOfRange { belt, flight } => {
                write!(f, "belt {belt}: compatible flight {flight} out of range")
            }
            Violation::NoCompatibleBelt { flight } => {
                write!(f, "flight {flight}: no compatible belt")
            }
            Violation::MissingDurationSet { belt, flight } => {
                write!(f, "missing duration set for belt {belt}, flight {flight}")
            }
            Violation::DurationSetForIncompatiblePair { belt, flight } => {
                write!(f, "duration set given for incompatible belt {belt}, flight {flight}")
            }
            Violation::DurationValuesInvalid { belt, flight } => {
                write!(f, "belt {belt}, flight {flight}: durations must be sorted, distinct, positive")
            }
            Violation::NominalNotInValues { belt, flight } => {
                write!(f, "belt {belt}, flight {flight}: nominal duration not in value set")
            }
            Violation::UnschedulableFlight { flight, belt } => {
                write!(f, "unschedulable flight {flight} on belt {belt}: no duration fits the horizon")
            }
            Violation::ProfitParamsInvalid { detail } => write!(f, "profit parameters: {detail}"),
            Violation::ProfitTableIncomplete { belt, flight, t, w } => {
                write!(f, "profit table missing entry for belt {belt}, flight {flight}, t {t}, w {w}")
            }
            Violation::TMaxZero => write!(f, "t_max must be >= 1"),
        }
    }
}

/// Checks every instance invariant and returns all violations found.
///
/// Pure and side-effect free; an empty result means the instance is
/// well-formed and every compatible pair can be scheduled somewhere in the
/// horizon.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.num_flights();
    let m = inst.num_belts();

    if inst.t_max == 0 {
        out.push(Violation::TMaxZero);
    }

    for (pos, fl) in inst.flights.iter().enumerate() {
        if fl.id != pos {
            out.push(Violation::FlightIdMismatch { position: pos, id: fl.id });
        }
        if fl.bags == 0 {
            out.push(Violation::BagsZero { flight: pos });
        }
        if fl.t_req >= inst.t_max {
            out.push(Violation::TReqOutOfRange { flight: pos, t_req: fl.t_req });
        }
        if pos > 0 && inst.flights[pos - 1].t_req > fl.t_req {
            out.push(Violation::FlightsNotSorted { position: pos });
        }
    }

    for (pos, belt) in inst.belts.iter().enumerate() {
        if belt.id != pos {
            out.push(Violation::BeltIdMismatch { position: pos, id: belt.id });
        }
        if !(belt.productivity > 0.0) {
            out.push(Violation::ProductivityNotPositive { belt: pos });
        }
        if belt.dual_station_threshold == Some(0) {
            out.push(Violation::DualStationThresholdZero { belt: pos });
        }
        for &fl in &belt.compatible_flights {
            if fl >= n {
                out.push(Violation::CompatibleFlightOutOfRange { belt: pos, flight: fl });
            }
        }
    }

    for flight in 0..n {
        if !(0..m).any(|b| inst.is_compatible(b, flight)) {
            out.push(Violation::NoCompatibleBelt { flight });
        }
    }

    for belt in 0..m {
        for flight in 0..n {
            let set = inst.duration_set(belt, flight);
            if !inst.is_compatible(belt, flight) {
                if set.is_some() {
                    out.push(Violation::DurationSetForIncompatiblePair { belt, flight });
                }
                continue;
            }
            let Some(set) = set else {
                out.push(Violation::MissingDurationSet { belt, flight });
                continue;
            };
            let sorted_distinct_positive = !set.values.is_empty()
                && set.values.windows(2).all(|w| w[0] < w[1])
                && set.values[0] >= 1;
            if !sorted_distinct_positive {
                out.push(Violation::DurationValuesInvalid { belt, flight });
                continue;
            }
            if !set.contains(set.nominal) {
                out.push(Violation::NominalNotInValues { belt, flight });
            }
            let t_req = inst.flights[flight].t_req;
            if t_req < inst.t_max && t_req + set.min() > inst.t_max {
                out.push(Violation::UnschedulableFlight { flight, belt });
            }
        }
    }

    match &inst.profit {
        ProfitSource::Formula(params) => {
            if let Err(detail) = params.check() {
                out.push(Violation::ProfitParamsInvalid { detail });
            }
        }
        ProfitSource::Table(table) => {
            // Every admissible (belt, flight, t, w) tuple needs a value.
            for belt in 0..m {
                for flight in 0..n {
                    let Some(set) = inst.duration_set(belt, flight) else { continue };
                    let t_req = inst.flights[flight].t_req;
                    for &w in &set.values {
                        if w > inst.t_max {
                            continue;
                        }
                        for t in t_req..=(inst.t_max - w) {
                            if table.get(belt, flight, t, w).is_none() {
                                out.push(Violation::ProfitTableIncomplete { belt, flight, t, w });
                            }
                        }
                    }
                }
            }
        }
    }

    out
}

/// A violated solution constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolutionViolation {
    /// Flight has no assignment or more than one.
    Coverage { flight: FlightIdx, count: usize },
    /// Start before the requested time or finish past the horizon.
    Window { flight: FlightIdx },
    /// Duration not in the pair's admissible set.
    Duration { flight: FlightIdx, duration: u32 },
    /// Flight assigned to an incompatible belt.
    Compatibility { flight: FlightIdx, belt: BeltIdx },
    /// Two flights on one belt overlap or are served out of fairness order.
    OverlapOrPrecedence { belt: BeltIdx, first: FlightIdx, second: FlightIdx },
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionViolation::Coverage { flight, count } => {
                write!(f, "flight {flight} assigned {count} times (expected exactly 1)")
            }
            SolutionViolation::Window { flight } => {
                write!(f, "flight {flight}: assignment outside its time window")
            }
            SolutionViolation::Duration { flight, duration } => {
                write!(f, "flight {flight}: duration {duration} not admissible")
            }
            SolutionViolation::Compatibility { flight, belt } => {
                write!(f, "flight {flight} incompatible with belt {belt}")
            }
            SolutionViolation::OverlapOrPrecedence { belt, first, second } => {
                write!(f, "belt {belt}: flights {first} and {second} overlap or violate precedence")
            }
        }
    }
}

/// Solution references an index that does not exist in the instance.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed solution: {detail}")]
pub struct MalformedSolution {
    pub detail: String,
}

/// Outcome of [`check_solution`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<SolutionViolation>,
    /// Profit recomputed from the assignments, independent of feasibility.
    /// Assignments outside the admissible profit domain contribute zero.
    pub recomputed_objective: i64,
    pub objective_mismatch: bool,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a solution against every constraint class and recomputes its
/// objective from first principles.
pub fn check_solution(inst: &Instance, sol: &Solution) -> Result<FeasibilityReport, MalformedSolution> {
    let n = inst.num_flights();
    let m = inst.num_belts();
    for a in &sol.assignments {
        if a.flight >= n {
            return Err(MalformedSolution { detail: format!("flight index {} out of range", a.flight) });
        }
        if a.belt >= m {
            return Err(MalformedSolution { detail: format!("belt index {} out of range", a.belt) });
        }
    }

    let mut violations = Vec::new();

    let mut counts = vec![0usize; n];
    for a in &sol.assignments {
        counts[a.flight] += 1;
    }
    for (flight, &count) in counts.iter().enumerate() {
        if count != 1 {
            violations.push(SolutionViolation::Coverage { flight, count });
        }
    }

    let profits = crate::profit::ProfitTable::build(inst);
    let mut recomputed = 0i64;
    for a in &sol.assignments {
        let fl = &inst.flights[a.flight];
        if a.start < fl.t_req || a.start + a.duration > inst.t_max {
            violations.push(SolutionViolation::Window { flight: a.flight });
        }
        if !inst.is_compatible(a.belt, a.flight) {
            violations.push(SolutionViolation::Compatibility { flight: a.flight, belt: a.belt });
        }
        match inst.duration_set(a.belt, a.flight) {
            Some(set) if set.contains(a.duration) => {}
            _ => violations.push(SolutionViolation::Duration { flight: a.flight, duration: a.duration }),
        }
        recomputed += profits.get(a.belt, a.flight, a.start, a.duration).unwrap_or(0);
    }

    // Per belt, assignments must be disjoint and in flight-index order:
    // finish(j) <= start(j') for j < j'. Touching intervals are allowed.
    for belt in 0..m {
        let mut on_belt: Vec<&Assignment> = sol.assignments.iter().filter(|a| a.belt == belt).collect();
        on_belt.sort_by_key(|a| a.flight);
        for pair in on_belt.windows(2) {
            if finish(pair[0]) > pair[1].start {
                violations.push(SolutionViolation::OverlapOrPrecedence {
                    belt,
                    first: pair[0].flight,
                    second: pair[1].flight,
                });
            }
        }
    }

    Ok(FeasibilityReport {
        violations,
        recomputed_objective: recomputed,
        objective_mismatch: recomputed != sol.objective,
    })
}

/// Stable-sorts flights by `(t_req, original position)` and reassigns ids to
/// the resulting order. Returns the permutation `new index -> old index`.
pub fn sort_flights(flights: &mut Vec<Flight>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..flights.len()).collect();
    order.sort_by_key(|&i| (flights[i].t_req, i));
    let mut sorted = Vec::with_capacity(flights.len());
    for (new_id, &old) in order.iter().enumerate() {
        let mut fl = flights[old].clone();
        fl.id = new_id;
        sorted.push(fl);
    }
    *flights = sorted;
    order
}
