//! Profit semantics: the duration/start-time profit function, nominal
//! durations, duration-set construction, and a dense per-instance profit
//! table used by the solvers.
//!
//! The profit of serving a flight with duration `w` starting at `t` is the
//! rounded weighted sum `alpha * f(w) + (1 - alpha) * g(t)` where `f` is a
//! sigmoid in the offset from the nominal duration (rewarding buffer time,
//! penalizing rushed unloading) and `g` decreases linearly from `beta2` at
//! the requested start time to zero at the end of the horizon.

use std::collections::BTreeMap;

use crate::model::{Belt, BeltIdx, DurationSet, Flight, FlightIdx, Instance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl ProfitParams {
    pub fn new(alpha: f64, beta1: f64, beta2: f64) -> Self {
        Self { alpha, beta1, beta2 }
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.beta1 > 0.0) || !(self.beta2 > 0.0) {
            return Err(format!("beta1 and beta2 must be positive, got {} and {}", self.beta1, self.beta2));
        }
        Ok(())
    }
}

/// Explicit per-tuple profits, keyed by (belt, flight, t, w).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExplicitProfits {
    entries: BTreeMap<(BeltIdx, FlightIdx, u32, u32), i64>,
}

impl ExplicitProfits {
    pub fn insert(&mut self, belt: BeltIdx, flight: FlightIdx, t: u32, w: u32, p: i64) {
        self.entries.insert((belt, flight, t, w), p);
    }

    pub fn get(&self, belt: BeltIdx, flight: FlightIdx, t: u32, w: u32) -> Option<i64> {
        self.entries.get(&(belt, flight, t, w)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(BeltIdx, FlightIdx, u32, u32), &i64)> {
        self.entries.iter()
    }
}

/// Where profits come from: the closed-form formula or an explicit table.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfitSource {
    Formula(ProfitParams),
    Table(ExplicitProfits),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfitError {
    #[error("flight {flight} is not compatible with belt {belt}")]
    IncompatiblePair { belt: BeltIdx, flight: FlightIdx },
    #[error("t_req {t_req} leaves no admissible start time before t_max {t_max}")]
    EmptyWindow { t_req: u32, t_max: u32 },
}

/// Unhurried unloading time for a flight on a belt: bag count divided by the
/// belt's effective productivity, rounded up. A belt with a dual station
/// unloads qualifying flights at twice its productivity.
pub fn nominal_duration(belt: &Belt, flight: &Flight) -> Result<u32, ProfitError> {
    if !belt.compatible_flights.contains(&flight.id) {
        return Err(ProfitError::IncompatiblePair { belt: belt.id, flight: flight.id });
    }
    let effective = match belt.dual_station_threshold {
        Some(threshold) if flight.bags >= threshold => 2.0 * belt.productivity,
        _ => belt.productivity,
    };
    let nominal = (f64::from(flight.bags) / effective).ceil() as u32;
    Ok(nominal.max(1))
}

/// Builds the admissible duration set around a nominal duration: five
/// distinct values spaced two minutes apart, at most two positive values
/// below the nominal, and the rest above it (so at least two buffer
/// durations always exist). Slots that would fall at or below zero move
/// above the nominal instead.
pub fn build_duration_set(nominal: u32) -> DurationSet {
    let mut values: Vec<u32> = [nominal.checked_sub(4), nominal.checked_sub(2)]
        .into_iter()
        .flatten()
        .filter(|&w| w >= 1)
        .collect();
    values.push(nominal);
    let mut next = nominal + 2;
    while values.len() < 5 {
        values.push(next);
        next += 2;
    }
    DurationSet { nominal, values }
}

/// Evaluates the profit formula for one (t, w) choice.
///
/// The weighted sum is computed in floating point and rounded once,
/// half away from zero.
pub fn profit(
    params: &ProfitParams,
    t_max: u32,
    t_req: u32,
    nominal: u32,
    t: u32,
    w: u32,
) -> Result<i64, ProfitError> {
    if t_req >= t_max {
        return Err(ProfitError::EmptyWindow { t_req, t_max });
    }
    debug_assert!(t >= t_req && t < t_max, "start time outside the flight window");
    debug_assert!(w >= 1, "durations are positive");
    let offset = f64::from(w) - f64::from(nominal);
    // beta1 * e^x / (1 + e^x), written in the form that does not overflow.
    let sigmoid = params.beta1 / (1.0 + (-offset).exp());
    let linear = params.beta2 * f64::from(t_max - t) / f64::from(t_max - t_req);
    let weighted = params.alpha * sigmoid + (1.0 - params.alpha) * linear;
    Ok(weighted.round() as i64)
}

/// Dense profit lookup for every admissible (belt, flight, t, w) tuple of an
/// instance, precomputed once so the inner solver loops never evaluate the
/// formula.
#[derive(Debug, Clone)]
pub struct ProfitTable {
    t_max: u32,
    /// `pairs[belt][flight]`, present for compatible pairs with durations.
    pairs: Vec<Vec<Option<PairProfits>>>,
    max_profit: i64,
}

#[derive(Debug, Clone)]
pub struct PairProfits {
    pub t_req: u32,
    pub durations: Vec<u32>,
    /// `by_duration[w_idx][t - t_req]` for `t` in `t_req ..= t_max - w`.
    /// `i64::MIN` marks tuples an explicit table failed to define.
    by_duration: Vec<Vec<i64>>,
}

impl PairProfits {
    pub fn get(&self, t: u32, w: u32) -> Option<i64> {
        let w_idx = self.durations.iter().position(|&d| d == w)?;
        let row = &self.by_duration[w_idx];
        let offset = t.checked_sub(self.t_req)? as usize;
        match row.get(offset) {
            Some(&p) if p != i64::MIN => Some(p),
            _ => None,
        }
    }

    pub fn row(&self, w_idx: usize) -> &[i64] {
        &self.by_duration[w_idx]
    }
}

impl ProfitTable {
    /// Precomputes profits for all admissible tuples. Tuples an explicit
    /// table leaves undefined are stored as missing; `validate_instance`
    /// reports them.
    pub fn build(inst: &Instance) -> Self {
        let mut max_profit = 0i64;
        let mut pairs = Vec::with_capacity(inst.num_belts());
        for belt in 0..inst.num_belts() {
            let mut row = Vec::with_capacity(inst.num_flights());
            for flight in 0..inst.num_flights() {
                let cell = inst.duration_set(belt, flight).map(|set| {
                    let t_req = inst.flights[flight].t_req.min(inst.t_max.saturating_sub(1));
                    let by_duration = set
                        .values
                        .iter()
                        .map(|&w| {
                            if w > inst.t_max {
                                return Vec::new();
                            }
                            (t_req..=(inst.t_max - w))
                                .map(|t| {
                                    let p = match &inst.profit {
                                        ProfitSource::Formula(params) => {
                                            profit(params, inst.t_max, t_req, set.nominal, t, w).unwrap_or(i64::MIN)
                                        }
                                        ProfitSource::Table(table) => {
                                            table.get(belt, flight, t, w).unwrap_or(i64::MIN)
                                        }
                                    };
                                    if p != i64::MIN {
                                        max_profit = max_profit.max(p);
                                    }
                                    p
                                })
                                .collect()
                        })
                        .collect();
                    PairProfits { t_req, durations: set.values.clone(), by_duration }
                });
                row.push(cell);
            }
            pairs.push(row);
        }
        Self { t_max: inst.t_max, pairs, max_profit }
    }

    pub fn t_max(&self) -> u32 {
        self.t_max
    }

    pub fn pair(&self, belt: BeltIdx, flight: FlightIdx) -> Option<&PairProfits> {
        self.pairs.get(belt)?.get(flight)?.as_ref()
    }

    pub fn get(&self, belt: BeltIdx, flight: FlightIdx, t: u32, w: u32) -> Option<i64> {
        self.pair(belt, flight)?.get(t, w)
    }

    /// Largest profit over all admissible tuples of the instance.
    pub fn max_profit(&self) -> i64 {
        self.max_profit
    }
}
