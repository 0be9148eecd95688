//! Seeded random instance generation.
//!
//! Instances are a deterministic function of the seed: the generator uses
//! SplitMix64 (64-bit state, published constants), so the same configuration
//! reproduces bit-identical instances in any implementation language. Draw
//! order is fixed: all belt productivities first, then per-flight bag counts,
//! then per-flight requested start times. Integer draws use
//! `lo + next_u64() % span`.

use crate::model::{sort_flights, Belt, Flight, Instance};
use crate::profit::{build_duration_set, nominal_duration, ProfitParams, ProfitSource};

/// SplitMix64 (Steele, Lea, Flood 2014); the standard constants.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn uniform(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        lo + self.next_u64() % span
    }
}

/// Generator configuration. Defaults mirror the benchmark families: bags in
/// [50, 300], productivities in [10, 20], beta1 = beta2 = 500.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub m: usize,
    pub t_max: u32,
    /// Requested start times are drawn uniformly from
    /// `0 ..= floor(treq_frac * t_max)` (capped at `t_max - 1`).
    pub treq_frac: f64,
    pub bag_range: (u32, u32),
    pub productivity_range: (u32, u32),
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(n: usize, m: usize, t_max: u32, treq_frac: f64, alpha: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            t_max,
            treq_frac,
            bag_range: (50, 300),
            productivity_range: (10, 20),
            alpha,
            beta1: 500.0,
            beta2: 500.0,
            seed,
        }
    }

    pub fn check(&self) -> Result<(), GenError> {
        if self.n == 0 || self.m == 0 || self.t_max == 0 {
            return Err(GenError::BadConfig("n, m, t_max must be >= 1".into()));
        }
        if !(self.treq_frac > 0.0 && self.treq_frac <= 1.0) {
            return Err(GenError::BadConfig(format!(
                "treq_frac must lie in (0, 1], got {}",
                self.treq_frac
            )));
        }
        if self.bag_range.0 > self.bag_range.1 || self.bag_range.0 == 0 {
            return Err(GenError::BadConfig("bag range is empty or starts at zero".into()));
        }
        if self.productivity_range.0 > self.productivity_range.1 || self.productivity_range.0 == 0 {
            return Err(GenError::BadConfig("productivity range is empty or starts at zero".into()));
        }
        ProfitParams::new(self.alpha, self.beta1, self.beta2)
            .check()
            .map_err(GenError::BadConfig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    /// A drawn flight cannot fit any duration on some belt before the
    /// horizon; only reachable with treq_frac close to 1.
    #[error("generated flight {flight} is unschedulable on belt {belt} (t_req {t_req} + min duration {min_w} exceeds t_max)")]
    Unschedulable { flight: usize, belt: usize, t_req: u32, min_w: u32 },
}

/// Draws an instance: every belt is compatible with every flight,
/// productivities and bag counts are uniform integers from the configured
/// ranges, and durations follow the standard five-value rule around each
/// pair's nominal duration.
pub fn generate(cfg: &GenConfig) -> Result<Instance, GenError> {
    cfg.check()?;
    let mut rng = SplitMix64::new(cfg.seed);

    let productivities: Vec<u32> = (0..cfg.m)
        .map(|_| rng.uniform(cfg.productivity_range.0 as u64, cfg.productivity_range.1 as u64) as u32)
        .collect();
    let bags: Vec<u32> = (0..cfg.n)
        .map(|_| rng.uniform(cfg.bag_range.0 as u64, cfg.bag_range.1 as u64) as u32)
        .collect();
    let treq_hi = (((cfg.treq_frac * f64::from(cfg.t_max)).floor() as u32).min(cfg.t_max - 1)) as u64;
    let t_reqs: Vec<u32> = (0..cfg.n).map(|_| rng.uniform(0, treq_hi) as u32).collect();

    let mut flights: Vec<Flight> = bags
        .into_iter()
        .zip(t_reqs)
        .enumerate()
        .map(|(id, (bags, t_req))| Flight { id, bags, t_req })
        .collect();
    sort_flights(&mut flights);

    let belts: Vec<Belt> = productivities
        .into_iter()
        .enumerate()
        .map(|(id, p)| Belt {
            id,
            productivity: f64::from(p),
            compatible_flights: (0..cfg.n).collect(),
            dual_station_threshold: None,
        })
        .collect();

    let mut durations = Vec::with_capacity(cfg.m);
    for belt in &belts {
        let mut row = Vec::with_capacity(cfg.n);
        for flight in &flights {
            let nominal = nominal_duration(belt, flight).expect("all pairs are compatible");
            let set = build_duration_set(nominal);
            if flight.t_req + set.min() > cfg.t_max {
                return Err(GenError::Unschedulable {
                    flight: flight.id,
                    belt: belt.id,
                    t_req: flight.t_req,
                    min_w: set.min(),
                });
            }
            row.push(Some(set));
        }
        durations.push(row);
    }

    Ok(Instance {
        flights,
        belts,
        t_max: cfg.t_max,
        profit: ProfitSource::Formula(ProfitParams::new(cfg.alpha, cfg.beta1, cfg.beta2)),
        durations,
    })
}
