//! Exact solver library for the baggage belt assignment problem: assign each
//! arriving flight a reclaim belt, a delivery start time, and an unloading
//! duration, maximizing time- and duration-dependent profits under belt
//! non-overlap and fairness-precedence constraints.
//!
//! The solver is a branch-and-price scheme: a set-partitioning master over
//! single-belt schedule columns, priced by a position-dependent knapsack
//! dynamic program, searched best-first with flight-to-belt branching. A
//! brute-force oracle, an instance generator, text file formats, and an LP
//! exporter of the compact integer model round out the toolkit.

pub mod bnp;
pub mod colgen;
pub mod fileio;
pub mod gen;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod profit;

pub use bnp::{solve, BnpReport};
pub use gen::{generate, GenConfig};
pub use model::{
    check_solution, finish, validate_instance, Assignment, Belt, DurationSet, Flight, Instance,
    Solution,
};
pub use oracle::{oracle_solve, OracleLimits};
pub use profit::{build_duration_set, nominal_duration, profit, ProfitParams, ProfitSource, ProfitTable};
