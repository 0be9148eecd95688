//! Text file formats and the compact-model LP export.
//!
//! Instances and solutions travel as versioned TOML documents. Parsing
//! rejects unknown keys; emission is canonical (fixed key order), so
//! parse -> emit -> parse is the identity on the data model and a SHA-256
//! digest of the canonical form binds solutions to their instance.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bnp::BnpReport;
use crate::model::{Assignment, Belt, DurationSet, Flight, Instance, Solution};
use crate::profit::{ExplicitProfits, ProfitParams, ProfitSource, ProfitTable};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format_version: u32,
    pub t_max: u32,
    pub flights: Vec<FlightRecord>,
    pub belts: Vec<BeltRecord>,
    pub profit: ProfitRecord,
    pub durations: DurationsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightRecord {
    pub id: usize,
    pub bags: u32,
    pub t_req: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeltRecord {
    pub id: usize,
    pub productivity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_station_threshold: Option<u32>,
    pub compatible_flights: Vec<usize>,
}

/// Exactly one of `formula` or `table` must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfitRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<FormulaRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<ProfitEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaRecord {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfitEntry {
    pub belt: usize,
    pub flight: usize,
    pub t: u32,
    pub w: u32,
    pub p: i64,
}

/// Exactly one of `rule` or `explicit` must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationsRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<DurationRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<DurationEntry>>,
}

/// Named duration-set construction rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DurationRule {
    /// Five values spaced two minutes apart around each pair's nominal
    /// duration (at most two below, at least two above).
    #[serde(rename = "paper-4.1")]
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationEntry {
    pub belt: usize,
    pub flight: usize,
    pub nominal: u32,
    pub values: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub format_version: u32,
    pub instance_digest: String,
    pub objective: i64,
    pub assignments: Vec<AssignmentRecord>,
    pub solver: SolverMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentRecord {
    pub flight: usize,
    pub belt: usize,
    pub start: u32,
    pub duration: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverMeta {
    pub ub: f64,
    pub gap_percent: f64,
    pub nodes: u64,
    pub elapsed_seconds: f64,
    pub proven_optimal: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("not a valid document: {0}")]
    Syntax(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, ParseError> {
    let file: InstanceFile = toml::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    check_schema(&file)?;
    Ok(file)
}

fn check_schema(file: &InstanceFile) -> Result<(), ParseError> {
    if file.format_version != FORMAT_VERSION {
        return Err(ParseError::Schema(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    match (&file.profit.formula, &file.profit.table) {
        (Some(_), None) | (None, Some(_)) => {}
        _ => {
            return Err(ParseError::Schema(
                "profit must carry exactly one of `formula` or `table`".into(),
            ))
        }
    }
    match (&file.durations.rule, &file.durations.explicit) {
        (Some(_), None) | (None, Some(_)) => {}
        _ => {
            return Err(ParseError::Schema(
                "durations must carry exactly one of `rule` or `explicit`".into(),
            ))
        }
    }
    Ok(())
}

/// Canonical emission; the digest is computed over exactly this form.
pub fn emit_instance(file: &InstanceFile) -> String {
    toml::to_string(file).expect("instance files serialize")
}

pub fn instance_digest(file: &InstanceFile) -> String {
    let mut hasher = Sha256::new();
    hasher.update(emit_instance(file).as_bytes());
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Materializes the data model into a solvable instance. Duration sets come
/// from the named rule or the explicit entries; profits from the formula or
/// the explicit table. Structural invariants are left to
/// `validate_instance`.
pub fn file_to_instance(file: &InstanceFile) -> Result<Instance, ParseError> {
    check_schema(file)?;
    let flights: Vec<Flight> = file
        .flights
        .iter()
        .map(|f| Flight { id: f.id, bags: f.bags, t_req: f.t_req })
        .collect();
    let belts: Vec<Belt> = file
        .belts
        .iter()
        .map(|b| Belt {
            id: b.id,
            productivity: b.productivity,
            compatible_flights: b.compatible_flights.iter().copied().collect::<BTreeSet<_>>(),
            dual_station_threshold: b.dual_station_threshold,
        })
        .collect();

    let n = flights.len();
    let m = belts.len();
    let mut durations: Vec<Vec<Option<DurationSet>>> = vec![vec![None; n]; m];
    match (&file.durations.rule, &file.durations.explicit) {
        (Some(DurationRule::Standard), None) => {
            for belt in &belts {
                for flight in &flights {
                    if belt.compatible_flights.contains(&flight.id) && flight.id < n && belt.id < m {
                        let nominal = crate::profit::nominal_duration(belt, flight)
                            .map_err(|e| ParseError::Schema(e.to_string()))?;
                        durations[belt.id][flight.id] = Some(crate::profit::build_duration_set(nominal));
                    }
                }
            }
        }
        (None, Some(entries)) => {
            for entry in entries {
                if entry.belt >= m || entry.flight >= n {
                    return Err(ParseError::Schema(format!(
                        "duration entry references belt {} / flight {} out of range",
                        entry.belt, entry.flight
                    )));
                }
                durations[entry.belt][entry.flight] =
                    Some(DurationSet { nominal: entry.nominal, values: entry.values.clone() });
            }
        }
        _ => unreachable!("checked by schema"),
    }

    let profit = match (&file.profit.formula, &file.profit.table) {
        (Some(f), None) => ProfitSource::Formula(ProfitParams::new(f.alpha, f.beta1, f.beta2)),
        (None, Some(entries)) => {
            let mut table = ExplicitProfits::default();
            for e in entries {
                table.insert(e.belt, e.flight, e.t, e.w, e.p);
            }
            ProfitSource::Table(table)
        }
        _ => unreachable!("checked by schema"),
    };

    Ok(Instance { flights, belts, t_max: file.t_max, profit, durations })
}

/// Builds the file form of an instance. Duration sets that all follow the
/// standard rule collapse to the rule marker; anything else is explicit.
pub fn instance_to_file(inst: &Instance) -> InstanceFile {
    let flights = inst
        .flights
        .iter()
        .map(|f| FlightRecord { id: f.id, bags: f.bags, t_req: f.t_req })
        .collect();
    let belts = inst
        .belts
        .iter()
        .map(|b| BeltRecord {
            id: b.id,
            productivity: b.productivity,
            dual_station_threshold: b.dual_station_threshold,
            compatible_flights: b.compatible_flights.iter().copied().collect(),
        })
        .collect();

    let rule_everywhere = inst.belts.iter().all(|belt| {
        inst.flights.iter().all(|flight| {
            if !belt.compatible_flights.contains(&flight.id) {
                return inst.duration_set(belt.id, flight.id).is_none();
            }
            match (
                crate::profit::nominal_duration(belt, flight),
                inst.duration_set(belt.id, flight.id),
            ) {
                (Ok(nominal), Some(set)) => *set == crate::profit::build_duration_set(nominal),
                _ => false,
            }
        })
    });
    let durations = if rule_everywhere {
        DurationsRecord { rule: Some(DurationRule::Standard), explicit: None }
    } else {
        let mut entries = Vec::new();
        for belt in 0..inst.num_belts() {
            for flight in 0..inst.num_flights() {
                if let Some(set) = inst.duration_set(belt, flight) {
                    entries.push(DurationEntry {
                        belt,
                        flight,
                        nominal: set.nominal,
                        values: set.values.clone(),
                    });
                }
            }
        }
        DurationsRecord { rule: None, explicit: Some(entries) }
    };

    let profit = match &inst.profit {
        ProfitSource::Formula(p) => ProfitRecord {
            formula: Some(FormulaRecord { alpha: p.alpha, beta1: p.beta1, beta2: p.beta2 }),
            table: None,
        },
        ProfitSource::Table(t) => ProfitRecord {
            formula: None,
            table: Some(
                t.iter()
                    .map(|(&(belt, flight, t, w), &p)| ProfitEntry { belt, flight, t, w, p })
                    .collect(),
            ),
        },
    };

    InstanceFile {
        format_version: FORMAT_VERSION,
        t_max: inst.t_max,
        flights,
        belts,
        profit,
        durations,
    }
}

pub fn parse_solution(text: &str) -> Result<SolutionFile, ParseError> {
    let file: SolutionFile = toml::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(ParseError::Schema(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    Ok(file)
}

pub fn emit_solution(file: &SolutionFile) -> String {
    toml::to_string(file).expect("solution files serialize")
}

pub fn solution_to_file(sol: &Solution, digest: String, report: &BnpReport) -> SolutionFile {
    SolutionFile {
        format_version: FORMAT_VERSION,
        instance_digest: digest,
        objective: sol.objective,
        assignments: sol
            .assignments
            .iter()
            .map(|a| AssignmentRecord { flight: a.flight, belt: a.belt, start: a.start, duration: a.duration })
            .collect(),
        solver: SolverMeta {
            ub: report.best_ub,
            gap_percent: report.gap_percent,
            nodes: report.node_count,
            elapsed_seconds: report.elapsed.as_secs_f64(),
            proven_optimal: report.proven_optimal,
        },
    }
}

pub fn file_to_solution(file: &SolutionFile) -> Solution {
    let mut assignments: Vec<Assignment> = file
        .assignments
        .iter()
        .map(|a| Assignment { flight: a.flight, belt: a.belt, start: a.start, duration: a.duration })
        .collect();
    assignments.sort_by_key(|a| a.flight);
    Solution { assignments, objective: file.objective }
}

const LP_TERMS_PER_LINE: usize = 8;

fn push_terms(out: &mut String, terms: &[(i64, String)]) {
    for (idx, (coeff, name)) in terms.iter().enumerate() {
        if idx == 0 {
            let _ = write!(out, " {coeff} {name}");
        } else if idx % LP_TERMS_PER_LINE == 0 {
            let _ = write!(out, "\n   + {coeff} {name}");
        } else {
            let _ = write!(out, " + {coeff} {name}");
        }
    }
}

/// Writes the compact binary model in LP text format: one binary per
/// admissible (belt, flight, start, duration) tuple, one partition row per
/// flight, and one big-M precedence row per belt and ordered flight pair.
/// Output is byte-deterministic for a fixed instance.
pub fn export_compact_lp(inst: &Instance) -> String {
    let profits = ProfitTable::build(inst);
    let t_max = inst.t_max;
    let var = |i: usize, j: usize, t: u32, w: u32| format!("x_{i}_{j}_{t}_{w}");

    // Admissible tuples per (belt, flight), in (t, w) order.
    let tuples = |i: usize, j: usize| -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        if let Some(set) = inst.duration_set(i, j) {
            let t_req = inst.flights[j].t_req;
            for t in t_req..t_max {
                for &w in &set.values {
                    if t + w <= t_max {
                        out.push((t, w));
                    }
                }
            }
        }
        out
    };

    let mut out = String::new();
    out.push_str("Maximize\n obj:");
    let mut obj_terms: Vec<(i64, String)> = Vec::new();
    for i in 0..inst.num_belts() {
        for j in 0..inst.num_flights() {
            for (t, w) in tuples(i, j) {
                let p = profits.get(i, j, t, w).unwrap_or(0);
                obj_terms.push((p, var(i, j, t, w)));
            }
        }
    }
    push_terms(&mut out, &obj_terms);
    out.push_str("\nSubject To\n");

    for j in 0..inst.num_flights() {
        let _ = write!(out, " assign_{j}:");
        let terms: Vec<(i64, String)> = (0..inst.num_belts())
            .flat_map(|i| tuples(i, j).into_iter().map(move |(t, w)| (1i64, var(i, j, t, w))))
            .collect();
        push_terms(&mut out, &terms);
        out.push_str(" = 1\n");
    }

    // Precedence rows, rearranged with every variable on the left:
    // sum (t + w + t_max) x[i,j] + sum (t_max - t) x[i,j'] <= 2 t_max.
    for i in 0..inst.num_belts() {
        for j in 0..inst.num_flights() {
            if !inst.is_compatible(i, j) {
                continue;
            }
            for jp in (j + 1)..inst.num_flights() {
                if !inst.is_compatible(i, jp) {
                    continue;
                }
                let _ = write!(out, " prec_{i}_{j}_{jp}:");
                let mut terms: Vec<(i64, String)> = Vec::new();
                for (t, w) in tuples(i, j) {
                    terms.push((i64::from(t + w + t_max), var(i, j, t, w)));
                }
                for (t, w) in tuples(i, jp) {
                    terms.push((i64::from(t_max - t), var(i, jp, t, w)));
                }
                push_terms(&mut out, &terms);
                let _ = writeln!(out, " <= {}", 2 * u64::from(t_max));
            }
        }
    }

    out.push_str("Binaries\n");
    let mut line_len = 0usize;
    for (idx, (_, name)) in obj_terms.iter().enumerate() {
        if idx == 0 || line_len + name.len() + 1 > 240 {
            if idx != 0 {
                out.push('\n');
            }
            out.push(' ');
            out.push_str(name);
            line_len = 1 + name.len();
        } else {
            out.push(' ');
            out.push_str(name);
            line_len += 1 + name.len();
        }
    }
    out.push_str("\nEnd\n");
    out
}
