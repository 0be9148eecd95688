//! Acceptance suite: every release criterion at its stated tolerance, one
//! printed pass/fail line per criterion (visible with `--nocapture`).
//!
//! The heavy shared computation (a 100-instance solver-vs-oracle batch) runs
//! once and feeds criteria 1, 4, 5, and 6.

use std::sync::atomic::Ordering;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use bbap::bnp::{self, BnpReport};
use bbap::colgen::DualPrices;
use bbap::fileio::{emit_instance, instance_to_file};
use bbap::gen::{generate, GenConfig, SplitMix64};
use bbap::lp::{CERT_CHECKS, CERT_FAILURES};
use bbap::model::{check_solution, validate_instance, Belt, DurationSet, Flight, Instance};
use bbap::oracle::{oracle_solve, OracleLimits};
use bbap::pricing::{backtrack, dp_fill, PricingInput};
use bbap::profit::{profit, ProfitParams, ProfitSource, ProfitTable};

const BATCH_SIZE: u64 = 100;

struct InstanceOutcome {
    seed: u64,
    feasible: bool,
    objectives_match: bool,
    proven_optimal: bool,
    oracle_objective: Option<i64>,
    root_ub: Option<f64>,
    best_ub: f64,
    incumbent_objective: Option<i64>,
    incumbent_monotone: bool,
    node_count: u64,
    solution_checks_clean: bool,
}

struct Batch {
    outcomes: Vec<InstanceOutcome>,
    cert_checks: u64,
    cert_failures: u64,
    elapsed: Duration,
}

fn batch() -> &'static Batch {
    static BATCH: OnceLock<Batch> = OnceLock::new();
    BATCH.get_or_init(run_batch)
}

/// A mix of loads: half the seeds run two near-identical belts close to
/// capacity (masters go fractional, the tree really branches, a couple of
/// seeds are infeasible), the rest vary the belt count with lighter loads.
fn batch_config(seed: u64) -> GenConfig {
    let mut rng = SplitMix64::new(seed.wrapping_mul(7).wrapping_add(1));
    let n = 5 + (rng.next_u64() % 4) as usize;
    let t_max = 20 + (rng.next_u64() % 11) as u32;
    match seed % 10 {
        0 => GenConfig {
            bag_range: (60, 130),
            productivity_range: (10, 12),
            ..GenConfig::new(n, 2, t_max, 0.5, 0.5, seed)
        },
        1..=4 => GenConfig {
            bag_range: (50, 100),
            productivity_range: (10, 12),
            ..GenConfig::new(n, 2, t_max, 0.5, 0.5, seed)
        },
        _ => {
            let m = 1 + (rng.next_u64() % 3) as usize;
            GenConfig { bag_range: (15, 60), ..GenConfig::new(n, m, t_max, 0.5, 0.5, seed) }
        }
    }
}

fn run_one(seed: u64) -> InstanceOutcome {
    let inst = generate(&batch_config(seed)).expect("batch configs always generate");
    assert_eq!(validate_instance(&inst), Vec::new(), "seed {seed}");

    let mut monotone = true;
    let mut last = i64::MIN;
    let report = bnp::solve_with_hook(&inst, None, |p| {
        if let Some(obj) = p.incumbent_objective {
            monotone &= obj >= last;
            last = obj;
        }
    })
    .unwrap_or_else(|e| panic!("seed {seed}: solver failed: {e}"));
    assert!(report.proven_optimal, "seed {seed}: tree not exhausted without a time limit");

    let oracle = oracle_solve(&inst, &OracleLimits::default())
        .unwrap_or_else(|e| panic!("seed {seed}: oracle refused: {e}"));

    let (feasible, objectives_match, solution_checks_clean) = match (&report.incumbent, &oracle) {
        (Some(sol), Some(orc)) => {
            let feas = check_solution(&inst, sol).unwrap();
            (true, sol.objective == orc.objective, feas.is_feasible() && !feas.objective_mismatch)
        }
        (None, None) => (false, true, true),
        _ => (false, false, false),
    };

    InstanceOutcome {
        seed,
        feasible,
        objectives_match,
        proven_optimal: report.proven_optimal,
        oracle_objective: oracle.as_ref().map(|s| s.objective),
        root_ub: report.root_ub,
        best_ub: report.best_ub,
        incumbent_objective: report.incumbent.as_ref().map(|s| s.objective),
        incumbent_monotone: monotone,
        node_count: report.node_count,
        solution_checks_clean,
    }
}

fn run_batch() -> Batch {
    let start = Instant::now();
    let checks_before = CERT_CHECKS.load(Ordering::Relaxed);
    let failures_before = CERT_FAILURES.load(Ordering::Relaxed);

    let results: Mutex<Vec<InstanceOutcome>> = Mutex::new(Vec::new());
    let next = std::sync::atomic::AtomicU64::new(1);
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(8);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let seed = next.fetch_add(1, Ordering::Relaxed);
                if seed > BATCH_SIZE {
                    break;
                }
                let outcome = run_one(seed);
                results.lock().unwrap().push(outcome);
            });
        }
    });
    let mut outcomes = results.into_inner().unwrap();
    outcomes.sort_by_key(|o| o.seed);

    Batch {
        outcomes,
        cert_checks: CERT_CHECKS.load(Ordering::Relaxed) - checks_before,
        cert_failures: CERT_FAILURES.load(Ordering::Relaxed) - failures_before,
        elapsed: start.elapsed(),
    }
}

#[test]
fn criterion_1_oracle_equivalence() {
    let batch = batch();
    let feasible = batch.outcomes.iter().filter(|o| o.feasible).count();
    let mismatches: Vec<u64> = batch
        .outcomes
        .iter()
        .filter(|o| !(o.objectives_match && o.proven_optimal && o.solution_checks_clean))
        .map(|o| o.seed)
        .collect();
    let within_budget = batch.elapsed <= Duration::from_secs(60);
    let pass = mismatches.is_empty() && within_budget && batch.outcomes.len() == BATCH_SIZE as usize;
    println!(
        "criterion 1: {} — solver matches the oracle exactly on {}/{} seeded instances \
         ({feasible} feasible, {} infeasible), all proven optimal, batch took {:.1} s (budget 60 s)",
        if pass { "PASS" } else { "FAIL" },
        batch.outcomes.len() - mismatches.len(),
        batch.outcomes.len(),
        batch.outcomes.len() - feasible,
        batch.elapsed.as_secs_f64()
    );
    assert!(mismatches.is_empty(), "objective mismatches on seeds {mismatches:?}");
    assert!(within_budget, "batch runtime {:?} exceeds the 60 s budget", batch.elapsed);
}

#[test]
fn criterion_4_lp_certificates() {
    let batch = batch();
    let pass = batch.cert_checks > 0 && batch.cert_failures == 0;
    println!(
        "criterion 4: {} — {} master LP optima certified (primal/dual agreement within \
         1e-6*(1+|obj|), complementary slackness within 1e-6), {} failures",
        if pass { "PASS" } else { "FAIL" },
        batch.cert_checks,
        batch.cert_failures
    );
    assert!(batch.cert_checks > 0, "no LP certificates were checked");
    assert_eq!(batch.cert_failures, 0, "LP certificate failures during the batch");
}

#[test]
fn criterion_5_bound_sandwich() {
    let batch = batch();
    let mut violations = Vec::new();
    for o in &batch.outcomes {
        if let (Some(oracle), Some(root)) = (o.oracle_objective, o.root_ub) {
            if (oracle as f64) > root + 1e-6 {
                violations.push(format!("seed {}: oracle {} above root bound {}", o.seed, oracle, root));
            }
        }
        if let Some(inc) = o.incumbent_objective {
            if o.best_ub != inc as f64 {
                violations.push(format!("seed {}: final bound {} != incumbent {}", o.seed, o.best_ub, inc));
            }
        }
    }
    let pass = violations.is_empty();
    println!(
        "criterion 5: {} — weak duality (oracle <= root bound) and optimality closure \
         (final bound == incumbent) hold on all {} instances",
        if pass { "PASS" } else { "FAIL" },
        batch.outcomes.len()
    );
    assert!(violations.is_empty(), "{violations:?}");
}

#[test]
fn criterion_6_monotone_tree() {
    let batch = batch();
    // Child-vs-parent bounds are asserted inside the solver on every node;
    // reaching this point means no node violated them.
    let nodes: u64 = batch.outcomes.iter().map(|o| o.node_count).sum();
    let non_monotone: Vec<u64> = batch
        .outcomes
        .iter()
        .filter(|o| !o.incumbent_monotone)
        .map(|o| o.seed)
        .collect();
    let pass = non_monotone.is_empty();
    println!(
        "criterion 6: {} — child bound <= parent bound + 1e-6 asserted on all {} nodes; \
         incumbent non-decreasing on every run",
        if pass { "PASS" } else { "FAIL" },
        nodes
    );
    assert!(non_monotone.is_empty(), "incumbent decreased on seeds {non_monotone:?}");
}

/// Random single-belt pricing case within the stated limits (n <= 6,
/// t_max <= 25, at most 3 durations) plus random rational duals in
/// [-max p, +max p]. Kept independent of the module-level tests.
fn pricing_case(seed: u64) -> (Instance, DualPrices) {
    let mut rng = SplitMix64::new(seed);
    let t_max = 10 + (rng.next_u64() % 16) as u32;
    let n = 1 + (rng.next_u64() % 6) as usize;
    let mut flights: Vec<Flight> = (0..n)
        .map(|id| Flight {
            id,
            bags: 10 + (rng.next_u64() % 50) as u32,
            t_req: (rng.next_u64() % (t_max as u64 / 2 + 1)) as u32,
        })
        .collect();
    bbap::model::sort_flights(&mut flights);
    let mut sets = Vec::with_capacity(n);
    for fl in &flights {
        let max_w = (t_max - fl.t_req).max(2);
        let nominal = 2 + (rng.next_u64() % (max_w.min(6) as u64 - 1)) as u32;
        let mut values = vec![nominal];
        if rng.next_u64() % 2 == 0 && nominal > 2 {
            values.insert(0, nominal - 2);
        }
        if rng.next_u64() % 2 == 0 {
            values.push(nominal + 2);
        }
        sets.push(Some(DurationSet { nominal, values }));
    }
    let inst = Instance {
        flights,
        belts: vec![Belt {
            id: 0,
            productivity: 10.0,
            compatible_flights: (0..n).collect(),
            dual_station_threshold: None,
        }],
        t_max,
        profit: ProfitSource::Formula(ProfitParams::new(0.5, 500.0, 500.0)),
        durations: vec![sets],
    };
    assert_eq!(validate_instance(&inst), Vec::new());
    let profits = ProfitTable::build(&inst);
    let max_p = profits.max_profit() as f64;
    let y = (0..n)
        .map(|_| (2.0 * (rng.next_u64() as f64 / u64::MAX as f64) - 1.0) * max_p)
        .collect();
    (inst, DualPrices { y, u: vec![0.0] })
}

/// Exhaustive schedule enumeration, accumulating reduced profits in flight
/// order so sums are bit-identical to the recursion's.
fn enumerate_best(inst: &Instance, profits: &ProfitTable, duals: &DualPrices) -> f64 {
    fn rec(
        inst: &Instance,
        profits: &ProfitTable,
        duals: &DualPrices,
        idx: usize,
        fin: u32,
        acc: f64,
        best: &mut f64,
    ) {
        if acc > *best {
            *best = acc;
        }
        for fl in idx..inst.num_flights() {
            let set = inst.duration_set(0, fl).unwrap();
            let t_req = inst.flights[fl].t_req;
            for &w in &set.values {
                if w > inst.t_max {
                    continue;
                }
                for t in t_req.max(fin)..=(inst.t_max - w) {
                    let p = profits.get(0, fl, t, w).unwrap();
                    rec(inst, profits, duals, fl + 1, t + w, acc + (p as f64 - duals.y[fl]), best);
                }
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(inst, profits, duals, 0, 0, 0.0, &mut best);
    best.max(0.0)
}

#[test]
fn criterion_2_pricing_dp_equivalence() {
    let cases = 200u64;
    let mut worst_backtrack_gap = 0.0f64;
    for seed in 0..cases {
        let (inst, duals) = pricing_case(seed);
        let profits = ProfitTable::build(&inst);
        let input = PricingInput {
            belt: 0,
            eligible: (0..inst.num_flights()).collect(),
            forced: vec![],
            duals: &duals,
            instance: &inst,
            profits: &profits,
        };
        let table = dp_fill(&input);
        let dp_value = table.final_value(&input);
        let oracle = enumerate_best(&inst, &profits, &duals);
        assert_eq!(dp_value, oracle, "seed {seed}: recursion {dp_value} vs enumeration {oracle}");

        let schedule = backtrack(&table, &input);
        let mut rescored = 0.0;
        for sf in &schedule {
            let p = profits.get(0, sf.flight, sf.start, sf.duration).unwrap();
            rescored += p as f64 - duals.y[sf.flight];
        }
        assert_eq!(rescored, dp_value, "seed {seed}: backtracked schedule re-scores differently");
        worst_backtrack_gap = worst_backtrack_gap.max((rescored - dp_value).abs());
    }
    println!(
        "criterion 2: PASS — recursion value equals exhaustive enumeration exactly on {cases} \
         single-belt cases; backtracked schedules re-score to the table optimum (worst gap {worst_backtrack_gap:e})"
    );
}

#[test]
fn criterion_3_profit_formula_spot_checks() {
    let params = ProfitParams::new(0.5, 500.0, 500.0);
    let at_nominal = profit(&params, 120, 10, 12, 10, 12).unwrap();
    let with_buffer = profit(&params, 120, 10, 12, 10, 14).unwrap();
    let late_start = profit(&params, 120, 0, 20, 119, 20).unwrap();
    let pass = (at_nominal, with_buffer, late_start) == (375, 470, 127);
    println!(
        "criterion 3: {} — profit formula spot checks: {at_nominal} (expect 375), \
         {with_buffer} (expect 470), {late_start} (expect 127)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert_eq!(at_nominal, 375);
    assert_eq!(with_buffer, 470);
    assert_eq!(late_start, 127);
}

#[test]
fn criterion_7_benchmark_family() {
    let seeds: Vec<u64> = (1..=10).collect();
    let limit = Duration::from_secs(300);
    let reports: Mutex<Vec<(u64, BnpReport)>> = Mutex::new(Vec::new());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(seeds.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(idx) else { break };
                let cfg = GenConfig::new(30, 5, 120, 0.5, 0.5, seed);
                let inst = generate(&cfg).expect("family instances generate");
                let report = bnp::solve(&inst, Some(limit)).expect("solver runs");
                reports.lock().unwrap().push((seed, report));
            });
        }
    });
    let mut reports = reports.into_inner().unwrap();
    reports.sort_by_key(|(s, _)| *s);

    for (seed, r) in &reports {
        println!(
            "  n30m5 alpha=0.5 seed {seed}: time {:.2}  gap(%) {:.2}  opt {}  nodes {}",
            r.elapsed.as_secs_f64(),
            r.gap_percent,
            if r.proven_optimal { "yes" } else { "no" },
            r.node_count
        );
    }
    let avg_gap = reports.iter().map(|(_, r)| r.gap_percent).sum::<f64>() / reports.len() as f64;
    let optimal = reports.iter().filter(|(_, r)| r.proven_optimal).count();
    let avg_time = reports.iter().map(|(_, r)| r.elapsed.as_secs_f64()).sum::<f64>() / reports.len() as f64;
    let avg_nodes = reports.iter().map(|(_, r)| r.node_count as f64).sum::<f64>() / reports.len() as f64;

    let pass = avg_gap <= 1.0 && optimal >= 5;
    println!(
        "criterion 7: {} — family n=30 m=5 t_max=120 alpha=0.5 treq in [0, t_max/2], 10 seeds, \
         300 s limit: avg time {avg_time:.2} s, avg gap {avg_gap:.2}% (threshold 1%), \
         optimal {optimal}/10 (threshold 5), avg nodes {avg_nodes:.2}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(avg_gap <= 1.0, "average gap {avg_gap}% above the 1% threshold");
    assert!(optimal >= 5, "only {optimal}/10 solved to proven optimality");
}

#[test]
fn criterion_8_determinism() {
    let cfg = GenConfig { bag_range: (20, 100), ..GenConfig::new(8, 2, 40, 0.5, 0.5, 41) };
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    let file_a = emit_instance(&instance_to_file(&a));
    let file_b = emit_instance(&instance_to_file(&b));
    let ra = bnp::solve(&a, Some(Duration::from_secs(300))).unwrap();
    let rb = bnp::solve(&b, Some(Duration::from_secs(300))).unwrap();
    let oa = ra.incumbent.as_ref().map(|s| s.objective);
    let ob = rb.incumbent.as_ref().map(|s| s.objective);
    let pass = file_a == file_b && oa == ob && ra.node_count == rb.node_count;
    println!(
        "criterion 8: {} — repeated generate is byte-identical ({} bytes) and repeated solve \
         agrees on (objective, nodes) = ({oa:?}, {})",
        if pass { "PASS" } else { "FAIL" },
        file_a.len(),
        ra.node_count
    );
    assert_eq!(file_a, file_b, "generated files differ between runs");
    assert_eq!(oa, ob, "objectives differ between runs");
    assert_eq!(ra.node_count, rb.node_count, "node counts differ between runs");
}

/// Cross-checks the LP export against an external MILP solver. Optional:
/// needs python3 with scipy (HiGHS); run with
/// `cargo test -p bbap --test acceptance -- --ignored criterion_9`.
#[test]
#[ignore = "requires python3 + scipy; run explicitly with -- --ignored"]
fn criterion_9_compact_export_fidelity() {
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scripts/check_export.py");
    let mut failures = Vec::new();
    for seed in 1..=10u64 {
        let cfg = GenConfig { bag_range: (10, 40), ..GenConfig::new(6, 2, 26, 0.5, 0.5, seed) };
        let inst = generate(&cfg).unwrap();
        let oracle = oracle_solve(&inst, &OracleLimits::default()).unwrap();
        let lp = bbap::fileio::export_compact_lp(&inst);
        let dir = std::env::temp_dir();
        let path = dir.join(format!("bbap_export_check_{seed}.lp"));
        std::fs::write(&path, &lp).unwrap();

        let output = std::process::Command::new("python3")
            .arg(script)
            .arg(&path)
            .output()
            .expect("python3 available");
        assert!(
            output.status.success(),
            "seed {seed}: checker failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let text = String::from_utf8_lossy(&output.stdout);
        let external: Option<i64> = text
            .lines()
            .find_map(|l| l.strip_prefix("objective "))
            .and_then(|v| v.trim().parse().ok());
        let expected = oracle.as_ref().map(|s| s.objective);
        let infeasible_external = text.contains("infeasible");
        let agree = match expected {
            Some(obj) => external == Some(obj),
            None => infeasible_external,
        };
        if !agree {
            failures.push(format!("seed {seed}: external {external:?} vs oracle {expected:?}"));
        }
        let _ = std::fs::remove_file(&path);
    }
    let pass = failures.is_empty();
    println!(
        "criterion 9: {} — external MILP solver reproduces the oracle objective on 10 exported models",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(failures.is_empty(), "{failures:?}");
}
