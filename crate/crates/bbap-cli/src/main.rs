//! Command-line front end: generate benchmark instances, solve them, verify
//! solutions, run the exhaustive oracle, export the compact model, and run
//! seeded benchmark batches.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use bbap::bnp::{self, BnpReport};
use bbap::fileio::{
    self, emit_instance, emit_solution, export_compact_lp, file_to_instance, file_to_solution,
    instance_digest, instance_to_file, parse_instance, parse_solution, solution_to_file,
};
use bbap::gen::{generate, GenConfig};
use bbap::model::{check_solution, validate_instance, Instance};
use bbap::oracle::{oracle_solve, OracleError, OracleLimits};

// Exit codes, documented in the README.
const EXIT_INTERNAL: u8 = 1;
const EXIT_MALFORMED: u8 = 3;
const EXIT_INVALID_INSTANCE: u8 = 4;
const EXIT_VERIFY_FAILED: u8 = 5;
const EXIT_ORACLE_LIMITS: u8 = 6;
const EXIT_INFEASIBLE: u8 = 7;

#[derive(Parser)]
#[command(name = "bbap", version, about = "Baggage belt assignment solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random instance file.
    Generate {
        #[arg(long)]
        flights: usize,
        #[arg(long)]
        belts: usize,
        #[arg(long)]
        tmax: u32,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long = "treq-frac", default_value_t = 0.5)]
        treq_frac: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 500.0)]
        beta1: f64,
        #[arg(long, default_value_t = 500.0)]
        beta2: f64,
        #[arg(long = "bag-min", default_value_t = 50)]
        bag_min: u32,
        #[arg(long = "bag-max", default_value_t = 300)]
        bag_max: u32,
        #[arg(long = "prod-min", default_value_t = 10)]
        prod_min: u32,
        #[arg(long = "prod-max", default_value_t = 20)]
        prod_max: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance file by branch-and-price.
    Solve {
        file: PathBuf,
        #[arg(long = "time-limit", default_value_t = 300.0)]
        time_limit: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a solution file against its instance.
    Verify { file: PathBuf, sol: PathBuf },
    /// Solve a small instance by exhaustive enumeration.
    Oracle {
        file: PathBuf,
        #[arg(long = "max-flights", default_value_t = 8)]
        max_flights: usize,
        #[arg(long = "max-belts", default_value_t = 3)]
        max_belts: usize,
        #[arg(long = "max-tmax", default_value_t = 30)]
        max_tmax: u32,
    },
    /// Export the compact binary model in LP text format.
    Export {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded benchmark family and print per-instance and aggregate rows.
    Bench {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long = "treq-frac", default_value_t = 0.5)]
        treq_frac: f64,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long = "time-limit", default_value_t = 300.0)]
        time_limit: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    /// 30 flights on 5 belts, 120-minute horizon.
    N30m5,
    /// 50 flights on 10 belts, 120-minute horizon.
    N50m10,
}

impl Family {
    fn dims(self) -> (usize, usize, u32) {
        match self {
            Family::N30m5 => (30, 5, 120),
            Family::N50m10 => (50, 10, 120),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Family::N30m5 => "n30m5",
            Family::N50m10 => "n50m10",
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

fn main() -> ExitCode {
    // Die quietly on closed pipes, like other line-oriented tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate {
            flights,
            belts,
            tmax,
            alpha,
            treq_frac,
            seed,
            beta1,
            beta2,
            bag_min,
            bag_max,
            prod_min,
            prod_max,
            out,
        } => {
            let cfg = GenConfig {
                bag_range: (bag_min, bag_max),
                productivity_range: (prod_min, prod_max),
                beta1,
                beta2,
                ..GenConfig::new(flights, belts, tmax, treq_frac, alpha, seed)
            };
            let inst = generate(&cfg)
                .map_err(|e| Failure::new(EXIT_INVALID_INSTANCE, e.to_string()))?;
            let file = instance_to_file(&inst);
            let text = emit_instance(&file);
            std::fs::write(&out, &text)
                .map_err(|e| Failure::new(EXIT_INTERNAL, format!("writing {}: {e}", out.display())))?;
            println!("wrote {} ({})", out.display(), instance_digest(&file));
            Ok(())
        }
        Command::Solve { file, time_limit, out } => {
            let (instance_file, inst) = load_instance(&file)?;
            let limit = (time_limit > 0.0).then(|| Duration::from_secs_f64(time_limit));
            let report = bnp::solve(&inst, limit)
                .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
            println!("{}", solve_line(&report));
            if report.is_infeasible() {
                return Err(Failure::new(EXIT_INFEASIBLE, "instance is infeasible"));
            }
            if let (Some(path), Some(sol)) = (out, report.incumbent.as_ref()) {
                let digest = instance_digest(&instance_file);
                let text = emit_solution(&solution_to_file(sol, digest, &report));
                std::fs::write(&path, text)
                    .map_err(|e| Failure::new(EXIT_INTERNAL, format!("writing {}: {e}", path.display())))?;
            }
            Ok(())
        }
        Command::Verify { file, sol } => {
            let (instance_file, inst) = load_instance(&file)?;
            let text = std::fs::read_to_string(&sol)
                .map_err(|e| Failure::new(EXIT_MALFORMED, format!("reading {}: {e}", sol.display())))?;
            let sol_file = parse_solution(&text)
                .map_err(|e| Failure::new(EXIT_MALFORMED, e.to_string()))?;

            let digest = instance_digest(&instance_file);
            if sol_file.instance_digest != digest {
                return Err(Failure::new(
                    EXIT_VERIFY_FAILED,
                    format!(
                        "instance digest mismatch: solution carries {}, instance is {digest}",
                        sol_file.instance_digest
                    ),
                ));
            }
            let solution = file_to_solution(&sol_file);
            let report = check_solution(&inst, &solution)
                .map_err(|e| Failure::new(EXIT_VERIFY_FAILED, e.to_string()))?;
            for violation in &report.violations {
                eprintln!("violation: {violation}");
            }
            if report.objective_mismatch {
                eprintln!(
                    "objective mismatch: recomputed {}, solution file says {}",
                    report.recomputed_objective, solution.objective
                );
            }
            if report.is_feasible() && !report.objective_mismatch {
                println!("feasible, objective {}", report.recomputed_objective);
                Ok(())
            } else {
                Err(Failure::new(EXIT_VERIFY_FAILED, "solution failed verification"))
            }
        }
        Command::Oracle { file, max_flights, max_belts, max_tmax } => {
            let (_, inst) = load_instance(&file)?;
            let limits = OracleLimits { max_flights, max_belts, max_tmax };
            match oracle_solve(&inst, &limits) {
                Ok(Some(sol)) => {
                    println!("objective {}", sol.objective);
                    for a in &sol.assignments {
                        println!("flight {} -> belt {} start {} duration {}", a.flight, a.belt, a.start, a.duration);
                    }
                    Ok(())
                }
                Ok(None) => Err(Failure::new(EXIT_INFEASIBLE, "instance is infeasible")),
                Err(e @ OracleError::LimitsExceeded { .. }) => {
                    Err(Failure::new(EXIT_ORACLE_LIMITS, e.to_string()))
                }
                Err(e @ OracleError::InvalidInstance(_)) => {
                    Err(Failure::new(EXIT_INVALID_INSTANCE, e.to_string()))
                }
            }
        }
        Command::Export { file, out } => {
            let (_, inst) = load_instance(&file)?;
            let lp = export_compact_lp(&inst);
            std::fs::write(&out, &lp)
                .map_err(|e| Failure::new(EXIT_INTERNAL, format!("writing {}: {e}", out.display())))?;
            let vars = lp.lines().filter(|l| l.starts_with("Binaries")).count();
            debug_assert_eq!(vars, 1);
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Bench { family, alpha, treq_frac, seeds, time_limit } => {
            bench(family, alpha, treq_frac, seeds, time_limit)
        }
    }
}

fn load_instance(path: &Path) -> Result<(fileio::InstanceFile, Instance), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_MALFORMED, format!("reading {}: {e}", path.display())))?;
    let file = parse_instance(&text).map_err(|e| Failure::new(EXIT_MALFORMED, e.to_string()))?;
    let inst = file_to_instance(&file).map_err(|e| Failure::new(EXIT_MALFORMED, e.to_string()))?;
    let violations = validate_instance(&inst);
    if !violations.is_empty() {
        let mut message = String::from("instance failed validation:");
        for v in &violations {
            message.push_str(&format!("\n  {v}"));
        }
        return Err(Failure::new(EXIT_INVALID_INSTANCE, message));
    }
    Ok((file, inst))
}

fn solve_line(report: &BnpReport) -> String {
    format!(
        "time {:.2}  gap(%) {}  opt {}  nodes {}",
        report.elapsed.as_secs_f64(),
        format_gap(report.gap_percent),
        if report.proven_optimal { "yes" } else { "no" },
        report.node_count
    )
}

fn format_gap(gap: f64) -> String {
    if gap.is_finite() {
        format!("{gap:.2}")
    } else {
        "inf".to_string()
    }
}

struct BenchRecord {
    seed: u64,
    report: BnpReport,
}

fn bench(family: Family, alpha: f64, treq_frac: f64, seeds: u64, time_limit: f64) -> Result<(), Failure> {
    let (n, m, t_max) = family.dims();
    let limit = (time_limit > 0.0).then(|| Duration::from_secs_f64(time_limit));

    // Instances run concurrently with isolated state; only the result
    // aggregation is serialized.
    let records: Mutex<Vec<BenchRecord>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(seeds.max(1) as usize);
    let first_error: Mutex<Option<Failure>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed) as u64;
                if idx >= seeds {
                    break;
                }
                let seed = idx + 1;
                let cfg = GenConfig::new(n, m, t_max, treq_frac, alpha, seed);
                let outcome = generate(&cfg)
                    .map_err(|e| Failure::new(EXIT_INVALID_INSTANCE, e.to_string()))
                    .and_then(|inst| {
                        bnp::solve(&inst, limit).map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))
                    });
                match outcome {
                    Ok(report) => records.lock().unwrap().push(BenchRecord { seed, report }),
                    Err(failure) => {
                        let mut slot = first_error.lock().unwrap();
                        if slot.is_none() {
                            *slot = Some(failure);
                        }
                        break;
                    }
                }
            });
        }
    });
    if let Some(failure) = first_error.into_inner().unwrap() {
        return Err(failure);
    }

    let mut records = records.into_inner().unwrap();
    records.sort_by_key(|r| r.seed);

    for r in &records {
        let objective = r
            .report
            .incumbent
            .as_ref()
            .map_or("none".to_string(), |s| s.objective.to_string());
        println!(
            "seed {}  time {:.2}  gap(%) {}  opt {}  nodes {}  objective {}",
            r.seed,
            r.report.elapsed.as_secs_f64(),
            format_gap(r.report.gap_percent),
            if r.report.proven_optimal { "yes" } else { "no" },
            r.report.node_count,
            objective
        );
    }

    let count = records.len() as f64;
    let avg_time = records.iter().map(|r| r.report.elapsed.as_secs_f64()).sum::<f64>() / count;
    let avg_gap = records.iter().map(|r| r.report.gap_percent).sum::<f64>() / count;
    let optimal = records.iter().filter(|r| r.report.proven_optimal).count();
    let avg_nodes = records.iter().map(|r| r.report.node_count as f64).sum::<f64>() / count;
    println!(
        "{} alpha={} treq=[0,{:.2}*tmax] | time {:.2}  gap(%) {}  #opt {}/{}  nodes {:.2}",
        family.label(),
        alpha,
        treq_frac,
        avg_time,
        format_gap(avg_gap),
        optimal,
        records.len(),
        avg_nodes
    );
    Ok(())
}
