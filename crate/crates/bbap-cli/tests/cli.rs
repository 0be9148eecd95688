//! End-to-end runs of the binary: every subcommand, the exit-code table, and
//! byte-level determinism of generated artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn bbap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbap"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_solve_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = bbap(
        &[
            "generate", "--flights", "8", "--belts", "2", "--tmax", "40", "--bag-min", "20",
            "--bag-max", "100", "--seed", "5", "--out", "inst.toml",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");

    let out = bbap(
        &["solve", "inst.toml", "--time-limit", "60", "--out", "sol.toml"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let line = stdout(&out);
    assert!(line.contains("time "), "missing table line: {line}");
    assert!(line.contains("gap(%)"));
    assert!(line.contains("opt yes"));
    assert!(line.contains("nodes "));

    let out = bbap(&["verify", "inst.toml", "sol.toml"], dir.path());
    assert!(out.status.success(), "verify failed: {out:?}");
    assert!(stdout(&out).starts_with("feasible"));
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--flights", "12", "--belts", "3", "--tmax", "60", "--seed", "123"];
    assert!(bbap(&[&args[..], &["--out", "a.toml"]].concat(), dir.path()).status.success());
    assert!(bbap(&[&args[..], &["--out", "b.toml"]].concat(), dir.path()).status.success());
    let a = std::fs::read(dir.path().join("a.toml")).unwrap();
    let b = std::fs::read(dir.path().join("b.toml")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn solve_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bbap(
        &[
            "generate", "--flights", "10", "--belts", "2", "--tmax", "50", "--bag-min", "20",
            "--bag-max", "100", "--seed", "77", "--out", "i.toml",
        ],
        dir.path()
    )
    .status
    .success());
    let first = bbap(&["solve", "i.toml", "--time-limit", "120", "--out", "s1.toml"], dir.path());
    let second = bbap(&["solve", "i.toml", "--time-limit", "120", "--out", "s2.toml"], dir.path());
    assert!(first.status.success() && second.status.success());

    let nodes = |s: &str| {
        s.split("nodes ")
            .nth(1)
            .and_then(|rest| rest.split_whitespace().next().map(str::to_owned))
            .expect("nodes field")
    };
    assert_eq!(nodes(&stdout(&first)), nodes(&stdout(&second)));

    let objective = |p: &str| {
        let text = std::fs::read_to_string(dir.path().join(p)).unwrap();
        text.lines()
            .find(|l| l.starts_with("objective"))
            .map(str::to_owned)
            .expect("objective line")
    };
    assert_eq!(objective("s1.toml"), objective("s2.toml"));
}

#[test]
fn oracle_subcommand_agrees_with_solve() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bbap(
        &[
            "generate", "--flights", "6", "--belts", "2", "--tmax", "28", "--bag-min", "20",
            "--bag-max", "80", "--seed", "9", "--out", "i.toml"
        ],
        dir.path()
    )
    .status
    .success());
    let oracle = bbap(&["oracle", "i.toml"], dir.path());
    assert!(oracle.status.success(), "{oracle:?}");
    let oracle_obj = stdout(&oracle)
        .lines()
        .next()
        .unwrap()
        .strip_prefix("objective ")
        .unwrap()
        .parse::<i64>()
        .unwrap();

    assert!(bbap(&["solve", "i.toml", "--out", "s.toml"], dir.path()).status.success());
    let sol = std::fs::read_to_string(dir.path().join("s.toml")).unwrap();
    let solved_obj = sol
        .lines()
        .find(|l| l.starts_with("objective = "))
        .unwrap()
        .strip_prefix("objective = ")
        .unwrap()
        .parse::<i64>()
        .unwrap();
    assert_eq!(oracle_obj, solved_obj);
}

#[test]
fn export_writes_a_deterministic_model() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bbap(
        &["generate", "--flights", "4", "--belts", "2", "--tmax", "30", "--seed", "2", "--out", "i.toml"],
        dir.path()
    )
    .status
    .success());
    assert!(bbap(&["export", "i.toml", "--out", "m1.lp"], dir.path()).status.success());
    assert!(bbap(&["export", "i.toml", "--out", "m2.lp"], dir.path()).status.success());
    let a = std::fs::read(dir.path().join("m1.lp")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("m2.lp")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("Maximize\n"));
    assert!(text.contains("Subject To"));
    assert!(text.contains("Binaries"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn bench_prints_per_seed_records_and_matching_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    // A small off-family run would take long; use the real family with few
    // seeds and a generous limit, since these solve in seconds.
    let out = bbap(
        &["bench", "--family", "n30m5", "--alpha", "0.5", "--treq-frac", "0.5", "--seeds", "2", "--time-limit", "300"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    let seed_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("seed ")).collect();
    assert_eq!(seed_lines.len(), 2, "expected two per-seed records:\n{text}");
    let aggregate = text.lines().find(|l| l.starts_with("n30m5")).expect("aggregate row");

    // The aggregate must recompute from the per-seed records.
    let field = |line: &str, key: &str| -> f64 {
        line.split(key)
            .nth(1)
            .unwrap()
            .split_whitespace()
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    let mean_nodes: f64 =
        seed_lines.iter().map(|l| field(l, "nodes ")).sum::<f64>() / seed_lines.len() as f64;
    assert!((field(aggregate, "nodes ") - mean_nodes).abs() < 0.01);
    let opt_count = seed_lines.iter().filter(|l| l.contains("opt yes")).count();
    assert!(aggregate.contains(&format!("#opt {}/2", opt_count)));
}

#[test]
fn exit_codes_are_distinct_per_failure_class() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown flag: clap's usage error.
    let out = bbap(&["solve", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // Malformed file.
    std::fs::write(dir.path().join("broken.toml"), "not really toml [").unwrap();
    let out = bbap(&["solve", "broken.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    // Unknown keys are a malformed file too.
    std::fs::write(dir.path().join("extra.toml"), "format_version = 1\nwhatever = 2\n").unwrap();
    let out = bbap(&["solve", "extra.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    // Structurally valid file, invalid instance (t_req beyond the horizon).
    assert!(bbap(
        &["generate", "--flights", "2", "--belts", "1", "--tmax", "30", "--seed", "4", "--out", "i.toml"],
        dir.path()
    )
    .status
    .success());
    let good = std::fs::read_to_string(dir.path().join("i.toml")).unwrap();
    std::fs::write(dir.path().join("bad.toml"), good.replace("t_max = 30", "t_max = 1")).unwrap();
    let out = bbap(&["solve", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4));

    // Verification failure: tampered objective.
    assert!(bbap(&["solve", "i.toml", "--out", "s.toml"], dir.path()).status.success());
    let sol = std::fs::read_to_string(dir.path().join("s.toml")).unwrap();
    let objective_line = sol.lines().find(|l| l.starts_with("objective = ")).unwrap().to_owned();
    std::fs::write(
        dir.path().join("tampered.toml"),
        sol.replace(&objective_line, "objective = 1"),
    )
    .unwrap();
    let out = bbap(&["verify", "i.toml", "tampered.toml"], dir.path());
    assert_eq!(out.status.code(), Some(5));

    // Digest binding: the same solution against a different instance.
    assert!(bbap(
        &["generate", "--flights", "2", "--belts", "1", "--tmax", "30", "--seed", "6", "--out", "other.toml"],
        dir.path()
    )
    .status
    .success());
    let out = bbap(&["verify", "other.toml", "s.toml"], dir.path());
    assert_eq!(out.status.code(), Some(5));

    // Oracle limits.
    assert!(bbap(
        &["generate", "--flights", "9", "--belts", "2", "--tmax", "45", "--seed", "8", "--out", "big.toml"],
        dir.path()
    )
    .status
    .success());
    let out = bbap(&["oracle", "big.toml"], dir.path());
    assert_eq!(out.status.code(), Some(6));

    // Infeasible instance: one belt, one possible duration each, horizon too
    // short for both flights.
    let infeasible = "\
format_version = 1
t_max = 15

[[flights]]
id = 0
bags = 100
t_req = 0

[[flights]]
id = 1
bags = 100
t_req = 0

[[belts]]
id = 0
productivity = 10.0
compatible_flights = [0, 1]

[profit]

[profit.formula]
alpha = 0.5
beta1 = 500.0
beta2 = 500.0

[durations]
explicit = [
  { belt = 0, flight = 0, nominal = 10, values = [10] },
  { belt = 0, flight = 1, nominal = 10, values = [10] },
]
";
    std::fs::write(dir.path().join("infeasible.toml"), infeasible).unwrap();
    let out = bbap(&["oracle", "infeasible.toml"], dir.path());
    assert_eq!(out.status.code(), Some(7), "{out:?}");
    let out = bbap(&["solve", "infeasible.toml"], dir.path());
    assert_eq!(out.status.code(), Some(7), "{out:?}");
}
