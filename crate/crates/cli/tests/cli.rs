//! End-to-end tests of the CLI contract: exit codes, JSON schema, the
//! environment-variable budget override, and the optimization toggles.

use std::io::Write;
use std::process::{Command, Output};

use eqlog_core::corpus::{FIB_PROGRAM, LOOP_PROGRAM, STREAM_PROGRAM};

fn program_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

fn eqlog(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eqlog"));
    cmd.args(args);
    cmd.env_remove("EQLOG_MAX_STEPS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn normal_form_exits_zero_and_prints_term() {
    let f = program_file(FIB_PROGRAM);
    let out = eqlog(&["normalize", f.path().to_str().unwrap(), "fib(2)"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "2");
}

#[test]
fn no_finite_normal_form_exits_two() {
    let f = program_file(LOOP_PROGRAM);
    let out = eqlog(&["normalize", f.path().to_str().unwrap(), "a"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("no finite normal form"));
}

#[test]
fn step_limit_exits_three() {
    let f = program_file(LOOP_PROGRAM);
    let out = eqlog(
        &[
            "normalize",
            f.path().to_str().unwrap(),
            "a",
            "--mode",
            "untabled",
            "--max-steps",
            "50",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn parse_errors_exit_one() {
    let f = program_file("vars x; x -> x;");
    let out = eqlog(&["normalize", f.path().to_str().unwrap(), "x"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let f = program_file(FIB_PROGRAM);
    let out = eqlog(&["normalize", f.path().to_str().unwrap(), "nosuch(1)"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = eqlog(&["analyze", "/nonexistent/prog.eq"], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn arithmetic_overflow_exits_one() {
    let f = program_file("vars x; boom(x) -> x * x;");
    let out = eqlog(
        &[
            "normalize",
            f.path().to_str().unwrap(),
            "boom(4000000000000000000)",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overflow"));
}

#[test]
fn env_var_overrides_default_budget_and_flag_wins() {
    let f = program_file(LOOP_PROGRAM);
    let path = f.path().to_str().unwrap();
    let out = eqlog(
        &["normalize", path, "a", "--mode", "untabled", "--json"],
        &[("EQLOG_MAX_STEPS", "25")],
    );
    assert_eq!(out.status.code(), Some(3));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["max_steps"], 25);
    assert_eq!(doc["results"]["untabled"]["stats"]["steps_applied"], 25);

    let out = eqlog(
        &[
            "normalize",
            path,
            "a",
            "--mode",
            "untabled",
            "--max-steps",
            "10",
            "--json",
        ],
        &[("EQLOG_MAX_STEPS", "25")],
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["max_steps"], 10);

    let out = eqlog(
        &["normalize", path, "a"],
        &[("EQLOG_MAX_STEPS", "not-a-number")],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn normalize_json_schema() {
    let f = program_file(FIB_PROGRAM);
    let out = eqlog(
        &[
            "normalize",
            f.path().to_str().unwrap(),
            "fib(2)",
            "--mode",
            "both",
            "--json",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "normalize");
    assert_eq!(doc["mode"], "both");
    assert_eq!(doc["agreement"], true);
    assert_eq!(doc["results"]["tabled"]["outcome"], "normal_form");
    assert_eq!(doc["results"]["tabled"]["normal_form"], "2");
    assert_eq!(doc["results"]["untabled"]["normal_form"], "2");
    // text mode carries the same data
    let text = eqlog(
        &[
            "normalize",
            f.path().to_str().unwrap(),
            "fib(2)",
            "--mode",
            "both",
        ],
        &[],
    );
    let text = stdout(&text);
    assert!(text.contains("tabled: 2"));
    assert!(text.contains("untabled: 2"));
    assert!(text.contains("agreement: true"));
}

#[test]
fn analyze_json_and_dot() {
    let f = program_file(FIB_PROGRAM);
    let dir = tempfile::tempdir().unwrap();
    let dot_path = dir.path().join("needs.dot");
    let out = eqlog(
        &[
            "analyze",
            f.path().to_str().unwrap(),
            "--term",
            "fib(2)",
            "--dot",
            dot_path.to_str().unwrap(),
            "--json",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "analyze");
    assert_eq!(doc["report"]["has_cycle"], true);
    assert_eq!(doc["report"]["cycle_reachable_from_goal"], true);
    assert_eq!(doc["report"]["has_reusable_node"], true);
    let dot = std::fs::read_to_string(&dot_path).unwrap();
    assert!(dot.starts_with("digraph needs {"));

    // goal-less analyze leaves the goal verdicts out
    let out = eqlog(&["analyze", f.path().to_str().unwrap(), "--json"], &[]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(doc["report"]["cycle_reachable_from_goal"].is_null());
}

#[test]
fn analyze_stream_reports_collapsing_diagnostic() {
    let f = program_file(STREAM_PROGRAM);
    let out = eqlog(&["analyze", f.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("never-add eligible: false"));
    assert!(text.contains("collapsing rule(s) 2, 3"));
}

#[test]
fn optimization_toggles_change_stats_not_results() {
    let f = program_file(FIB_PROGRAM);
    let path = f.path().to_str().unwrap();
    let on = eqlog(&["normalize", path, "fib(6)", "--json"], &[]);
    let off = eqlog(
        &[
            "normalize",
            path,
            "fib(6)",
            "--no-dont-reduce",
            "--no-never-add",
            "--no-prune",
            "--json",
        ],
        &[],
    );
    let on: serde_json::Value = serde_json::from_str(&stdout(&on)).unwrap();
    let off: serde_json::Value = serde_json::from_str(&stdout(&off)).unwrap();
    assert_eq!(
        on["results"]["tabled"]["normal_form"],
        off["results"]["tabled"]["normal_form"]
    );
    let skipped_on = on["results"]["tabled"]["stats"]["match_attempts_skipped_dont_reduce"]
        .as_u64()
        .unwrap();
    let skipped_off = off["results"]["tabled"]["stats"]["match_attempts_skipped_dont_reduce"]
        .as_u64()
        .unwrap();
    assert!(skipped_on > 0);
    assert_eq!(skipped_off, 0);
}

#[test]
fn trace_golden_lines() {
    let f = program_file(FIB_PROGRAM);
    let out = eqlog(
        &["normalize", f.path().to_str().unwrap(), "fib(2)", "--trace"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "0:{2*} 1:{<fib 0>*}");
    assert_eq!(lines[1], "1:{<fib 0>, <f 3 0>*} 2:{1*} 3:{true*}");
    assert_eq!(lines.last().copied(), Some("2"));
}
