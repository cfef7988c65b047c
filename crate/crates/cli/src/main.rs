//! `eqlog` command-line front end.
//!
//! Exit codes for `normalize`: 0 a normal form was found, 2 the tabled
//! engine proved there is no finite normal form, 3 the step budget ran
//! out, 1 usage or parse errors. `analyze` exits 0 on success, 1 on error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use eqlog_core::rewrite::{RewriteOutcome, RewriteResult};
use eqlog_core::tabling::{EngineOptions, NormalizeResult, Outcome};
use eqlog_core::{
    analysis, normalize_tabled, normalize_untabled, parse_program, parse_term, term_to_text,
    Program, Term,
};

const DEFAULT_MAX_STEPS: u64 = 100_000;
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "eqlog", version, about = "Equational logic programming engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a program's needs graph and report whether tabling can help.
    Analyze {
        /// Program file.
        program: PathBuf,
        /// Optional ground goal term for the goal-specific verdicts.
        #[arg(long)]
        term: Option<String>,
        /// Write the needs graph in GraphViz DOT format to this file.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Emit the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Normalize a ground term.
    Normalize {
        /// Program file.
        program: PathBuf,
        /// Ground goal term.
        term: String,
        #[arg(long, value_enum, default_value_t = Mode::Tabled)]
        mode: Mode,
        /// Step budget (also settable via EQLOG_MAX_STEPS; default 100000).
        #[arg(long)]
        max_steps: Option<u64>,
        /// Disable don't-reduce subtree skipping in the tabled engine.
        #[arg(long)]
        no_dont_reduce: bool,
        /// Disable never-add dependency-list suppression.
        #[arg(long)]
        no_never_add: bool,
        /// Disable rule pruning.
        #[arg(long)]
        no_prune: bool,
        /// Print the tabled engine's class trace, one line per step.
        #[arg(long)]
        trace: bool,
        /// Print engine statistics.
        #[arg(long)]
        stats: bool,
        /// Emit the result as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Tabled,
    Untabled,
    Both,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Tabled => "tabled",
            Mode::Untabled => "untabled",
            Mode::Both => "both",
        }
    }
}

fn main() -> ExitCode {
    // die quietly when the read end of a pipe goes away (`eqlog .. | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    // the engines recurse to the depth of the terms they handle; deep
    // runaway terms under large step budgets need more than the default
    // stack (the pages are only committed as used)
    let worker = std::thread::Builder::new()
        .stack_size(1 << 30)
        .spawn(run)
        .expect("spawn worker thread");
    match worker.join() {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
        Err(_) => {
            eprintln!("error: internal panic");
            ExitCode::from(101)
        }
    }
}

fn run() -> Result<u8> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze {
            program,
            term,
            dot,
            json,
        } => cmd_analyze(program, term, dot, json),
        Command::Normalize {
            program,
            term,
            mode,
            max_steps,
            no_dont_reduce,
            no_never_add,
            no_prune,
            trace,
            stats,
            json,
        } => cmd_normalize(NormalizeConfig {
            program,
            term,
            mode,
            max_steps,
            dont_reduce: !no_dont_reduce,
            never_add: !no_never_add,
            prune_rules: !no_prune,
            trace,
            stats,
            json,
        }),
    }
}

fn load_program(path: &PathBuf) -> Result<Program> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read program file {}", path.display()))?;
    parse_program(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn resolve_max_steps(flag: Option<u64>) -> Result<u64> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("EQLOG_MAX_STEPS") {
        Ok(v) => v
            .parse::<u64>()
            .map_err(|_| anyhow!("EQLOG_MAX_STEPS must be a non-negative integer, got `{v}`")),
        Err(_) => Ok(DEFAULT_MAX_STEPS),
    }
}

// ---------------------------------------------------------------------------
// analyze

fn cmd_analyze(
    path: PathBuf,
    term: Option<String>,
    dot: Option<PathBuf>,
    json: bool,
) -> Result<u8> {
    let program = load_program(&path)?;
    let goal = match &term {
        Some(t) => Some(parse_term(t, &program).map_err(|e| anyhow!("goal term: {e}"))?),
        None => None,
    };
    let report = analysis::analyze(
        &program,
        goal.as_ref(),
        &analysis::AnalyzeOptions::default(),
    );

    if let Some(dot_path) = dot {
        let graph = analysis::build_needs_graph(&program);
        fs::write(&dot_path, analysis::to_dot(&graph))
            .with_context(|| format!("cannot write {}", dot_path.display()))?;
    }

    if json {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "analyze",
            "program": path.display().to_string(),
            "goal": term,
            "report": report,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(0);
    }

    println!("needs-graph cycle: {}", report.has_cycle);
    if let Some(v) = report.cycle_reachable_from_goal {
        println!("cycle reachable from goal: {v}");
    }
    println!(
        "shared node (in >= 1, out >= 1): {}",
        report.has_reusable_node
    );
    if let Some(v) = report.reusable_node_reachable_twice {
        println!("shared node reachable from two goal symbols: {v}");
    }
    let reach: Vec<&str> = report
        .reachable_defined_names
        .iter()
        .map(|s| s.as_str())
        .collect();
    println!("reachable defined symbols: {{{}}}", reach.join(", "));
    if goal.is_some() {
        let pr: Vec<String> = report
            .prunable_rules
            .iter()
            .map(|r| r.to_string())
            .collect();
        println!("prunable rules: {{{}}}", pr.join(", "));
    }
    println!("never-add eligible: {}", report.never_add_eligible);
    let consts: Vec<&str> = report
        .never_add_user_constants
        .iter()
        .map(|s| s.as_str())
        .collect();
    println!("never-add user constants: {{{}}}", consts.join(", "));
    println!(
        "never-add literal types: int={} bool={}",
        report.never_add_int_safe, report.never_add_bool_safe
    );
    println!("recommendation: {}", report.recommendation);
    Ok(0)
}

// ---------------------------------------------------------------------------
// normalize

struct NormalizeConfig {
    program: PathBuf,
    term: String,
    mode: Mode,
    max_steps: Option<u64>,
    dont_reduce: bool,
    never_add: bool,
    prune_rules: bool,
    trace: bool,
    stats: bool,
    json: bool,
}

fn outcome_exit_code_tabled(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::NormalForm(_) => 0,
        Outcome::NoFiniteNormalForm { .. } => 2,
        Outcome::StepLimitReached { .. } => 3,
    }
}

fn outcome_exit_code_untabled(outcome: &RewriteOutcome) -> u8 {
    match outcome {
        RewriteOutcome::NormalForm(_) => 0,
        RewriteOutcome::StepLimitReached(_) => 3,
    }
}

fn tabled_outcome_json(r: &NormalizeResult, program: &Program) -> serde_json::Value {
    match &r.outcome {
        Outcome::NormalForm(t) => json!({
            "outcome": "normal_form",
            "normal_form": term_to_text(t, program),
            "stats": r.stats,
        }),
        Outcome::NoFiniteNormalForm { witness } => json!({
            "outcome": "no_finite_normal_form",
            "witness_class": witness.0,
            "stats": r.stats,
        }),
        Outcome::StepLimitReached { partial } => json!({
            "outcome": "step_limit_reached",
            "partial": partial.as_ref().map(|t| term_to_text(t, program)),
            "stats": r.stats,
        }),
    }
}

fn untabled_outcome_json(r: &RewriteResult, program: &Program) -> serde_json::Value {
    let rules: serde_json::Map<String, serde_json::Value> = r
        .rule_applications
        .iter()
        .map(|(k, v)| (k.0.to_string(), json!(*v)))
        .collect();
    let stats = json!({
        "rule_applications": rules,
        "steps_applied": r.steps_applied,
        "builtin_evals": r.builtin_evals,
    });
    match &r.outcome {
        RewriteOutcome::NormalForm(t) => json!({
            "outcome": "normal_form",
            "normal_form": term_to_text(t, program),
            "stats": stats,
        }),
        RewriteOutcome::StepLimitReached(t) => json!({
            "outcome": "step_limit_reached",
            "current": term_to_text(t, program),
            "stats": stats,
        }),
    }
}

fn print_tabled_text(r: &NormalizeResult, program: &Program) {
    match &r.outcome {
        Outcome::NormalForm(t) => println!("{}", term_to_text(t, program)),
        Outcome::NoFiniteNormalForm { witness } => {
            println!("no finite normal form (cycle through class {witness})")
        }
        Outcome::StepLimitReached { partial } => match partial {
            Some(t) => println!(
                "step limit reached; current representative: {}",
                term_to_text(t, program)
            ),
            None => println!("step limit reached"),
        },
    }
}

fn print_untabled_text(r: &RewriteResult, program: &Program) {
    match &r.outcome {
        RewriteOutcome::NormalForm(t) => println!("{}", term_to_text(t, program)),
        RewriteOutcome::StepLimitReached(t) => println!(
            "step limit reached; current term: {}",
            term_to_text(t, program)
        ),
    }
}

fn print_tabled_stats(r: &NormalizeResult) {
    println!("tabled statistics:");
    for (rule, count) in &r.stats.rule_applications {
        println!("  rule {rule} applications: {count}");
    }
    println!(
        "  total rule applications: {}",
        r.stats.total_rule_applications()
    );
    println!("  builtin evaluations: {}", r.stats.builtin_evals);
    println!("  merges: {}", r.stats.merges);
    println!("  signatures created: {}", r.stats.signatures_created);
    println!("  match attempts: {}", r.stats.match_attempts);
    println!(
        "  match attempts skipped (don't-reduce): {}",
        r.stats.match_attempts_skipped_dont_reduce
    );
    println!(
        "  dependency entries added: {}",
        r.stats.dependency_entries_added
    );
    println!(
        "  dependency entries suppressed (never-add): {}",
        r.stats.dependency_entries_suppressed_never_add
    );
}

fn print_untabled_stats(r: &RewriteResult) {
    println!("untabled statistics:");
    for (rule, count) in &r.rule_applications {
        println!("  rule {rule} applications: {count}");
    }
    println!("  total rule applications: {}", r.steps_applied);
    println!("  builtin evaluations: {}", r.builtin_evals);
}

fn print_stats_comparison(t: &NormalizeResult, u: &RewriteResult) {
    let row = |label: &str, a: String, b: String| println!("{label:<42}{a:>10}{b:>10}");
    row("statistic", "tabled".into(), "untabled".into());
    let mut rules: Vec<u32> = t.stats.rule_applications.keys().copied().collect();
    for r in u.rule_applications.keys() {
        if !rules.contains(&r.0) {
            rules.push(r.0);
        }
    }
    rules.sort_unstable();
    for rule in rules {
        let a = t.stats.rule_applications.get(&rule).copied().unwrap_or(0);
        let b = u
            .rule_applications
            .get(&eqlog_core::RuleId(rule))
            .copied()
            .unwrap_or(0);
        row(
            &format!("rule {rule} applications"),
            a.to_string(),
            b.to_string(),
        );
    }
    row(
        "total rule applications",
        t.stats.total_rule_applications().to_string(),
        u.steps_applied.to_string(),
    );
    row(
        "builtin evaluations",
        t.stats.builtin_evals.to_string(),
        u.builtin_evals.to_string(),
    );
    row("merges", t.stats.merges.to_string(), "-".into());
    row(
        "signatures created",
        t.stats.signatures_created.to_string(),
        "-".into(),
    );
    row(
        "match attempts",
        t.stats.match_attempts.to_string(),
        "-".into(),
    );
    row(
        "match attempts skipped (don't-reduce)",
        t.stats.match_attempts_skipped_dont_reduce.to_string(),
        "-".into(),
    );
    row(
        "dependency entries added",
        t.stats.dependency_entries_added.to_string(),
        "-".into(),
    );
    row(
        "dependency entries suppressed (never-add)",
        t.stats.dependency_entries_suppressed_never_add.to_string(),
        "-".into(),
    );
}

fn cmd_normalize(cfg: NormalizeConfig) -> Result<u8> {
    let program = load_program(&cfg.program)?;
    let goal: Term = parse_term(&cfg.term, &program).map_err(|e| anyhow!("goal term: {e}"))?;
    let max_steps = resolve_max_steps(cfg.max_steps)?;

    let options = EngineOptions {
        dont_reduce: cfg.dont_reduce,
        never_add: cfg.never_add,
        prune_rules: cfg.prune_rules,
        max_steps,
        trace: cfg.trace,
        audit: false,
    };

    let tabled = if cfg.mode != Mode::Untabled {
        Some(normalize_tabled(&program, &goal, options)?)
    } else {
        if cfg.trace {
            eprintln!("note: --trace only applies to the tabled engine");
        }
        None
    };
    let untabled = if cfg.mode != Mode::Tabled {
        // pruning is a program-level transform for the untabled engine
        let result = if cfg.prune_rules {
            let (pruned, _) = analysis::prune_program(&program, &goal);
            normalize_untabled(&pruned, &goal, max_steps)?
        } else {
            normalize_untabled(&program, &goal, max_steps)?
        };
        Some(result)
    } else {
        None
    };

    if cfg.json {
        let mut results = serde_json::Map::new();
        if let Some(r) = &tabled {
            results.insert("tabled".into(), tabled_outcome_json(r, &program));
        }
        if let Some(r) = &untabled {
            results.insert("untabled".into(), untabled_outcome_json(r, &program));
        }
        let agreement = match (&tabled, &untabled) {
            (Some(t), Some(u)) => match (&t.outcome, &u.outcome) {
                (Outcome::NormalForm(a), RewriteOutcome::NormalForm(b)) => Some(a == b),
                _ => None,
            },
            _ => None,
        };
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "normalize",
            "goal": cfg.term,
            "mode": cfg.mode.as_str(),
            "max_steps": max_steps,
            "options": {
                "dont_reduce": cfg.dont_reduce,
                "never_add": cfg.never_add,
                "prune_rules": cfg.prune_rules,
            },
            "trace": tabled.as_ref().map(|r| &r.trace),
            "results": results,
            "agreement": agreement,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        if let Some(r) = &tabled {
            for line in &r.trace {
                println!("{line}");
            }
            if cfg.mode == Mode::Both {
                print!("tabled: ");
            }
            print_tabled_text(r, &program);
        }
        if let Some(r) = &untabled {
            if cfg.mode == Mode::Both {
                print!("untabled: ");
            }
            print_untabled_text(r, &program);
        }
        if cfg.mode == Mode::Both {
            if let (Some(t), Some(u)) = (&tabled, &untabled) {
                if let (Outcome::NormalForm(a), RewriteOutcome::NormalForm(b)) =
                    (&t.outcome, &u.outcome)
                {
                    println!("agreement: {}", a == b);
                }
            }
        }
        if cfg.stats {
            match (&tabled, &untabled) {
                (Some(t), Some(u)) => print_stats_comparison(t, u),
                (Some(t), None) => print_tabled_stats(t),
                (None, Some(u)) => print_untabled_stats(u),
                (None, None) => {}
            }
        }
    }

    let code = match (&tabled, &untabled) {
        (Some(t), Some(u)) => {
            let tc = outcome_exit_code_tabled(&t.outcome);
            if tc != 0 {
                tc
            } else {
                outcome_exit_code_untabled(&u.outcome)
            }
        }
        (Some(t), None) => outcome_exit_code_tabled(&t.outcome),
        (None, Some(u)) => outcome_exit_code_untabled(&u.outcome),
        (None, None) => unreachable!("one engine always runs"),
    };
    Ok(code)
}
