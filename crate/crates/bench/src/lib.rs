//! Shared fixtures for the benchmark targets.

use eqlog_core::{parse_program, parse_term, Program, Term};

pub fn fixture(program: &str, goal: &str) -> (Program, Term) {
    let p = parse_program(program).expect("benchmark program parses");
    let g = parse_term(goal, &p).expect("benchmark goal parses");
    (p, g)
}

/// A defined-symbol chain of `n` rules, for the analysis benchmarks.
pub fn chain_program(n: usize) -> String {
    let mut src = String::from("vars x;\n");
    for i in 0..n {
        if i + 1 < n {
            src.push_str(&format!("g{i}(x) -> g{}(x);\n", i + 1));
        } else {
            src.push_str(&format!("g{i}(x) -> 0;\n"));
        }
    }
    src
}
