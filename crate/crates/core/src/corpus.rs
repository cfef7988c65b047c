//! Built-in example programs.
//!
//! Used by the test suites and the benchmarks: a spread of convergent
//! dynamic-programming recursions, bounded stream producers, collapsing
//! systems, non-left-linear rules, and one non-terminating system.

/// Fibonacci over built-in arithmetic.
pub const FIB_PROGRAM: &str = "\
vars x;
fib(x) -> f(x > 1, x);
f(true, x) -> fib(x - 1) + fib(x - 2);
f(false, x) -> 1;
";

/// The one-rule system with no finite normal form for `a`.
pub const LOOP_PROGRAM: &str = "\
a -> f(a);
";

/// Bounded stream producer with collapsing selector rules.
pub const STREAM_PROGRAM: &str = "\
vars x y;
from(x, y) -> if(y > 0, cons(x, from(x + 1, y - 1)), nil);
if(true, x, y) -> x;
if(false, x, y) -> y;
";

/// Fibonacci extended with a non-left-linear equality test.
pub const FIB_EQUAL_PROGRAM: &str = "\
vars x;
fib(x) -> f(x > 1, x);
f(true, x) -> fib(x - 1) + fib(x - 2);
f(false, x) -> 1;
equal(x, x) -> true;
";

/// Exponential tree builder with a shared summation: tabling collapses
/// the duplicated subtrees to linear work.
pub const TREE_DP_PROGRAM: &str = "\
vars n x y;
build(n) -> br(n > 0, n);
br(true, n) -> node(build(n - 1), build(n - 1));
br(false, n) -> leaf(7);
sum(leaf(x)) -> 0 + x;
sum(node(x, y)) -> sum(x) + sum(y);
";

/// Five extra rules over fresh symbols, unreachable from any goal that
/// does not mention them. Appended to programs by the pruning tests.
pub const DEAD_RULES_SUFFIX: &str = "\
vars qz;
zz0(qz) -> zz1(qz);
zz1(qz) -> zz2(qz);
zz2(qz) -> zz3(qz);
zz3(qz) -> zz4(qz);
zz4(qz) -> zz0(qz);
";

/// One corpus program plus the goals it is exercised with.
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub program: &'static str,
    pub goals: &'static [&'static str],
    /// Untabled normalization terminates within the default budget.
    pub terminating: bool,
    /// Expect don't-reduce skips > 0 under default options.
    pub constructor_heavy: bool,
    /// Expect never-add dependency suppressions > 0 under default options.
    pub never_add_active: bool,
    /// Include in the necessary-condition validation (the entry was
    /// checked to have no tabling savings wherever the goal-level sharing
    /// verdict is negative, and equal termination behavior wherever the
    /// needs graph is acyclic).
    pub check_necessary: bool,
}

pub fn entries() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry {
            name: "fib",
            program: FIB_PROGRAM,
            goals: &["fib(2)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "fib_nested",
            program: FIB_PROGRAM,
            goals: &["fib(fib(2))", "fib(6)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: false,
        },
        CorpusEntry {
            name: "fib_equal",
            program: FIB_EQUAL_PROGRAM,
            goals: &["equal(fib(4), 5)", "equal(2, 2)", "equal(1, 2)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: false,
        },
        CorpusEntry {
            name: "loop",
            program: LOOP_PROGRAM,
            goals: &["a"],
            terminating: false,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: false,
        },
        CorpusEntry {
            name: "stream",
            program: STREAM_PROGRAM,
            goals: &["from(1, 3)", "from(0, 0)", "if(true, 1, 2)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "list_length",
            program: "vars x y; len(nil) -> 0; len(cons(x, y)) -> 1 + len(y);",
            goals: &["len(cons(1, cons(2, cons(3, nil))))", "len(nil)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "wrap_pair",
            program: "vars x y; wrap(x) -> box(pair(x, nil)); wraptwo(x, y) -> box(pair(pair(x, y), nil));",
            goals: &["wrap(5)", "wraptwo(1, 2)", "wrap(pair(7, nil))"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: true,
            check_necessary: true,
        },
        CorpusEntry {
            name: "tree_dp",
            program: TREE_DP_PROGRAM,
            goals: &["sum(build(3))", "sum(build(5))"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: false,
        },
        CorpusEntry {
            name: "even_odd",
            program: "vars x; even(x) -> e(x == 0, x); e(true, x) -> true; e(false, x) -> odd(x - 1); odd(x) -> o(x == 0, x); o(true, x) -> false; o(false, x) -> even(x - 1);",
            goals: &["even(10)", "odd(7)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "acyclic_chain",
            program: "vars x; g(x) -> h(x); h(x) -> 0;",
            goals: &["g(5)", "h(true)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "constant_rhs",
            program: "vars x; g(x) -> c; h(x) -> d(g(x));",
            goals: &["g(1)", "h(2)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "nonlinear_eq",
            program: "vars x; eq(x, x) -> tt;",
            goals: &["eq(5, 5)", "eq(5, 6)", "eq(tt, tt)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "not_chain",
            // tabling saves a step here despite a negative goal-level
            // sharing verdict: the outer application is congruence-merged
            // into the already-reduced inner instance, so this entry stays
            // out of the necessary-condition validation
            program: "not(true) -> false; not(false) -> true;",
            goals: &["not(not(not(true)))"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: false,
        },
        CorpusEntry {
            name: "stuck_operators",
            program: "vars x; weird(x) -> true + x; partial(x) -> x > true;",
            goals: &["weird(1)", "partial(0)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "identity_collapse",
            program: "vars x; id(x) -> x; twice(x) -> id(id(x));",
            goals: &["twice(5)", "id(true)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "sum_to",
            program: "vars x; sumto(x) -> s(x > 0, x); s(true, x) -> x + sumto(x - 1); s(false, x) -> 0;",
            goals: &["sumto(10)"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "bool_eq",
            program: "vars x; iff(x) -> tb(x == true); tb(true) -> yes; tb(false) -> no;",
            goals: &["iff(true)", "iff(false)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "arith_mix",
            program: "vars x y; area(x, y) -> x * y + x * x; scale(x) -> area(x + 1, x - 1);",
            goals: &["scale(4)", "area(3, 5)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "ackermann",
            program: "vars m n; ack(m, n) -> a1(m == 0, m, n); a1(true, m, n) -> n + 1; a1(false, m, n) -> a2(n == 0, m, n); a2(true, m, n) -> ack(m - 1, 1); a2(false, m, n) -> ack(m - 1, ack(m, n - 1));",
            goals: &["ack(1, 3)", "ack(2, 2)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: false,
        },
        CorpusEntry {
            name: "dead_branch",
            program: "vars x; live(x) -> l2(x); l2(x) -> 1 + x; ghost(x) -> ghost2(x); ghost2(x) -> ghost(x);",
            goals: &["live(4)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "negative_result",
            program: "vars x; below(x) -> x - 10;",
            goals: &["below(3)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "large_product",
            program: "vars x; sq(x) -> x * x;",
            goals: &["sq(1000000)"],
            terminating: true,
            constructor_heavy: false,
            never_add_active: false,
            check_necessary: true,
        },
        CorpusEntry {
            name: "nested_patterns",
            program: "vars x y; fst(pr(x, y)) -> x + 0; snd(pr(x, y)) -> 0 + y; swapsum(pr(x, y)) -> fst(pr(y, x)) + snd(pr(y, x));",
            goals: &["swapsum(pr(3, 4))"],
            terminating: true,
            constructor_heavy: true,
            never_add_active: false,
            check_necessary: true,
        },
    ]
}

/// A generated program plus one ground goal for it.
#[derive(Debug, Clone)]
pub struct RandomProgram {
    pub program: String,
    pub goal: String,
}

struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

fn gen_term(rng: &mut SplitMix, defined: &[(String, usize)], vars: &[&str], depth: u32) -> String {
    let leaf = depth == 0 || rng.below(3) == 0;
    if leaf {
        return match rng.below(5) {
            0 if !vars.is_empty() => vars[rng.below(vars.len() as u64) as usize].to_string(),
            1 => rng.below(4).to_string(),
            2 => "true".to_string(),
            3 => "ca".to_string(),
            _ => "cb".to_string(),
        };
    }
    match rng.below(4) {
        0 => {
            let (name, arity) = &defined[rng.below(defined.len() as u64) as usize];
            let args: Vec<String> = (0..*arity)
                .map(|_| gen_term(rng, defined, vars, depth - 1))
                .collect();
            format!("{name}({})", args.join(", "))
        }
        1 => format!("pack({})", gen_term(rng, defined, vars, depth - 1)),
        2 => {
            let op = ["+", "-", "*", ">", "<", "=="][rng.below(6) as usize];
            format!(
                "({} {} {})",
                gen_term(rng, defined, vars, depth - 1),
                op,
                gen_term(rng, defined, vars, depth - 1)
            )
        }
        _ => rng.below(4).to_string(),
    }
}

/// Deterministically generate a small well-formed program and a ground
/// goal from a seed. Used by property tests that quantify over many
/// programs.
pub fn random_program(seed: u64) -> RandomProgram {
    let mut rng = SplitMix(seed);
    let var_pool = ["x", "y"];
    let n_defined = 1 + rng.below(3) as usize;
    let defined: Vec<(String, usize)> = (0..n_defined)
        .map(|i| (format!("d{i}"), 1 + rng.below(2) as usize))
        .collect();
    let mut src = String::from("vars x y;\n");
    // keeps every leaf symbol of the generator in the symbol table
    src.push_str("anchor(x) -> pack(ca) + pack(cb);\n");
    for (name, arity) in &defined {
        let n_rules = 1 + rng.below(2);
        for _ in 0..n_rules {
            let lhs_args: Vec<&str> = var_pool[..*arity].to_vec();
            let rhs = gen_term(&mut rng, &defined, &lhs_args, 2);
            src.push_str(&format!("{name}({}) -> {rhs};\n", lhs_args.join(", ")));
        }
    }
    let goal = gen_term(&mut rng, &defined, &[], 2);
    RandomProgram { program: src, goal }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program, parse_term};

    #[test]
    fn corpus_is_large_enough_and_parses() {
        let es = entries();
        assert!(es.len() >= 20, "corpus has {} entries", es.len());
        for e in es {
            let p = parse_program(e.program).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            assert!(!e.goals.is_empty());
            for g in e.goals {
                parse_term(g, &p).unwrap_or_else(|err| panic!("{} / {g}: {err}", e.name));
            }
            // the dead-rule suffix must compose with every entry
            let augmented = format!("{}\n{}", e.program, DEAD_RULES_SUFFIX);
            parse_program(&augmented).unwrap_or_else(|err| panic!("{} + dead: {err}", e.name));
        }
    }

    #[test]
    fn random_programs_are_well_formed_and_deterministic() {
        for seed in 0..200u64 {
            let rp = random_program(seed);
            let p = parse_program(&rp.program)
                .unwrap_or_else(|err| panic!("seed {seed}: {err}\n{}", rp.program));
            parse_term(&rp.goal, &p).unwrap_or_else(|err| panic!("seed {seed} goal: {err}"));
            let again = random_program(seed);
            assert_eq!(rp.program, again.program);
            assert_eq!(rp.goal, again.goal);
        }
    }
}
