//! Untabled leftmost-outermost tree rewriter.
//!
//! A plain first-order rewriter with no sharing and no history: the
//! comparison baseline for the tabled engine. Built-in operators are
//! evaluated only when both operands are literals, mirroring the tabled
//! engine's rule so step counts stay comparable.

use std::collections::{BTreeMap, HashMap};

use crate::term::{eval_op, BuiltinOp, LitVal, OverflowError, Program, Rule, RuleId, Term, VarId};

/// What a single step did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepKind {
    Rule(RuleId),
    Builtin(BuiltinOp),
}

/// One contraction: position is the path of child indices from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepInfo {
    pub position: Vec<usize>,
    pub kind: StepKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewriteOutcome {
    NormalForm(Term),
    StepLimitReached(Term),
}

#[derive(Debug, Clone)]
pub struct RewriteResult {
    pub outcome: RewriteOutcome,
    /// Total rule applications performed.
    pub steps_applied: u64,
    pub builtin_evals: u64,
    pub rule_applications: BTreeMap<RuleId, u64>,
}

fn lit_of(t: &Term) -> Option<LitVal> {
    match t {
        Term::Int(n) => Some(LitVal::Int(*n)),
        Term::Bool(b) => Some(LitVal::Bool(*b)),
        _ => None,
    }
}

fn term_of(l: LitVal) -> Term {
    match l {
        LitVal::Int(n) => Term::Int(n),
        LitVal::Bool(b) => Term::Bool(b),
    }
}

/// Syntactic first-order matching. A repeated lhs variable matches only
/// syntactically equal subterms.
fn match_pattern<'t>(
    pattern: &Term,
    subject: &'t Term,
    binding: &mut HashMap<VarId, &'t Term>,
) -> bool {
    match (pattern, subject) {
        (Term::Var(v), s) => match binding.get(v) {
            Some(prev) => *prev == s,
            None => {
                binding.insert(*v, s);
                true
            }
        },
        (Term::Int(a), Term::Int(b)) => a == b,
        (Term::Bool(a), Term::Bool(b)) => a == b,
        (Term::App(f, ps), Term::App(g, ss)) if f == g => ps
            .iter()
            .zip(ss.iter())
            .all(|(p, s)| match_pattern(p, s, binding)),
        (Term::Op(op, p1, p2), Term::Op(oq, s1, s2)) if op == oq => {
            match_pattern(p1, s1, binding) && match_pattern(p2, s2, binding)
        }
        _ => false,
    }
}

fn instantiate(rhs: &Term, binding: &HashMap<VarId, &Term>) -> Term {
    match rhs {
        Term::Var(v) => (*binding.get(v).expect("validated rule binds all rhs vars")).clone(),
        Term::Int(_) | Term::Bool(_) => rhs.clone(),
        Term::App(s, args) => Term::App(*s, args.iter().map(|a| instantiate(a, binding)).collect()),
        Term::Op(op, a, b) => Term::Op(
            *op,
            Box::new(instantiate(a, binding)),
            Box::new(instantiate(b, binding)),
        ),
    }
}

fn try_rules(rules: &[Rule], subject: &Term) -> Option<(RuleId, Term)> {
    for rule in rules {
        let mut binding = HashMap::new();
        if match_pattern(&rule.lhs, subject, &mut binding) {
            return Some((rule.id, instantiate(&rule.rhs, &binding)));
        }
    }
    None
}

/// Contract the leftmost-outermost redex in place. At each position the
/// rules are tried in file order before built-in evaluation, and a node is
/// examined before its children, children left to right.
fn step_mut(
    rules: &[Rule],
    term: &mut Term,
    path: &mut Vec<usize>,
) -> Result<Option<StepInfo>, OverflowError> {
    if let Some((id, contractum)) = try_rules(rules, term) {
        *term = contractum;
        return Ok(Some(StepInfo {
            position: path.clone(),
            kind: StepKind::Rule(id),
        }));
    }
    if let Term::Op(op, a, b) = term {
        if let (Some(x), Some(y)) = (lit_of(a), lit_of(b)) {
            if let Some(r) = eval_op(*op, x, y)? {
                let kind = StepKind::Builtin(*op);
                *term = term_of(r);
                return Ok(Some(StepInfo {
                    position: path.clone(),
                    kind,
                }));
            }
        }
    }
    match term {
        Term::App(_, args) => {
            for (i, a) in args.iter_mut().enumerate() {
                path.push(i);
                if let Some(info) = step_mut(rules, a, path)? {
                    path.pop();
                    return Ok(Some(info));
                }
                path.pop();
            }
        }
        Term::Op(_, a, b) => {
            path.push(0);
            if let Some(info) = step_mut(rules, a, path)? {
                path.pop();
                return Ok(Some(info));
            }
            path.pop();
            path.push(1);
            if let Some(info) = step_mut(rules, b, path)? {
                path.pop();
                return Ok(Some(info));
            }
            path.pop();
        }
        _ => {}
    }
    Ok(None)
}

/// One leftmost-outermost step, or `None` when the term is in normal form.
pub fn rewrite_step(
    program: &Program,
    term: &Term,
) -> Result<Option<(Term, StepInfo)>, OverflowError> {
    debug_assert!(term.is_ground());
    let mut t = term.clone();
    let mut path = Vec::new();
    Ok(step_mut(&program.rules, &mut t, &mut path)?.map(|info| (t, info)))
}

/// Iterative equivalent of [`step_mut`] without position tracking, so the
/// stack depth stays constant however deep the term grows.
fn step_fast(rules: &[Rule], term: &mut Term) -> Result<Option<StepKind>, OverflowError> {
    let mut stack: Vec<*mut Term> = vec![term];
    while let Some(ptr) = stack.pop() {
        // Nothing above this node is mutated while its pointer is live:
        // we either contract here and return, or only read and push the
        // children. Child vectors are never resized during traversal.
        let node = unsafe { &mut *ptr };
        if let Some((id, contractum)) = try_rules(rules, node) {
            *node = contractum;
            return Ok(Some(StepKind::Rule(id)));
        }
        if let Term::Op(op, a, b) = node {
            if let (Some(x), Some(y)) = (lit_of(a), lit_of(b)) {
                if let Some(r) = eval_op(*op, x, y)? {
                    let kind = StepKind::Builtin(*op);
                    *node = term_of(r);
                    return Ok(Some(kind));
                }
            }
        }
        match node {
            Term::App(_, args) => {
                for a in args.iter_mut().rev() {
                    stack.push(a);
                }
            }
            Term::Op(_, a, b) => {
                stack.push(b.as_mut());
                stack.push(a.as_mut());
            }
            _ => {}
        }
    }
    Ok(None)
}

/// Iterate [`rewrite_step`] up to `max_steps` (rule applications and
/// built-in evaluations both consume budget).
pub fn normalize_untabled(
    program: &Program,
    goal: &Term,
    max_steps: u64,
) -> Result<RewriteResult, OverflowError> {
    debug_assert!(goal.is_ground());
    let mut term = goal.clone();
    let mut steps_applied = 0u64;
    let mut builtin_evals = 0u64;
    let mut rule_applications: BTreeMap<RuleId, u64> = BTreeMap::new();
    let mut taken = 0u64;
    loop {
        if taken >= max_steps {
            return Ok(RewriteResult {
                outcome: RewriteOutcome::StepLimitReached(term),
                steps_applied,
                builtin_evals,
                rule_applications,
            });
        }
        match step_fast(&program.rules, &mut term)? {
            Some(kind) => {
                taken += 1;
                match kind {
                    StepKind::Rule(id) => {
                        steps_applied += 1;
                        *rule_applications.entry(id).or_insert(0) += 1;
                    }
                    StepKind::Builtin(_) => builtin_evals += 1,
                }
            }
            None => {
                return Ok(RewriteResult {
                    outcome: RewriteOutcome::NormalForm(term),
                    steps_applied,
                    builtin_evals,
                    rule_applications,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FIB_PROGRAM, LOOP_PROGRAM};
    use crate::parser::{parse_program, parse_term};
    use crate::term::term_to_text;

    fn fib_rule1_count(n: i64) -> u64 {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let goal = parse_term(&format!("fib({n})"), &p).unwrap();
        let r = normalize_untabled(&p, &goal, 50_000_000).unwrap();
        assert!(matches!(r.outcome, RewriteOutcome::NormalForm(_)));
        r.rule_applications[&RuleId(1)]
    }

    /// Independent oracle: size of the call tree of the recursion
    /// `tree(n) = 1` for `n <= 1`, else `1 + tree(n-1) + tree(n-2)`.
    fn recursion_tree_nodes(n: i64) -> u64 {
        if n <= 1 {
            1
        } else {
            1 + recursion_tree_nodes(n - 1) + recursion_tree_nodes(n - 2)
        }
    }

    #[test]
    fn step_on_fib_root() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let goal = parse_term("fib(2)", &p).unwrap();
        let (t, info) = rewrite_step(&p, &goal).unwrap().unwrap();
        assert_eq!(info.kind, StepKind::Rule(RuleId(1)));
        assert_eq!(info.position, Vec::<usize>::new());
        assert_eq!(term_to_text(&t, &p), "f(2 > 1, 2)");
    }

    #[test]
    fn step_is_deterministic_and_absent_on_normal_forms() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let goal = parse_term("fib(2)", &p).unwrap();
        let a = rewrite_step(&p, &goal).unwrap().unwrap();
        let b = rewrite_step(&p, &goal).unwrap().unwrap();
        assert_eq!(a, b);
        assert!(rewrite_step(&p, &Term::Int(2)).unwrap().is_none());
    }

    #[test]
    fn loop_program_grows_forever() {
        let p = parse_program(LOOP_PROGRAM).unwrap();
        let goal = parse_term("a", &p).unwrap();
        let (t1, _) = rewrite_step(&p, &goal).unwrap().unwrap();
        assert_eq!(term_to_text(&t1, &p), "f(a)");
        let (t2, _) = rewrite_step(&p, &t1).unwrap().unwrap();
        assert_eq!(term_to_text(&t2, &p), "f(f(a))");
        let r = normalize_untabled(&p, &goal, 100).unwrap();
        assert!(matches!(r.outcome, RewriteOutcome::StepLimitReached(_)));
        assert_eq!(r.steps_applied, 100);
    }

    #[test]
    fn fib_normalizes_to_two() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let goal = parse_term("fib(2)", &p).unwrap();
        let r = normalize_untabled(&p, &goal, 100_000).unwrap();
        assert_eq!(r.outcome, RewriteOutcome::NormalForm(Term::Int(2)));
    }

    #[test]
    fn fib_rule1_matches_recursion_tree_counter() {
        // frozen from the recursion-tree oracle: 2*Fib(n+1) - 1
        let golden: [u64; 14] = [3, 5, 9, 15, 25, 41, 67, 109, 177, 287, 465, 753, 1219, 1973];
        for (i, want) in golden.iter().enumerate() {
            let n = i as i64 + 2;
            assert_eq!(recursion_tree_nodes(n), *want, "oracle self-check n={n}");
            assert_eq!(fib_rule1_count(n), *want, "engine count n={n}");
        }
        // strictly exponential growth
        for n in 8..14 {
            let ratio = golden[n - 1] as f64 / golden[n - 2] as f64;
            assert!(ratio > 1.4 && ratio < 1.8, "ratio {ratio} at n={n}");
        }
    }

    #[test]
    fn nonlinear_rule_needs_syntactic_equality() {
        let p = parse_program("vars x; eq(x, x) -> tt;").unwrap();
        let tt = parse_term("tt", &p).unwrap();
        // syntactically equal arguments match at the root immediately
        let hit = parse_term("eq(1 + 1, 1 + 1)", &p).unwrap();
        let r = normalize_untabled(&p, &hit, 100).unwrap();
        assert_eq!(r.outcome, RewriteOutcome::NormalForm(tt.clone()));
        // `2` vs `1 + 1` only become equal after the built-in step below
        let late = parse_term("eq(2, 1 + 1)", &p).unwrap();
        let r = normalize_untabled(&p, &late, 100).unwrap();
        assert_eq!(r.outcome, RewriteOutcome::NormalForm(tt));
        assert_eq!(r.builtin_evals, 1);
        let miss = parse_term("eq(5, 6)", &p).unwrap();
        let r = normalize_untabled(&p, &miss, 100).unwrap();
        assert_eq!(r.outcome, RewriteOutcome::NormalForm(miss));
    }

    #[test]
    fn overflow_surfaces_as_error() {
        let p = parse_program("vars x; boom(x) -> x * x;").unwrap();
        let goal = parse_term("boom(4000000000000000000)", &p).unwrap();
        assert!(normalize_untabled(&p, &goal, 100).is_err());
    }

    #[test]
    fn nested_fib_recomputed_without_history() {
        use crate::tabling::{normalize_tabled, EngineOptions};
        let p = parse_program(FIB_PROGRAM).unwrap();
        let goal = parse_term("fib(fib(2))", &p).unwrap();
        let untabled = normalize_untabled(&p, &goal, 100_000).unwrap();
        assert_eq!(untabled.outcome, RewriteOutcome::NormalForm(Term::Int(2)));
        let tabled = normalize_tabled(&p, &goal, EngineOptions::default()).unwrap();
        assert!(
            untabled.steps_applied > tabled.stats.total_rule_applications(),
            "history-free rewriting must repeat the shared subcomputation \
             ({} vs {})",
            untabled.steps_applied,
            tabled.stats.total_rule_applications()
        );
    }
}
