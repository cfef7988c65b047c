//! Needs-graph construction and the static conditions that predict when
//! tabling can pay off, plus rule pruning and the never-add sets consumed
//! by the tabled engine.
//!
//! The needs graph has a vertex per function symbol or constant that
//! matters (defined symbols with at least one outgoing edge, and anything
//! adjacent to one) and an edge `f -> g` for every occurrence of `g` in
//! the right-hand side of a rule defining `f`. Edges are kept with
//! multiplicity: a symbol needed twice by one rule counts twice for the
//! in-degree thresholds below. Construction is linear in the total length
//! of the right-hand sides.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::term::{HeadRef, LitVal, Program, RuleId, SymbolId, SymbolKind, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone)]
pub struct Vertex {
    pub key: HeadRef,
    pub label: String,
    pub defined: bool,
}

/// Directed graph over the symbols and constants of a program.
#[derive(Debug, Clone, Default)]
pub struct NeedsGraph {
    pub vertices: Vec<Vertex>,
    index: HashMap<HeadRef, VertexId>,
    /// Edge multiset in rule order.
    pub edges: Vec<(VertexId, VertexId)>,
    adj: Vec<Vec<VertexId>>,
    in_degree: Vec<usize>,
    out_degree: Vec<usize>,
}

impl NeedsGraph {
    fn vertex(&mut self, key: HeadRef, program: &Program) -> VertexId {
        if let Some(v) = self.index.get(&key) {
            return *v;
        }
        let (label, defined) = match key {
            HeadRef::Sym(s) => (
                program.symbol(s).name.clone(),
                program.symbol(s).kind == SymbolKind::Defined,
            ),
            HeadRef::Op(op) => (op.symbol().to_string(), false),
            HeadRef::Int(n) => (n.to_string(), false),
            HeadRef::Bool(b) => (b.to_string(), false),
        };
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Vertex {
            key,
            label,
            defined,
        });
        self.index.insert(key, id);
        self.adj.push(Vec::new());
        self.in_degree.push(0);
        self.out_degree.push(0);
        id
    }

    pub fn lookup(&self, key: HeadRef) -> Option<VertexId> {
        self.index.get(&key).copied()
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.in_degree[v.0 as usize]
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.out_degree[v.0 as usize]
    }

    pub fn successors(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Distinct vertices for the symbols and constants occurring in `t`.
    pub fn goal_vertices(&self, t: &Term) -> Vec<VertexId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        t.visit_heads(&mut |h| {
            if let Some(v) = self.lookup(h) {
                if seen.insert(v) {
                    out.push(v);
                }
            }
        });
        out
    }

    /// All vertices reachable from `starts` by paths of length >= 0.
    pub fn reachable_from(&self, starts: &[VertexId]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<VertexId> = VecDeque::new();
        for &s in starts {
            if !seen[s.0 as usize] {
                seen[s.0 as usize] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &w in self.successors(v) {
                if !seen[w.0 as usize] {
                    seen[w.0 as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

/// Build the needs graph of a program.
pub fn build_needs_graph(program: &Program) -> NeedsGraph {
    let mut g = NeedsGraph::default();
    for rule in &program.rules {
        let root = rule.lhs_root();
        let mut heads = Vec::new();
        rule.rhs.visit_heads(&mut |h| heads.push(h));
        if heads.is_empty() {
            // collapsing rule: the defined symbol gets no originating edge
            continue;
        }
        let from = g.vertex(HeadRef::Sym(root), program);
        for h in heads {
            let to = g.vertex(h, program);
            g.edges.push((from, to));
            g.adj[from.0 as usize].push(to);
            g.out_degree[from.0 as usize] += 1;
            g.in_degree[to.0 as usize] += 1;
        }
    }
    g
}

/// Iterative three-color depth-first search for a directed cycle
/// (self-loops included). Returns the number of vertex expansions made so
/// the linearity of the search is observable in tests.
pub fn has_cycle_counted(g: &NeedsGraph) -> (bool, usize) {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let n = g.len();
    let mut color = vec![WHITE; n];
    let mut ops = 0usize;
    for start in 0..n {
        if color[start] != WHITE {
            continue;
        }
        // stack of (vertex, next-successor index)
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = GRAY;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            ops += 1;
            if *next < g.adj[v].len() {
                let w = g.adj[v][*next].0 as usize;
                *next += 1;
                match color[w] {
                    GRAY => return (true, ops),
                    WHITE => {
                        color[w] = GRAY;
                        stack.push((w, 0));
                    }
                    _ => {}
                }
            } else {
                color[v] = BLACK;
                stack.pop();
            }
        }
    }
    (false, ops)
}

/// Does the needs graph contain a directed cycle? Tabling cannot improve
/// termination unless it does.
pub fn has_cycle(g: &NeedsGraph) -> bool {
    has_cycle_counted(g).0
}

/// Mark every vertex lying on some cycle: members of non-trivial strongly
/// connected components, plus self-loops. Iterative Tarjan.
pub fn cycle_vertices(g: &NeedsGraph) -> Vec<bool> {
    let n = g.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut on_cycle = vec![false; n];

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut next)) = work.last_mut() {
            if *next == 0 {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *next < g.adj[v].len() {
                let w = g.adj[v][*next].0 as usize;
                *next += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut scc = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        scc.push(w);
                        if w == v {
                            break;
                        }
                    }
                    let cyclic =
                        scc.len() > 1 || g.adj[scc[0]].iter().any(|t| t.0 as usize == scc[0]);
                    if cyclic {
                        for w in scc {
                            on_cycle[w] = true;
                        }
                    }
                }
            }
        }
    }
    on_cycle
}

/// Is some cycle vertex reachable (length >= 0) from a vertex whose symbol
/// or constant occurs in the goal? Tabling cannot improve termination for
/// this particular goal unless it is.
pub fn cycle_reachable_from_goal(g: &NeedsGraph, goal: &Term) -> bool {
    debug_assert!(goal.is_ground());
    let marked = cycle_vertices(g);
    let starts = g.goal_vertices(goal);
    let seen = g.reachable_from(&starts);
    seen.iter().zip(marked.iter()).any(|(s, m)| *s && *m)
}

/// Does some vertex have in-degree >= 1 and out-degree >= 1? Without one,
/// no reduction result can ever be asked for twice, so tabling cannot save
/// work on any goal.
pub fn has_reusable_node(g: &NeedsGraph) -> bool {
    (0..g.len()).any(|v| g.in_degree[v] >= 1 && g.out_degree[v] >= 1)
}

/// Length of the longest directed path out of each vertex, saturated at
/// `cap`; a vertex that can reach a cycle saturates.
fn out_chain_lengths(g: &NeedsGraph, cap: usize) -> Vec<usize> {
    let n = g.len();
    let mut reaches_cycle = cycle_vertices(g);
    loop {
        let mut changed = false;
        for &(a, b) in &g.edges {
            if reaches_cycle[b.0 as usize] && !reaches_cycle[a.0 as usize] {
                reaches_cycle[a.0 as usize] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut len = vec![0usize; n];
    for v in 0..n {
        if reaches_cycle[v] {
            len[v] = cap;
        }
    }
    // relaxation over the remaining DAG; values are capped, so at most
    // cap passes change anything
    loop {
        let mut changed = false;
        for &(a, b) in &g.edges {
            let (a, b) = (a.0 as usize, b.0 as usize);
            if reaches_cycle[a] {
                continue;
            }
            let cand = (len[b] + 1).min(cap);
            if cand > len[a] {
                len[a] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    len
}

/// Is some vertex with in-degree > 1 (counting multiplicity) and an
/// outgoing chain of at least `chain_length` steps reachable from two
/// *different* symbols of the goal? Two occurrences of one symbol do not
/// count. With the default `chain_length` of 1 the chain requirement is
/// exactly out-degree >= 1.
pub fn reusable_node_reachable_twice(g: &NeedsGraph, goal: &Term, chain_length: usize) -> bool {
    debug_assert!(goal.is_ground());
    let chains = if chain_length <= 1 {
        None
    } else {
        Some(out_chain_lengths(g, chain_length))
    };
    let candidate: Vec<bool> = (0..g.len())
        .map(|v| {
            g.in_degree[v] > 1
                && match &chains {
                    None => g.out_degree[v] >= 1,
                    Some(c) => c[v] >= chain_length,
                }
        })
        .collect();
    if !candidate.iter().any(|c| *c) {
        return false;
    }
    let starts = g.goal_vertices(goal);
    let mut hits = vec![0usize; g.len()];
    for s in starts {
        let seen = g.reachable_from(&[s]);
        for v in 0..g.len() {
            if seen[v] && candidate[v] {
                hits[v] += 1;
                if hits[v] >= 2 {
                    return true;
                }
            }
        }
    }
    false
}

/// Defined symbols reachable (length >= 0) from the symbols of the goal.
/// A defined symbol occurring in the goal is reachable even when it has no
/// vertex (all of its rules collapsing).
pub fn reachable_defined_symbols(
    g: &NeedsGraph,
    program: &Program,
    goal: &Term,
) -> BTreeSet<SymbolId> {
    debug_assert!(goal.is_ground());
    let mut out = BTreeSet::new();
    goal.visit_heads(&mut |h| {
        if let HeadRef::Sym(s) = h {
            if program.is_defined(s) {
                out.insert(s);
            }
        }
    });
    let starts = g.goal_vertices(goal);
    let seen = g.reachable_from(&starts);
    for (i, v) in g.vertices.iter().enumerate() {
        if seen[i] && v.defined {
            if let HeadRef::Sym(s) = v.key {
                out.insert(s);
            }
        }
    }
    out
}

/// Rules whose defined symbol can never be needed for this goal.
pub fn prunable_rules(program: &Program, g: &NeedsGraph, goal: &Term) -> BTreeSet<RuleId> {
    let reachable = reachable_defined_symbols(g, program, goal);
    program
        .rules
        .iter()
        .filter(|r| !reachable.contains(&r.lhs_root()))
        .map(|r| r.id)
        .collect()
}

/// Copy of the program with the prunable rules removed; returns the
/// removed ids alongside.
pub fn prune_program(program: &Program, goal: &Term) -> (Program, BTreeSet<RuleId>) {
    let g = build_needs_graph(program);
    let prunable = prunable_rules(program, &g, goal);
    let drop: HashSet<RuleId> = prunable.iter().copied().collect();
    (program.without_rules(&drop), prunable)
}

/// Statically safe inputs for the never-add dependency-list suppression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NeverAddSets {
    /// False as soon as any rule is collapsing; nothing is suppressed then.
    pub eligible: bool,
    pub collapsing_rules: Vec<RuleId>,
    /// User constructor constants that are not the entire rhs of any rule.
    pub user_constants: BTreeSet<SymbolId>,
    /// Constructors that never occur as the outermost symbol of a rhs.
    pub outermost_safe_constructors: BTreeSet<SymbolId>,
    /// Integer literals may be treated as never-add.
    pub int_safe: bool,
    /// Boolean literals may be treated as never-add.
    pub bool_safe: bool,
    /// Literals that are themselves the entire rhs of some rule.
    pub literal_rhs: BTreeSet<LitVal>,
}

impl NeverAddSets {
    pub fn literal_is_never_add(&self, v: LitVal) -> bool {
        if !self.eligible || self.literal_rhs.contains(&v) {
            return false;
        }
        match v {
            LitVal::Int(_) => self.int_safe,
            LitVal::Bool(_) => self.bool_safe,
        }
    }
}

fn scan_ops_into(term: &Term, int_touched: &mut bool, bool_touched: &mut bool) {
    term.visit_heads(&mut |h| {
        if let HeadRef::Op(op) = h {
            // an operator endangers a literal type when it either consumes
            // it (the literal's class gains argument references) or
            // produces it (evaluation can merge another class into the
            // literal's class)
            let (pi, pb) = op.produces();
            if op.takes_int() || pi {
                *int_touched = true;
            }
            if op.takes_bool() || pb {
                *bool_touched = true;
            }
        }
    });
}

/// Compute the never-add sets for a program and goal. With `goal = None`
/// only the program-side conditions are applied (used for goal-less
/// analysis reports).
pub fn never_add_sets(program: &Program, goal: Option<&Term>) -> NeverAddSets {
    let collapsing_rules: Vec<RuleId> = program
        .rules
        .iter()
        .filter(|r| r.collapsing)
        .map(|r| r.id)
        .collect();
    let eligible = collapsing_rules.is_empty();

    let mut int_touched = false;
    let mut bool_touched = false;
    let mut constant_rhs: BTreeSet<SymbolId> = BTreeSet::new();
    let mut literal_rhs: BTreeSet<LitVal> = BTreeSet::new();
    let mut outermost: BTreeSet<SymbolId> = BTreeSet::new();
    for rule in &program.rules {
        scan_ops_into(&rule.rhs, &mut int_touched, &mut bool_touched);
        match &rule.rhs {
            Term::App(s, args) => {
                if args.is_empty() {
                    constant_rhs.insert(*s);
                }
                if !program.is_defined(*s) {
                    outermost.insert(*s);
                }
            }
            Term::Int(n) => {
                literal_rhs.insert(LitVal::Int(*n));
            }
            Term::Bool(b) => {
                literal_rhs.insert(LitVal::Bool(*b));
            }
            _ => {}
        }
    }
    if let Some(goal) = goal {
        scan_ops_into(goal, &mut int_touched, &mut bool_touched);
    }

    let mut user_constants = BTreeSet::new();
    let mut outermost_safe = BTreeSet::new();
    for (i, sym) in program.symbols.iter().enumerate() {
        let id = SymbolId(i as u32);
        if sym.kind != SymbolKind::Constructor {
            continue;
        }
        if sym.arity == 0 && !constant_rhs.contains(&id) {
            user_constants.insert(id);
        }
        if sym.arity > 0 && !outermost.contains(&id) {
            outermost_safe.insert(id);
        }
    }

    NeverAddSets {
        eligible,
        collapsing_rules,
        user_constants,
        outermost_safe_constructors: outermost_safe,
        int_safe: !int_touched,
        bool_safe: !bool_touched,
        literal_rhs,
    }
}

/// GraphViz rendering: defined symbols are boxes, constructors ellipses,
/// cycle vertices doubled.
pub fn to_dot(g: &NeedsGraph) -> String {
    let on_cycle = cycle_vertices(g);
    let mut s = String::from("digraph needs {\n");
    for (i, v) in g.vertices.iter().enumerate() {
        let shape = if v.defined { "box" } else { "ellipse" };
        let extra = if on_cycle[i] { ", peripheries=2" } else { "" };
        s.push_str(&format!(
            "  n{} [label=\"{}\", shape={}{}];\n",
            i,
            v.label.replace('"', "\\\""),
            shape,
            extra
        ));
    }
    for (from, to) in &g.edges {
        s.push_str(&format!("  n{} -> n{};\n", from.0, to.0));
    }
    s.push_str("}\n");
    s
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    /// Minimum out-chain length a shared node must offer before it counts
    /// for the goal-level sharing test. 1 means "one further reduction
    /// step", i.e. an out-degree of at least one.
    pub chain_length: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { chain_length: 1 }
    }
}

/// Aggregated verdicts for one program (and optionally one goal).
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    /// The needs graph has a directed cycle (necessary for tabling to
    /// improve termination at all).
    pub has_cycle: bool,
    /// Some cycle is reachable from a symbol of the goal. Present iff a
    /// goal was supplied.
    pub cycle_reachable_from_goal: Option<bool>,
    /// Some vertex has in-degree >= 1 and out-degree >= 1 (necessary for
    /// tabling to save any work).
    pub has_reusable_node: bool,
    /// Some vertex with in-degree > 1 and an outgoing chain is reachable
    /// from two different symbols of the goal. Present iff a goal was
    /// supplied.
    pub reusable_node_reachable_twice: Option<bool>,
    /// Defined symbols reachable from the goal (all defined symbols when
    /// no goal was supplied).
    pub reachable_defined: BTreeSet<SymbolId>,
    pub reachable_defined_names: BTreeSet<String>,
    /// Rules that can be dropped for this goal (empty without a goal).
    pub prunable_rules: BTreeSet<RuleId>,
    pub never_add_eligible: bool,
    pub never_add_collapsing_rules: Vec<RuleId>,
    pub never_add_user_constants: BTreeSet<String>,
    pub never_add_outermost_safe: BTreeSet<String>,
    pub never_add_int_safe: bool,
    pub never_add_bool_safe: bool,
    pub recommendation: String,
}

/// Run every analysis and compose the human-readable recommendation.
pub fn analyze(program: &Program, goal: Option<&Term>, opts: &AnalyzeOptions) -> AnalysisReport {
    let g = build_needs_graph(program);
    let has_cycle = has_cycle(&g);
    let cycle_goal = goal.map(|t| cycle_reachable_from_goal(&g, t));
    let reusable = has_reusable_node(&g);
    let reusable_goal = goal.map(|t| reusable_node_reachable_twice(&g, t, opts.chain_length));

    let reachable_defined: BTreeSet<SymbolId> = match goal {
        Some(t) => reachable_defined_symbols(&g, program, t),
        None => program.rules.iter().map(|r| r.lhs_root()).collect(),
    };
    let prunable = match goal {
        Some(t) => prunable_rules(program, &g, t),
        None => BTreeSet::new(),
    };
    let na = never_add_sets(program, goal);

    let mut rec = String::new();
    match (has_cycle, cycle_goal) {
        (false, _) => rec.push_str(
            "The needs graph is acyclic: tabling cannot improve termination for any goal. ",
        ),
        (true, Some(false)) => rec.push_str(
            "The needs graph has a cycle, but no cycle is reachable from this goal: \
             tabling cannot improve termination here. ",
        ),
        (true, Some(true)) => rec.push_str(
            "A needs-graph cycle is reachable from the goal: tabling may improve termination. ",
        ),
        (true, None) => rec.push_str(
            "The needs graph has a cycle: tabling may improve termination for some goals. ",
        ),
    }
    match (reusable, reusable_goal) {
        (false, _) => rec.push_str(
            "No vertex is both needed and needing: tabling cannot save reduction steps. ",
        ),
        (true, Some(true)) => rec.push_str(
            "A shared vertex is reachable from two different goal symbols: \
             tabling may save repeated work. ",
        ),
        (true, Some(false)) => rec.push_str(
            "A shared vertex exists but is not reachable from two different goal symbols: \
             no sharing benefit is predicted for this goal. ",
        ),
        (true, None) => {
            rec.push_str("A shared vertex exists: tabling may save repeated work on some goals. ")
        }
    }
    rec.push_str(
        "(The two sharing tests intentionally use different in-degree thresholds, \
         at-least-one versus more-than-one, and are applied verbatim.) ",
    );
    if !na.eligible {
        let ids: Vec<String> = na.collapsing_rules.iter().map(|r| r.to_string()).collect();
        rec.push_str(&format!(
            "never-add suppression disabled: collapsing rule(s) {} present.",
            ids.join(", ")
        ));
    } else {
        rec.push_str("never-add suppression is applicable (no collapsing rules).");
    }

    AnalysisReport {
        has_cycle,
        cycle_reachable_from_goal: cycle_goal,
        has_reusable_node: reusable,
        reusable_node_reachable_twice: reusable_goal,
        reachable_defined_names: reachable_defined
            .iter()
            .map(|s| program.symbol(*s).name.clone())
            .collect(),
        reachable_defined,
        prunable_rules: prunable,
        never_add_eligible: na.eligible,
        never_add_collapsing_rules: na.collapsing_rules.clone(),
        never_add_user_constants: na
            .user_constants
            .iter()
            .map(|s| program.symbol(*s).name.clone())
            .collect(),
        never_add_outermost_safe: na
            .outermost_safe_constructors
            .iter()
            .map(|s| program.symbol(*s).name.clone())
            .collect(),
        never_add_int_safe: na.int_safe,
        never_add_bool_safe: na.bool_safe,
        recommendation: rec,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FIB_PROGRAM, LOOP_PROGRAM, STREAM_PROGRAM};
    use crate::parser::{parse_program, parse_term};

    fn edge_labels(g: &NeedsGraph) -> BTreeSet<(String, String)> {
        g.edges
            .iter()
            .map(|(a, b)| {
                (
                    g.vertices[a.0 as usize].label.clone(),
                    g.vertices[b.0 as usize].label.clone(),
                )
            })
            .collect()
    }

    #[test]
    fn fib_needs_graph_edges() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let g = build_needs_graph(&p);
        let want: BTreeSet<(String, String)> = [
            ("fib", "f"),
            ("fib", ">"),
            ("fib", "1"),
            ("f", "fib"),
            ("f", "-"),
            ("f", "+"),
            ("f", "1"),
            ("f", "2"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(edge_labels(&g), want);
        // multiset: rule 2 needs fib twice and `-` twice
        let f = g
            .lookup(HeadRef::Sym(p.lookup_symbol("f").unwrap()))
            .unwrap();
        let fib = g
            .lookup(HeadRef::Sym(p.lookup_symbol("fib").unwrap()))
            .unwrap();
        let fib_in = g.edges.iter().filter(|(_, t)| *t == fib).count();
        assert_eq!(fib_in, 2);
        assert_eq!(g.in_degree(fib), 2);
        assert!(g.out_degree(f) >= 5);
    }

    #[test]
    fn loop_needs_graph_has_self_loop() {
        let p = parse_program(LOOP_PROGRAM).unwrap();
        let g = build_needs_graph(&p);
        // rhs f(a): edges a->f and a->a
        let want: BTreeSet<(String, String)> = [("a", "f"), ("a", "a")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(edge_labels(&g), want);
        assert_eq!(g.len(), 2);
        assert!(has_cycle(&g));
    }

    #[test]
    fn all_collapsing_rules_yield_no_originating_edges() {
        let p = parse_program("vars x y; pick(x, y) -> x;").unwrap();
        let g = build_needs_graph(&p);
        assert!(g.is_empty());
        assert!(!has_cycle(&g));
    }

    #[test]
    fn cycle_detection() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        assert!(has_cycle(&build_needs_graph(&p)));
        let acyclic = parse_program("vars x; g(x) -> h(x); h(x) -> 0;").unwrap();
        assert!(!has_cycle(&build_needs_graph(&acyclic)));
    }

    #[test]
    fn cycle_reachability_from_goal() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let g = build_needs_graph(&p);
        let fib2 = parse_term("fib(2)", &p).unwrap();
        assert!(cycle_reachable_from_goal(&g, &fib2));
        // `true` has no vertex in the fib graph
        let t = parse_term("true", &p).unwrap();
        assert!(!cycle_reachable_from_goal(&g, &t));
        // a goal with no program symbols at all
        let three = parse_term("3", &p).unwrap();
        assert!(!cycle_reachable_from_goal(&g, &three));
    }

    #[test]
    fn reusable_node_checks() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let g = build_needs_graph(&p);
        assert!(has_reusable_node(&g));
        let trivial = parse_program("vars x; g(x) -> 0;").unwrap();
        assert!(!has_reusable_node(&build_needs_graph(&trivial)));
        let lp = parse_program(LOOP_PROGRAM).unwrap();
        assert!(has_reusable_node(&build_needs_graph(&lp)));
    }

    /// Brute-force reachability oracle: dense closure by repeated passes.
    fn brute_reachable(g: &NeedsGraph, from: VertexId) -> Vec<bool> {
        let n = g.len();
        let mut r = vec![false; n];
        r[from.0 as usize] = true;
        loop {
            let mut changed = false;
            for &(a, b) in &g.edges {
                if r[a.0 as usize] && !r[b.0 as usize] {
                    r[b.0 as usize] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        r
    }

    /// Independent evaluation of the goal-level sharing test, straight
    /// from its definition.
    fn brute_reusable_twice(g: &NeedsGraph, goal: &Term) -> bool {
        let starts = g.goal_vertices(goal);
        for v in 0..g.len() {
            let vin = g.edges.iter().filter(|(_, t)| t.0 as usize == v).count();
            let vout = g.edges.iter().filter(|(s, _)| s.0 as usize == v).count();
            if vin > 1 && vout >= 1 {
                let mut reached_by = 0;
                for &s in &starts {
                    if brute_reachable(g, s)[v] {
                        reached_by += 1;
                    }
                }
                if reached_by >= 2 {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn goal_sharing_matches_brute_force() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let g = build_needs_graph(&p);
        for goal_text in ["fib(3) + fib(4)", "fib(2)", "fib(fib(2))", "true"] {
            let goal = parse_term(goal_text, &p).unwrap();
            assert_eq!(
                reusable_node_reachable_twice(&g, &goal, 1),
                brute_reusable_twice(&g, &goal),
                "goal {goal_text}"
            );
        }
        // strict reading: fib(2) mentions only one vertex that reaches the
        // shared fib vertex
        let fib2 = parse_term("fib(2)", &p).unwrap();
        assert!(!reusable_node_reachable_twice(&g, &fib2, 1));
        // empty graph
        let empty = NeedsGraph::default();
        assert!(!reusable_node_reachable_twice(
            &empty,
            &parse_term("1", &p).unwrap(),
            1
        ));
    }

    #[test]
    fn two_distinct_goal_symbols_can_reach_a_shared_node() {
        // g and h both reach the doubly-needed shared vertex
        let p = parse_program(
            "vars x; g(x) -> shared(x); h(x) -> shared(x + 1); shared(x) -> deep(x); deep(x) -> 0;",
        )
        .unwrap();
        let g = build_needs_graph(&p);
        let goal = parse_term("g(1) + h(2)", &p).unwrap();
        assert!(reusable_node_reachable_twice(&g, &goal, 1));
        assert!(brute_reusable_twice(&g, &goal));
        // chain length 2 still holds (shared -> deep -> 0), length 4 does not
        assert!(reusable_node_reachable_twice(&g, &goal, 2));
        assert!(!reusable_node_reachable_twice(&g, &goal, 4));
        let only_g = parse_term("g(1)", &p).unwrap();
        assert!(!reusable_node_reachable_twice(&g, &only_g, 1));
    }

    #[test]
    fn reachable_defined_and_pruning() {
        let dead = format!("{FIB_PROGRAM}\nvars qd; dead(qd) -> dead(qd);\n");
        let p = parse_program(&dead).unwrap();
        let g = build_needs_graph(&p);
        let goal = parse_term("fib(2)", &p).unwrap();
        let names: BTreeSet<String> = reachable_defined_symbols(&g, &p, &goal)
            .iter()
            .map(|s| p.symbol(*s).name.clone())
            .collect();
        assert_eq!(names, ["fib", "f"].iter().map(|s| s.to_string()).collect());
        let prunable = prunable_rules(&p, &g, &goal);
        assert_eq!(prunable, [RuleId(4)].into_iter().collect());
        // goal `3` mentions no program symbol: everything is prunable
        let three = parse_term("3", &p).unwrap();
        assert_eq!(prunable_rules(&p, &g, &three).len(), p.rules.len());

        let (pruned, removed) = prune_program(&p, &goal);
        assert_eq!(removed, [RuleId(4)].into_iter().collect());
        assert_eq!(pruned.rules.len(), 3);
    }

    #[test]
    fn collapsing_defined_symbol_in_goal_is_kept() {
        // `pick` has no vertex (collapsing only) but obviously must be kept
        let p = parse_program("vars x y; pick(x, y) -> x; g(x) -> g(x);").unwrap();
        let g = build_needs_graph(&p);
        let goal = parse_term("pick(1, 2)", &p).unwrap();
        let reach = reachable_defined_symbols(&g, &p, &goal);
        assert!(reach.contains(&p.lookup_symbol("pick").unwrap()));
        assert!(!reach.contains(&p.lookup_symbol("g").unwrap()));
    }

    #[test]
    fn never_add_sets_fib() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let goal = parse_term("fib(2)", &p).unwrap();
        let na = never_add_sets(&p, Some(&goal));
        assert!(na.eligible);
        // int operators occur in rhs, so integer literals are unsafe
        assert!(!na.int_safe);
        assert!(!na.literal_is_never_add(LitVal::Int(5)));
    }

    #[test]
    fn never_add_sets_stream() {
        let p = parse_program(STREAM_PROGRAM).unwrap();
        let goal = parse_term("from(1, 3)", &p).unwrap();
        let na = never_add_sets(&p, Some(&goal));
        assert!(!na.eligible);
        assert_eq!(na.collapsing_rules, vec![RuleId(2), RuleId(3)]);
        assert!(!na.literal_is_never_add(LitVal::Int(1)));
        // cons never roots a rhs, so it would otherwise be outermost-safe
        assert!(na
            .outermost_safe_constructors
            .contains(&p.lookup_symbol("cons").unwrap()));
    }

    #[test]
    fn never_add_constant_rhs_exclusion() {
        let p = parse_program("vars x; g(x) -> c; h(x) -> pack(c, d);").unwrap();
        let goal = parse_term("g(1)", &p).unwrap();
        let na = never_add_sets(&p, Some(&goal));
        assert!(na.eligible);
        let c = p.lookup_symbol("c").unwrap();
        let d = p.lookup_symbol("d").unwrap();
        assert!(!na.user_constants.contains(&c), "c is the rhs of rule 1");
        assert!(na.user_constants.contains(&d));
        // pack roots the rhs of rule 2
        assert!(!na
            .outermost_safe_constructors
            .contains(&p.lookup_symbol("pack").unwrap()));
    }

    #[test]
    fn never_add_literal_rhs_exclusion() {
        let p = parse_program("vars x; g(x) -> 5; h(x) -> box(g(x));").unwrap();
        let goal = parse_term("h(1)", &p).unwrap();
        let na = never_add_sets(&p, Some(&goal));
        assert!(na.int_safe, "no int operators anywhere");
        assert!(!na.literal_is_never_add(LitVal::Int(5)), "5 is a rhs");
        assert!(na.literal_is_never_add(LitVal::Int(7)));
    }

    #[test]
    fn never_add_goal_operators_count() {
        let p = parse_program("vars x; g(x) -> box(x);").unwrap();
        let quiet = parse_term("g(1)", &p).unwrap();
        assert!(never_add_sets(&p, Some(&quiet)).int_safe);
        let noisy = parse_term("g(1 + 1)", &p).unwrap();
        assert!(!never_add_sets(&p, Some(&noisy)).int_safe);
    }

    #[test]
    fn dot_output() {
        let lp = parse_program(LOOP_PROGRAM).unwrap();
        let dot = to_dot(&build_needs_graph(&lp));
        assert!(dot.starts_with("digraph needs {"));
        assert_eq!(dot.matches("->").count(), 2);
        assert!(dot.contains("peripheries=2"), "cycle vertex marked");

        let empty = to_dot(&NeedsGraph::default());
        assert_eq!(empty, "digraph needs {\n}\n");

        let p = parse_program(FIB_PROGRAM).unwrap();
        let g = build_needs_graph(&p);
        let dot = to_dot(&g);
        let fib = g
            .lookup(HeadRef::Sym(p.lookup_symbol("fib").unwrap()))
            .unwrap();
        let f = g
            .lookup(HeadRef::Sym(p.lookup_symbol("f").unwrap()))
            .unwrap();
        assert!(dot.contains(&format!("n{} -> n{};", fib.0, f.0)));
    }

    #[test]
    fn report_verdicts() {
        let p = parse_program(FIB_PROGRAM).unwrap();
        let goal = parse_term("fib(2)", &p).unwrap();
        let r = analyze(&p, Some(&goal), &AnalyzeOptions::default());
        assert!(r.has_cycle);
        assert_eq!(r.cycle_reachable_from_goal, Some(true));
        assert!(r.has_reusable_node);
        assert!(r.recommendation.contains("may improve termination"));

        let acyclic = parse_program("vars x; g(x) -> 0;").unwrap();
        let r = analyze(&acyclic, None, &AnalyzeOptions::default());
        assert!(!r.has_cycle);
        assert!(r.cycle_reachable_from_goal.is_none());
        assert!(r.recommendation.contains("cannot improve termination"));

        let sp = parse_program(STREAM_PROGRAM).unwrap();
        let r = analyze(&sp, None, &AnalyzeOptions::default());
        assert!(!r.never_add_eligible);
        assert!(r.recommendation.contains("collapsing rule(s) 2, 3"));
    }

    #[test]
    fn search_work_is_linear_in_program_size() {
        // chain programs: g0(x) -> g1(x); ... ; g_{n-1}(x) -> 0;
        for n in [100usize, 1_000, 10_000, 100_000] {
            let mut src = String::from("vars x;\n");
            for i in 0..n {
                if i + 1 < n {
                    src.push_str(&format!("g{i}(x) -> g{}(x);\n", i + 1));
                } else {
                    src.push_str(&format!("g{i}(x) -> 0;\n"));
                }
            }
            let p = parse_program(&src).unwrap();
            let g = build_needs_graph(&p);
            let v = g.len();
            let e = g.edges.len();
            assert_eq!(e, n);
            let (cyc, ops) = has_cycle_counted(&g);
            assert!(!cyc);
            // every vertex expansion handles one edge or closes one vertex
            assert!(
                ops <= 2 * (v + e) + 1,
                "n={n}: {ops} expansions for {v} vertices / {e} edges"
            );
        }
    }
}
