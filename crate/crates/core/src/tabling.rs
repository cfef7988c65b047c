//! Tabled normalization by congruence closure.
//!
//! Ground terms are interned bottom-up as signatures `<f c1 .. cn>` over
//! numbered equivalence classes. Each class designates at most one
//! *unreduced* signature; only the term spelled out by unreduced
//! signatures is examined for matches. Applying a rule instance `A -> B`
//! marks the matched signature reduced and either merges the class with
//! the class already representing `B` or inserts a fresh signature for `B`
//! as the new unreduced signature. Classes merge with full congruence
//! propagation: signatures referencing an absorbed class are renumbered,
//! re-hashed, and collisions trigger further merges until fixpoint.
//!
//! Built-in operator signatures whose operands are already literal classes
//! are evaluated at construction time; they join the result literal's
//! class as reduced members and are omitted from trace output. Operator
//! signatures that had to be inserted unevaluated are evaluated later as
//! their own progress steps.
//!
//! Two optimizations from the analysis module are wired in:
//! don't-reduce subtree skipping during match search, and never-add
//! dependency-list suppression. Both are observable only in [`Stats`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::analysis::{self, NeverAddSets};
use crate::term::{
    eval_op, HeadRef, LitVal, OverflowError, Program, Rule, RuleId, SymbolKind, Term, VarId,
};

/// Equivalence class number. Canonicalize through [`TablingEngine::find`]
/// before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ClassId(pub u32);

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct SigId(u32);

/// Variable-to-class assignment produced by a successful match.
pub type Binding = BTreeMap<VarId, ClassId>;

#[derive(Debug, Clone)]
struct SigData {
    head: HeadRef,
    args: Vec<ClassId>,
    owner: ClassId,
    reduced: bool,
    never_add: bool,
    /// Evaluated directly at construction; kept out of trace output.
    hidden: bool,
    alive: bool,
}

#[derive(Debug, Clone, Default)]
struct ClassData {
    members: Vec<SigId>,
    unreduced: Option<SigId>,
    /// Signatures mentioning this class among their arguments.
    dependents: Vec<SigId>,
    /// Every member signature carries the never-add flag.
    all_never_add: bool,
    dont_reduce_cache: Option<(u64, bool)>,
    alive: bool,
}

/// Instrumentation counters; all monotonically non-decreasing over the
/// lifetime of an engine.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Stats {
    /// Rule id number -> times applied.
    pub rule_applications: BTreeMap<u32, u64>,
    pub builtin_evals: u64,
    pub merges: u64,
    pub signatures_created: u64,
    pub match_attempts: u64,
    /// Match attempts avoided because a class held a don't-reduce
    /// signature (counted as one per rule that would have been tried).
    pub match_attempts_skipped_dont_reduce: u64,
    pub dependency_entries_added: u64,
    pub dependency_entries_suppressed_never_add: u64,
}

impl Stats {
    pub fn total_rule_applications(&self) -> u64 {
        self.rule_applications.values().sum()
    }

    pub fn rule_count(&self, id: RuleId) -> u64 {
        self.rule_applications.get(&id.0).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    pub dont_reduce: bool,
    pub never_add: bool,
    pub prune_rules: bool,
    pub max_steps: u64,
    pub trace: bool,
    /// Run the full-table audit after every step.
    pub audit: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            dont_reduce: true,
            never_add: true,
            prune_rules: true,
            max_steps: 100_000,
            trace: false,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    NormalForm(Term),
    /// Extraction ran into a class cycle: the goal has no finite normal form.
    NoFiniteNormalForm {
        witness: ClassId,
    },
    StepLimitReached {
        partial: Option<Term>,
    },
}

impl Outcome {
    /// Same result class, with normal forms compared structurally.
    /// Diagnostic payloads (witness class, partial term) are not compared.
    pub fn same_result(&self, other: &Outcome) -> bool {
        match (self, other) {
            (Outcome::NormalForm(a), Outcome::NormalForm(b)) => a == b,
            (Outcome::NoFiniteNormalForm { .. }, Outcome::NoFiniteNormalForm { .. }) => true,
            (Outcome::StepLimitReached { .. }, Outcome::StepLimitReached { .. }) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NormalizeResult {
    pub outcome: Outcome,
    /// Cumulative engine statistics at the end of this call.
    pub stats: Stats,
    /// Trace lines produced by this call (empty unless tracing).
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Overflow(#[from] OverflowError),
    #[error("class {0} has no unreduced signature; cannot extract a representative term")]
    MissingUnreduced(ClassId),
    #[error("table audit failed: {0}")]
    Audit(String),
    #[error(
        "goal uses operators of a literal type already treated as never-add in this session; \
         start a fresh engine or disable never-add"
    )]
    NeverAddInvalidated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractError {
    Cycle(ClassId),
    MissingUnreduced(ClassId),
}

/// Read-only view of one signature, for tests and reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigView {
    pub head: HeadRef,
    pub args: Vec<ClassId>,
    pub reduced: bool,
    pub never_add: bool,
    pub hidden: bool,
}

/// The congruence table. Owned by a [`TablingEngine`]; confined to one
/// execution context for the duration of a normalize call.
#[derive(Debug, Clone, Default)]
pub struct TablingState {
    classes: Vec<ClassData>,
    parent: Vec<u32>,
    sigs: Vec<SigData>,
    index: HashMap<(HeadRef, Vec<ClassId>), SigId>,
    root: Option<ClassId>,
    epoch: u64,
    dirty: BTreeSet<u32>,
    trace_lines: Vec<String>,
    never_add_flags: u64,
}

pub struct TablingEngine<'p> {
    program: &'p Program,
    pub options: EngineOptions,
    state: TablingState,
    stats: Stats,
    active_rules: Vec<bool>,
    never_add: Option<NeverAddSets>,
    goals_prepared: u64,
}

impl<'p> TablingEngine<'p> {
    pub fn new(program: &'p Program, options: EngineOptions) -> Self {
        TablingEngine {
            program,
            options,
            state: TablingState::default(),
            stats: Stats::default(),
            active_rules: vec![true; program.rules.len()],
            never_add: None,
            goals_prepared: 0,
        }
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn root(&self) -> Option<ClassId> {
        self.state.root
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    // -- union-find ---------------------------------------------------------

    pub fn find(&mut self, c: ClassId) -> ClassId {
        let mut i = c.0 as usize;
        loop {
            let p = self.state.parent[i];
            if p as usize == i {
                return ClassId(p);
            }
            let gp = self.state.parent[p as usize];
            self.state.parent[i] = gp;
            i = gp as usize;
        }
    }

    fn class(&self, c: ClassId) -> &ClassData {
        &self.classes_ref()[c.0 as usize]
    }

    fn classes_ref(&self) -> &Vec<ClassData> {
        &self.state.classes
    }

    fn sig(&self, s: SigId) -> &SigData {
        &self.state.sigs[s.0 as usize]
    }

    pub fn live_classes(&mut self) -> Vec<ClassId> {
        (0..self.state.classes.len() as u32)
            .map(ClassId)
            .filter(|c| self.state.classes[c.0 as usize].alive)
            .collect()
    }

    pub fn unreduced_view(&mut self, c: ClassId) -> Option<SigView> {
        let c = self.find(c);
        self.class(c).unreduced.map(|u| self.view(u))
    }

    pub fn members_view(&mut self, c: ClassId) -> Vec<SigView> {
        let c = self.find(c);
        self.class(c)
            .members
            .clone()
            .into_iter()
            .filter(|m| self.sig(*m).alive)
            .map(|m| self.view(m))
            .collect()
    }

    fn view(&self, s: SigId) -> SigView {
        let d = self.sig(s);
        SigView {
            head: d.head,
            args: d.args.clone(),
            reduced: d.reduced,
            never_add: d.never_add,
            hidden: d.hidden,
        }
    }

    // -- bookkeeping --------------------------------------------------------

    fn bump_epoch(&mut self) {
        self.state.epoch += 1;
    }

    fn mark_dirty(&mut self, c: ClassId) {
        if self.options.trace {
            self.state.dirty.insert(c.0);
        }
    }

    fn active_rule_count(&self) -> u64 {
        self.active_rules.iter().filter(|a| **a).count() as u64
    }

    fn head_label(&self, h: HeadRef) -> String {
        match h {
            HeadRef::Sym(s) => self.program.symbol(s).name.clone(),
            HeadRef::Op(op) => op.symbol().to_string(),
            HeadRef::Int(n) => n.to_string(),
            HeadRef::Bool(b) => b.to_string(),
        }
    }

    fn render_sig(&self, s: SigId) -> String {
        let d = self.sig(s);
        if d.args.is_empty() {
            self.head_label(d.head)
        } else {
            let args: Vec<String> = d.args.iter().map(|a| a.0.to_string()).collect();
            format!("<{} {}>", self.head_label(d.head), args.join(" "))
        }
    }

    /// One class in the trace notation, e.g. `1:{<fib 0>, <f 3 0>*}`.
    /// Reduced members print in insertion order; the unreduced signature
    /// prints last with a `*`; construction-evaluated builtin signatures
    /// are omitted.
    pub fn render_class(&mut self, c: ClassId) -> String {
        let c = self.find(c);
        let cls = self.class(c);
        let unreduced = cls.unreduced;
        let mut parts = Vec::new();
        for &m in cls.members.clone().iter() {
            let d = self.sig(m);
            if !d.alive || d.hidden || Some(m) == unreduced {
                continue;
            }
            parts.push(self.render_sig(m));
        }
        if let Some(u) = unreduced {
            parts.push(format!("{}*", self.render_sig(u)));
        }
        format!("{}:{{{}}}", c.0, parts.join(", "))
    }

    fn flush_trace_step(&mut self) {
        if !self.options.trace {
            return;
        }
        let dirty: Vec<u32> = std::mem::take(&mut self.state.dirty).into_iter().collect();
        let mut parts = Vec::new();
        for id in dirty {
            if self.state.classes[id as usize].alive {
                parts.push(self.render_class(ClassId(id)));
            }
        }
        if !parts.is_empty() {
            self.state.trace_lines.push(parts.join(" "));
        }
    }

    // -- signature creation -------------------------------------------------

    fn lookup_sig(&self, head: HeadRef, args: &[ClassId]) -> Option<SigId> {
        self.state.index.get(&(head, args.to_vec())).copied()
    }

    fn new_class(&mut self) -> ClassId {
        let id = ClassId(self.state.classes.len() as u32);
        self.state.classes.push(ClassData {
            members: Vec::new(),
            unreduced: None,
            dependents: Vec::new(),
            all_never_add: true,
            dont_reduce_cache: None,
            alive: true,
        });
        self.state.parent.push(id.0);
        id
    }

    /// Whether a would-be signature qualifies as never-add under the
    /// analysis computed for this engine's goals. Decided once, at
    /// creation; the flag never needs revisiting afterwards.
    pub fn is_never_add(&mut self, head: HeadRef, args: &[ClassId]) -> bool {
        if !self.options.never_add {
            return false;
        }
        let Some(na) = &self.never_add else {
            return false;
        };
        if !na.eligible {
            return false;
        }
        match head {
            HeadRef::Int(n) => na.literal_is_never_add(LitVal::Int(n)),
            HeadRef::Bool(b) => na.literal_is_never_add(LitVal::Bool(b)),
            HeadRef::Op(_) => false,
            HeadRef::Sym(s) => {
                let sym = self.program.symbol(s);
                if sym.kind == SymbolKind::Defined {
                    return false;
                }
                if sym.arity == 0 {
                    return na.user_constants.contains(&s);
                }
                if !na.outermost_safe_constructors.contains(&s) {
                    return false;
                }
                args.iter().all(|a| {
                    let a = self.find(*a);
                    self.class(a).all_never_add
                })
            }
        }
    }

    fn create_sig(
        &mut self,
        head: HeadRef,
        args: Vec<ClassId>,
        owner: ClassId,
        reduced: bool,
        hidden: bool,
        make_unreduced: bool,
    ) -> SigId {
        debug_assert!(self.lookup_sig(head, &args).is_none());
        let never_add = self.is_never_add(head, &args);
        let id = SigId(self.state.sigs.len() as u32);
        self.state.sigs.push(SigData {
            head,
            args: args.clone(),
            owner,
            reduced,
            never_add,
            hidden,
            alive: true,
        });
        self.stats.signatures_created += 1;
        if never_add {
            self.state.never_add_flags += 1;
        }
        self.state.index.insert((head, args.clone()), id);

        let mut distinct: Vec<ClassId> = args.clone();
        distinct.sort();
        distinct.dedup();
        for arg in distinct {
            if never_add {
                self.stats.dependency_entries_suppressed_never_add += 1;
            } else {
                self.state.classes[arg.0 as usize].dependents.push(id);
                self.stats.dependency_entries_added += 1;
            }
        }

        let cls = &mut self.state.classes[owner.0 as usize];
        cls.members.push(id);
        cls.all_never_add &= never_add;
        if make_unreduced {
            debug_assert!(cls.unreduced.is_none());
            debug_assert!(!reduced);
            cls.unreduced = Some(id);
        }
        self.bump_epoch();
        if !hidden {
            self.mark_dirty(owner);
        }
        id
    }

    fn literal_of_unreduced(&mut self, c: ClassId) -> Option<LitVal> {
        let c = self.find(c);
        let u = self.class(c).unreduced?;
        match self.sig(u).head {
            HeadRef::Int(n) => Some(LitVal::Int(n)),
            HeadRef::Bool(b) => Some(LitVal::Bool(b)),
            _ => None,
        }
    }

    fn lit_head(v: LitVal) -> HeadRef {
        match v {
            LitVal::Int(n) => HeadRef::Int(n),
            LitVal::Bool(b) => HeadRef::Bool(b),
        }
    }

    fn intern_literal(&mut self, head: HeadRef) -> ClassId {
        if let Some(s) = self.lookup_sig(head, &[]) {
            let owner = self.sig(s).owner;
            return self.find(owner);
        }
        let c = self.new_class();
        self.create_sig(head, Vec::new(), c, false, false, true);
        c
    }

    fn intern_app(&mut self, head: HeadRef, args: Vec<ClassId>) -> Result<ClassId, EngineError> {
        if let Some(s) = self.lookup_sig(head, &args) {
            let owner = self.sig(s).owner;
            return Ok(self.find(owner));
        }
        if let HeadRef::Op(op) = head {
            let (a, b) = (args[0], args[1]);
            if let (Some(x), Some(y)) = (self.literal_of_unreduced(a), self.literal_of_unreduced(b))
            {
                if let Some(r) = eval_op(op, x, y)? {
                    // evaluable directly: the signature joins the result
                    // literal's class as a reduced member
                    self.stats.builtin_evals += 1;
                    let rc = self.intern_literal(Self::lit_head(r));
                    let rc = self.find(rc);
                    self.create_sig(head, args, rc, true, true, false);
                    return Ok(rc);
                }
            }
        }
        let c = self.new_class();
        self.create_sig(head, args, c, false, false, true);
        Ok(c)
    }

    fn intern_with(
        &mut self,
        term: &Term,
        binding: Option<&Binding>,
    ) -> Result<ClassId, EngineError> {
        match term {
            Term::Var(v) => {
                let c = *binding
                    .expect("variables require a binding")
                    .get(v)
                    .expect("binding covers all rhs variables");
                Ok(self.find(c))
            }
            Term::Int(n) => Ok(self.intern_literal(HeadRef::Int(*n))),
            Term::Bool(b) => Ok(self.intern_literal(HeadRef::Bool(*b))),
            Term::App(s, children) => {
                let mut args = Vec::with_capacity(children.len());
                for ch in children {
                    args.push(self.intern_with(ch, binding)?);
                }
                self.intern_app(HeadRef::Sym(*s), args)
            }
            Term::Op(op, a, b) => {
                let x = self.intern_with(a, binding)?;
                let y = self.intern_with(b, binding)?;
                self.intern_app(HeadRef::Op(*op), vec![x, y])
            }
        }
    }

    /// Intern a ground term bottom-up, returning its class.
    pub fn intern(&mut self, term: &Term) -> Result<ClassId, EngineError> {
        debug_assert!(term.is_ground());
        self.intern_with(term, None)
    }

    // -- matching -----------------------------------------------------------

    fn unreduced_head(&mut self, c: ClassId) -> Option<(HeadRef, Vec<ClassId>)> {
        let c = self.find(c);
        let u = self.class(c).unreduced?;
        let d = self.sig(u);
        Some((d.head, d.args.clone()))
    }

    /// Match a rule's lhs against the unreduced signature of a class,
    /// top-down. A repeated variable must bind the same canonical class.
    pub fn match_rule(&mut self, class: ClassId, rule: &Rule) -> Option<Binding> {
        let c = self.find(class);
        let mut binding = Binding::new();
        if self.match_pattern(&rule.lhs, c, &mut binding) {
            Some(binding)
        } else {
            None
        }
    }

    fn match_pattern(&mut self, pattern: &Term, class: ClassId, binding: &mut Binding) -> bool {
        let c = self.find(class);
        match pattern {
            Term::Var(v) => match binding.get(v) {
                Some(prev) => *prev == c,
                None => {
                    binding.insert(*v, c);
                    true
                }
            },
            Term::Int(n) => matches!(self.unreduced_head(c), Some((HeadRef::Int(m), _)) if m == *n),
            Term::Bool(b) => {
                matches!(self.unreduced_head(c), Some((HeadRef::Bool(x), _)) if x == *b)
            }
            Term::App(s, ps) => match self.unreduced_head(c) {
                Some((HeadRef::Sym(h), args)) if h == *s => ps
                    .iter()
                    .zip(args.iter())
                    .all(|(p, a)| self.match_pattern(p, *a, binding)),
                _ => false,
            },
            Term::Op(op, p1, p2) => match self.unreduced_head(c) {
                Some((HeadRef::Op(h), args)) if h == *op => {
                    self.match_pattern(p1, args[0], binding)
                        && self.match_pattern(p2, args[1], binding)
                }
                _ => false,
            },
        }
    }

    // -- rule application ---------------------------------------------------

    fn mark_reduced(&mut self, s: SigId) {
        let owner = self.sig(s).owner;
        let owner = self.find(owner);
        self.state.sigs[s.0 as usize].reduced = true;
        if self.class(owner).unreduced == Some(s) {
            self.state.classes[owner.0 as usize].unreduced = None;
        }
        self.bump_epoch();
        if !self.sig(s).hidden {
            self.mark_dirty(owner);
        }
    }

    /// Apply a matched rule instance to a class: mark the unreduced
    /// signature reduced, then attach the rhs instance.
    pub fn apply(
        &mut self,
        class: ClassId,
        rule: &Rule,
        binding: &Binding,
    ) -> Result<(), EngineError> {
        let c = self.find(class);
        let u = self
            .class(c)
            .unreduced
            .expect("apply precondition: the class was matched on its unreduced signature");
        self.mark_reduced(u);
        *self.stats.rule_applications.entry(rule.id.0).or_insert(0) += 1;

        match &rule.rhs {
            Term::Var(v) => {
                let d = binding[v];
                self.merge(c, d);
            }
            Term::Int(n) => self.attach_rhs_atom(c, HeadRef::Int(*n)),
            Term::Bool(b) => self.attach_rhs_atom(c, HeadRef::Bool(*b)),
            Term::App(s, children) => {
                let mut args = Vec::with_capacity(children.len());
                for ch in children {
                    args.push(self.intern_with(ch, Some(binding))?);
                }
                self.attach_rhs_app(c, HeadRef::Sym(*s), args)?;
            }
            Term::Op(op, a, b) => {
                let x = self.intern_with(a, Some(binding))?;
                let y = self.intern_with(b, Some(binding))?;
                self.attach_rhs_app(c, HeadRef::Op(*op), vec![x, y])?;
            }
        }
        Ok(())
    }

    fn attach_rhs_atom(&mut self, c: ClassId, head: HeadRef) {
        if let Some(s) = self.lookup_sig(head, &[]) {
            let d = self.sig(s).owner;
            let d = self.find(d);
            self.merge(c, d);
        } else {
            let c = self.find(c);
            self.create_sig(head, Vec::new(), c, false, false, true);
        }
    }

    fn attach_rhs_app(
        &mut self,
        c: ClassId,
        head: HeadRef,
        args: Vec<ClassId>,
    ) -> Result<(), EngineError> {
        let c = self.find(c);
        if let Some(s) = self.lookup_sig(head, &args) {
            let d = self.sig(s).owner;
            let d = self.find(d);
            self.merge(c, d);
            return Ok(());
        }
        if let HeadRef::Op(op) = head {
            if let (Some(x), Some(y)) = (
                self.literal_of_unreduced(args[0]),
                self.literal_of_unreduced(args[1]),
            ) {
                if let Some(r) = eval_op(op, x, y)? {
                    self.stats.builtin_evals += 1;
                    let rc = self.intern_literal(Self::lit_head(r));
                    let rc = self.find(rc);
                    self.create_sig(head, args, rc, true, true, false);
                    self.merge(c, rc);
                    return Ok(());
                }
            }
        }
        self.create_sig(head, args, c, false, false, true);
        Ok(())
    }

    /// Evaluate the class's unreduced signature if it is a built-in
    /// operator over literal classes. Returns whether progress was made.
    pub fn evaluate_builtin(&mut self, class: ClassId) -> Result<bool, EngineError> {
        let c = self.find(class);
        let Some(u) = self.class(c).unreduced else {
            return Ok(false);
        };
        let (head, args) = {
            let d = self.sig(u);
            (d.head, d.args.clone())
        };
        let HeadRef::Op(op) = head else {
            return Ok(false);
        };
        let (Some(x), Some(y)) = (
            self.literal_of_unreduced(args[0]),
            self.literal_of_unreduced(args[1]),
        ) else {
            return Ok(false);
        };
        let Some(r) = eval_op(op, x, y)? else {
            return Ok(false);
        };
        self.stats.builtin_evals += 1;
        self.mark_reduced(u);
        self.attach_rhs_atom(c, Self::lit_head(r));
        Ok(true)
    }

    // -- merging ------------------------------------------------------------

    /// Union two classes and propagate congruences until fixpoint.
    /// Returns the canonical class afterwards.
    pub fn merge(&mut self, a: ClassId, b: ClassId) -> ClassId {
        let mut queue: VecDeque<(ClassId, ClassId)> = VecDeque::new();
        queue.push_back((a, b));
        while let Some((x, y)) = queue.pop_front() {
            let x = self.find(x);
            let y = self.find(y);
            if x == y {
                continue;
            }
            self.merge_one(x, y, &mut queue);
        }
        self.find(a)
    }

    fn alive_member_count(&self, c: ClassId) -> usize {
        self.class(c)
            .members
            .iter()
            .filter(|m| self.sig(**m).alive)
            .count()
    }

    fn merge_one(&mut self, x: ClassId, y: ClassId, queue: &mut VecDeque<(ClassId, ClassId)>) {
        // survivor: more member signatures; ties toward the smaller id
        let (nx, ny) = (self.alive_member_count(x), self.alive_member_count(y));
        let (survivor, absorbed) = if nx > ny || (nx == ny && x.0 < y.0) {
            (x, y)
        } else {
            (y, x)
        };
        self.stats.merges += 1;
        self.bump_epoch();
        self.state.parent[absorbed.0 as usize] = survivor.0;

        let moved = std::mem::take(&mut self.state.classes[absorbed.0 as usize].members);
        for &m in &moved {
            self.state.sigs[m.0 as usize].owner = survivor;
        }
        self.state.classes[survivor.0 as usize]
            .members
            .extend(moved);

        let absorbed_unreduced = self.state.classes[absorbed.0 as usize].unreduced.take();
        match (self.class(survivor).unreduced, absorbed_unreduced) {
            (_, None) => {}
            (None, Some(u)) => self.state.classes[survivor.0 as usize].unreduced = Some(u),
            // both sides still unreduced (congruence-propagation merge):
            // keep the survivor's, retire the other
            (Some(_), Some(u)) => self.state.sigs[u.0 as usize].reduced = true,
        }
        let other_flag = self.class(absorbed).all_never_add;
        self.state.classes[survivor.0 as usize].all_never_add &= other_flag;
        self.state.classes[absorbed.0 as usize].alive = false;
        self.mark_dirty(survivor);

        // renumber every signature that mentions the absorbed class
        let deps = std::mem::take(&mut self.state.classes[absorbed.0 as usize].dependents);
        for sig_id in deps {
            if !self.sig(sig_id).alive {
                continue;
            }
            if !self.sig(sig_id).args.contains(&absorbed) {
                // spurious entry left by an earlier rewrite; keep it attached
                self.state.classes[survivor.0 as usize]
                    .dependents
                    .push(sig_id);
                continue;
            }
            let old_key = {
                let d = self.sig(sig_id);
                (d.head, d.args.clone())
            };
            let removed = self.state.index.remove(&old_key);
            debug_assert_eq!(removed, Some(sig_id));
            for a in &mut self.state.sigs[sig_id.0 as usize].args {
                if *a == absorbed {
                    *a = survivor;
                }
            }
            if !self.sig(sig_id).hidden {
                let o = self.sig(sig_id).owner;
                let o = self.find(o);
                self.mark_dirty(o);
            }
            let new_key = {
                let d = self.sig(sig_id);
                (d.head, d.args.clone())
            };
            if let Some(&keeper) = self.state.index.get(&new_key) {
                self.dedup_sig(sig_id, keeper, queue);
            } else {
                self.state.index.insert(new_key, sig_id);
                self.state.classes[survivor.0 as usize]
                    .dependents
                    .push(sig_id);
            }
        }
    }

    /// Two signatures collided after renumbering: they now denote the same
    /// instance. Retire `dying`, fold its reduced flag into `keeper`, and
    /// schedule the owning classes for merging.
    fn dedup_sig(&mut self, dying: SigId, keeper: SigId, queue: &mut VecDeque<(ClassId, ClassId)>) {
        let d_owner = {
            let o = self.sig(dying).owner;
            self.find(o)
        };
        let k_owner = {
            let o = self.sig(keeper).owner;
            self.find(o)
        };
        if self.sig(dying).reduced && !self.sig(keeper).reduced {
            self.state.sigs[keeper.0 as usize].reduced = true;
            if self.class(k_owner).unreduced == Some(keeper) {
                self.state.classes[k_owner.0 as usize].unreduced = None;
                self.mark_dirty(k_owner);
            }
        }
        if self.class(d_owner).unreduced == Some(dying) {
            self.state.classes[d_owner.0 as usize].unreduced = None;
        }
        self.state.sigs[dying.0 as usize].alive = false;
        self.state.classes[d_owner.0 as usize]
            .members
            .retain(|m| *m != dying);
        if !self.sig(dying).hidden {
            self.mark_dirty(d_owner);
        }
        if d_owner != k_owner {
            queue.push_back((d_owner, k_owner));
        }
    }

    // -- don't-reduce / don't-add classification -----------------------------

    /// Is the class's unreduced signature a don't-reduce signature: a
    /// constructor constant or literal, or a constructor application whose
    /// argument classes hold don't-reduce unreduced signatures all the way
    /// down? No rule can match below such a class. Built-in operators are
    /// not constructors for this purpose.
    pub fn is_dont_reduce(&mut self, class: ClassId) -> bool {
        let c = self.find(class);
        let mut on_path = HashSet::new();
        self.dont_reduce_inner(c, &mut on_path)
    }

    fn dont_reduce_inner(&mut self, c: ClassId, on_path: &mut HashSet<u32>) -> bool {
        let c = self.find(c);
        if let Some((epoch, val)) = self.class(c).dont_reduce_cache {
            if epoch == self.state.epoch {
                return val;
            }
        }
        if !on_path.insert(c.0) {
            // cyclic structure is never derivably constructor-only
            return false;
        }
        let result = match self.unreduced_head(c) {
            None => false,
            Some((HeadRef::Int(_), _)) | Some((HeadRef::Bool(_), _)) => true,
            Some((HeadRef::Op(_), _)) => false,
            Some((HeadRef::Sym(s), args)) => {
                if self.program.symbol(s).kind == SymbolKind::Defined {
                    false
                } else {
                    args.iter().all(|a| self.dont_reduce_inner(*a, on_path))
                }
            }
        };
        on_path.remove(&c.0);
        let epoch = self.state.epoch;
        self.state.classes[c.0 as usize].dont_reduce_cache = Some((epoch, result));
        result
    }

    /// Snapshot classification: a class is don't-add iff every member is a
    /// constructor constant or a constructor application over don't-add
    /// classes. This is computed to fixpoint over the whole table and used
    /// only by tests and audits; the live engine suppresses dependency
    /// entries using the never-add subset instead.
    pub fn classify_dont_add_snapshot(&mut self) -> BTreeMap<ClassId, bool> {
        let live = self.live_classes();
        let mut da: HashMap<u32, bool> = live.iter().map(|c| (c.0, false)).collect();
        loop {
            let mut changed = false;
            for &c in &live {
                if da[&c.0] {
                    continue;
                }
                let members = self.class(c).members.clone();
                let ok = members.iter().all(|&m| {
                    let d = self.sig(m);
                    if !d.alive {
                        return true;
                    }
                    match d.head {
                        HeadRef::Int(_) | HeadRef::Bool(_) => true,
                        HeadRef::Op(_) => false,
                        HeadRef::Sym(s) => {
                            if self.program.symbol(s).kind == SymbolKind::Defined {
                                false
                            } else if d.args.is_empty() {
                                true
                            } else {
                                let args = d.args.clone();
                                args.iter().all(|a| {
                                    let a = {
                                        let mut i = a.0 as usize;
                                        loop {
                                            let p = self.state.parent[i];
                                            if p as usize == i {
                                                break ClassId(p);
                                            }
                                            i = p as usize;
                                        }
                                    };
                                    da.get(&a.0).copied().unwrap_or(false)
                                })
                            }
                        }
                    }
                });
                if ok {
                    da.insert(c.0, true);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        da.into_iter().map(|(c, v)| (ClassId(c), v)).collect()
    }

    // -- extraction ----------------------------------------------------------

    /// Build the distinguished term of a class from unreduced signatures.
    pub fn extract_term(&mut self, class: ClassId) -> Result<Term, ExtractError> {
        let mut path = HashSet::new();
        self.extract_inner(class, &mut path)
    }

    fn extract_inner(
        &mut self,
        class: ClassId,
        path: &mut HashSet<u32>,
    ) -> Result<Term, ExtractError> {
        let c = self.find(class);
        if !path.insert(c.0) {
            return Err(ExtractError::Cycle(c));
        }
        let Some((head, args)) = self.unreduced_head(c) else {
            return Err(ExtractError::MissingUnreduced(c));
        };
        let t = match head {
            HeadRef::Int(n) => Term::Int(n),
            HeadRef::Bool(b) => Term::Bool(b),
            HeadRef::Sym(s) => {
                let mut children = Vec::with_capacity(args.len());
                for a in args {
                    children.push(self.extract_inner(a, path)?);
                }
                Term::App(s, children)
            }
            HeadRef::Op(op) => {
                let a = self.extract_inner(args[0], path)?;
                let b = self.extract_inner(args[1], path)?;
                Term::Op(op, Box::new(a), Box::new(b))
            }
        };
        path.remove(&c.0);
        Ok(t)
    }

    // -- main loop ------------------------------------------------------------

    /// Compute goal-dependent inputs: the never-add sets and the active
    /// rule mask. Called by [`Self::normalize`]; exposed so the individual
    /// operations can be driven directly in tests.
    pub fn prepare_goal(&mut self, goal: &Term) -> Result<(), EngineError> {
        if self.options.prune_rules {
            let g = analysis::build_needs_graph(self.program);
            let reachable = analysis::reachable_defined_symbols(&g, self.program, goal);
            let mask: Vec<bool> = self
                .program
                .rules
                .iter()
                .map(|r| reachable.contains(&r.lhs_root()))
                .collect();
            if self.goals_prepared == 0 {
                self.active_rules = mask;
            } else {
                for (cur, new) in self.active_rules.iter_mut().zip(mask) {
                    *cur = *cur || new;
                }
            }
        }
        if self.options.never_add {
            let fresh = analysis::never_add_sets(self.program, Some(goal));
            match &self.never_add {
                None => self.never_add = Some(fresh),
                Some(prev) => {
                    let tightened =
                        (prev.int_safe && !fresh.int_safe) || (prev.bool_safe && !fresh.bool_safe);
                    if tightened {
                        if self.state.never_add_flags > 0 {
                            return Err(EngineError::NeverAddInvalidated);
                        }
                        let mut merged = prev.clone();
                        merged.int_safe &= fresh.int_safe;
                        merged.bool_safe &= fresh.bool_safe;
                        self.never_add = Some(merged);
                    }
                }
            }
        }
        self.goals_prepared += 1;
        Ok(())
    }

    /// Leftmost-outermost search for one piece of progress (a rule
    /// application or a built-in evaluation), restarting from the root
    /// after each applied step.
    fn find_progress(
        &mut self,
        class: ClassId,
        visited: &mut HashSet<u32>,
    ) -> Result<bool, EngineError> {
        let c = self.find(class);
        if !visited.insert(c.0) {
            return Ok(false);
        }
        let Some(u) = self.class(c).unreduced else {
            return Ok(false);
        };
        if self.options.dont_reduce && self.is_dont_reduce(c) {
            self.stats.match_attempts_skipped_dont_reduce += self.active_rule_count();
            return Ok(false);
        }
        let program = self.program;
        for (i, rule) in program.rules.iter().enumerate() {
            if !self.active_rules[i] {
                continue;
            }
            self.stats.match_attempts += 1;
            if let Some(binding) = self.match_rule(c, rule) {
                self.apply(c, rule, &binding)?;
                return Ok(true);
            }
        }
        let (head, args) = {
            let d = self.sig(u);
            (d.head, d.args.clone())
        };
        if matches!(head, HeadRef::Op(_)) && self.evaluate_builtin(c)? {
            return Ok(true);
        }
        for a in args {
            if self.find_progress(a, visited)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Normalize a ground goal in this engine's table. Repeated calls
    /// reuse everything already computed.
    pub fn normalize(&mut self, goal: &Term) -> Result<NormalizeResult, EngineError> {
        assert!(goal.is_ground(), "goal must be ground");
        self.prepare_goal(goal)?;
        let trace_start = self.state.trace_lines.len();
        let root = self.intern(goal)?;
        self.flush_trace_step();
        self.state.root = Some(root);
        if self.options.audit {
            self.audit()?;
        }
        let mut steps = 0u64;
        let outcome = loop {
            let root = self.find(root);
            if steps >= self.options.max_steps {
                let partial = self.extract_term(root).ok();
                break Outcome::StepLimitReached { partial };
            }
            let mut visited = HashSet::new();
            if !self.find_progress(root, &mut visited)? {
                match self.extract_term(root) {
                    Ok(t) => break Outcome::NormalForm(t),
                    Err(ExtractError::Cycle(w)) => {
                        break Outcome::NoFiniteNormalForm { witness: w }
                    }
                    Err(ExtractError::MissingUnreduced(c)) => {
                        return Err(EngineError::MissingUnreduced(c))
                    }
                }
            }
            steps += 1;
            self.flush_trace_step();
            if self.options.audit {
                self.audit()?;
            }
        };
        Ok(NormalizeResult {
            outcome,
            stats: self.stats.clone(),
            trace: self.state.trace_lines[trace_start..].to_vec(),
        })
    }

    // -- audits ----------------------------------------------------------------

    /// Full-table consistency check: congruence soundness, the
    /// single-unreduced invariant, dependency completeness, and the
    /// never-add / don't-add / don't-reduce subset hierarchy.
    pub fn audit(&mut self) -> Result<(), EngineError> {
        let fail = |msg: String| Err(EngineError::Audit(msg));

        // signatures: canonical args, unique canonical tuples, index agreement
        let mut seen: HashMap<(HeadRef, Vec<ClassId>), (SigId, ClassId)> = HashMap::new();
        for i in 0..self.state.sigs.len() {
            let id = SigId(i as u32);
            if !self.sig(id).alive {
                continue;
            }
            let (head, args, owner) = {
                let d = self.sig(id);
                (d.head, d.args.clone(), d.owner)
            };
            for a in &args {
                if self.find(*a) != *a {
                    return fail(format!(
                        "signature {} holds a stale class number {}",
                        self.render_sig(id),
                        a
                    ));
                }
            }
            let owner_c = self.find(owner);
            if owner != owner_c || !self.class(owner_c).alive {
                return fail(format!(
                    "signature {} has a stale owner",
                    self.render_sig(id)
                ));
            }
            if !self.class(owner_c).members.contains(&id) {
                return fail(format!(
                    "signature {} missing from its class member list",
                    self.render_sig(id)
                ));
            }
            match seen.insert((head, args.clone()), (id, owner_c)) {
                Some((_, other_owner)) if other_owner != owner_c => {
                    return fail(format!(
                        "congruence violation: two copies of {} live in classes {} and {}",
                        self.render_sig(id),
                        other_owner,
                        owner_c
                    ));
                }
                Some(_) => {
                    return fail(format!("duplicate signature {}", self.render_sig(id)));
                }
                None => {}
            }
            if self.state.index.get(&(head, args)) != Some(&id) {
                return fail(format!(
                    "index does not map {} to its signature",
                    self.render_sig(id)
                ));
            }
        }

        // classes: at most one unreduced member, slot agreement
        for c in self.live_classes() {
            let members = self.class(c).members.clone();
            let unreduced_members: Vec<SigId> = members
                .iter()
                .copied()
                .filter(|m| self.sig(*m).alive && !self.sig(*m).reduced)
                .collect();
            if unreduced_members.len() > 1 {
                return fail(format!(
                    "class {c} has {} unreduced members",
                    unreduced_members.len()
                ));
            }
            if self.class(c).unreduced != unreduced_members.first().copied() {
                return fail(format!("class {c} unreduced slot disagrees with members"));
            }
            if members.iter().all(|m| !self.sig(*m).alive) {
                return fail(format!("class {c} has no live members"));
            }
        }

        // dependency completeness
        for i in 0..self.state.sigs.len() {
            let id = SigId(i as u32);
            if !self.sig(id).alive || self.sig(id).never_add {
                continue;
            }
            let mut args = self.sig(id).args.clone();
            args.sort();
            args.dedup();
            for a in args {
                let a = self.find(a);
                if !self.class(a).dependents.contains(&id) {
                    return fail(format!(
                        "signature {} missing from dependency list of class {}",
                        self.render_sig(id),
                        a
                    ));
                }
            }
        }

        // subset hierarchy: never-add classes <= don't-add <= don't-reduce
        let da = self.classify_dont_add_snapshot();
        for i in 0..self.state.sigs.len() {
            let id = SigId(i as u32);
            if !self.sig(id).alive || !self.sig(id).never_add {
                continue;
            }
            let owner = self.sig(id).owner;
            let owner = self.find(owner);
            if !da.get(&owner).copied().unwrap_or(false) {
                return fail(format!(
                    "never-add signature {} lives in class {} which is not don't-add",
                    self.render_sig(id),
                    owner
                ));
            }
        }
        for (c, is_da) in &da {
            if *is_da && !self.is_dont_reduce(*c) {
                return fail(format!("don't-add class {c} is not don't-reduce"));
            }
        }
        Ok(())
    }
}

/// One-shot convenience wrapper over [`TablingEngine`].
pub fn normalize_tabled(
    program: &Program,
    goal: &Term,
    options: EngineOptions,
) -> Result<NormalizeResult, EngineError> {
    let mut engine = TablingEngine::new(program, options);
    engine.normalize(goal)
}
