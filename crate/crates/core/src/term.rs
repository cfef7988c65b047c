//! Term, rule and program data model.
//!
//! A program is a symbol table plus an ordered list of directed equations.
//! Symbols are interned; terms refer to them by [`SymbolId`]. The only
//! built-in value types are 64-bit signed integers and booleans, with the
//! six operators `+ - * > < ==`. Arithmetic is checked: overflow is an
//! error, never a wrap.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

/// Index into [`Program::symbols`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SymbolId(pub u32);

/// Index into [`Program::variables`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub u32);

/// Rule ordinal, assigned in file order starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RuleId(pub u32);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The six built-in binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BuiltinOp {
    Add,
    Sub,
    Mul,
    Gt,
    Lt,
    Eq,
}

impl BuiltinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BuiltinOp::Add => "+",
            BuiltinOp::Sub => "-",
            BuiltinOp::Mul => "*",
            BuiltinOp::Gt => ">",
            BuiltinOp::Lt => "<",
            BuiltinOp::Eq => "==",
        }
    }

    /// Operand type consumed by this operator. All six take integers;
    /// `==` additionally accepts a pair of booleans.
    pub fn takes_int(self) -> bool {
        true
    }

    pub fn takes_bool(self) -> bool {
        matches!(self, BuiltinOp::Eq)
    }

    /// Result type(s) produced: (can produce int, can produce bool).
    pub fn produces(self) -> (bool, bool) {
        match self {
            BuiltinOp::Add | BuiltinOp::Sub | BuiltinOp::Mul => (true, false),
            BuiltinOp::Gt | BuiltinOp::Lt | BuiltinOp::Eq => (false, true),
        }
    }
}

impl fmt::Display for BuiltinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A literal value of one of the two built-in types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LitVal {
    Int(i64),
    Bool(bool),
}

impl fmt::Display for LitVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LitVal::Int(n) => write!(f, "{n}"),
            LitVal::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Raised when a built-in arithmetic step leaves the i64 range.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("integer overflow evaluating `{lhs} {op} {rhs}`")]
pub struct OverflowError {
    pub op: BuiltinOp,
    pub lhs: i64,
    pub rhs: i64,
}

/// Evaluate one operator application on literals.
///
/// Returns `Ok(None)` when the operand types do not fit the operator
/// (for example `true + 1`); such a term is simply stuck, not an error.
pub fn eval_op(op: BuiltinOp, a: LitVal, b: LitVal) -> Result<Option<LitVal>, OverflowError> {
    let out = match (op, a, b) {
        (BuiltinOp::Add, LitVal::Int(x), LitVal::Int(y)) => {
            Some(LitVal::Int(x.checked_add(y).ok_or(OverflowError {
                op,
                lhs: x,
                rhs: y,
            })?))
        }
        (BuiltinOp::Sub, LitVal::Int(x), LitVal::Int(y)) => {
            Some(LitVal::Int(x.checked_sub(y).ok_or(OverflowError {
                op,
                lhs: x,
                rhs: y,
            })?))
        }
        (BuiltinOp::Mul, LitVal::Int(x), LitVal::Int(y)) => {
            Some(LitVal::Int(x.checked_mul(y).ok_or(OverflowError {
                op,
                lhs: x,
                rhs: y,
            })?))
        }
        (BuiltinOp::Gt, LitVal::Int(x), LitVal::Int(y)) => Some(LitVal::Bool(x > y)),
        (BuiltinOp::Lt, LitVal::Int(x), LitVal::Int(y)) => Some(LitVal::Bool(x < y)),
        (BuiltinOp::Eq, LitVal::Int(x), LitVal::Int(y)) => Some(LitVal::Bool(x == y)),
        (BuiltinOp::Eq, LitVal::Bool(x), LitVal::Bool(y)) => Some(LitVal::Bool(x == y)),
        _ => None,
    };
    Ok(out)
}

/// Classification of a user symbol.
///
/// A symbol is defined when it is the outermost symbol of some rule's
/// left-hand side; every other symbol is a constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymbolKind {
    Defined,
    Constructor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
    pub kind: SymbolKind,
}

/// A finite ordered tree over symbols, variables and literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    App(SymbolId, Vec<Term>),
    Op(BuiltinOp, Box<Term>, Box<Term>),
    Var(VarId),
    Int(i64),
    Bool(bool),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) | Term::Bool(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
            Term::Op(_, a, b) => a.is_ground() && b.is_ground(),
        }
    }

    /// Collect every variable occurrence into `out` (with repetitions).
    pub fn collect_vars(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Var(v) => out.push(*v),
            Term::Int(_) | Term::Bool(_) => {}
            Term::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            Term::Op(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Visit every non-variable head occurrence (symbols, operators, literals).
    pub fn visit_heads<F: FnMut(HeadRef)>(&self, f: &mut F) {
        match self {
            Term::Var(_) => {}
            Term::Int(n) => f(HeadRef::Int(*n)),
            Term::Bool(b) => f(HeadRef::Bool(*b)),
            Term::App(s, args) => {
                f(HeadRef::Sym(*s));
                for a in args {
                    a.visit_heads(f);
                }
            }
            Term::Op(op, a, b) => {
                f(HeadRef::Op(*op));
                a.visit_heads(f);
                b.visit_heads(f);
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Int(_) | Term::Bool(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            Term::Op(_, a, b) => 1 + a.size() + b.size(),
        }
    }
}

/// A head occurrence inside a term, as seen by the analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadRef {
    Sym(SymbolId),
    Op(BuiltinOp),
    Int(i64),
    Bool(bool),
}

/// A directed equation `lhs -> rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: Term,
    pub rhs: Term,
    /// No variable occurs twice in the lhs.
    pub left_linear: bool,
    /// The rhs is a bare variable.
    pub collapsing: bool,
}

impl Rule {
    /// The defined symbol rooting the lhs.
    pub fn lhs_root(&self) -> SymbolId {
        match &self.lhs {
            Term::App(s, _) => *s,
            _ => unreachable!("validated rules have a symbol-rooted lhs"),
        }
    }
}

/// A validated program: symbol table, declared variables, ordered rules.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub symbols: Vec<Symbol>,
    pub variables: Vec<String>,
    pub rules: Vec<Rule>,
    name_index: HashMap<String, SymbolId>,
}

impl Program {
    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.0 as usize]
    }

    pub fn lookup_symbol(&self, name: &str) -> Option<SymbolId> {
        self.name_index.get(name).copied()
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.variables[id.0 as usize]
    }

    pub fn lookup_var(&self, name: &str) -> Option<VarId> {
        self.variables
            .iter()
            .position(|v| v == name)
            .map(|i| VarId(i as u32))
    }

    pub fn is_defined(&self, id: SymbolId) -> bool {
        self.symbol(id).kind == SymbolKind::Defined
    }

    pub fn rule(&self, id: RuleId) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Register a symbol, enforcing one arity per name. Used by the parser.
    pub(crate) fn intern_symbol(
        &mut self,
        name: &str,
        arity: usize,
    ) -> Result<SymbolId, (usize, usize)> {
        if let Some(id) = self.name_index.get(name) {
            let have = self.symbols[id.0 as usize].arity;
            if have != arity {
                return Err((have, arity));
            }
            return Ok(*id);
        }
        let id = SymbolId(self.symbols.len() as u32);
        self.symbols.push(Symbol {
            name: name.to_string(),
            arity,
            kind: SymbolKind::Constructor,
        });
        self.name_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub(crate) fn declare_var(&mut self, name: &str) -> VarId {
        if let Some(v) = self.lookup_var(name) {
            return v;
        }
        let id = VarId(self.variables.len() as u32);
        self.variables.push(name.to_string());
        id
    }

    /// Re-derive symbol kinds from the current rule list.
    pub(crate) fn assign_kinds(&mut self) {
        for s in &mut self.symbols {
            s.kind = SymbolKind::Constructor;
        }
        let roots: Vec<SymbolId> = self.rules.iter().map(|r| r.lhs_root()).collect();
        for r in roots {
            self.symbols[r.0 as usize].kind = SymbolKind::Defined;
        }
    }

    /// Copy of this program with the given rules removed. Remaining rules
    /// keep their original ids.
    pub fn without_rules(&self, drop: &HashSet<RuleId>) -> Program {
        let mut p = self.clone();
        p.rules.retain(|r| !drop.contains(&r.id));
        p.assign_kinds();
        p
    }
}

/// How a symbol is treated by the two halves of the system.
///
/// The needs-graph analyses count the built-in operators as constructor
/// functions; the signature classifications (don't-reduce, don't-add,
/// never-add) do not. The two flags record both views so callers never
/// have to re-derive the distinction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymbolClassification {
    pub kind: SymbolKind,
    pub constructor_in_analysis: bool,
    pub constructor_in_signature_classes: bool,
}

/// Classify every user symbol of the program.
pub fn classify_symbols(program: &Program) -> BTreeMap<SymbolId, SymbolClassification> {
    let mut out = BTreeMap::new();
    for (i, sym) in program.symbols.iter().enumerate() {
        let defined = sym.kind == SymbolKind::Defined;
        out.insert(
            SymbolId(i as u32),
            SymbolClassification {
                kind: sym.kind,
                constructor_in_analysis: !defined,
                constructor_in_signature_classes: !defined,
            },
        );
    }
    out
}

/// Classification of a built-in operator occurrence: constructor for the
/// needs-graph analyses, not a constructor for the signature classes.
pub fn classify_builtin_op() -> SymbolClassification {
    SymbolClassification {
        kind: SymbolKind::Constructor,
        constructor_in_analysis: true,
        constructor_in_signature_classes: false,
    }
}

/// Literals of the predefined types are constructors in both views.
pub fn classify_literal() -> SymbolClassification {
    SymbolClassification {
        kind: SymbolKind::Constructor,
        constructor_in_analysis: true,
        constructor_in_signature_classes: true,
    }
}

// ---------------------------------------------------------------------------
// printing

fn op_prec(op: BuiltinOp) -> u8 {
    match op {
        BuiltinOp::Gt | BuiltinOp::Lt | BuiltinOp::Eq => 1,
        BuiltinOp::Add | BuiltinOp::Sub => 2,
        BuiltinOp::Mul => 3,
    }
}

fn write_term(t: &Term, p: &Program, min_prec: u8, out: &mut String) {
    match t {
        Term::Var(v) => out.push_str(p.var_name(*v)),
        Term::Int(n) => out.push_str(&n.to_string()),
        Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Term::App(s, args) => {
            out.push_str(&p.symbol(*s).name);
            if !args.is_empty() {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_term(a, p, 0, out);
                }
                out.push(')');
            }
        }
        Term::Op(op, a, b) => {
            let prec = op_prec(*op);
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_term(a, p, prec, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            // left-assoc: the right child needs parens at equal precedence
            write_term(b, p, prec + 1, out);
            if paren {
                out.push(')');
            }
        }
    }
}

/// Render a term in the program's concrete syntax.
pub fn term_to_text(t: &Term, p: &Program) -> String {
    let mut s = String::new();
    write_term(t, p, 0, &mut s);
    s
}

/// Render a whole program; parsing the result yields a structurally
/// identical program.
pub fn program_to_text(p: &Program) -> String {
    let mut s = String::new();
    if !p.variables.is_empty() {
        s.push_str("vars ");
        s.push_str(&p.variables.join(" "));
        s.push_str(";\n");
    }
    for r in &p.rules {
        s.push_str(&term_to_text(&r.lhs, p));
        s.push_str(" -> ");
        s.push_str(&term_to_text(&r.rhs, p));
        s.push_str(";\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn eval_op_basics() {
        assert_eq!(
            eval_op(BuiltinOp::Add, LitVal::Int(1), LitVal::Int(1)).unwrap(),
            Some(LitVal::Int(2))
        );
        assert_eq!(
            eval_op(BuiltinOp::Gt, LitVal::Int(2), LitVal::Int(1)).unwrap(),
            Some(LitVal::Bool(true))
        );
        assert_eq!(
            eval_op(BuiltinOp::Eq, LitVal::Bool(true), LitVal::Bool(true)).unwrap(),
            Some(LitVal::Bool(true))
        );
        // mixed types are stuck, not an error
        assert_eq!(
            eval_op(BuiltinOp::Add, LitVal::Bool(true), LitVal::Int(1)).unwrap(),
            None
        );
    }

    #[test]
    fn eval_op_overflow_is_an_error() {
        let err = eval_op(BuiltinOp::Add, LitVal::Int(i64::MAX), LitVal::Int(1)).unwrap_err();
        assert_eq!(err.op, BuiltinOp::Add);
        assert!(eval_op(BuiltinOp::Mul, LitVal::Int(i64::MIN), LitVal::Int(-1)).is_err());
    }

    #[test]
    fn programs_and_terms_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Program>();
        assert_send_sync::<Term>();
        assert_send_sync::<Rule>();
    }

    #[test]
    fn classify_depends_only_on_lhs_roots() {
        let p = parse_program(crate::corpus::FIB_PROGRAM).unwrap();
        let c = classify_symbols(&p);
        let fib = p.lookup_symbol("fib").unwrap();
        let f = p.lookup_symbol("f").unwrap();
        assert_eq!(c[&fib].kind, SymbolKind::Defined);
        assert_eq!(c[&f].kind, SymbolKind::Defined);
        assert!(!c[&fib].constructor_in_analysis);
        // literals and operators
        assert!(classify_literal().constructor_in_signature_classes);
        assert!(classify_builtin_op().constructor_in_analysis);
        assert!(!classify_builtin_op().constructor_in_signature_classes);
        // deterministic
        assert_eq!(c, classify_symbols(&p));
    }

    #[test]
    fn classify_zero_rule_program() {
        // every symbol mentioned only in a dropped rule stays a constructor
        let p = parse_program("vars x; g(x) -> h(x);").unwrap();
        let mut drop = HashSet::new();
        drop.insert(RuleId(1));
        let q = p.without_rules(&drop);
        assert!(q.rules.is_empty());
        for s in &q.symbols {
            assert_eq!(s.kind, SymbolKind::Constructor);
        }
    }
}
