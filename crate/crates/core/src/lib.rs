//! Equational logic programming engine.
//!
//! Programs are sets of directed equations over user symbols plus built-in
//! integer and boolean arithmetic. Two normalization engines are provided:
//! a tabled one based on congruence closure ([`tabling`]) that applies
//! each rule instance at most once and can report the absence of a finite
//! normal form, and a plain leftmost-outermost tree rewriter ([`rewrite`])
//! used as the untabled baseline. The [`analysis`] module builds the needs
//! graph of a program and evaluates the static conditions under which
//! tabling can improve termination or save work, computes the reachable
//! rule set for pruning, and derives the never-add signature sets consumed
//! by the tabled engine.

pub mod analysis;
pub mod corpus;
pub mod parser;
pub mod rewrite;
pub mod tabling;
pub mod term;

pub use analysis::{analyze, build_needs_graph, AnalysisReport, AnalyzeOptions, NeedsGraph};
pub use parser::{parse_program, parse_term, ParseError};
pub use rewrite::{normalize_untabled, rewrite_step, RewriteOutcome, RewriteResult};
pub use tabling::{
    normalize_tabled, Binding, ClassId, EngineError, EngineOptions, NormalizeResult, Outcome,
    Stats, TablingEngine,
};
pub use term::{
    classify_symbols, program_to_text, term_to_text, BuiltinOp, LitVal, OverflowError, Program,
    Rule, RuleId, Symbol, SymbolId, SymbolKind, Term, VarId,
};
