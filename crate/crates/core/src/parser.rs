//! Text format for programs and goal terms.
//!
//! ```text
//! program  := { vardecl | rule }
//! vardecl  := "vars" ident+ ";"
//! rule     := term "->" term ";"
//! term     := ident "(" term { "," term } ")" | ident | int | "true" | "false"
//!             | term binop term | "(" term ")"
//! binop    := "+" | "-" | "*" | ">" | "<" | "=="
//! ```
//!
//! `#` starts a line comment. User symbols are strictly prefix; the six
//! built-in operators are infix with `*` binding tighter than `+ -`, which
//! bind tighter than the comparisons (all left-associative). Variables must
//! be declared with `vars` before the first rule that uses them; this keeps
//! constants and variables unambiguous. Integer literals must fit in i64.

use std::fmt;

use crate::term::{BuiltinOp, Program, Rule, RuleId, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    IntOutOfRange(String),
    ArityMismatch {
        name: String,
        have: usize,
        used: usize,
    },
    UnknownSymbol(String),
    VarAsFunction(String),
    NameClash(String),
    LhsRootVariable,
    LhsRootLiteral,
    LhsRootBuiltin,
    RhsVarNotInLhs(String),
    NonGroundGoal(String),
}

/// Parse or validation failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::IntOutOfRange(s) => {
                write!(f, "integer literal `{s}` does not fit in 64 bits")
            }
            ParseErrorKind::ArityMismatch { name, have, used } => write!(
                f,
                "arity mismatch: `{name}` has arity {have} but is used with {used} argument(s)"
            ),
            ParseErrorKind::UnknownSymbol(n) => write!(f, "unknown symbol `{n}`"),
            ParseErrorKind::VarAsFunction(n) => {
                write!(f, "variable `{n}` used as a function symbol")
            }
            ParseErrorKind::NameClash(n) => {
                write!(
                    f,
                    "`{n}` is already in use as both would-be symbol and variable"
                )
            }
            ParseErrorKind::LhsRootVariable => {
                write!(f, "left-hand side of a rule must not be a variable")
            }
            ParseErrorKind::LhsRootLiteral => {
                write!(f, "left-hand side of a rule must not be a literal")
            }
            ParseErrorKind::LhsRootBuiltin => write!(
                f,
                "left-hand side of a rule must be rooted in a user-defined symbol"
            ),
            ParseErrorKind::RhsVarNotInLhs(n) => write!(
                f,
                "right-hand side variable `{n}` does not occur in the left-hand side"
            ),
            ParseErrorKind::NonGroundGoal(n) => {
                write!(f, "goal term must be ground, found variable `{n}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    True,
    False,
    Vars,
    LParen,
    RParen,
    Comma,
    Semi,
    Arrow,
    Op(BuiltinOp),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    macro_rules! push {
        ($t:expr, $l:expr, $c:expr) => {
            out.push(Spanned {
                tok: $t,
                line: $l,
                col: $c,
            })
        };
    }
    while let Some(&c) = chars.peek() {
        let (l, co) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, l, co);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, l, co);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, l, co);
            }
            ';' => {
                chars.next();
                col += 1;
                push!(Tok::Semi, l, co);
            }
            '+' => {
                chars.next();
                col += 1;
                push!(Tok::Op(BuiltinOp::Add), l, co);
            }
            '*' => {
                chars.next();
                col += 1;
                push!(Tok::Op(BuiltinOp::Mul), l, co);
            }
            '<' => {
                chars.next();
                col += 1;
                push!(Tok::Op(BuiltinOp::Lt), l, co);
            }
            '>' => {
                chars.next();
                col += 1;
                push!(Tok::Op(BuiltinOp::Gt), l, co);
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, l, co);
                } else {
                    push!(Tok::Op(BuiltinOp::Sub), l, co);
                }
            }
            '=' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Op(BuiltinOp::Eq), l, co);
                } else {
                    return Err(ParseError {
                        line: l,
                        col: co,
                        kind: ParseErrorKind::Syntax("expected `==`".into()),
                    });
                }
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let n: i64 = s.parse().map_err(|_| ParseError {
                    line: l,
                    col: co,
                    kind: ParseErrorKind::IntOutOfRange(s.clone()),
                })?;
                push!(Tok::Int(n), l, co);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let t = match s.as_str() {
                    "vars" => Tok::Vars,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(s),
                };
                push!(t, l, co);
            }
            other => {
                return Err(ParseError {
                    line: l,
                    col: co,
                    kind: ParseErrorKind::Syntax(format!("unexpected character `{other}`")),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Whether term parsing may create new symbols (program text) or must
/// resolve against an existing table (goal text).
enum Mode {
    Rules,
    Goal,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    program: Program,
    mode: Mode,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.line,
            col: t.col,
            kind,
        }
    }

    fn err_at(&self, t: &Spanned, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: t.line,
            col: t.col,
            kind,
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            Err(self.err(ParseErrorKind::Syntax(format!("expected {what}"))))
        }
    }

    fn parse_expr(&mut self) -> Result<Term, ParseError> {
        self.parse_binop_level(1)
    }

    fn parse_binop_level(&mut self, min_prec: u8) -> Result<Term, ParseError> {
        if min_prec > 3 {
            return self.parse_atom();
        }
        let mut lhs = self.parse_binop_level(min_prec + 1)?;
        loop {
            let op = match self.peek().tok {
                Tok::Op(op) if prec_of(op) == min_prec => op,
                _ => break,
            };
            self.next();
            let rhs = self.parse_binop_level(min_prec + 1)?;
            lhs = Term::Op(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_atom(&mut self) -> Result<Term, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Int(n) => Ok(Term::Int(n)),
            Tok::True => Ok(Term::Bool(true)),
            Tok::False => Ok(Term::Bool(false)),
            Tok::LParen => {
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(ref name) => {
                let name = name.clone();
                self.parse_ident(&t, name)
            }
            _ => Err(self.err_at(&t, ParseErrorKind::Syntax("expected a term".into()))),
        }
    }

    fn parse_ident(&mut self, at: &Spanned, name: String) -> Result<Term, ParseError> {
        if let Some(v) = self.program.lookup_var(&name) {
            if self.peek().tok == Tok::LParen {
                return Err(self.err_at(at, ParseErrorKind::VarAsFunction(name)));
            }
            return match self.mode {
                Mode::Rules => Ok(Term::Var(v)),
                Mode::Goal => Err(self.err_at(at, ParseErrorKind::NonGroundGoal(name))),
            };
        }
        let mut args = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            loop {
                args.push(self.parse_expr()?);
                match self.next().tok {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => return Err(self.err(ParseErrorKind::Syntax("expected `,` or `)`".into()))),
                }
            }
        }
        let id = match self.mode {
            Mode::Rules => {
                self.program
                    .intern_symbol(&name, args.len())
                    .map_err(|(have, used)| {
                        self.err_at(at, ParseErrorKind::ArityMismatch { name, have, used })
                    })?
            }
            Mode::Goal => {
                let id = self
                    .program
                    .lookup_symbol(&name)
                    .ok_or_else(|| self.err_at(at, ParseErrorKind::UnknownSymbol(name.clone())))?;
                let have = self.program.symbol(id).arity;
                if have != args.len() {
                    return Err(self.err_at(
                        at,
                        ParseErrorKind::ArityMismatch {
                            name,
                            have,
                            used: args.len(),
                        },
                    ));
                }
                id
            }
        };
        Ok(Term::App(id, args))
    }

    fn parse_vardecl(&mut self) -> Result<(), ParseError> {
        // "vars" already consumed
        let mut seen_one = false;
        loop {
            let t = self.next();
            match t.tok {
                Tok::Ident(ref name) => {
                    let name = name.clone();
                    if self.program.lookup_symbol(&name).is_some() {
                        return Err(self.err_at(&t, ParseErrorKind::NameClash(name)));
                    }
                    self.program.declare_var(&name);
                    seen_one = true;
                }
                Tok::Semi if seen_one => return Ok(()),
                _ => {
                    return Err(self.err_at(
                        &t,
                        ParseErrorKind::Syntax("expected variable name or `;`".into()),
                    ))
                }
            }
        }
    }

    fn parse_rule(&mut self) -> Result<(), ParseError> {
        let at = self.peek().clone();
        let lhs = self.parse_expr()?;
        self.expect(Tok::Arrow, "`->`")?;
        let rhs = self.parse_expr()?;
        self.expect(Tok::Semi, "`;`")?;

        match &lhs {
            Term::Var(_) => return Err(self.err_at(&at, ParseErrorKind::LhsRootVariable)),
            Term::Int(_) | Term::Bool(_) => {
                return Err(self.err_at(&at, ParseErrorKind::LhsRootLiteral))
            }
            Term::Op(..) => return Err(self.err_at(&at, ParseErrorKind::LhsRootBuiltin)),
            Term::App(..) => {}
        }

        let mut lhs_vars = Vec::new();
        lhs.collect_vars(&mut lhs_vars);
        let mut rhs_vars = Vec::new();
        rhs.collect_vars(&mut rhs_vars);
        for v in &rhs_vars {
            if !lhs_vars.contains(v) {
                let name = self.program.var_name(*v).to_string();
                return Err(self.err_at(&at, ParseErrorKind::RhsVarNotInLhs(name)));
            }
        }
        let mut sorted = lhs_vars.clone();
        sorted.sort();
        sorted.dedup();
        let left_linear = sorted.len() == lhs_vars.len();
        let collapsing = matches!(rhs, Term::Var(_));

        let id = RuleId(self.program.rules.len() as u32 + 1);
        self.program.rules.push(Rule {
            id,
            lhs,
            rhs,
            left_linear,
            collapsing,
        });
        Ok(())
    }
}

fn prec_of(op: BuiltinOp) -> u8 {
    match op {
        BuiltinOp::Gt | BuiltinOp::Lt | BuiltinOp::Eq => 1,
        BuiltinOp::Add | BuiltinOp::Sub => 2,
        BuiltinOp::Mul => 3,
    }
}

/// Parse and validate a whole program.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        program: Program::default(),
        mode: Mode::Rules,
    };
    loop {
        match &p.peek().tok {
            Tok::Eof => break,
            Tok::Vars => {
                p.next();
                p.parse_vardecl()?;
            }
            _ => p.parse_rule()?,
        }
    }
    let mut program = p.program;
    program.assign_kinds();
    Ok(program)
}

/// Parse a ground goal term against an existing program's symbol table.
pub fn parse_term(src: &str, program: &Program) -> Result<Term, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        program: program.clone(),
        mode: Mode::Goal,
    };
    let t = p.parse_expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.err(ParseErrorKind::Syntax("trailing input after term".into())));
    }
    debug_assert!(t.is_ground());
    Ok(t)
}
