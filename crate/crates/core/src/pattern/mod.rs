//! Declarative rewrite rules and their lowering to matcher bytecode.
//!
//! Rule syntax:
//!
//! ```text
//! (rule mul2-shift (arith.muli ?x (const 2)) (arith.shli ?x (const 1)))
//! (rule pow-mul (arith.mulf (math.powf ?a ?b) (math.powf ?a ?c))
//!       (math.powf ?a (arith.addf ?b ?c))
//!       :when ((positive ?a)) :benefit 2)
//! ```

mod lower;
mod program;

use std::fmt;

use thiserror::Error;

use crate::ir::Registry;
use crate::sexp::{read_all, Loc, Sexp};
use crate::symbol::Symbol;

pub use lower::{lower_combined, lower_naive, lower_single};
pub use program::{check_eager, Inst, MatcherProgram, Reg};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error(transparent)]
    Syntax(#[from] crate::sexp::SexpError),
    #[error("{loc}: {msg}")]
    Invalid { loc: Loc, msg: String },
}

fn invalid(loc: Loc, msg: impl Into<String>) -> PatternError {
    PatternError::Invalid { loc, msg: msg.into() }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
}

impl Literal {
    pub fn parse(s: &str) -> Option<Literal> {
        if !s.contains(['.', 'e', 'E', 'n', 'i']) {
            if let Ok(v) = s.parse::<i64>() {
                return Some(Literal::Int(v));
            }
        }
        s.parse::<f64>().ok().map(Literal::Float)
    }

    /// Identity used for structural sharing; floats compare by bits.
    pub(crate) fn key(self) -> (u8, u64) {
        match self {
            Literal::Int(v) => (0, v as u64),
            Literal::Float(v) => (1, v.to_bits()),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Float(v) => f.write_str(&crate::ir::format_f64(*v)),
        }
    }
}

/// Index into [`Pattern::vars`].
pub type VarId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(VarId),
    Const(Literal),
    Op { name: Symbol, args: Vec<Term> },
}

impl Term {
    pub fn vars(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Var(v) => out.push(*v),
            Term::Const(_) => {}
            Term::Op { args, .. } => args.iter().for_each(|a| a.vars(out)),
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Predicate {
    Positive,
    NonNegative,
    NonZero,
    NonError,
}

impl Predicate {
    pub fn parse(s: &str) -> Option<Predicate> {
        Some(match s.replace('_', "-").as_str() {
            "positive" => Predicate::Positive,
            "non-negative" => Predicate::NonNegative,
            "non-zero" => Predicate::NonZero,
            "non-error" => Predicate::NonError,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Predicate::Positive => "positive",
            Predicate::NonNegative => "non-negative",
            Predicate::NonZero => "non-zero",
            Predicate::NonError => "non-error",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub pred: Predicate,
    pub arg: Term,
}

impl Condition {
    /// Conditions on bound variables run during matching; conditions on
    /// constructed terms run once those terms exist.
    pub fn is_rewrite_time(&self) -> bool {
        !self.arg.is_var()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub name: String,
    /// Stored for reference; saturation applies every match regardless.
    pub benefit: u32,
    pub vars: Vec<String>,
    pub lhs: Term,
    pub rhs: Term,
    pub conditions: Vec<Condition>,
}

impl Pattern {
    pub fn root_name(&self) -> Symbol {
        match &self.lhs {
            Term::Op { name, .. } => *name,
            _ => unreachable!("validated at parse time"),
        }
    }

    pub fn match_conditions(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.is_rewrite_time())
    }

    pub fn rewrite_conditions(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| c.is_rewrite_time())
    }

    pub fn display_term(&self, t: &Term) -> String {
        match t {
            Term::Var(v) => format!("?{}", self.vars[*v]),
            Term::Const(l) => format!("(const {l})"),
            Term::Op { name, args } => {
                let mut s = format!("({name}");
                for a in args {
                    s.push(' ');
                    s.push_str(&self.display_term(a));
                }
                s.push(')');
                s
            }
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(rule {} {} {}", self.name, self.display_term(&self.lhs), self.display_term(&self.rhs))?;
        if !self.conditions.is_empty() {
            f.write_str(" :when (")?;
            for (i, c) in self.conditions.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "({} {})", c.pred.name(), self.display_term(&c.arg))?;
            }
            f.write_str(")")?;
        }
        if self.benefit != 1 {
            write!(f, " :benefit {}", self.benefit)?;
        }
        f.write_str(")")
    }
}

struct TermParser<'a> {
    registry: &'a Registry,
    vars: Vec<String>,
    /// Whether unseen variables may be introduced.
    binding: bool,
}

impl TermParser<'_> {
    fn term(&mut self, s: &Sexp) -> Result<Term, PatternError> {
        match s {
            Sexp::Atom(a, loc) => {
                if let Some(name) = a.strip_prefix('?') {
                    if name.is_empty() {
                        return Err(invalid(*loc, "empty variable name"));
                    }
                    if let Some(i) = self.vars.iter().position(|v| v == name) {
                        return Ok(Term::Var(i));
                    }
                    if !self.binding {
                        return Err(invalid(*loc, format!("unbound variable `?{name}`")));
                    }
                    self.vars.push(name.to_owned());
                    return Ok(Term::Var(self.vars.len() - 1));
                }
                Literal::parse(a)
                    .map(Term::Const)
                    .ok_or_else(|| invalid(*loc, format!("expected a term, found `{a}`")))
            }
            Sexp::List(items, loc) => {
                let head = items
                    .first()
                    .and_then(Sexp::atom)
                    .ok_or_else(|| invalid(*loc, "expected an operation name"))?;
                if head == "const" {
                    let lit = match items.get(1..) {
                        Some([Sexp::Atom(v, _)]) => Literal::parse(v),
                        _ => None,
                    };
                    return lit.map(Term::Const).ok_or_else(|| invalid(*loc, "malformed `(const literal)`"));
                }
                let def = self
                    .registry
                    .lookup(head)
                    .ok_or_else(|| invalid(*loc, format!("unknown operation `{head}`")))?;
                if crate::dialects::is_eqsat(def.name) || !def.regions.is_empty() {
                    return Err(invalid(*loc, format!("`{head}` cannot appear in a rule")));
                }
                let args = items[1..].iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
                if !def.operands.accepts(args.len()) {
                    return Err(invalid(
                        *loc,
                        format!("`{head}` expects {} operands, found {}", def.operands, args.len()),
                    ));
                }
                Ok(Term::Op { name: def.name, args })
            }
        }
    }
}

fn rule(form: &Sexp, registry: &Registry) -> Result<Pattern, PatternError> {
    let loc = form.loc();
    let items = form.list().ok_or_else(|| invalid(loc, "expected `(rule ...)`"))?;
    if items.first().and_then(Sexp::atom) != Some("rule") || items.len() < 4 {
        return Err(invalid(loc, "expected `(rule name lhs rhs ...)`"));
    }
    let name = items[1].atom().ok_or_else(|| invalid(items[1].loc(), "rule name must be a symbol"))?;
    let mut tp = TermParser {
        registry,
        vars: Vec::new(),
        binding: true,
    };
    let lhs = tp.term(&items[2])?;
    if !matches!(lhs, Term::Op { .. }) {
        return Err(invalid(items[2].loc(), "the left-hand side must be an operation"));
    }
    tp.binding = false;
    let rhs = tp.term(&items[3])?;

    let mut conditions = Vec::new();
    let mut benefit = 1u32;
    let mut rest = items[4..].iter();
    while let Some(key) = rest.next() {
        let val = rest.next().ok_or_else(|| invalid(key.loc(), "keyword without a value"))?;
        match key.atom() {
            Some(":when") => {
                let conds = val.list().ok_or_else(|| invalid(val.loc(), "`:when` expects a list"))?;
                for c in conds {
                    let parts = c.list().ok_or_else(|| invalid(c.loc(), "condition must be a list"))?;
                    let pname = parts.first().and_then(Sexp::atom).unwrap_or("");
                    let pred = Predicate::parse(pname).ok_or_else(|| invalid(c.loc(), format!("unknown predicate `{pname}`")))?;
                    if parts.len() != 2 {
                        return Err(invalid(c.loc(), format!("`{pname}` takes exactly one argument")));
                    }
                    conditions.push(Condition {
                        pred,
                        arg: tp.term(&parts[1])?,
                    });
                }
            }
            Some(":benefit") => {
                benefit = val
                    .atom()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| invalid(val.loc(), "benefit must be a non-negative integer"))?;
            }
            _ => return Err(invalid(key.loc(), format!("unexpected `{key}`"))),
        }
    }
    Ok(Pattern {
        name: name.to_owned(),
        benefit,
        vars: tp.vars,
        lhs,
        rhs,
        conditions,
    })
}

/// Parses a rule file.
pub fn parse_patterns(text: &str, registry: &Registry) -> Result<Vec<Pattern>, PatternError> {
    read_all(text)?.iter().map(|f| rule(f, registry)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialects::builtin_registry;

    fn parse(text: &str) -> Result<Vec<Pattern>, PatternError> {
        parse_patterns(text, &builtin_registry())
    }

    #[test]
    fn parses_basic_rules() {
        let ps = parse(
            "; integer identities\n(rule add-zero (arith.addi ?a (const 0)) ?a)\n(rule mul2-shift (arith.muli ?x (const 2)) (arith.shli ?x (const 1)))",
        )
        .unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].rhs, Term::Var(0));
        assert_eq!(ps[1].to_string(), "(rule mul2-shift (arith.muli ?x (const 2)) (arith.shli ?x (const 1)))");
    }

    #[test]
    fn conditions_split_by_timing() {
        let p = &parse(
            "(rule pow-sqrt (math.sqrt (math.powf ?a ?b)) (math.powf ?a (arith.divf ?b (const 2.0))) :when ((positive ?a) (positive (math.powf ?a ?b))) :benefit 3)",
        )
        .unwrap()[0];
        assert_eq!(p.benefit, 3);
        assert_eq!(p.match_conditions().count(), 1);
        assert_eq!(p.rewrite_conditions().count(), 1);
    }

    #[test]
    fn rejects_malformed_rules() {
        assert!(parse("(rule r (arith.addi ?a ?b) ?c)").is_err());
        assert!(parse("(rule r (arith.addi ?a ?b) ?a :when ((shiny ?a)))").is_err());
        assert!(parse("(rule r (arith.addi ?a) ?a)").is_err());
        assert!(parse("(rule r ?a ?a)").is_err());
        assert!(parse("(rule r (no.such ?a) ?a)").is_err());
        assert!(parse("(rule r (eqsat.eclass ?a) ?a)").is_err());
    }
}
