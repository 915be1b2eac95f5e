use super::{EGraph, EngineError, MatchRecord, NodeKey};
use crate::dialects::infer_result_type;
use crate::ir::{Attr, Module, Type, ValueId};
use crate::pattern::{Literal, Pattern, Term};
use crate::symbol::Symbol;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ApplyStats {
    pub new_enodes: usize,
    pub unions: usize,
    /// Rewrites stopped by a failing rewrite-time condition.
    pub aborted: usize,
    /// Matches left unapplied because the growth budget ran out.
    pub skipped: usize,
}

struct Builder<'a> {
    m: &'a mut Module,
    g: &'a mut EGraph,
    p: &'a Pattern,
    bindings: Vec<ValueId>,
    stats: &'a mut ApplyStats,
    grown: &'a mut usize,
}

fn literal_attr(lit: Literal, ty: Type) -> Option<Attr> {
    Some(match (lit, ty) {
        (Literal::Int(i), Type::I64) => Attr::i64(i),
        (Literal::Int(i), Type::I1) => Attr::int(i & 1, 1),
        (Literal::Int(i), Type::F64) => Attr::f64(i as f64),
        (Literal::Float(f), Type::F64) => Attr::f64(f),
        _ => return None,
    })
}

/// Operand type suggested by the expected result type: same-typed for the
/// scalar dialects, unknown otherwise.
fn operand_hint(name: Symbol, expected: Option<Type>) -> Option<Type> {
    match name.dialect() {
        "arith" | "math" => expected,
        _ => None,
    }
}

impl Builder<'_> {
    fn err(&self, msg: impl Into<String>) -> EngineError {
        EngineError::Rewrite {
            rule: self.p.name.clone(),
            msg: msg.into(),
        }
    }

    fn constant(&mut self, value: Attr) -> Result<ValueId, EngineError> {
        let ty = value.value_type().ok_or_else(|| self.err(format!("{value} is not numeric")))?;
        let key = NodeKey {
            name: Symbol::new("arith.constant"),
            attrs: vec![(Symbol::new("value"), value)],
            operands: Vec::new(),
        };
        if let Some(op) = self.g.lookup(self.m, &key) {
            if let Some(c) = self.g.class_of(self.m, op) {
                return Ok(self.g.find(self.m, c));
            }
        }
        self.stats.new_enodes += 1;
        *self.grown += 2;
        self.g.add_enode(self.m, key, ty)
    }

    fn build(&mut self, t: &Term, expected: Option<Type>) -> Result<ValueId, EngineError> {
        match t {
            Term::Var(v) => {
                let b = *self.bindings.get(*v).ok_or_else(|| self.err(format!("unbound ?{}", self.p.vars[*v])))?;
                Ok(self.g.find(self.m, b))
            }
            Term::Const(lit) => {
                let ty = expected.unwrap_or(match lit {
                    Literal::Int(_) => Type::I64,
                    Literal::Float(_) => Type::F64,
                });
                let a = literal_attr(*lit, ty).ok_or_else(|| self.err(format!("literal {lit} cannot have type {ty}")))?;
                self.constant(a)
            }
            Term::Op { name, args } => {
                let hint = operand_hint(*name, expected);
                let mut vals: Vec<Option<ValueId>> = vec![None; args.len()];
                for (i, a) in args.iter().enumerate() {
                    if !matches!(a, Term::Const(_)) {
                        vals[i] = Some(self.build(a, hint)?);
                    }
                }
                let sibling = vals.iter().flatten().next().map(|&v| self.m.value_type(v));
                for (i, a) in args.iter().enumerate() {
                    if matches!(a, Term::Const(_)) {
                        vals[i] = Some(self.build(a, sibling.or(hint))?);
                    }
                }
                let vals: Vec<ValueId> = vals.into_iter().map(|v| v.expect("all operands built")).collect();
                let types: Vec<Type> = vals.iter().map(|&v| self.m.value_type(v)).collect();
                let ty = infer_result_type(self.m.registry(), *name, &types)
                    .ok_or_else(|| self.err(format!("`{name}` does not accept these operand types")))?;
                let key = NodeKey {
                    name: *name,
                    attrs: Vec::new(),
                    operands: vals.iter().map(|&v| self.g.find(self.m, v)).collect(),
                };
                if let Some(op) = self.g.lookup(self.m, &key) {
                    if let Some(c) = self.g.class_of(self.m, op) {
                        return Ok(self.g.find(self.m, c));
                    }
                }
                let hook = self.m.registry().get(*name).and_then(|d| d.fold);
                if let Some(hook) = hook {
                    let csts: Option<Vec<Attr>> = key.operands.iter().map(|&v| self.g.class_constant(self.m, v)).collect();
                    if let Some(folded) = csts.and_then(|c| hook(&[], &c)) {
                        if folded.value_type() == Some(ty) {
                            return self.constant(folded);
                        }
                    }
                }
                self.stats.new_enodes += 1;
                *self.grown += 1;
                self.g.add_enode(self.m, key, ty)
            }
        }
    }
}

/// Instantiates the right-hand side of every match and merges it with the
/// matched class. Terms already in the graph are reused; operations whose
/// operands are all constant classes are folded instead of inserted.
pub fn apply_matches(
    m: &mut Module,
    g: &mut EGraph,
    patterns: &[Pattern],
    matches: &[MatchRecord],
) -> Result<ApplyStats, EngineError> {
    apply_matches_within(m, g, patterns, matches, usize::MAX)
}

/// Upper bound on the growth of `EGraph::enode_count` from instantiating
/// `p`: each operation adds one node, each constant a node and its class.
fn worst_growth(p: &Pattern) -> usize {
    fn size(t: &Term) -> usize {
        match t {
            Term::Var(_) => 0,
            Term::Const(_) => 2,
            Term::Op { args, .. } => 1 + args.iter().map(size).sum::<usize>(),
        }
    }
    size(&p.rhs) + p.rewrite_conditions().map(|c| size(&c.arg)).sum::<usize>()
}

/// [`apply_matches`] that stops before `EGraph::enode_count` could grow by
/// more than `budget`. Matches not reached are counted in `skipped`.
pub fn apply_matches_within(
    m: &mut Module,
    g: &mut EGraph,
    patterns: &[Pattern],
    matches: &[MatchRecord],
    budget: usize,
) -> Result<ApplyStats, EngineError> {
    let mut stats = ApplyStats::default();
    let mut grown = 0usize;
    for (i, rec) in matches.iter().enumerate() {
        let p = &patterns[rec.pattern];
        let worst = worst_growth(p);
        if grown.saturating_add(worst) > budget {
            stats.skipped = matches.len() - i;
            break;
        }
        let bindings: Vec<ValueId> = rec.bindings.iter().map(|&b| g.find(m, b)).collect();
        let root = g.find(m, rec.root_class);
        let ty = m.value_type(root);
        let mut b = Builder {
            m,
            g,
            p,
            bindings,
            stats: &mut stats,
            grown: &mut grown,
        };
        let mut ok = true;
        for c in p.rewrite_conditions() {
            let v = b.build(&c.arg, None)?;
            if !b.g.check_predicate(b.m, v, c.pred) {
                ok = false;
                break;
            }
        }
        if !ok {
            stats.aborted += 1;
            continue;
        }
        let v = b.build(&p.rhs, Some(ty))?;
        if g.union(m, root, v)?.1 {
            stats.unions += 1;
        }
    }
    Ok(stats)
}
