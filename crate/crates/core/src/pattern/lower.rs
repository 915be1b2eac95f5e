//! Lowering of patterns to matcher programs.
//!
//! A pattern is first flattened into a sequence of steps keyed by the
//! location they inspect (a path of operand indices and defining-op hops from
//! the root). Checks are scheduled right after the fetch that makes their
//! inputs available. Step sequences of several patterns are merged in a trie;
//! each trie branch point becomes a `choose`.

use std::collections::HashMap;
use std::sync::Arc;

use super::program::{Inst, MatcherProgram, Reg};
use super::{Literal, Pattern, Predicate, Term};
use crate::symbol::Symbol;

/// Location in the matched term: operand indices, with `DEF` marking a hop
/// from a value to its defining op. The root op is the empty path.
type Loc = Vec<u16>;
const DEF: u16 = u16::MAX;

fn child(p: &Loc, step: u16) -> Loc {
    let mut c = p.clone();
    c.push(step);
    c
}

#[derive(Clone, Debug, PartialEq)]
enum Step {
    Operand { op: Loc, index: u16 },
    Def { value: Loc },
    Name { op: Loc, name: Symbol },
    Count { op: Loc, count: u32 },
    Const { op: Loc, lit: Literal },
    Equal { a: Loc, b: Loc },
    Constraint { pred: Predicate, args: Vec<Loc> },
}

impl Step {
    fn output(&self) -> Option<Loc> {
        match self {
            Step::Operand { op, index } => Some(child(op, *index)),
            Step::Def { value } => Some(child(value, DEF)),
            _ => None,
        }
    }

    fn inputs(&self) -> Vec<&Loc> {
        match self {
            Step::Operand { op, .. } | Step::Name { op, .. } | Step::Count { op, .. } | Step::Const { op, .. } => vec![op],
            Step::Def { value } => vec![value],
            Step::Equal { a, b } => vec![a, b],
            Step::Constraint { args, .. } => args.iter().collect(),
        }
    }

    fn same(&self, other: &Step) -> bool {
        match (self, other) {
            (Step::Const { op: a, lit: x }, Step::Const { op: b, lit: y }) => a == b && x.key() == y.key(),
            _ => self == other,
        }
    }
}

struct Flat {
    fetches: Vec<Step>,
    checks: Vec<Step>,
    var_locs: Vec<Loc>,
}

fn flatten(p: &Pattern) -> Flat {
    let mut f = Flat {
        fetches: Vec::new(),
        checks: Vec::new(),
        var_locs: vec![Vec::new(); p.vars.len()],
    };
    let mut bound = vec![false; p.vars.len()];
    fn visit(t: &Term, at: &Loc, f: &mut Flat, bound: &mut [bool]) {
        let Term::Op { name, args } = t else { unreachable!("only ops are visited") };
        f.checks.push(Step::Name { op: at.clone(), name: *name });
        f.checks.push(Step::Count {
            op: at.clone(),
            count: args.len() as u32,
        });
        for i in 0..args.len() {
            f.fetches.push(Step::Operand {
                op: at.clone(),
                index: i as u16,
            });
        }
        for (i, a) in args.iter().enumerate() {
            let v = child(at, i as u16);
            match a {
                Term::Var(x) => {
                    if bound[*x] {
                        f.checks.push(Step::Equal {
                            a: f.var_locs[*x].clone(),
                            b: v,
                        });
                    } else {
                        bound[*x] = true;
                        f.var_locs[*x] = v;
                    }
                }
                Term::Const(lit) => {
                    f.fetches.push(Step::Def { value: v.clone() });
                    f.checks.push(Step::Const {
                        op: child(&v, DEF),
                        lit: *lit,
                    });
                }
                Term::Op { .. } => {
                    f.fetches.push(Step::Def { value: v.clone() });
                    visit(a, &child(&v, DEF), f, bound);
                }
            }
        }
    }
    visit(&p.lhs, &Vec::new(), &mut f, &mut bound);
    for c in p.match_conditions() {
        let Term::Var(x) = c.arg else { unreachable!() };
        f.checks.push(Step::Constraint {
            pred: c.pred,
            args: vec![f.var_locs[x].clone()],
        });
    }
    f
}

/// Fetches in traversal order, then every check.
fn naive_steps(f: &Flat) -> Vec<Step> {
    f.fetches.iter().chain(&f.checks).cloned().collect()
}

/// Fetches in traversal order, each check placed right after the fetch that
/// completes its inputs.
fn eager_steps(f: &Flat) -> Vec<Step> {
    let mut avail: Vec<Loc> = vec![Vec::new()];
    let mut done = vec![false; f.checks.len()];
    let mut out = Vec::new();
    let mut flush = |avail: &Vec<Loc>, out: &mut Vec<Step>| {
        for (i, c) in f.checks.iter().enumerate() {
            if !done[i] && c.inputs().iter().all(|l| avail.contains(l)) {
                done[i] = true;
                out.push(c.clone());
            }
        }
    };
    flush(&avail, &mut out);
    for s in &f.fetches {
        out.push(s.clone());
        avail.push(s.output().expect("fetches produce a location"));
        flush(&avail, &mut out);
    }
    out
}

enum Item {
    Step(Step, usize),
    Record(usize),
}

#[derive(Default)]
struct Trie {
    nodes: Vec<Vec<Item>>,
}

impl Trie {
    fn new() -> Trie {
        Trie { nodes: vec![Vec::new()] }
    }

    fn insert(&mut self, steps: Vec<Step>, pattern: usize) {
        let mut node = 0;
        for s in steps {
            let found = self.nodes[node].iter().find_map(|it| match it {
                Item::Step(t, c) if t.same(&s) => Some(*c),
                _ => None,
            });
            node = match found {
                Some(c) => c,
                None => {
                    self.nodes.push(Vec::new());
                    let c = self.nodes.len() - 1;
                    self.nodes[node].push(Item::Step(s, c));
                    c
                }
            };
        }
        self.nodes[node].push(Item::Record(pattern));
    }
}

struct Emitter<'a> {
    trie: &'a Trie,
    flats: &'a [Flat],
    regs: HashMap<Loc, Reg>,
    insts: Vec<Inst>,
}

impl Emitter<'_> {
    fn reg(&mut self, l: &Loc) -> Reg {
        let n = self.regs.len() as Reg;
        *self.regs.entry(l.clone()).or_insert(n)
    }

    fn node(&mut self, n: usize) {
        let items = &self.trie.nodes[n];
        if items.len() == 1 {
            self.item(n, 0);
            return;
        }
        let at = self.insts.len();
        self.insts.push(Inst::Choose { branches: Vec::new() });
        let mut branches = Vec::with_capacity(items.len());
        for i in 0..items.len() {
            branches.push(self.insts.len());
            self.item(n, i);
        }
        self.insts[at] = Inst::Choose { branches };
    }

    fn item(&mut self, n: usize, i: usize) {
        match &self.trie.nodes[n][i] {
            Item::Record(p) => {
                let locs = self.flats[*p].var_locs.clone();
                let bindings = locs.iter().map(|l| self.reg(l)).collect();
                self.insts.push(Inst::RecordMatch {
                    pattern: *p as u32,
                    root: 0,
                    bindings,
                });
                self.insts.push(Inst::Finalize);
            }
            Item::Step(s, c) => {
                let inst = self.inst(s);
                self.insts.push(inst);
                self.node(*c);
            }
        }
    }

    fn inst(&mut self, s: &Step) -> Inst {
        match s {
            Step::Operand { op, index } => Inst::GetOperand {
                op: self.reg(op),
                index: *index as u32,
                dst: self.reg(&child(op, *index)),
            },
            Step::Def { value } => Inst::GetDefiningOp {
                value: self.reg(value),
                dst: self.reg(&child(value, DEF)),
            },
            Step::Name { op, name } => Inst::CheckOperationName { op: self.reg(op), name: *name },
            Step::Count { op, count } => Inst::CheckOperandCount {
                op: self.reg(op),
                count: *count,
            },
            Step::Const { op, lit } => Inst::CheckConstant { op: self.reg(op), literal: *lit },
            Step::Equal { a, b } => Inst::AreEqual {
                a: self.reg(a),
                b: self.reg(b),
            },
            Step::Constraint { pred, args } => Inst::ApplyConstraint {
                pred: *pred,
                args: args.iter().map(|a| self.reg(a)).collect(),
            },
        }
    }
}

fn build(patterns: Vec<Pattern>, order: fn(&Flat) -> Vec<Step>) -> MatcherProgram {
    let flats: Vec<Flat> = patterns.iter().map(flatten).collect();
    let mut trie = Trie::new();
    for (i, f) in flats.iter().enumerate() {
        trie.insert(order(f), i);
    }
    let mut e = Emitter {
        trie: &trie,
        flats: &flats,
        regs: HashMap::new(),
        insts: Vec::new(),
    };
    e.reg(&Vec::new());
    if !patterns.is_empty() {
        e.node(0);
    } else {
        e.insts.push(Inst::Finalize);
    }
    MatcherProgram {
        num_regs: e.regs.len() as Reg,
        insts: e.insts,
        patterns: Arc::new(patterns),
    }
}

/// Structure-first lowering: every fetch, then every check.
pub fn lower_naive(pattern: &Pattern) -> MatcherProgram {
    build(vec![pattern.clone()], naive_steps)
}

/// Matcher for one pattern, with checks executed as early as possible.
pub fn lower_single(pattern: &Pattern) -> MatcherProgram {
    build(vec![pattern.clone()], eager_steps)
}

/// One fused matcher for all patterns. Shared prefixes are emitted once and
/// divergences are separated by `choose`.
pub fn lower_combined(patterns: &[Pattern]) -> MatcherProgram {
    build(patterns.to_vec(), eager_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialects::builtin_registry;
    use crate::pattern::{check_eager, parse_patterns};

    fn pats(text: &str) -> Vec<Pattern> {
        parse_patterns(text, &builtin_registry()).unwrap()
    }

    fn kinds(p: &MatcherProgram) -> Vec<&'static str> {
        p.insts
            .iter()
            .map(|i| match i {
                Inst::GetOperand { .. } => "get_operand",
                Inst::GetResult { .. } => "get_result",
                Inst::GetDefiningOp { .. } => "get_defining_op",
                Inst::CheckOperationName { .. } => "check_operation_name",
                Inst::CheckOperandCount { .. } => "check_operand_count",
                Inst::CheckAttribute { .. } => "check_attribute",
                Inst::CheckConstant { .. } => "check_constant",
                Inst::AreEqual { .. } => "are_equal",
                Inst::ApplyConstraint { .. } => "apply_constraint",
                Inst::Choose { .. } => "choose",
                Inst::RecordMatch { .. } => "record_match",
                Inst::Finalize => "finalize",
            })
            .collect()
    }

    #[test]
    fn add_zero_shape() {
        let p = lower_single(&pats("(rule add-zero (arith.addi ?a (const 0)) ?a)")[0]);
        assert_eq!(
            kinds(&p),
            [
                "check_operation_name",
                "check_operand_count",
                "get_operand",
                "get_operand",
                "get_defining_op",
                "check_constant",
                "record_match",
                "finalize"
            ]
        );
        p.validate().unwrap();
    }

    #[test]
    fn repeated_variable_emits_one_equality() {
        let p = lower_single(&pats("(rule r (arith.addf ?x (arith.mulf ?x ?y)) ?x)")[0]);
        assert_eq!(p.count(|i| matches!(i, Inst::AreEqual { .. })), 1);
    }

    #[test]
    fn eager_reordering_interleaves_fetches_and_checks() {
        let p = &pats("(rule chain (math.sqrt (math.exp (math.log (math.sin ?x)))) ?x)")[0];
        let naive = lower_naive(p);
        let k = kinds(&naive);
        let first_check_after_root = k.iter().skip(2).position(|s| *s == "check_operation_name").unwrap() + 2;
        assert!(k[..first_check_after_root].iter().filter(|s| **s == "get_defining_op").count() == 3);
        assert!(check_eager(&naive).is_err());
        let eager = lower_single(p);
        check_eager(&eager).unwrap();
        let k = kinds(&eager);
        for w in k.windows(2) {
            if w[0] == "get_defining_op" {
                assert_eq!(w[1], "check_operation_name");
            }
        }
    }

    #[test]
    fn single_pattern_has_no_choose() {
        let p = lower_combined(&pats("(rule a (arith.addi ?a ?b) (arith.addi ?b ?a))"));
        assert_eq!(p.count(|i| matches!(i, Inst::Choose { .. })), 0);
    }

    #[test]
    fn unrelated_patterns_branch_at_root() {
        let p = lower_combined(&pats(
            "(rule a (arith.addi ?a ?b) (arith.addi ?b ?a))\n(rule m (arith.muli ?a ?b) (arith.muli ?b ?a))",
        ));
        assert!(matches!(&p.insts[0], Inst::Choose { branches } if branches.len() == 2));
        p.validate().unwrap();
        check_eager(&p).unwrap();
    }

    #[test]
    fn shared_prefix_is_emitted_once() {
        let ps = pats(
            "(rule a (arith.addi (arith.muli ?a ?b) ?c) ?c)\n(rule b (arith.addi (arith.muli ?a ?b) (const 0)) ?a)",
        );
        let p = lower_combined(&ps);
        let root_checks = p.count(|i| matches!(i, Inst::CheckOperationName { op: 0, .. }));
        assert_eq!(root_checks, 1);
        let muli_checks = p.count(|i| matches!(i, Inst::CheckOperationName { name, .. } if name.as_str() == "arith.muli"));
        assert_eq!(muli_checks, 1);
        for i in &p.insts {
            if let Inst::Choose { branches } = i {
                assert!(branches.len() >= 2);
            }
        }
        p.validate().unwrap();
        check_eager(&p).unwrap();
    }
}
