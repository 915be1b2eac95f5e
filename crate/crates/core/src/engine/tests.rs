use std::collections::HashSet;

use super::ematch::literal_matches;
use super::*;
use crate::dialects::{builtin_registry, insert_eclasses};
use crate::ir::{parse_ir, verify, Traits};
use crate::pattern::{parse_patterns, Term};

const MULI: &str = "func.func @f(%a : i64) -> i64 {\n  %two = arith.constant {value = 2} : i64\n  %res = arith.muli %a, %two : i64\n  func.return %res : i64\n}\n";

fn setup(src: &str) -> (Module, EGraph) {
    let mut m = parse_ir(src, builtin_registry()).unwrap();
    let f = m.ops_named("func.func")[0];
    let e = insert_eclasses(&mut m, f).unwrap();
    let g = EGraph::new(&mut m, e).unwrap();
    (m, g)
}

fn graph(src: &str) -> (Module, EGraph) {
    let mut m = parse_ir(src, builtin_registry()).unwrap();
    assert!(verify(&m).is_empty(), "{:?}", verify(&m));
    let e = m.ops_named(crate::dialects::EGRAPH)[0];
    let g = EGraph::new(&mut m, e).unwrap();
    (m, g)
}

fn rules(text: &str) -> RuleSet {
    RuleSet::new(parse_patterns(text, &builtin_registry()).unwrap()).unwrap()
}

fn members(m: &Module, class: ValueId) -> Vec<OpId> {
    let c = m.defining_op(class).unwrap();
    m.operands(c).iter().filter_map(|&v| m.defining_op(v)).collect()
}

type Key = (usize, ValueId, Vec<ValueId>);

/// Structural matching by exhaustive enumeration over class members.
fn oracle(m: &Module, g: &EGraph, rs: &RuleSet) -> HashSet<Key> {
    fn node(m: &Module, g: &EGraph, t: &Term, op: OpId, b: Vec<Option<ValueId>>) -> Vec<Vec<Option<ValueId>>> {
        let Term::Op { name, args } = t else { return vec![] };
        if m.op_name(op) != *name || m.operands(op).len() != args.len() {
            return vec![];
        }
        let mut acc = vec![b];
        for (a, &v) in args.iter().zip(m.operands(op)) {
            acc = acc.into_iter().flat_map(|b| class(m, g, a, g.find(m, v), b)).collect();
        }
        acc
    }
    fn class(m: &Module, g: &EGraph, t: &Term, c: ValueId, mut b: Vec<Option<ValueId>>) -> Vec<Vec<Option<ValueId>>> {
        match t {
            Term::Var(x) => match b[*x] {
                Some(y) if y != c => vec![],
                _ => {
                    b[*x] = Some(c);
                    vec![b]
                }
            },
            Term::Const(l) => {
                let hit = members(m, c).into_iter().any(|o| {
                    m.has_trait(o, Traits::CONSTANT) && m.attr(o, "value").is_some_and(|a| literal_matches(a.get(), *l))
                });
                if hit {
                    vec![b]
                } else {
                    vec![]
                }
            }
            Term::Op { .. } => members(m, c).into_iter().flat_map(|o| node(m, g, t, o, b.clone())).collect(),
        }
    }
    let mut out = HashSet::new();
    for (pi, p) in rs.patterns.iter().enumerate() {
        for op in g.enodes(m) {
            for b in node(m, g, &p.lhs, op, vec![None; p.vars.len()]) {
                let root = g.find(m, g.class_of(m, op).unwrap());
                out.insert((pi, root, b.into_iter().map(Option::unwrap).collect()));
            }
        }
    }
    out
}

fn keys(ms: &[MatchRecord]) -> HashSet<Key> {
    ms.iter().map(|r| (r.pattern, r.root_class, r.bindings.clone())).collect()
}

const MUL2: &str = "(rule mul2-shift (arith.muli ?x (const 2)) (arith.shli ?x (const 1)))";

#[test]
fn mul2_shift_matches_once() {
    let (m, g) = setup(MULI);
    let rs = rules(MUL2);
    let ms = ematch(&m, &g, &rs.combined).unwrap();
    assert_eq!(ms.len(), 1);
    let ca = m.ops_named("eqsat.eclass").into_iter().find(|&c| m.value_name(m.result(c, 0)) == Some("c_a")).unwrap();
    assert_eq!(ms[0].bindings, vec![m.result(ca, 0)]);
    assert_eq!(keys(&ms), oracle(&m, &g, &rs));
}

#[test]
fn graph_without_enodes_has_no_matches() {
    let (m, g) = setup("func.func @id(%a : i64) -> i64 {\n  func.return %a : i64\n}\n");
    assert!(ematch(&m, &g, &rules(MUL2).combined).unwrap().is_empty());
}

#[test]
fn combined_program_records_every_root() {
    let (mut m, mut g) = setup(MULI);
    let rs = rules(MUL2);
    let ms = rs.match_all(&m, &g, MatchMode::Combined).unwrap();
    apply_matches(&mut m, &mut g, &rs.patterns, &ms).unwrap();
    g.rebuild(&mut m).unwrap();
    let both = rules(
        "(rule m (arith.muli ?x ?y) (arith.muli ?y ?x))\n(rule s (arith.shli ?x (const 1)) (arith.addi ?x ?x))",
    );
    let ms = ematch(&m, &g, &both.combined).unwrap();
    let got = keys(&ms);
    assert_eq!(got.len(), 2);
    assert_eq!(got, oracle(&m, &g, &both));
    let mut ind = HashSet::new();
    for (i, p) in both.singles.iter().enumerate() {
        for mut r in ematch(&m, &g, p).unwrap() {
            r.pattern = i;
            ind.insert((r.pattern, r.root_class, r.bindings));
        }
    }
    assert_eq!(ind, got);
}

#[test]
fn apply_mul2_shift_extends_root_class() {
    let (mut m, mut g) = setup(MULI);
    let rs = rules(MUL2);
    let ms = rs.match_all(&m, &g, MatchMode::Combined).unwrap();
    let root = ms[0].root_class;
    let st = apply_matches(&mut m, &mut g, &rs.patterns, &ms).unwrap();
    assert_eq!(st, ApplyStats { new_enodes: 2, unions: 1, aborted: 0, skipped: 0 });
    assert_eq!(g.rebuild(&mut m).unwrap(), 0);
    let root = g.find(&m, root);
    let names: Vec<&str> = members(&m, root).iter().map(|&o| m.op_name(o).as_str()).collect();
    assert_eq!(names, ["arith.muli", "arith.shli"]);
    assert!(verify(&m).is_empty(), "{:?}", verify(&m));

    let ms = rs.match_all(&m, &g, MatchMode::Combined).unwrap();
    let st = apply_matches(&mut m, &mut g, &rs.patterns, &ms).unwrap();
    assert_eq!(st, ApplyStats::default());
}

#[test]
fn add_zero_creates_cycle() {
    let (mut m, mut g) = setup(
        "func.func @f(%a : i64) -> i64 {\n  %z = arith.constant {value = 0} : i64\n  %s = arith.addi %a, %z : i64\n  func.return %s : i64\n}\n",
    );
    let rs = rules("(rule add-zero (arith.addi ?a (const 0)) ?a)");
    let r = saturate(&mut m, &mut g, &rs, &SaturationConfig::default()).unwrap();
    assert_eq!(r.reason, StopReason::Saturated);
    let add = m.ops_named("arith.addi")[0];
    let class = g.class_of(&m, add).unwrap();
    assert!(m.operands(add).contains(&class), "addi must consume its own class");
    assert!(m.operands(m.defining_op(class).unwrap()).iter().any(|&v| m.defining_op(v).is_none()));
    assert!(verify(&m).is_empty(), "{:?}", verify(&m));
}

#[test]
fn union_is_reflexive() {
    let (mut m, mut g) = setup(MULI);
    let c = m.result(g.classes(&m)[0], 0);
    assert_eq!(g.union(&mut m, c, c).unwrap(), (c, false));
}

const TWO_ARGS: &str = "func.func @f(%a : i64, %b : i64) -> i64 {\n  %0 = eqsat.egraph -> i64 {\n    %ca = eqsat.eclass %a : i64\n    %cb = eqsat.eclass %b : i64\n    %fa = arith.addi %ca, %ca : i64\n    %cfa = eqsat.eclass %fa : i64\n    %fb = arith.addi %cb, %cb : i64\n    %cfb = eqsat.eclass %fb : i64\n    %ffa = arith.muli %cfa, %cfa : i64\n    %cffa = eqsat.eclass %ffa : i64\n    %ffb = arith.muli %cfb, %cfb : i64\n    %cffb = eqsat.eclass %ffb : i64\n    %s = arith.subi %cffa, %cffb : i64\n    %cs = eqsat.eclass %s, %b : i64\n    eqsat.yield %cs : i64\n  }\n  func.return %0 : i64\n}\n";

fn class_named(m: &Module, name: &str) -> ValueId {
    m.ops_named("eqsat.eclass")
        .into_iter()
        .map(|c| m.result(c, 0))
        .find(|&v| m.value_name(v) == Some(name))
        .unwrap()
}

#[test]
fn union_merges_operand_lists() {
    let (mut m, mut g) = graph(TWO_ARGS);
    let (cs, cfa) = (class_named(&m, "cs"), class_named(&m, "cfa"));
    let (k, changed) = g.union(&mut m, cfa, cs).unwrap();
    assert!(changed);
    assert_eq!(k, cs, "the larger class survives");
    assert_eq!(m.operands(m.defining_op(k).unwrap()).len(), 3);
    assert!(verify(&m).is_empty(), "{:?}", verify(&m));
}

#[test]
fn rebuild_cascades_through_congruent_parents() {
    let (mut m, mut g) = graph(TWO_ARGS);
    assert_eq!(g.rebuild(&mut m).unwrap(), 0);
    let (ca, cb) = (class_named(&m, "ca"), class_named(&m, "cb"));
    g.union(&mut m, ca, cb).unwrap();
    assert_eq!(g.rebuild(&mut m).unwrap(), 2);
    assert!(g.congruence_violations(&m).is_empty());
    assert_eq!(g.hashcons_duplicates(&m), 0);
    assert_eq!(m.ops_named("arith.addi").len(), 1);
    assert_eq!(m.ops_named("arith.muli").len(), 1);
    assert!(verify(&m).is_empty(), "{:?}", verify(&m));
}

#[test]
fn eager_folding_produces_constant_class() {
    let (mut m, mut g) = setup(
        "func.func @f(%a : i64) -> i64 {\n  %one = arith.constant {value = 1} : i64\n  %s = arith.muli %a, %one : i64\n  func.return %s : i64\n}\n",
    );
    let rs = rules("(rule r (arith.muli ?x (const 1)) (arith.subi ?x (arith.addi (const 1) (const 1))))");
    saturate(&mut m, &mut g, &rs, &SaturationConfig::default()).unwrap();
    assert!(m.ops_named("arith.addi").is_empty());
    let twos: Vec<OpId> = m
        .ops_named("eqsat.const_eclass")
        .into_iter()
        .filter(|&c| m.attr(c, "cst") == Some(crate::ir::Attr::i64(2)))
        .collect();
    assert_eq!(twos.len(), 1);
}

#[test]
fn constant_class_absorbed_into_plain_class_keeps_cst() {
    let (mut m, mut g) = setup(
        "func.func @f(%a : i64) -> i64 {\n  %one = arith.constant {value = 1} : i64\n  %s = arith.addi %one, %one : i64\n  func.return %s : i64\n}\n",
    );
    let add = m.ops_named("arith.addi")[0];
    let sum = g.class_of(&m, add).unwrap();
    let rs = rules("(rule two (arith.addi ?x ?x) (arith.muli ?x (const 2)))\n(rule lit (arith.muli (const 1) (const 2)) (const 2))");
    saturate(&mut m, &mut g, &rs, &SaturationConfig::default()).unwrap();
    let sum = g.find(&m, sum);
    assert_eq!(g.class_constant(&m, sum), Some(crate::ir::Attr::i64(2)));
    assert!(verify(&m).is_empty(), "{:?}", verify(&m));
}

#[test]
fn saturation_stops_after_fixpoint_check() {
    let (mut m, mut g) = setup(MULI);
    let r = saturate(&mut m, &mut g, &rules(MUL2), &SaturationConfig::default()).unwrap();
    assert_eq!(r.reason, StopReason::Saturated);
    assert_eq!(r.iterations, 2);
    let last = r.per_iteration.last().unwrap();
    assert_eq!((last.new_enodes, last.unions), (0, 0));
    assert!(last.to_string().starts_with("iter=2 matches=1 new_enodes=0 unions=0 enodes="));
}

#[test]
fn zero_iterations_leaves_graph_unchanged() {
    let (mut m, mut g) = setup(MULI);
    let before = crate::ir::print_ir(&m);
    let cfg = SaturationConfig {
        max_iterations: Some(0),
        ..Default::default()
    };
    let r = saturate(&mut m, &mut g, &rules(MUL2), &cfg).unwrap();
    assert_eq!(r.reason, StopReason::IterationLimit);
    assert_eq!(crate::ir::print_ir(&m), before);
}

#[test]
fn node_limit_is_never_crossed() {
    let (mut m, mut g) = setup(MULI);
    let cfg = SaturationConfig {
        max_enodes: 4,
        ..Default::default()
    };
    let r = saturate(&mut m, &mut g, &rules(MUL2), &cfg).unwrap();
    assert_eq!(r.reason, StopReason::NodeLimit);
    assert!(m.ops_named("arith.shli").is_empty());
    assert!(g.enode_count(&m) <= 4);

    let (mut m, mut g) = setup(MULI);
    let cfg = SaturationConfig {
        max_enodes: 6,
        ..Default::default()
    };
    saturate(&mut m, &mut g, &rules(MUL2), &cfg).unwrap();
    assert_eq!(m.ops_named("arith.shli").len(), 1);
    assert!(g.enode_count(&m) <= 6);
}

#[test]
fn enode_count_counts_constant_classes() {
    let (m, g) = setup(MULI);
    assert_eq!(g.enode_count(&m), 3);
}
