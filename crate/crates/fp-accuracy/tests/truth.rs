use std::collections::HashMap;

use astro_float::{BigFloat, RoundingMode};
use eqsat::analysis::{seed_args, EClassIntervals, Interval};
use eqsat::dialects::insert_eclasses;
use eqsat::engine::{saturate, EGraph, SaturationConfig};
use eqsat::ir::{Module, OpId};
use eqsat_fp::real::{RealEval, DEFAULT_PRECISION};
use eqsat_fp::sample::sample_inputs;
use eqsat_fp::truth::{ground_truth, Evaluator, GroundTruth};
use eqsat_fp::ulp::ordinal;
use eqsat_fp::{default_rules, parse_fpcore, FpError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

/// Lowered function, its e-graph op and the argument boxes.
fn egraph_of(src: &str, saturated: bool) -> (Module, OpId, OpId, Vec<(f64, f64)>) {
    let core = parse_fpcore(src).unwrap();
    let ranges = core.ranges();
    let (mut m, f) = core.to_module().unwrap();
    let e = insert_eclasses(&mut m, f).unwrap();
    if saturated {
        let mut g = EGraph::new(&mut m, e).unwrap();
        let boxes: Vec<Interval> = ranges.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect();
        g.register_analysis(&m, Box::new(EClassIntervals::new(seed_args(&m, f, &boxes))))
            .unwrap();
        let cfg = SaturationConfig {
            max_enodes: 1500,
            max_iterations: Some(6),
            ..Default::default()
        };
        saturate(&mut m, &mut g, &default_rules(), &cfg).unwrap();
    }
    (m, f, e, ranges)
}

fn only_op(m: &Module, name: &str) -> OpId {
    let ops = m.ops_named(name);
    assert_eq!(ops.len(), 1, "{name}");
    ops[0]
}

fn class_row<'a>(m: &Module, t: &'a GroundTruth, op: OpId) -> &'a [Option<f64>] {
    let class = m
        .uses(m.result(op, 0))
        .iter()
        .map(|u| m.result(u.op, 0))
        .find_map(|r| t.graph.class_index(r))
        .unwrap();
    &t.values[class]
}

#[test]
fn precondition_bounds_samples() {
    let (m, f, _, ranges) = egraph_of("(FPCore (x) :pre (> x 1) (/ 1 x))", false);
    let pts = sample_inputs(&m, f, &ranges, 300, &mut rng()).unwrap();
    assert_eq!(pts.len(), 300);
    assert!(pts.iter().all(|p| p[0] > 1.0 && p[0] <= 1e9));
}

#[test]
fn samples_that_divide_by_zero_are_rejected() {
    // Three doubles per range, so a third of the candidates have x == y.
    let lo = 1.0f64;
    let hi = lo.next_up().next_up();
    let src = format!("(FPCore (x y) :pre (and (<= {lo} x {hi}) (<= {lo} y {hi})) (/ 1 (- x y)))");
    let (m, f, _, ranges) = egraph_of(&src, false);
    let pts = sample_inputs(&m, f, &ranges, 200, &mut rng()).unwrap();
    assert_eq!(pts.len(), 200);
    for p in &pts {
        assert_ne!(p[0] - p[1], 0.0, "{p:?}");
    }
}

#[test]
fn sampling_gives_up_when_everything_fails() {
    let (m, f, _, ranges) = egraph_of("(FPCore (x) :pre (< x -1) (sqrt x))", false);
    assert!(matches!(sample_inputs(&m, f, &ranges, 4, &mut rng()), Err(FpError::Sampling(_))));
    assert!(sample_inputs(&m, f, &ranges, 0, &mut rng()).unwrap().is_empty());
}

#[test]
fn sampling_is_spread_over_binades() {
    let (m, f, _, ranges) = egraph_of("(FPCore (x) :pre (<= 0 x 1) (sqrt x))", false);
    let pts = sample_inputs(&m, f, &ranges, 2000, &mut rng()).unwrap();
    // Uniform over doubles: the median ordinal is half of ordinal(1).
    let mut ords: Vec<i64> = pts.iter().map(|p| ordinal(p[0])).collect();
    ords.sort();
    let ratio = ords[1000] as f64 / ordinal(1.0) as f64;
    assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
}

#[test]
fn literal_class_is_exact_and_errors_propagate() {
    let (m, f, e, _) = egraph_of("(FPCore (x) (+ (sqrt x) 2))", false);
    let samples = vec![vec![4.0], vec![-1.0], vec![0.25]];
    let t = ground_truth(&m, f, e, &samples, DEFAULT_PRECISION).unwrap();
    let two = only_op(&m, "arith.constant");
    assert_eq!(class_row(&m, &t, two), &[Some(2.0), Some(2.0), Some(2.0)]);
    let sqrt = only_op(&m, "math.sqrt");
    assert_eq!(class_row(&m, &t, sqrt), &[Some(2.0), None, Some(0.5)]);
    let add = only_op(&m, "arith.addf");
    assert_eq!(class_row(&m, &t, add), &[Some(4.0), None, Some(2.5)]);

    let errs = t.local_errors(&m);
    assert_eq!(errs[&add], 0.0);
    assert_eq!(errs[&two], 0.0);
    assert!(ground_truth(&m, f, e, &[], DEFAULT_PRECISION).is_err());
}

#[test]
fn exact_addition_has_no_local_error() {
    let (m, f, e, _) = egraph_of("(FPCore (x) (* x (+ 1 2)))", false);
    let samples: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.37 - 3.0]).collect();
    let t = ground_truth(&m, f, e, &samples, DEFAULT_PRECISION).unwrap();
    let errs = t.local_errors(&m);
    assert_eq!(errs[&only_op(&m, "arith.addf")], 0.0);
    assert_eq!(errs[&only_op(&m, "arith.mulf")], 0.0);
}

#[test]
fn cancellation_has_large_local_error() {
    let (m, f, e, _) = egraph_of("(FPCore (x) (- (+ x 1) x))", false);
    // Above 2^54 the sum x + 1 rounds back to x.
    let samples: Vec<Vec<f64>> = (0..16).map(|i| vec![1e17 * (1.0 + i as f64)]).collect();
    let t = ground_truth(&m, f, e, &samples, DEFAULT_PRECISION).unwrap();
    let sub = only_op(&m, "arith.subf");
    assert!(class_row(&m, &t, sub).iter().all(|v| *v == Some(1.0)));
    // f64 evaluation gives x - x = 0 where the truth is 1.
    let oracle = (1.0 + (ordinal(1.0) - ordinal(0.0)) as f64).log2();
    let errs = t.local_errors(&m);
    assert_eq!(errs[&sub], oracle);
    assert!(errs[&sub] > 60.0);
    assert_eq!(errs[&only_op(&m, "arith.addf")], 0.0);
}

#[test]
fn nodes_without_valid_samples_cost_infinity() {
    let (m, f, e, _) = egraph_of("(FPCore (x) (+ (sqrt x) 1))", false);
    let samples = vec![vec![-1.0], vec![-2.0]];
    let t = ground_truth(&m, f, e, &samples, DEFAULT_PRECISION).unwrap();
    let errs = t.local_errors(&m);
    assert_eq!(errs[&only_op(&m, "arith.addf")], f64::INFINITY);
    assert_eq!(errs[&only_op(&m, "math.sqrt")], f64::INFINITY);
}

#[test]
fn quotient_of_roots_shares_one_class() {
    let src = "(FPCore (p q r s) :pre (and (<= 1 p 10) (<= 1 q 10) (<= 1 r 10) (<= 1 s 10))
        (- (/ (sqrt (+ (* p p) (* q q))) (sqrt (+ (* r r) (* s s))))
           (sqrt (/ (+ (* p p) (* q q)) (+ (* r r) (* s s))))))";
    let (m, f, e, ranges) = egraph_of(src, true);
    let block = m.entry_block(e).unwrap();
    let merged = m.block_ops(block).any(|op| {
        m.op_name(op).as_str() == "arith.subf" && m.operands(op).len() == 2 && m.operand(op, 0) == m.operand(op, 1)
    });
    assert!(merged, "both sides of the difference should be one class");
    let pts = sample_inputs(&m, f, &ranges, 8, &mut rng()).unwrap();
    let t = ground_truth(&m, f, e, &pts, DEFAULT_PRECISION).unwrap();
    let y = m.block_last(block).unwrap();
    let root = t.graph.class_index(m.operand(y, 0)).unwrap();
    assert!(t.values[root].iter().all(Option::is_some));
}

/// Every member of every small class evaluates, with its operands taken
/// from their representatives, to the representative's value.
fn check_class_consistency(m: &Module, f: OpId, e: OpId, points: &[Vec<f64>]) {
    let t = ground_truth(m, f, e, points, DEFAULT_PRECISION).unwrap();
    let reps: HashMap<_, _> = t
        .graph
        .classes
        .iter()
        .enumerate()
        .filter_map(|(c, &op)| {
            let k = t.reps[c]?;
            Some((m.result(op, 0), m.operand(op, t.graph.members[c][k].index)))
        })
        .collect();
    let ev = Evaluator {
        m,
        args: &t.args,
        reps: &reps,
    };
    let mut real = RealEval::new(DEFAULT_PRECISION);
    let tol = BigFloat::from_f64(2f64.powi(-900), 64);
    for p in points {
        let mut memo = HashMap::new();
        for (c, &class) in t.graph.classes.iter().enumerate() {
            if t.graph.members[c].len() > 6 {
                continue;
            }
            let Some(want) = ev.eval(m.result(class, 0), p, &mut real, &mut memo) else { continue };
            for &member in m.operands(class) {
                let Some(got) = ev.eval(member, p, &mut real, &mut memo) else { continue };
                let diff = got.sub(&want, DEFAULT_PRECISION, RoundingMode::ToEven).abs();
                let scale = want.abs().mul(&tol, DEFAULT_PRECISION, RoundingMode::ToEven);
                assert!(diff <= scale || diff.is_zero(), "class {c} disagrees at {p:?}");
            }
        }
    }
}

#[test]
fn members_agree_with_representatives() {
    let src = "(FPCore (x) :pre (<= 0 x 1000) (- (sqrt (+ x 1)) (sqrt x)))";
    let (m, f, e, ranges) = egraph_of(src, true);
    let pts = sample_inputs(&m, f, &ranges, 6, &mut rng()).unwrap();
    check_class_consistency(&m, f, e, &pts);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn members_agree_on_random_polynomials(a in 1u32..5, b in 1u32..5, seed in any::<u64>()) {
        let src = format!("(FPCore (x y) :pre (and (<= 1 x 100) (<= 1 y 100)) (- (* (+ x {a}) (+ x {a})) (* (- y {b}) (/ x y))))");
        let (m, f, e, ranges) = egraph_of(&src, true);
        let pts = sample_inputs(&m, f, &ranges, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        check_class_consistency(&m, f, e, &pts);
    }
}
