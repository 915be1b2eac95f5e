use eqsat::engine::{RuleSet, StopReason};
use eqsat_fp::improve::{compare, load_rules};
use eqsat_fp::real::{to_f64, RealEval};
use eqsat_fp::sample::sample_inputs;
use eqsat_fp::truth::eval_function;
use eqsat_fp::{default_rules, improve, parse_fpcore, FpError, ImproveConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SQRT_DIFF: &str = "(FPCore (x) :pre (>= x 0) (- (sqrt (+ x 1)) (sqrt x)))";

fn no_rules() -> RuleSet {
    RuleSet::new(Vec::new()).unwrap()
}

#[test]
fn sqrt_difference_gets_more_accurate() {
    let out = improve(SQRT_DIFF, &default_rules(), &ImproveConfig::default()).unwrap();
    let r = &out.report;
    assert!(r.output_bits_err < r.input_bits_err, "{r}");
    assert!(r.enodes <= 4000, "{r}");
    assert_eq!(r.samples, 256);
    let text = out.output.to_string();
    assert_eq!(parse_fpcore(&text).unwrap().to_string(), text);
    assert!(!text.contains("(- (sqrt"), "{text}");
}

#[test]
fn report_line_has_every_field() {
    let out = improve(SQRT_DIFF, &default_rules(), &ImproveConfig::default()).unwrap();
    let line = out.report.to_string();
    let keys: Vec<&str> = line.split(' ').map(|kv| kv.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["input_bits_err", "output_bits_err", "samples", "enodes", "iters", "reason"]);
}

#[test]
fn improvement_preserves_real_semantics() {
    for src in [
        SQRT_DIFF,
        "(FPCore (x y) :pre (and (<= 1 x 100) (<= 1 y 100)) (/ (- (* x x) (* y y)) (+ x y)))",
        "(FPCore (a b) :pre (and (< 0 a 10) (< 0 b 10)) (/ (sqrt a) (sqrt b)))",
        "(FPCore (x) :pre (< 0 x 50) (log (exp x)))",
    ] {
        let out = improve(src, &default_rules(), &ImproveConfig { samples: 64, ..Default::default() }).unwrap();
        let core = parse_fpcore(src).unwrap();
        let (a, fa) = core.to_module().unwrap();
        let (b, fb) = out.output.to_module().unwrap();
        let pts = sample_inputs(&a, fa, &core.ranges(), 32, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        // exp near 1 + 1e-300 needs more than the default 1024 bits.
        let mut real = RealEval::new(4096);
        for p in &pts {
            let x = eval_function(&a, fa, p, &mut real).map(|v| to_f64(&v));
            let y = eval_function(&b, fb, p, &mut real).map(|v| to_f64(&v));
            assert_eq!(x, y, "{src} -> {} at {p:?}", out.output);
        }
    }
}

#[test]
fn empty_ruleset_keeps_the_input() {
    let src = "(FPCore (x) :pre (>= x 0) (- (sqrt (+ x 1)) (sqrt x)))";
    let out = improve(src, &no_rules(), &ImproveConfig::default()).unwrap();
    assert_eq!(out.output.body, parse_fpcore(src).unwrap().body);
    assert_eq!(out.report.input_bits_err, out.report.output_bits_err);
    assert_eq!(out.report.reason, StopReason::Saturated);
}

#[test]
fn unprovable_positivity_blocks_guarded_rules() {
    let rules = load_rules("(rule pow-to-exp (math.powf ?a ?b) (math.exp (arith.mulf ?b (math.log ?a))) :when ((positive ?a)))").unwrap();
    let open = improve("(FPCore (x y) :pre (and (<= -4 x 4) (<= 1 y 3)) (pow x y))", &rules, &ImproveConfig::default());
    let out = open.unwrap();
    assert!(out.node_errors.iter().all(|(n, _)| n != "math.exp"), "{:?}", out.node_errors);
    let guarded = improve("(FPCore (x y) :pre (and (<= 1 x 4) (<= 1 y 3)) (pow x y))", &rules, &ImproveConfig::default()).unwrap();
    assert!(guarded.node_errors.iter().any(|(n, _)| n == "math.exp"));
}

#[test]
fn errors_name_their_stage() {
    let stage_of = |r: Result<_, FpError>| match r {
        Err(FpError::Stage { stage, .. }) => stage,
        Err(e) => panic!("untagged error {e}"),
        Ok(_) => panic!("expected an error"),
    };
    let cfg = ImproveConfig::default();
    assert_eq!(stage_of(improve("(FPCore (x) (hypot x 1))", &default_rules(), &cfg).map(|_| ())), "parse");
    assert_eq!(stage_of(improve("(FPCore (x) :pre (< x -1) (sqrt x))", &default_rules(), &cfg).map(|_| ())), "sample");
    let none = ImproveConfig { samples: 0, ..Default::default() };
    assert_eq!(stage_of(improve(SQRT_DIFF, &default_rules(), &none).map(|_| ())), "ground-truth");
}

#[test]
fn node_limit_is_respected() {
    let src = "(FPCore (a b c d) (+ (* (+ a b) (+ c d)) (* (+ a c) (+ b d))))";
    let cfg = ImproveConfig {
        max_enodes: 300,
        samples: 32,
        ..Default::default()
    };
    let out = improve(src, &default_rules(), &cfg).unwrap();
    assert_eq!(out.report.reason, StopReason::NodeLimit);
    assert!(out.report.enodes <= 300);
    assert!(out.saturation.per_iteration.iter().all(|s| s.enodes <= 300));
}

#[test]
fn runs_are_deterministic() {
    let cfg = ImproveConfig { samples: 64, ..Default::default() };
    let a = improve(SQRT_DIFF, &default_rules(), &cfg).unwrap();
    let b = improve(SQRT_DIFF, &default_rules(), &cfg).unwrap();
    assert_eq!(a.output.to_string(), b.output.to_string());
    assert_eq!(a.report, b.report);
}

#[test]
fn comparison_of_a_program_with_itself_is_even() {
    let core = parse_fpcore(SQRT_DIFF).unwrap();
    let (m, f) = core.to_module().unwrap();
    let pts = sample_inputs(&m, f, &core.ranges(), 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (a, b, n) = compare(&m, f, &m, f, &pts, 1024);
    assert_eq!(a, b);
    assert_eq!(n, 50);
}
