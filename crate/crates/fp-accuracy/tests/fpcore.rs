use eqsat::dialects::{builtin_registry, interpret_func, Scalar};
use eqsat::ir::{parse_ir, print_ir, verify};
use eqsat_fp::fpcore::{raise, Expr, FPCore, BOUND};
use eqsat_fp::{parse_fpcore, FpError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn op_count(src: &str) -> usize {
    let core = parse_fpcore(src).unwrap();
    let (m, f) = core.to_module().unwrap();
    let mut n = 0;
    m.walk_from(f, &mut |op| {
        let name = m.op_name(op);
        if name.as_str() != "func.func" && name.as_str() != "func.return" {
            n += 1;
        }
    });
    n
}

#[test]
fn hypotenuse_lowers_to_four_ops() {
    let src = "(FPCore (x) (sqrt (+ (* x x) 1)))";
    assert_eq!(op_count(src), 4);
    let text = parse_fpcore(src).unwrap().to_ir_text();
    for op in ["arith.mulf", "arith.addf", "math.sqrt", "arith.constant"] {
        assert_eq!(text.matches(op).count(), 1, "{text}");
    }
}

#[test]
fn hypot_is_unsupported() {
    let err = parse_fpcore("(FPCore (x) (hypot x 1))").unwrap_err();
    assert!(matches!(err, FpError::Unsupported(ref s) if s.contains("hypot")), "{err}");
}

#[test]
fn free_variables_are_rejected() {
    let err = parse_fpcore("(FPCore (x) (+ x y))").unwrap_err();
    assert!(matches!(err, FpError::Unbound(ref s) if s == "y"), "{err}");
}

#[test]
fn malformed_input_is_a_syntax_error() {
    for bad in ["(FPCore (x)", "(FPCore x (+ x 1))", "(foo (x) x)", "(FPCore (x) (+ x))"] {
        assert!(parse_fpcore(bad).is_err(), "{bad}");
    }
}

#[test]
fn properties_and_constants() {
    let c = parse_fpcore("(FPCore (x) :name \"sqrt q\" :precision binary64 :pre (< 0 x 10) (* PI x))").unwrap();
    assert_eq!(c.name.as_deref(), Some("sqrt q"));
    assert_eq!(c.ranges(), vec![(0f64.next_up(), 10f64.next_down())]);
    assert!(matches!(c.body, Expr::Op(_, ref a) if a[0] == Expr::Num(std::f64::consts::PI)));
    let again = parse_fpcore(&c.to_string()).unwrap();
    assert_eq!(again.to_string(), c.to_string());
    assert_eq!(again.body, c.body);
    assert!(matches!(
        parse_fpcore("(FPCore (x) :precision binary32 x)"),
        Err(FpError::Unsupported(_))
    ));
}

#[test]
fn ranges_default_to_the_bound() {
    let c = parse_fpcore("(FPCore (x y) :pre (and (>= x -2) (<= y 3.5)) (- x y))").unwrap();
    assert_eq!(c.ranges(), vec![(-2.0, BOUND), (-BOUND, 3.5)]);
}

#[test]
fn let_forms_scope_like_fpcore() {
    let c = parse_fpcore("(FPCore (x) (let* ([a (+ x 1)] [b (* a a)]) (- b a)))").unwrap();
    let (m, f) = c.to_module().unwrap();
    let r = interpret_func(&m, f, &[Scalar::F64(2.0)]).unwrap();
    assert_eq!(r, vec![Scalar::F64(6.0)]);
    let c = parse_fpcore("(FPCore (x) (let ((x (* x 2)) (y x)) (+ x y)))").unwrap();
    let (m, f) = c.to_module().unwrap();
    let r = interpret_func(&m, f, &[Scalar::F64(5.0)]).unwrap();
    assert_eq!(r, vec![Scalar::F64(15.0)]);
    assert_eq!(parse_fpcore(&c.to_string()).unwrap().body, c.body);
}

#[test]
fn shared_values_print_as_bindings() {
    let src = "func.func @f(%x : f64) -> f64 {\n  %s = math.sqrt %x : f64\n  %p = arith.mulf %s, %s : f64\n  %q = arith.addf %p, %s : f64\n  func.return %q : f64\n}\n";
    let m = parse_ir(src, builtin_registry()).unwrap();
    let f = m.lookup_func("f").unwrap();
    let template = parse_fpcore("(FPCore (x) x)").unwrap();
    let out = raise(&m, f, &template).unwrap();
    assert_eq!(out.to_string(), "(FPCore (x) (let* ([t0 (sqrt x)]) (+ (* t0 t0) t0)))");
}

fn template(n: usize) -> FPCore {
    FPCore {
        name: None,
        args: (0..n).map(|i| format!("a{i}")).collect(),
        pre: None,
        body: Expr::Num(0.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // Printing a random IR function as FPCore and lowering it again gives
    // a function that computes bit-identical results.
    #[test]
    fn raise_then_lower_preserves_results(seed in any::<u64>(), n in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = eqsat::gen::float_function(&mut rng, 2, n);
        let m = parse_ir(&src, builtin_registry()).unwrap();
        let f = m.lookup_func("f").unwrap();
        let core = raise(&m, f, &template(2)).unwrap();
        let text = core.to_string();
        let back = parse_fpcore(&text).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        let (m2, f2) = back.to_module().unwrap();
        prop_assert!(verify(&m2).is_empty(), "{}", print_ir(&m2));
        for _ in 0..10 {
            let args = [Scalar::F64(rng.gen_range(-8.0..8.0)), Scalar::F64(rng.gen_range(-8.0..8.0))];
            let a = interpret_func(&m, f, &args).unwrap();
            let b = interpret_func(&m2, f2, &args).unwrap();
            prop_assert!(a[0].same(b[0]), "{:?} vs {:?} on {}", a[0], b[0], text);
        }
    }
}
