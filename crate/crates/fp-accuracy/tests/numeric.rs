use astro_float::BigFloat;
use eqsat_fp::real::{big_from_f64, to_f64, RealEval, DEFAULT_PRECISION};
use eqsat_fp::ulp::{bits_of_error, from_ordinal, ordinal, ulp_distance};
use proptest::prelude::*;

const P: usize = DEFAULT_PRECISION;
const RM: astro_float::RoundingMode = astro_float::RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    big_from_f64(x, P)
}

/// Steps from `a` up to `b` with `next_up`, which never visits -0.0 from
/// below, so both zeros count once.
fn count_steps(a: f64, b: f64) -> u64 {
    let mut n = 0;
    let mut x = a;
    while x < b {
        x = x.next_up();
        n += 1;
    }
    n
}

#[test]
fn ulp_distance_matches_enumeration_on_small_windows() {
    let windows: [(f64, f64); 5] = [
        (1.0, 1.0 + 300.0 * f64::EPSILON),
        (1.0 - 100.0 * f64::EPSILON / 2.0, 1.0 + 100.0 * f64::EPSILON),
        (-5e-323, 5e-323),
        (f64::MIN_POSITIVE - 20.0 * 5e-324, f64::MIN_POSITIVE + 20.0 * f64::MIN_POSITIVE * f64::EPSILON),
        (f64::MAX * (1.0 - 15.0 * f64::EPSILON), f64::INFINITY),
    ];
    for (lo, hi) in windows {
        let mut x = lo;
        let mut points = vec![lo];
        while x < hi {
            x = x.next_up();
            points.push(x);
        }
        assert!(points.len() > 10);
        for (i, &a) in points.iter().enumerate().step_by(3) {
            for &b in &points[i..] {
                let expected = count_steps(a, b);
                assert_eq!(ulp_distance(a, b), Some(expected), "{a:e} {b:e}");
                assert_eq!(ulp_distance(b, a), Some(expected));
            }
        }
    }
}

#[test]
fn zeros_and_nan() {
    assert_eq!(ulp_distance(0.0, -0.0), Some(0));
    assert_eq!(ulp_distance(-5e-324, 5e-324), Some(2));
    assert_eq!(ulp_distance(f64::NAN, 1.0), None);
    assert_eq!(bits_of_error(1.0, 1.0), Some(0.0));
    assert_eq!(bits_of_error(1.0, 1.0f64.next_up()), Some(1.0));
    assert_eq!(bits_of_error(f64::NAN, 1.0), None);
}

#[test]
fn correctly_rounded_ties_go_to_even() {
    // 1 + 2^-53 is halfway between 1 and its successor.
    let half = big(1.0).add(&big(f64::EPSILON / 2.0), P, RM);
    assert_eq!(to_f64(&half), 1.0);
    let three_halves = big(1.0 + f64::EPSILON).add(&big(f64::EPSILON / 2.0), P, RM);
    assert_eq!(to_f64(&three_halves), 1.0 + 2.0 * f64::EPSILON);
    let just_above = half.add(&big(1e-300), P, RM);
    assert_eq!(to_f64(&just_above), 1.0 + f64::EPSILON);
    let overflow = big(f64::MAX).mul(&big(2.0), P, RM);
    assert_eq!(to_f64(&overflow), f64::INFINITY);
    let tiny = big(5e-324).div(&big(3.0), P, RM);
    assert_eq!(to_f64(&tiny), 0.0);
    assert_eq!(to_f64(&tiny.neg()).to_bits(), (-0.0f64).to_bits());
}

#[test]
fn real_evaluator_domain_errors() {
    let mut r = RealEval::new(P);
    assert!(r.apply("math.sqrt", &[], &[&big(-1.0)]).is_none());
    assert!(r.apply("math.log", &[], &[&big(0.0)]).is_none());
    assert!(r.apply("arith.divf", &[], &[&big(1.0), &big(0.0)]).is_none());
    let cube = r.apply("math.powf", &[], &[&big(-2.0), &big(3.0)]).unwrap();
    assert_eq!(to_f64(&cube), -8.0);
    assert!(r.apply("math.powf", &[], &[&big(-2.0), &big(0.5)]).is_none());
    let e = r.apply("math.exp", &[], &[&big(1.0)]).unwrap();
    assert_eq!(to_f64(&e), std::f64::consts::E);
}

fn finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |x| x.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn conversion_round_trips(x in finite()) {
        // Zero carries no sign at high precision.
        let back = to_f64(&big(x));
        prop_assert!(back.to_bits() == x.to_bits() || (x == 0.0 && back == 0.0));
    }

    // IEEE arithmetic is correctly rounded, so it is the oracle for
    // rounding exact high-precision results.
    #[test]
    fn rounding_agrees_with_hardware(a in finite(), b in finite()) {
        let prod = a * b;
        let exact = to_f64(&big(a).mul(&big(b), P, RM));
        prop_assert!(exact.to_bits() == prod.to_bits() || (prod == 0.0 && exact == 0.0));
        let (ea, eb) = (a.abs().log2(), b.abs().log2());
        if (ea - eb).abs() < 900.0 || a == 0.0 || b == 0.0 {
            let sum = a + b;
            let exact = big(a).add(&big(b), P, RM);
            if sum != 0.0 {
                prop_assert_eq!(to_f64(&exact).to_bits(), sum.to_bits());
            } else {
                prop_assert_eq!(to_f64(&exact), 0.0);
            }
        }
    }

    #[test]
    fn rounding_agrees_with_hardware_near_subnormals(a in -1e-150f64..1e-150, b in -1e-150f64..1e-150) {
        let exact = big(a).mul(&big(b), P, RM);
        prop_assert_eq!(to_f64(&exact), a * b);
    }

    #[test]
    fn ordinals_invert(k in -(0x7ff0_0000_0000_0000i64)..=0x7ff0_0000_0000_0000) {
        prop_assert_eq!(ordinal(from_ordinal(k)), k);
    }

    #[test]
    fn distance_is_a_metric_on_ordered_triples(a in finite(), b in finite(), c in finite()) {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        let [x, y, z] = v;
        prop_assert_eq!(ulp_distance(x, x), Some(0));
        prop_assert_eq!(ulp_distance(x, y), ulp_distance(y, x));
        prop_assert_eq!(
            ulp_distance(x, z).unwrap(),
            ulp_distance(x, y).unwrap() + ulp_distance(y, z).unwrap()
        );
    }
}
