//! Constant folding. Integer folds wrap at the operand width. Float folds only
//! fire when the f64 result is finite and exact, so folding never changes the
//! real-valued meaning of a program.

use crate::ir::{Attr, Attribute};
use crate::symbol::Symbol;

type Attrs<'a> = &'a [(Symbol, Attr)];

pub(super) fn constant(attrs: Attrs, _: &[Attr]) -> Option<Attr> {
    attrs.iter().find(|(k, _)| k.as_str() == "value").map(|(_, v)| *v)
}

fn ints(args: &[Attr]) -> Option<(i64, i64, u32)> {
    match (args[0].get(), args[1].get()) {
        (Attribute::Int { value: a, width: wa }, Attribute::Int { value: b, width: wb }) if wa == wb => Some((*a, *b, *wa)),
        _ => None,
    }
}

fn wrap(v: i64, width: u32) -> Attr {
    if width >= 64 {
        Attr::int(v, width)
    } else {
        Attr::int(v & ((1i64 << width) - 1), width)
    }
}

pub(super) fn addi(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b, w) = ints(args)?;
    Some(wrap(a.wrapping_add(b), w))
}

pub(super) fn subi(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b, w) = ints(args)?;
    Some(wrap(a.wrapping_sub(b), w))
}

pub(super) fn muli(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b, w) = ints(args)?;
    Some(wrap(a.wrapping_mul(b), w))
}

/// Shift amounts are taken modulo 64, matching the interpreter.
pub(super) fn shli(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b, w) = ints(args)?;
    Some(wrap(a.wrapping_shl(b as u32), w))
}

/// Smallest magnitude at which error terms of +,-,*,/ are still representable.
const SAFE_MIN: f64 = 1.0e-290;

fn finite_result(r: f64) -> Option<Attr> {
    if !r.is_finite() || (r != 0.0 && r.abs() < SAFE_MIN) {
        return None;
    }
    Some(Attr::f64(r))
}

fn floats2(args: &[Attr]) -> Option<(f64, f64)> {
    Some((args[0].as_f64()?, args[1].as_f64()?))
}

fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

pub(super) fn addf(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b) = floats2(args)?;
    let s = a + b;
    if !s.is_finite() || two_sum_err(a, b, s) != 0.0 {
        return None;
    }
    finite_result(s)
}

pub(super) fn subf(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b) = floats2(args)?;
    let s = a - b;
    if !s.is_finite() || two_sum_err(a, -b, s) != 0.0 {
        return None;
    }
    finite_result(s)
}

pub(super) fn mulf(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b) = floats2(args)?;
    let p = a * b;
    if !p.is_finite() || a.mul_add(b, -p) != 0.0 {
        return None;
    }
    finite_result(p)
}

pub(super) fn divf(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b) = floats2(args)?;
    if b == 0.0 {
        return None;
    }
    let q = a / b;
    if !q.is_finite() || q.mul_add(b, -a) != 0.0 {
        return None;
    }
    finite_result(q)
}

/// Only exact integral powers of small magnitude are folded.
pub(super) fn powf(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let (a, b) = floats2(args)?;
    if b.fract() != 0.0 || !(0.0..=64.0).contains(&b) {
        return None;
    }
    let mut acc = Attr::f64(1.0);
    for _ in 0..b as u32 {
        acc = mulf(&[], &[acc, Attr::f64(a)])?;
    }
    Some(acc)
}

pub(super) fn negf(_: Attrs, args: &[Attr]) -> Option<Attr> {
    Some(Attr::f64(-args[0].as_f64()?))
}

pub(super) fn absf(_: Attrs, args: &[Attr]) -> Option<Attr> {
    Some(Attr::f64(args[0].as_f64()?.abs()))
}

pub(super) fn sqrt(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let a = args[0].as_f64()?;
    if a < 0.0 || a.is_nan() {
        return None;
    }
    let s = a.sqrt();
    if s.mul_add(s, -a) != 0.0 {
        return None;
    }
    finite_result(s)
}

pub(super) fn log(_: Attrs, args: &[Attr]) -> Option<Attr> {
    (args[0].as_f64()? == 1.0).then(|| Attr::f64(0.0))
}

pub(super) fn exp(_: Attrs, args: &[Attr]) -> Option<Attr> {
    (args[0].as_f64()? == 0.0).then(|| Attr::f64(1.0))
}

pub(super) fn sin(_: Attrs, args: &[Attr]) -> Option<Attr> {
    let a = args[0].as_f64()?;
    (a == 0.0).then(|| Attr::f64(a))
}

pub(super) fn cos(_: Attrs, args: &[Attr]) -> Option<Attr> {
    (args[0].as_f64()? == 0.0).then(|| Attr::f64(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integer_folds() {
        assert_eq!(addi(&[], &[Attr::i64(2), Attr::i64(3)]), Some(Attr::i64(5)));
        assert_eq!(addi(&[], &[Attr::i64(i64::MAX), Attr::i64(1)]), Some(Attr::i64(i64::MIN)));
        assert_eq!(shli(&[], &[Attr::i64(3), Attr::i64(1)]), Some(Attr::i64(6)));
        assert_eq!(addi(&[], &[Attr::int(1, 1), Attr::int(1, 1)]), Some(Attr::int(0, 1)));
        assert_eq!(addi(&[], &[Attr::i64(1), Attr::int(1, 1)]), None);
    }

    #[test]
    fn float_folds_refuse_errors_and_rounding() {
        assert_eq!(divf(&[], &[Attr::f64(1.0), Attr::f64(0.0)]), None);
        assert_eq!(divf(&[], &[Attr::f64(1.0), Attr::f64(4.0)]), Some(Attr::f64(0.25)));
        assert_eq!(divf(&[], &[Attr::f64(1.0), Attr::f64(3.0)]), None);
        assert_eq!(addf(&[], &[Attr::f64(1.0), Attr::f64(2.0)]), Some(Attr::f64(3.0)));
        assert_eq!(addf(&[], &[Attr::f64(1.0), Attr::f64(1e-30)]), None);
        assert_eq!(sqrt(&[], &[Attr::f64(-4.0)]), None);
        assert_eq!(sqrt(&[], &[Attr::f64(9.0)]), Some(Attr::f64(3.0)));
        assert_eq!(sqrt(&[], &[Attr::f64(2.0)]), None);
        assert_eq!(log(&[], &[Attr::f64(0.0)]), None);
        assert_eq!(mulf(&[], &[Attr::f64(1e200), Attr::f64(1e200)]), None);
        assert_eq!(powf(&[], &[Attr::f64(3.0), Attr::f64(2.0)]), Some(Attr::f64(9.0)));
    }

    proptest! {
        // A successful float fold equals the correctly rounded f64 result,
        // which for exact operations is also the real result.
        #[test]
        fn exact_folds_agree_with_hardware(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let (x, y) = (Attr::f64(a), Attr::f64(b));
            if let Some(r) = addf(&[], &[x, y]) { prop_assert_eq!(r.as_f64().unwrap(), a + b); }
            if let Some(r) = subf(&[], &[x, y]) { prop_assert_eq!(r.as_f64().unwrap(), a - b); }
            if let Some(r) = mulf(&[], &[x, y]) { prop_assert_eq!(r.as_f64().unwrap(), a * b); }
            if let Some(r) = divf(&[], &[x, y]) {
                let q = r.as_f64().unwrap();
                prop_assert_eq!(q, a / b);
                prop_assert_eq!(q * b, a);
            }
        }

        #[test]
        fn small_integer_arithmetic_always_folds(a in -1000i32..1000, b in -1000i32..1000) {
            let (x, y) = (Attr::f64(a as f64), Attr::f64(b as f64));
            prop_assert_eq!(addf(&[], &[x, y]), Some(Attr::f64((a + b) as f64)));
            prop_assert_eq!(mulf(&[], &[x, y]), Some(Attr::f64((a * b) as f64)));
        }
    }
}
