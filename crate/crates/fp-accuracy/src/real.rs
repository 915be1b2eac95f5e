//! Arbitrary-precision evaluation of the float dialect and correctly rounded
//! conversion back to `f64`.

use astro_float::{BigFloat, Consts, RoundingMode, Sign, WORD_BIT_SIZE};
use eqsat::ir::{Attr, Attribute};
use eqsat::Symbol;

pub const DEFAULT_PRECISION: usize = 1024;

const RM: RoundingMode = RoundingMode::ToEven;

/// Evaluator holding the working precision and the constant cache that
/// transcendental functions need.
pub struct RealEval {
    pub precision: usize,
    cc: Consts,
}

impl RealEval {
    pub fn new(precision: usize) -> RealEval {
        RealEval {
            precision: precision.max(64),
            cc: Consts::new().expect("constant cache allocation"),
        }
    }

    pub fn from_f64(&self, x: f64) -> Option<BigFloat> {
        x.is_finite().then(|| big_from_f64(x, self.precision))
    }

    /// Applies one IR operation. `None` marks a domain error, an infinite
    /// result or an unknown operation.
    pub fn apply(&mut self, name: &str, attrs: &[(Symbol, Attr)], args: &[&BigFloat]) -> Option<BigFloat> {
        let p = self.precision;
        let a = |i: usize| args.get(i).copied();
        let r = match name {
            "arith.constant" => {
                let v = attrs.iter().find(|(k, _)| k.as_str() == "value")?.1;
                match v.get() {
                    Attribute::Float { bits, .. } => self.from_f64(f64::from_bits(*bits))?,
                    Attribute::Int { value, .. } => BigFloat::from_i64(*value, p),
                    _ => return None,
                }
            }
            "arith.addf" => a(0)?.add(a(1)?, p, RM),
            "arith.subf" => a(0)?.sub(a(1)?, p, RM),
            "arith.mulf" => a(0)?.mul(a(1)?, p, RM),
            "arith.divf" => {
                if a(1)?.is_zero() {
                    return None;
                }
                a(0)?.div(a(1)?, p, RM)
            }
            "arith.negf" => a(0)?.neg(),
            "math.absf" => a(0)?.abs(),
            "math.sqrt" => {
                if a(0)?.is_negative() {
                    return None;
                }
                a(0)?.sqrt(p, RM)
            }
            "math.log" => {
                if !a(0)?.is_positive() || a(0)?.is_zero() {
                    return None;
                }
                a(0)?.ln(p, RM, &mut self.cc)
            }
            "math.exp" => a(0)?.exp(p, RM, &mut self.cc),
            "math.sin" => a(0)?.sin(p, RM, &mut self.cc),
            "math.cos" => a(0)?.cos(p, RM, &mut self.cc),
            "math.powf" => self.pow(a(0)?, a(1)?)?,
            _ => return None,
        };
        (!r.is_nan() && !r.is_inf()).then_some(r)
    }

    /// Real power: negative bases only with integral exponents.
    fn pow(&mut self, x: &BigFloat, n: &BigFloat) -> Option<BigFloat> {
        let p = self.precision;
        if n.is_zero() {
            return Some(BigFloat::from_i64(1, p));
        }
        if x.is_zero() {
            return n.is_positive().then(|| BigFloat::from_i64(0, p));
        }
        if x.is_positive() {
            return Some(x.pow(n, p, RM, &mut self.cc));
        }
        if !n.fract().is_zero() {
            return None;
        }
        let r = x.abs().pow(n, p, RM, &mut self.cc);
        let odd = {
            let half = n.div(&BigFloat::from_i64(2, p), p, RM);
            !half.fract().is_zero()
        };
        Some(if odd { r.neg() } else { r })
    }
}

/// Exact value of a finite double as `mantissa * 2^exp`, built from two
/// normal powers of two so that subnormal inputs keep their value.
pub fn big_from_f64(x: f64, precision: usize) -> BigFloat {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
    let (e1, e2) = (e / 2, e - e / 2);
    let v = BigFloat::from_u64(mant, precision)
        .mul(&BigFloat::from_f64(pow2(e1), precision), precision, RM)
        .mul(&BigFloat::from_f64(pow2(e2), precision), precision, RM);
    if x.is_sign_negative() {
        v.neg()
    } else {
        v
    }
}

/// Nearest double to `x`, ties to even. Infinities are kept; NaN maps to
/// NaN.
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf() {
        return if x.is_inf_pos() { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    let Some((words, _, sign, exp, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    let neg = sign == Sign::Neg;
    let signed = |v: f64| if neg { -v } else { v };
    if words.iter().all(|&w| w == 0) {
        return signed(0.0);
    }
    // Value is 0.m * 2^exp with the most significant mantissa word last.
    let mut bits = words.iter().rev().flat_map(|&w| (0..WORD_BIT_SIZE).rev().map(move |i| (w >> i) & 1 == 1));
    let mut lead = 0i64;
    for b in bits.by_ref() {
        if b {
            break;
        }
        lead += 1;
    }
    // The value is 1.f * 2^e.
    let e = exp as i64 - 1 - lead;
    if e > 1023 {
        return signed(f64::INFINITY);
    }
    let keep: i64 = if e >= -1022 { 53 } else { 53 - (-1022 - e) };
    let (mut q, round, sticky) = if keep > 0 {
        let mut q = 1u64;
        for _ in 1..keep {
            q = (q << 1) | u64::from(bits.next().unwrap_or(false));
        }
        (q, bits.next().unwrap_or(false), bits.any(|b| b))
    } else if keep == 0 {
        (0, true, bits.any(|b| b))
    } else {
        (0, false, true)
    };
    if round && (sticky || q & 1 == 1) {
        q += 1;
    }
    // q * 2^(e - keep + 1), split so each factor is a normal power of two.
    let s = e - keep + 1;
    let (s1, s2) = (s / 2, s - s / 2);
    let v = q as f64 * pow2(s1) * pow2(s2);
    signed(v)
}

fn pow2(k: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}
