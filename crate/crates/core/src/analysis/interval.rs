use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use super::{run_dataflow, Dataflow, Lattice};
use crate::engine::{ClassAnalysis, EGraph};
use crate::ir::{Attr, Attribute, Module, OpId, ValueId};
use crate::pattern::Predicate;
use crate::symbol::Symbol;

/// Enclosure of a value: a closed range of reals (possibly infinite) and
/// whether the value may be NaN. `range: None` with `nan: false` is the
/// empty element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub range: Option<(f64, f64)>,
    pub nan: bool,
}

impl Interval {
    pub const TOP: Interval = Interval {
        range: Some((f64::NEG_INFINITY, f64::INFINITY)),
        nan: true,
    };
    pub const BOTTOM: Interval = Interval { range: None, nan: false };

    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval {
            range: Some((lo, hi)),
            nan: false,
        }
    }

    pub fn point(v: f64) -> Interval {
        if v.is_nan() {
            Interval { range: None, nan: true }
        } else {
            Interval::new(v, v)
        }
    }

    pub fn with_nan(mut self, nan: bool) -> Interval {
        self.nan |= nan;
        self
    }

    pub fn lo(&self) -> Option<f64> {
        self.range.map(|r| r.0)
    }

    pub fn hi(&self) -> Option<f64> {
        self.range.map(|r| r.1)
    }

    /// Whether the concrete value `v` lies in the enclosure.
    pub fn contains(&self, v: f64) -> bool {
        if v.is_nan() {
            return self.nan;
        }
        self.range.is_some_and(|(lo, hi)| lo <= v && v <= hi)
    }

    fn contains_zero(&self) -> bool {
        self.range.is_some_and(|(lo, hi)| lo <= 0.0 && 0.0 <= hi)
    }

    pub fn facts(&self) -> PredicateFacts {
        let Some((lo, hi)) = self.range else {
            return PredicateFacts::default();
        };
        let clean = !self.nan;
        PredicateFacts {
            positive: clean && lo > 0.0,
            non_negative: clean && lo >= 0.0,
            non_zero: clean && (lo > 0.0 || hi < 0.0),
            non_error: clean && lo.is_finite() && hi.is_finite(),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.range {
            Some((lo, hi)) => write!(f, "[{lo:e},{hi:e}] nan={}", self.nan),
            None => write!(f, "[] nan={}", self.nan),
        }
    }
}

impl Lattice for Interval {
    fn top() -> Self {
        Interval::TOP
    }

    /// Intersection: every member of an e-class denotes the same value, so
    /// all of their enclosures hold at once.
    fn combine(&self, other: &Self) -> Self {
        let range = match (self.range, other.range) {
            (Some((a, b)), Some((c, d))) => {
                let (lo, hi) = (a.max(c), b.min(d));
                (lo <= hi).then_some((lo, hi))
            }
            _ => None,
        };
        Interval {
            range,
            nan: self.nan && other.nan,
        }
    }

    fn leq(&self, other: &Self) -> bool {
        let range_ok = match (self.range, other.range) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((a, b)), Some((c, d))) => c <= a && b <= d,
        };
        range_ok && (!self.nan || other.nan)
    }

    fn is_bottom(&self) -> bool {
        *self == Interval::BOTTOM
    }
}

/// Facts implied by an enclosure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PredicateFacts {
    pub non_zero: bool,
    pub non_negative: bool,
    pub positive: bool,
    pub non_error: bool,
}

impl PredicateFacts {
    pub fn proves(&self, p: Predicate) -> bool {
        match p {
            Predicate::Positive => self.positive,
            Predicate::NonNegative => self.non_negative,
            Predicate::NonZero => self.non_zero,
            Predicate::NonError => self.non_error,
        }
    }
}

fn down(x: f64, ulps: u32) -> f64 {
    (0..ulps).fold(x, |v, _| if v == f64::NEG_INFINITY { v } else { v.next_down() })
}

fn up(x: f64, ulps: u32) -> f64 {
    (0..ulps).fold(x, |v, _| if v == f64::INFINITY { v } else { v.next_up() })
}

/// Range from candidate bounds computed with round-to-nearest, widened by
/// `ulps` in each direction. NaN candidates widen the bound to infinity.
fn hull(cands: &[f64], ulps: u32) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &c in cands {
        if c.is_nan() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        lo = lo.min(c);
        hi = hi.max(c);
    }
    (down(lo, ulps), up(hi, ulps))
}

const INT_MIN: f64 = -9.223372036854775808e18;
const INT_MAX: f64 = 9.223372036854775808e18;
const INT_SAFE: f64 = 4.611686018427387904e18;

fn int_top() -> Interval {
    Interval::new(INT_MIN, INT_MAX)
}

fn clamp_int(r: (f64, f64)) -> Interval {
    if r.0 < -INT_SAFE || r.1 > INT_SAFE {
        int_top()
    } else {
        Interval::new(r.0, r.1)
    }
}

fn monotone(a: Interval, f: fn(f64) -> f64, ulps: u32) -> Interval {
    match a.range {
        Some((lo, hi)) => {
            let (l, h) = hull(&[f(lo), f(hi)], ulps);
            Interval::new(l, h).with_nan(a.nan)
        }
        None => a,
    }
}

/// Smallest tiny magnitude at which error-free transformations are trusted.
const TINY: f64 = 1e-280;

/// Directed-rounding correction: `x` is the nearest result and `err` has
/// the sign of (exact - x).
fn dn(x: f64, err: f64) -> f64 {
    if err < 0.0 || x.abs() < TINY {
        down(x, 1)
    } else {
        x
    }
}

fn upc(x: f64, err: f64) -> f64 {
    if err > 0.0 || x.abs() < TINY {
        up(x, 1)
    } else {
        x
    }
}

fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

/// Rounding of an infinite nearest result computed from finite inputs.
fn overflow(x: f64, finite_inputs: bool, toward_zero: bool) -> f64 {
    if finite_inputs && toward_zero {
        x.signum() * f64::MAX
    } else {
        x
    }
}

fn add_dn(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_nan() {
        return f64::NEG_INFINITY;
    }
    if s.is_infinite() {
        return overflow(s, a.is_finite() && b.is_finite(), s > 0.0);
    }
    if two_sum_err(a, b, s) < 0.0 {
        down(s, 1)
    } else {
        s
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_nan() {
        return f64::INFINITY;
    }
    if s.is_infinite() {
        return overflow(s, a.is_finite() && b.is_finite(), s < 0.0);
    }
    if two_sum_err(a, b, s) > 0.0 {
        up(s, 1)
    } else {
        s
    }
}

fn mul_dn(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_nan() {
        return 0.0;
    }
    if p.is_infinite() {
        return overflow(p, a.is_finite() && b.is_finite(), p > 0.0);
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    dn(p, a.mul_add(b, -p))
}

fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_nan() {
        return 0.0;
    }
    if p.is_infinite() {
        return overflow(p, a.is_finite() && b.is_finite(), p < 0.0);
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    upc(p, a.mul_add(b, -p))
}

/// Sign of (a / b - q) for the nearest quotient `q`.
fn div_err(a: f64, b: f64, q: f64) -> f64 {
    if !a.is_finite() || !b.is_finite() || q == 0.0 {
        return if q == 0.0 && a != 0.0 && b.is_finite() { a.signum() * b.signum() } else { 0.0 };
    }
    (-q).mul_add(b, a) * b.signum()
}

fn div_dn(a: f64, b: f64) -> f64 {
    let q = a / b;
    if q.is_infinite() {
        return overflow(q, a.is_finite(), q > 0.0);
    }
    dn(q, div_err(a, b, q))
}

fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if q.is_infinite() {
        return overflow(q, a.is_finite(), q < 0.0);
    }
    upc(q, div_err(a, b, q))
}

fn add(a: Interval, b: Interval) -> Interval {
    let nan = a.nan || b.nan;
    let (Some((al, ah)), Some((bl, bh))) = (a.range, b.range) else {
        return Interval { range: None, nan };
    };
    let inf_clash = (ah == f64::INFINITY && bl == f64::NEG_INFINITY) || (al == f64::NEG_INFINITY && bh == f64::INFINITY);
    Interval::new(add_dn(al, bl), add_up(ah, bh)).with_nan(nan || inf_clash)
}

fn neg(a: Interval) -> Interval {
    Interval {
        range: a.range.map(|(l, h)| (-h, -l)),
        nan: a.nan,
    }
}

fn mul(a: Interval, b: Interval) -> Interval {
    let nan = a.nan || b.nan;
    let (Some((al, ah)), Some((bl, bh))) = (a.range, b.range) else {
        return Interval { range: None, nan };
    };
    let zero_inf = (a.contains_zero() && (bl.is_infinite() || bh.is_infinite()))
        || (b.contains_zero() && (al.is_infinite() || ah.is_infinite()));
    let pairs = [(al, bl), (al, bh), (ah, bl), (ah, bh)];
    let lo = pairs.iter().map(|&(x, y)| mul_dn(x, y)).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|&(x, y)| mul_up(x, y)).fold(f64::NEG_INFINITY, f64::max);
    Interval::new(lo, hi).with_nan(nan || zero_inf)
}

fn div(a: Interval, b: Interval) -> Interval {
    let nan = a.nan || b.nan;
    let (Some((al, ah)), Some((bl, bh))) = (a.range, b.range) else {
        return Interval { range: None, nan };
    };
    if b.contains_zero() {
        return Interval::TOP;
    }
    let pairs = [(al, bl), (al, bh), (ah, bl), (ah, bh)];
    if pairs.iter().any(|&(x, y)| (x / y).is_nan()) {
        return Interval::TOP;
    }
    let lo = pairs.iter().map(|&(x, y)| div_dn(x, y)).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|&(x, y)| div_up(x, y)).fold(f64::NEG_INFINITY, f64::max);
    Interval::new(lo, hi).with_nan(nan)
}

fn abs(a: Interval) -> Interval {
    match a.range {
        Some((lo, _)) if lo >= 0.0 => a,
        Some((lo, hi)) if hi <= 0.0 => Interval::new(-hi, -lo).with_nan(a.nan),
        Some((lo, hi)) => Interval::new(0.0, (-lo).max(hi)).with_nan(a.nan),
        None => a,
    }
}

fn sqrt(a: Interval) -> Interval {
    match a.range {
        Some((_, hi)) if hi < 0.0 => Interval { range: None, nan: true },
        Some((lo, hi)) => {
            let (x, y) = (lo.max(0.0), hi);
            let (sx, sy) = (x.sqrt(), y.sqrt());
            let err = |v: f64, s: f64| if s.is_finite() { (-s).mul_add(s, v) } else { 0.0 };
            let l = dn(sx, err(x, sx)).max(0.0);
            Interval::new(l, upc(sy, err(y, sy))).with_nan(a.nan || lo < 0.0)
        }
        None => a,
    }
}

fn log(a: Interval) -> Interval {
    match a.range {
        Some((_, hi)) if hi < 0.0 => Interval { range: None, nan: true },
        Some((lo, hi)) => {
            let l = if lo <= 0.0 { f64::NEG_INFINITY } else { down(lo.ln(), 2) };
            let h = if hi == 0.0 { f64::NEG_INFINITY } else { up(hi.ln(), 2) };
            Interval::new(l, h).with_nan(a.nan || lo < 0.0)
        }
        None => a,
    }
}

fn exp(a: Interval) -> Interval {
    let r = monotone(a, f64::exp, 2);
    Interval {
        range: r.range.map(|(l, h)| (l.max(0.0), h)),
        nan: r.nan,
    }
}

/// Sine or cosine; `shift` is the phase of the first maximum.
fn periodic(a: Interval, f: fn(f64) -> f64, max_at: f64) -> Interval {
    let Some((lo, hi)) = a.range else { return a };
    let full = Interval::new(-1.0, 1.0);
    if !lo.is_finite() || !hi.is_finite() {
        return full.with_nan(true);
    }
    if hi - lo >= 2.0 * PI || lo.abs() > 1e6 || hi.abs() > 1e6 {
        return full.with_nan(a.nan);
    }
    let slack = 1e-9;
    let hits = |phase: f64| {
        let k_lo = ((lo - slack - phase) / (2.0 * PI)).ceil();
        let k_hi = ((hi + slack - phase) / (2.0 * PI)).floor();
        k_lo <= k_hi
    };
    let (l, h) = hull(&[f(lo), f(hi)], 2);
    let h = if hits(max_at) { 1.0 } else { h.min(1.0) };
    let l = if hits(max_at + PI) { -1.0 } else { l.max(-1.0) };
    Interval::new(l, h).with_nan(a.nan)
}

fn powi(a: Interval, n: i64) -> Interval {
    let Some((lo, hi)) = a.range else { return a };
    if n == 0 {
        return Interval::point(1.0);
    }
    if n < 0 {
        return div(Interval::point(1.0), powi(a, -n));
    }
    let p = |x: f64| x.powi(n as i32);
    let ulps = 2 + (n as u32).min(64);
    if n % 2 == 1 {
        let (l, h) = hull(&[p(lo), p(hi)], ulps);
        return Interval::new(l, h).with_nan(a.nan);
    }
    let m = abs(a);
    let (ml, mh) = m.range.expect("abs keeps a range");
    let (l, h) = hull(&[p(ml), p(mh)], ulps);
    Interval::new(l.max(0.0), h).with_nan(a.nan)
}

fn pow(a: Interval, b: Interval) -> Interval {
    // A NaN operand gives NaN, except pow(NaN, 0) = pow(1, NaN) = 1.
    let one_or_nan = |hit: bool| Interval {
        range: hit.then_some((1.0, 1.0)),
        nan: true,
    };
    if a.range.is_none() {
        return one_or_nan(b.contains(0.0));
    }
    if b.range.is_none() {
        return one_or_nan(a.contains(1.0));
    }
    if let Some((bl, bh)) = b.range {
        if bl == bh && !b.nan && bl.fract() == 0.0 && bl.abs() <= 64.0 {
            return powi(a, bl as i64);
        }
    }
    match a.range {
        Some((lo, _)) if lo > 0.0 => {
            let r = exp(mul(b, log(a)));
            let Some((l, h)) = r.range else { return r };
            Interval::new(down(l, 2).max(0.0), up(h, 2)).with_nan(r.nan)
        }
        _ => Interval::TOP,
    }
}

fn constant(attrs: &[(Symbol, Attr)]) -> Interval {
    let Some((_, v)) = attrs.iter().find(|(k, _)| k.as_str() == "value") else {
        return Interval::TOP;
    };
    match v.get() {
        Attribute::Int { value, .. } => {
            let x = *value as f64;
            if x as i64 == *value && x.abs() < INT_SAFE {
                Interval::point(x)
            } else {
                Interval::new(down(x, 1), up(x, 1))
            }
        }
        Attribute::Float { bits, .. } => Interval::point(f64::from_bits(*bits)),
        _ => Interval::TOP,
    }
}

/// Enclosure of the results of `name` over every combination of operand
/// values drawn from `ins`, including the rounding of 64-bit evaluation.
/// Unknown operations give `TOP`.
pub fn interval_transfer(name: Symbol, attrs: &[(Symbol, Attr)], ins: &[Interval]) -> Interval {
    if ins.iter().any(|i| i.is_bottom()) {
        return Interval::BOTTOM;
    }
    let arg = |i: usize| ins.get(i).copied().unwrap_or(Interval::TOP);
    match name.as_str() {
        "arith.constant" => constant(attrs),
        "arith.addf" => add(arg(0), arg(1)),
        "arith.subf" => add(arg(0), neg(arg(1))),
        "arith.mulf" => mul(arg(0), arg(1)),
        "arith.divf" => div(arg(0), arg(1)),
        "arith.negf" => neg(arg(0)),
        "math.absf" => abs(arg(0)),
        "math.sqrt" => sqrt(arg(0)),
        "math.log" => log(arg(0)),
        "math.exp" => exp(arg(0)),
        "math.sin" => periodic(arg(0), f64::sin, FRAC_PI_2),
        "math.cos" => periodic(arg(0), f64::cos, 0.0),
        "math.powf" => pow(arg(0), arg(1)),
        "arith.addi" | "arith.subi" | "arith.muli" => {
            let (a, b) = (arg(0), arg(1));
            let r = match name.as_str() {
                "arith.addi" => add(a, b),
                "arith.subi" => add(a, neg(b)),
                _ => mul(a, b),
            };
            match r.range {
                Some(range) if !r.nan => clamp_int(range),
                _ => int_top(),
            }
        }
        "arith.shli" => match arg(1).range {
            Some((b, bh)) if b == bh && (0.0..=62.0).contains(&b) => match mul(arg(0), Interval::point(2f64.powi(b as i32))).range {
                Some(range) => clamp_int(range),
                None => int_top(),
            },
            _ => int_top(),
        },
        "cplx.abs" => Interval {
            range: Some((0.0, f64::INFINITY)),
            nan: true,
        },
        _ => Interval::TOP,
    }
}

/// Interval analysis as a dataflow problem.
#[derive(Clone, Copy, Debug, Default)]
pub struct IntervalAnalysis;

impl Dataflow for IntervalAnalysis {
    type Elem = Interval;

    fn transfer(&self, name: Symbol, attrs: &[(Symbol, Attr)], operands: &[Interval]) -> Interval {
        interval_transfer(name, attrs, operands)
    }
}

/// Interval facts kept per e-class during saturation.
#[derive(Clone, Debug, Default)]
pub struct EClassIntervals {
    pub seeds: HashMap<ValueId, Interval>,
    pub values: HashMap<ValueId, Interval>,
    pub diagnostics: Vec<String>,
}

impl EClassIntervals {
    pub fn new(seeds: HashMap<ValueId, Interval>) -> EClassIntervals {
        EClassIntervals {
            seeds,
            ..Default::default()
        }
    }

    pub fn get(&self, v: ValueId) -> Interval {
        self.values.get(&v).copied().unwrap_or(Interval::TOP)
    }
}

impl ClassAnalysis for EClassIntervals {
    fn name(&self) -> &str {
        "interval"
    }

    fn refresh(&mut self, m: &Module, _g: &EGraph) {
        match run_dataflow(m, &IntervalAnalysis, &self.seeds) {
            Ok(r) => {
                for c in &r.contradictions {
                    self.diagnostics.push(format!("e-class {c:?} has contradictory intervals"));
                }
                self.values = r.values;
            }
            Err(e) => self.diagnostics.push(e.to_string()),
        }
    }

    fn make(&mut self, m: &Module, g: &EGraph, enode: OpId) {
        let ins: Vec<Interval> = m.operands(enode).iter().map(|&v| self.get(v)).collect();
        let e = interval_transfer(m.op_name(enode), m.attrs(enode), &ins);
        self.values.insert(m.result(enode, 0), e);
        if let Some(c) = g.class_of(m, enode) {
            let merged = self.get(c).combine(&e);
            self.values.insert(c, merged);
        }
    }

    fn merge(&mut self, survivor: ValueId, absorbed: ValueId) {
        let merged = self.get(survivor).combine(&self.get(absorbed));
        if merged.is_bottom() {
            self.diagnostics.push(format!("merging {survivor:?} and {absorbed:?} produced an empty interval"));
        }
        self.values.insert(survivor, merged);
    }

    fn check(&self, class: ValueId, pred: Predicate) -> Option<bool> {
        Some(self.get(class).facts().proves(pred))
    }
}
