//! Distances between doubles measured in representable values.

/// Position of `x` in the ordered sequence of non-NaN doubles, with both
/// zeros at 0 and infinities one step past the largest finite values.
pub fn ordinal(x: f64) -> i64 {
    debug_assert!(!x.is_nan());
    let bits = x.to_bits() as i64;
    if bits < 0 {
        -(bits & i64::MAX)
    } else {
        bits
    }
}

/// Inverse of [`ordinal`]; `-0.0` is never produced.
pub fn from_ordinal(k: i64) -> f64 {
    if k < 0 {
        -f64::from_bits((-k) as u64)
    } else {
        f64::from_bits(k as u64)
    }
}

/// Number of steps between `a` and `b` in the ordering of [`ordinal`].
/// `None` when either is NaN.
pub fn ulp_distance(a: f64, b: f64) -> Option<u64> {
    if a.is_nan() || b.is_nan() {
        return None;
    }
    Some(ordinal(a).abs_diff(ordinal(b)))
}

/// `log2(1 + ulps)`: 0 for identical values, about 64 at the extremes.
pub fn bits_of_error(approx: f64, exact: f64) -> Option<f64> {
    ulp_distance(approx, exact).map(|d| (1.0 + d as f64).log2())
}
