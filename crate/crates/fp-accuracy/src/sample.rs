//! Input sampling guided by the interval analysis.

use eqsat::analysis::{run_dataflow, seed_args, Interval, IntervalAnalysis};
use eqsat::ir::{Module, OpId};
use eqsat::pattern::Predicate;
use rand::Rng;

use crate::ulp::{from_ordinal, ordinal};
use crate::FpError;

/// Candidates drawn per requested point before giving up.
pub const MAX_DRAWS_PER_POINT: usize = 1000;

/// Uniform over the doubles in `[lo, hi]`, so every binade gets weight in
/// proportion to how many doubles it holds.
pub fn draw(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let (a, b) = (ordinal(lo), ordinal(hi));
    if a >= b {
        return lo;
    }
    from_ordinal(rng.gen_range(a..=b))
}

/// True when the interval analysis, run with `point` substituted for the
/// arguments of `func`, proves every operation result free of errors.
pub fn point_is_safe(m: &Module, func: OpId, point: &[f64]) -> bool {
    let seeds: Vec<Interval> = point.iter().map(|&x| Interval::point(x)).collect();
    let Ok(r) = run_dataflow(m, &IntervalAnalysis, &seed_args(m, func, &seeds)) else {
        return false;
    };
    let mut ok = true;
    m.walk_from(func, &mut |op| {
        for &v in m.results(op) {
            if !r.get(v).facts().proves(Predicate::NonError) {
                ok = false;
            }
        }
    });
    ok
}

/// `n` points inside `ranges` (one range per argument of `func`) on which
/// no operation of `func` can fail. More than 99.9% rejections is an
/// error.
pub fn sample_inputs(
    m: &Module,
    func: OpId,
    ranges: &[(f64, f64)],
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>, FpError> {
    if ranges.iter().any(|&(lo, hi)| !(lo <= hi)) {
        return Err(FpError::Sampling("precondition leaves an empty range".into()));
    }
    let budget = n.saturating_mul(MAX_DRAWS_PER_POINT);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0;
    while out.len() < n {
        if draws == budget {
            return Err(FpError::Sampling(format!(
                "{} of {draws} candidates rejected",
                draws - out.len()
            )));
        }
        draws += 1;
        let p: Vec<f64> = ranges.iter().map(|&(lo, hi)| draw(rng, lo, hi)).collect();
        if point_is_safe(m, func, &p) {
            out.push(p);
        }
    }
    Ok(out)
}
