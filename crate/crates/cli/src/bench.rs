//! Combined versus per-pattern matching on the same saturation run.

use std::collections::HashSet;
use std::fmt;
use std::time::{Duration, Instant};

use eqsat::dialects::{builtin_registry, insert_eclasses};
use eqsat::engine::{apply_matches, saturate, EGraph, MatchMode, MatchRecord, RuleSet, SaturationConfig};
use eqsat::ir::{parse_ir, print_ir, Module};

use crate::CliError;

/// Fourteen integer rewrites in the style of egg's arithmetic tests.
pub const ARITH_RULES: &str = include_str!("../data/arith.rules");

/// Six input programs for [`ARITH_RULES`].
pub const ARITH_INPUTS: [(&str, &str); 6] = [
    ("add-zero-mul-one", include_str!("../data/inputs/add_zero_mul_one.ir")),
    ("distribute", include_str!("../data/inputs/distribute.ir")),
    ("sum-of-four", include_str!("../data/inputs/sum_of_four.ir")),
    ("double-double", include_str!("../data/inputs/double_double.ir")),
    ("cancel", include_str!("../data/inputs/cancel.ir")),
    ("product-chain", include_str!("../data/inputs/product_chain.ir")),
];

/// Timing repetitions per match call; the minimum is kept.
const REPS: usize = 7;

#[derive(Clone, Debug)]
pub struct InputStats {
    pub name: String,
    pub iterations: usize,
    /// Matches found over all iterations (identical in both modes).
    pub matches: usize,
    pub combined: Duration,
    pub individual: Duration,
    /// Both modes, run as separate saturations, print the same final graph.
    pub same_final_graph: bool,
}

impl InputStats {
    /// Individual time over combined time; above 1 means fusion pays off.
    pub fn speedup(&self) -> f64 {
        self.individual.as_secs_f64() / self.combined.as_secs_f64().max(1e-12)
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub inputs: Vec<InputStats>,
}

impl BenchReport {
    pub fn geomean_speedup(&self) -> f64 {
        let n = self.inputs.len().max(1) as f64;
        (self.inputs.iter().map(|s| s.speedup().ln()).sum::<f64>() / n).exp()
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.inputs {
            writeln!(
                f,
                "input={} iters={} matches={} combined_us={:.1} individual_us={:.1} speedup={:.2}",
                s.name,
                s.iterations,
                s.matches,
                s.combined.as_secs_f64() * 1e6,
                s.individual.as_secs_f64() * 1e6,
                s.speedup()
            )?;
        }
        write!(f, "geomean_speedup={:.2}", self.geomean_speedup())
    }
}

type Key = (usize, eqsat::ir::ValueId, Vec<eqsat::ir::ValueId>);

fn keys(ms: &[MatchRecord]) -> HashSet<Key> {
    ms.iter().map(|r| (r.pattern, r.root_class, r.bindings.clone())).collect()
}

fn timed<T>(f: impl Fn() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..REPS {
        let t = Instant::now();
        let r = f();
        best = best.min(t.elapsed());
        last = Some(r);
    }
    (last.expect("REPS > 0"), best)
}

fn egraph_of(name: &str, src: &str) -> Result<(Module, EGraph), CliError> {
    let mut m = parse_ir(src, builtin_registry()).map_err(|e| CliError::Parse(format!("{name}: {e}")))?;
    let f = m.ops_named("func.func")[0];
    let e = insert_eclasses(&mut m, f).map_err(|e| CliError::Pipeline(e.to_string()))?;
    let g = EGraph::new(&mut m, e).map_err(|e| CliError::Pipeline(e.to_string()))?;
    Ok((m, g))
}

fn engine(e: impl fmt::Display) -> CliError {
    CliError::Pipeline(e.to_string())
}

/// Saturates every input for at most `max_iters` rounds. In each round
/// both modes match the same graph; their match sets must be equal, and
/// the combined set is applied. Separate full saturations in each mode must
/// end in the same printed graph.
pub fn bench_matching(inputs: &[(&str, &str)], rules: &RuleSet, max_iters: usize) -> Result<BenchReport, CliError> {
    let mut out = Vec::new();
    for &(name, src) in inputs {
        let (mut m, mut g) = egraph_of(name, src)?;
        g.rebuild(&mut m).map_err(engine)?;
        let (mut tc, mut ti, mut matches, mut iterations) = (Duration::ZERO, Duration::ZERO, 0, 0);
        for iter in 1..=max_iters {
            let (c, dc) = timed(|| rules.match_all(&m, &g, MatchMode::Combined));
            let (i, di) = timed(|| rules.match_all(&m, &g, MatchMode::Individual));
            let (c, i) = (c.map_err(engine)?, i.map_err(engine)?);
            if keys(&c) != keys(&i) {
                return Err(CliError::Mismatch {
                    input: name.to_owned(),
                    iter,
                    combined: c.len(),
                    individual: i.len(),
                });
            }
            tc += dc;
            ti += di;
            matches += c.len();
            iterations = iter;
            let st = apply_matches(&mut m, &mut g, &rules.patterns, &c).map_err(engine)?;
            let repairs = g.rebuild(&mut m).map_err(engine)?;
            if st.new_enodes == 0 && st.unions + repairs == 0 {
                break;
            }
        }

        let mut finals = Vec::new();
        for mode in [MatchMode::Combined, MatchMode::Individual] {
            let (mut m, mut g) = egraph_of(name, src)?;
            let cfg = SaturationConfig {
                max_iterations: Some(max_iters),
                match_mode: mode,
                ..SaturationConfig::default()
            };
            saturate(&mut m, &mut g, rules, &cfg).map_err(engine)?;
            finals.push(print_ir(&m));
        }
        out.push(InputStats {
            name: name.to_owned(),
            iterations,
            matches,
            combined: tc,
            individual: ti,
            same_final_graph: finals[0] == finals[1],
        });
    }
    Ok(BenchReport { inputs: out })
}
