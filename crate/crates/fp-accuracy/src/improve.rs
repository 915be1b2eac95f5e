//! One round of accuracy improvement: saturate, measure, extract.

use std::collections::HashMap;
use std::fmt;
use std::time::Duration;

use eqsat::analysis::{seed_args, EClassIntervals, Interval};
use eqsat::dialects::{builtin_registry, insert_eclasses, interpret_func, Scalar};
use eqsat::engine::{saturate, EGraph, MatchMode, RuleSet, SaturationConfig, SaturationResult, StopReason};
use eqsat::extract::{annotate_selection, replace_selected, ClassGraph, CostModel, COST_ATTR};
use eqsat::ir::{verify, Attr, Module, OpId};
use eqsat::pattern::parse_patterns;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fpcore::{parse_fpcore, raise, FPCore};
use crate::real::{to_f64, RealEval, DEFAULT_PRECISION};
use crate::sample::sample_inputs;
use crate::truth::{eval_function, ground_truth};
use crate::ulp::bits_of_error;
use crate::FpError;

/// Source of the shipped ruleset.
pub const FP_RULES: &str = include_str!("../rules/fp.rules");

/// Added to every e-node's cost so that equally accurate programs are told
/// apart by size.
pub const SIZE_TIEBREAK: f64 = 1e-6;

pub fn default_rules() -> RuleSet {
    load_rules(FP_RULES).expect("shipped ruleset is valid")
}

pub fn load_rules(text: &str) -> Result<RuleSet, FpError> {
    let pats = parse_patterns(text, &builtin_registry()).map_err(stage("rules"))?;
    RuleSet::new(pats).map_err(stage("rules"))
}

#[derive(Clone, Debug)]
pub struct ImproveConfig {
    pub samples: usize,
    pub precision_bits: usize,
    pub max_enodes: usize,
    pub max_iterations: Option<usize>,
    pub timeout: Option<Duration>,
    pub match_mode: MatchMode,
    pub seed: u64,
}

impl Default for ImproveConfig {
    fn default() -> Self {
        ImproveConfig {
            samples: 256,
            precision_bits: DEFAULT_PRECISION,
            max_enodes: 4000,
            max_iterations: None,
            timeout: None,
            match_mode: MatchMode::Combined,
            seed: 0,
        }
    }
}

/// Mean bits of error of input and output on samples not used for
/// extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    pub input_bits_err: f64,
    pub output_bits_err: f64,
    pub samples: usize,
    pub enodes: usize,
    pub iters: usize,
    pub reason: StopReason,
}

impl fmt::Display for AccuracyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "input_bits_err={:.4} output_bits_err={:.4} samples={} enodes={} iters={} reason={}",
            self.input_bits_err, self.output_bits_err, self.samples, self.enodes, self.iters, self.reason
        )
    }
}

pub struct Improved {
    pub input: FPCore,
    pub output: FPCore,
    /// The extracted program as IR.
    pub module: Module,
    pub func: OpId,
    pub saturation: SaturationResult,
    /// Local error of every e-node of the saturated graph, by op name and
    /// cost, in no particular order.
    pub node_errors: Vec<(String, f64)>,
    pub report: AccuracyReport,
}

fn stage<E: fmt::Display>(stage: &'static str) -> impl Fn(E) -> FpError {
    move |e| FpError::Stage {
        stage,
        msg: e.to_string(),
    }
}

/// Parses `text`, saturates it with `rules`, scores every e-node by local
/// error against high-precision ground truth, extracts the cheapest program
/// and reports input and output accuracy on fresh samples.
pub fn improve(text: &str, rules: &RuleSet, config: &ImproveConfig) -> Result<Improved, FpError> {
    let input = parse_fpcore(text).map_err(stage("parse"))?;
    let ranges = input.ranges();
    let (original, orig_func) = input.to_module()?;
    let mut m = original.clone();
    let func = orig_func;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let samples = sample_inputs(&m, func, &ranges, config.samples, &mut rng).map_err(stage("sample"))?;

    let egraph = insert_eclasses(&mut m, func).map_err(stage("insert-eclasses"))?;
    let mut g = EGraph::new(&mut m, egraph).map_err(stage("saturate"))?;
    let boxes: Vec<Interval> = ranges.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect();
    let seeds: HashMap<_, _> = seed_args(&m, func, &boxes);
    g.register_analysis(&m, Box::new(EClassIntervals::new(seeds)))
        .map_err(stage("saturate"))?;
    let sat_config = SaturationConfig {
        max_iterations: config.max_iterations,
        max_enodes: config.max_enodes,
        wall_timeout: config.timeout,
        match_mode: config.match_mode,
    };
    let saturation = saturate(&mut m, &mut g, rules, &sat_config).map_err(stage("saturate"))?;
    let enodes = g.enode_count(&m);

    let truth = ground_truth(&m, func, egraph, &samples, config.precision_bits)?;
    let errors = truth.local_errors(&m);
    let node_errors = errors
        .iter()
        .map(|(&op, &e)| (m.op_name(op).to_string(), e))
        .collect();
    for (&op, &e) in &errors {
        m.set_attr(op, COST_ATTR, Attr::f64(e + SIZE_TIEBREAK));
    }

    // Classes with no finite-cost member fall back to the ground-truth
    // representative so that every class is selected and the graph
    // dissolves.
    let cg = ClassGraph::new(&m, egraph, &CostModel::uniform(SIZE_TIEBREAK)).map_err(stage("select"))?;
    let (_, mut pick) = cg.tree_costs();
    for (p, r) in pick.iter_mut().zip(&truth.reps) {
        if p.is_none() {
            *p = *r;
        }
    }
    let sel = cg.to_selection(&pick, cg.dag_cost(&pick));
    annotate_selection(&mut m, egraph, &sel).map_err(stage("select"))?;
    if !replace_selected(&mut m, egraph).map_err(stage("replace"))? {
        return Err(FpError::Stage {
            stage: "replace",
            msg: "some e-class has no extractable member".into(),
        });
    }
    let mut touched = Vec::new();
    m.walk_from(func, &mut |op| touched.push(op));
    for op in touched {
        m.remove_attr(op, COST_ATTR);
    }
    if let Some(d) = verify(&m).first() {
        return Err(FpError::Stage {
            stage: "replace",
            msg: d.message.clone(),
        });
    }

    let output = raise(&m, func, &input)?;
    let reparsed = parse_fpcore(&output.to_string()).map_err(stage("print"))?;
    let (out_module, out_func) = reparsed.to_module()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let fresh = sample_inputs(&original, orig_func, &ranges, config.samples, &mut rng).map_err(stage("report"))?;
    let (input_bits_err, output_bits_err, used) = compare(
        &original,
        orig_func,
        &out_module,
        out_func,
        &fresh,
        config.precision_bits,
    );
    let report = AccuracyReport {
        input_bits_err,
        output_bits_err,
        samples: used,
        enodes,
        iters: saturation.iterations,
        reason: saturation.reason,
    };
    Ok(Improved {
        input,
        output,
        module: m,
        func,
        saturation,
        node_errors,
        report,
    })
}

/// Bits of error of `f64` evaluation of `a` and `b` against the
/// high-precision value of `b`, averaged over the points where that value
/// exists. A NaN where the reference is a number counts as 64 bits.
pub fn compare(a: &Module, fa: OpId, b: &Module, fb: OpId, points: &[Vec<f64>], precision: usize) -> (f64, f64, usize) {
    let mut real = RealEval::new(precision);
    let (mut ea, mut eb, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        let Some(exact) = eval_function(b, fb, p, &mut real) else { continue };
        let exact = to_f64(&exact);
        ea += float_error(a, fa, p, exact);
        eb += float_error(b, fb, p, exact);
        n += 1;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    (ea / n as f64, eb / n as f64, n)
}

/// Bits of error of the `f64` interpreter on `func` at `point`.
pub fn float_error(m: &Module, func: OpId, point: &[f64], exact: f64) -> f64 {
    let args: Vec<Scalar> = point.iter().map(|&x| Scalar::F64(x)).collect();
    match interpret_func(m, func, &args).as_deref() {
        Ok([Scalar::F64(v)]) => bits_of_error(*v, exact).unwrap_or(64.0),
        _ => 64.0,
    }
}
