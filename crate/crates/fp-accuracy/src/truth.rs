//! Ground truth per e-class and the local error of every e-node.

use std::collections::HashMap;
use std::thread;

use astro_float::BigFloat;
use eqsat::dialects::{eval_op, Scalar};
use eqsat::extract::{ClassGraph, CostModel};
use eqsat::ir::{Module, OpId, ValueId};

use crate::real::{to_f64, RealEval};
use crate::ulp::ulp_distance;
use crate::FpError;

/// High-precision evaluation of values, following `reps` through class
/// results. A memo entry of `None` is an error marker; it is written before
/// a value's operands are visited so cycles also end as markers.
pub struct Evaluator<'a> {
    pub m: &'a Module,
    pub args: &'a [ValueId],
    /// Class result to the member value that stands for it.
    pub reps: &'a HashMap<ValueId, ValueId>,
}

impl Evaluator<'_> {
    pub fn eval(
        &self,
        v: ValueId,
        point: &[f64],
        real: &mut RealEval,
        memo: &mut HashMap<ValueId, Option<BigFloat>>,
    ) -> Option<BigFloat> {
        if let Some(x) = memo.get(&v) {
            return x.clone();
        }
        memo.insert(v, None);
        let r = self.compute(v, point, real, memo);
        memo.insert(v, r.clone());
        r
    }

    fn compute(
        &self,
        v: ValueId,
        point: &[f64],
        real: &mut RealEval,
        memo: &mut HashMap<ValueId, Option<BigFloat>>,
    ) -> Option<BigFloat> {
        if let Some(&member) = self.reps.get(&v) {
            return self.eval(member, point, real, memo);
        }
        if let Some(i) = self.args.iter().position(|&a| a == v) {
            return real.from_f64(*point.get(i)?);
        }
        let op = self.m.defining_op(v)?;
        if eqsat::engine::is_class_op(self.m, op) {
            return None;
        }
        let mut ins = Vec::with_capacity(self.m.operands(op).len());
        for &x in self.m.operands(op) {
            ins.push(self.eval(x, point, real, memo)?);
        }
        let refs: Vec<&BigFloat> = ins.iter().collect();
        real.apply(self.m.op_name(op).as_str(), self.m.attrs(op), &refs)
    }
}

/// Value of the single result returned by `func`, or `None` on a domain
/// error anywhere along the way.
pub fn eval_function(m: &Module, func: OpId, point: &[f64], real: &mut RealEval) -> Option<BigFloat> {
    let block = m.entry_block(func)?;
    let ret = m.block_last(block)?;
    let root = *m.operands(ret).first()?;
    let reps = HashMap::new();
    let ev = Evaluator {
        m,
        args: m.block_args(block),
        reps: &reps,
    };
    ev.eval(root, point, real, &mut HashMap::new())
}

/// Correctly rounded reference values of every class at every sample.
pub struct GroundTruth {
    pub graph: ClassGraph,
    /// Member position standing for each class; `None` when every member is
    /// cyclic.
    pub reps: Vec<Option<usize>>,
    pub samples: Vec<Vec<f64>>,
    pub args: Vec<ValueId>,
    /// `values[class][sample]`; `None` marks an error.
    pub values: Vec<Vec<Option<f64>>>,
    pub precision: usize,
}

/// Class result to representative member value, chosen by least node count
/// so that the choice is independent of floating-point accuracy.
pub fn representatives(m: &Module, egraph: OpId) -> Result<(ClassGraph, Vec<Option<usize>>), FpError> {
    let g = ClassGraph::new(m, egraph, &CostModel::uniform(1.0)).map_err(|e| FpError::Stage {
        stage: "ground-truth",
        msg: e.to_string(),
    })?;
    let (_, pick) = g.tree_costs();
    Ok((g, pick))
}

fn rep_map(m: &Module, g: &ClassGraph, pick: &[Option<usize>]) -> HashMap<ValueId, ValueId> {
    g.classes
        .iter()
        .zip(pick)
        .filter_map(|(&c, k)| {
            let mem = &g.members[g.class_index(m.result(c, 0))?][(*k)?];
            Some((m.result(c, 0), m.operand(c, mem.index)))
        })
        .collect()
}

/// Evaluates every class representative at each sample with `precision`
/// bits and rounds the result to `f64`. Samples are split across threads;
/// the result does not depend on the split.
pub fn ground_truth(
    m: &Module,
    func: OpId,
    egraph: OpId,
    samples: &[Vec<f64>],
    precision: usize,
) -> Result<GroundTruth, FpError> {
    if samples.is_empty() {
        return Err(FpError::Stage {
            stage: "ground-truth",
            msg: "no samples".into(),
        });
    }
    let (graph, reps) = representatives(m, egraph)?;
    let args: Vec<ValueId> = m.entry_block(func).map(|b| m.block_args(b).to_vec()).unwrap_or_default();
    let map = rep_map(m, &graph, &reps);
    let class_values: Vec<ValueId> = graph.classes.iter().map(|&c| m.result(c, 0)).collect();

    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(samples.len());
    let chunk = samples.len().div_ceil(workers);
    let rows: Vec<Vec<Option<f64>>> = thread::scope(|s| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| {
                let (map, args, class_values) = (&map, &args, &class_values);
                s.spawn(move || {
                    let mut real = RealEval::new(precision);
                    let ev = Evaluator { m, args, reps: map };
                    part.iter()
                        .map(|p| {
                            let mut memo = HashMap::new();
                            class_values
                                .iter()
                                .map(|&v| ev.eval(v, p, &mut real, &mut memo).map(|x| to_f64(&x)))
                                .collect::<Vec<_>>()
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("ground-truth worker panicked")).collect()
    });

    let values = (0..class_values.len()).map(|c| rows.iter().map(|row| row[c]).collect()).collect();
    Ok(GroundTruth {
        graph,
        reps,
        samples: samples.to_vec(),
        args,
        values,
        precision,
    })
}

impl GroundTruth {
    /// Rounded reference value of `v` at sample `s`: class results read the
    /// table, function arguments read the sample.
    pub fn value(&self, v: ValueId, s: usize) -> Option<f64> {
        if let Some(c) = self.graph.class_index(v) {
            return self.values[c][s];
        }
        let i = self.args.iter().position(|&a| a == v)?;
        Some(self.samples[s][i])
    }

    /// log2(1 + mean ULP distance) between each e-node evaluated in `f64`
    /// on rounded reference operands and the rounded reference value of its
    /// class. Samples where anything is an error marker, or the `f64`
    /// result is NaN, are skipped; a node with no usable sample costs
    /// infinity.
    pub fn local_errors(&self, m: &Module) -> HashMap<OpId, f64> {
        let mut out = HashMap::new();
        for (c, members) in self.graph.members.iter().enumerate() {
            for mem in members {
                let Some(op) = mem.op else { continue };
                if eqsat::engine::is_class_op(m, op) {
                    continue;
                }
                out.insert(op, self.node_error(m, op, c));
            }
        }
        out
    }

    fn node_error(&self, m: &Module, op: OpId, class: usize) -> f64 {
        let name = m.op_name(op);
        let mut total = 0.0;
        let mut valid = 0usize;
        'samples: for s in 0..self.samples.len() {
            let Some(exact) = self.values[class][s] else { continue };
            let mut ins = Vec::with_capacity(m.operands(op).len());
            for &x in m.operands(op) {
                match self.value(x, s) {
                    Some(v) => ins.push(Scalar::F64(v)),
                    None => continue 'samples,
                }
            }
            let Ok(Scalar::F64(approx)) = eval_op(name.as_str(), m.attrs(op), &ins) else {
                continue;
            };
            if let Some(d) = ulp_distance(approx, exact) {
                total += d as f64;
                valid += 1;
            }
        }
        if valid == 0 {
            return f64::INFINITY;
        }
        (1.0 + total / valid as f64).log2()
    }
}
