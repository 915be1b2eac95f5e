//! Sparse forward dataflow. `eqsat.eclass` results take the combine of their
//! operands, which turns any dataflow analysis into an e-class analysis.

mod interval;

use std::collections::{HashMap, VecDeque};
use std::fmt::Debug;

use thiserror::Error;

use crate::dialects::{CONST_ECLASS, ECLASS, EGRAPH, YIELD};
use crate::ir::{Attr, Module, OpId, ValueDef, ValueId};
use crate::symbol::Symbol;

pub use interval::{interval_transfer, EClassIntervals, Interval, IntervalAnalysis, PredicateFacts};

/// Per-value facts. `combine` merges facts about one value from several
/// sources and must be commutative, associative and idempotent with `top`
/// as identity.
pub trait Lattice: Clone + PartialEq + Debug {
    fn top() -> Self;
    fn combine(&self, other: &Self) -> Self;
    /// `self` carries at least as much information as `other`.
    fn leq(&self, other: &Self) -> bool;
    fn is_bottom(&self) -> bool {
        false
    }
}

pub trait Dataflow {
    type Elem: Lattice;
    fn transfer(&self, name: Symbol, attrs: &[(Symbol, Attr)], operands: &[Self::Elem]) -> Self::Elem;
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("transfer of `{op}` lost information ({old} -> {new})")]
    NonMonotone { op: String, old: String, new: String },
}

#[derive(Clone, Debug)]
pub struct DataflowResult<E> {
    pub values: HashMap<ValueId, E>,
    /// Class results whose members' facts are contradictory.
    pub contradictions: Vec<ValueId>,
}

impl<E: Lattice> DataflowResult<E> {
    pub fn get(&self, v: ValueId) -> E {
        self.values.get(&v).cloned().unwrap_or_else(E::top)
    }
}

/// Updates allowed per value before further narrowing is dropped. Every
/// intermediate state is already sound, so stopping early only loses
/// precision.
const MAX_UPDATES: u32 = 64;

/// Computes facts for every value in the module, starting from `top` and
/// iterating a worklist until nothing changes. Block arguments take their
/// seed or `top`.
pub fn run_dataflow<A: Dataflow>(
    m: &Module,
    a: &A,
    seeds: &HashMap<ValueId, A::Elem>,
) -> Result<DataflowResult<A::Elem>, AnalysisError> {
    let mut values: HashMap<ValueId, A::Elem> = seeds.clone();
    let mut updates: HashMap<ValueId, u32> = HashMap::new();
    let ops = m.walk();
    let mut queued: Vec<bool> = vec![false; m.num_ops()];
    let mut work: VecDeque<OpId> = VecDeque::new();
    for &op in &ops {
        if !m.results(op).is_empty() {
            queued[op.index()] = true;
            work.push_back(op);
        }
    }
    let get = |values: &HashMap<ValueId, A::Elem>, v: ValueId| values.get(&v).cloned().unwrap_or_else(A::Elem::top);
    while let Some(op) = work.pop_front() {
        queued[op.index()] = false;
        let name = m.op_name(op);
        let new: Vec<A::Elem> = match name.as_str() {
            ECLASS | CONST_ECLASS => {
                let e = m
                    .operands(op)
                    .iter()
                    .fold(A::Elem::top(), |acc, &v| acc.combine(&get(&values, v)));
                vec![e]
            }
            EGRAPH => {
                let block = m.entry_block(op);
                let y = block.and_then(|b| m.block_last(b)).filter(|&y| m.op_name(y).as_str() == YIELD);
                match y {
                    Some(y) => m.operands(y).iter().map(|&v| get(&values, v)).collect(),
                    None => vec![A::Elem::top(); m.results(op).len()],
                }
            }
            _ => {
                let ins: Vec<A::Elem> = m.operands(op).iter().map(|&v| get(&values, v)).collect();
                let e = a.transfer(name, m.attrs(op), &ins);
                vec![e; m.results(op).len()]
            }
        };
        for (i, e) in new.into_iter().enumerate() {
            let r = m.result(op, i);
            let old = get(&values, r);
            if e == old {
                continue;
            }
            if !e.leq(&old) {
                return Err(AnalysisError::NonMonotone {
                    op: name.to_string(),
                    old: format!("{old:?}"),
                    new: format!("{e:?}"),
                });
            }
            let n = updates.entry(r).or_insert(0);
            if *n >= MAX_UPDATES {
                continue;
            }
            *n += 1;
            values.insert(r, e);
            for u in m.uses(r) {
                let target = if m.op_name(u.op).as_str() == YIELD { m.parent_op(u.op) } else { Some(u.op) };
                if let Some(t) = target {
                    if !m.results(t).is_empty() && !queued[t.index()] {
                        queued[t.index()] = true;
                        work.push_back(t);
                    }
                }
            }
        }
    }
    let contradictions = ops
        .iter()
        .filter(|&&op| m.op_name(op).as_str() == ECLASS || m.op_name(op).as_str() == CONST_ECLASS)
        .map(|&op| m.result(op, 0))
        .filter(|&r| {
            get(&values, r).is_bottom()
                && m.operands(m.defining_op(r).unwrap())
                    .iter()
                    .all(|&v| !get(&values, v).is_bottom())
        })
        .collect();
    Ok(DataflowResult { values, contradictions })
}

/// Seeds keyed by the arguments of the entry block of `func`.
pub fn seed_args<E: Clone>(m: &Module, func: OpId, elems: &[E]) -> HashMap<ValueId, E> {
    let mut s = HashMap::new();
    if let Some(b) = m.entry_block(func) {
        for (&v, e) in m.block_args(b).iter().zip(elems) {
            debug_assert!(matches!(m.value_def(v), ValueDef::BlockArg { .. }));
            s.insert(v, e.clone());
        }
    }
    s
}
