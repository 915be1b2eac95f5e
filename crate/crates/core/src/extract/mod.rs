//! Extraction: choose one member per e-class, record the choice as an
//! `eqsat.selected` attribute, then rewire the IR to the chosen members.

mod greedy;
mod ilp;
mod replace;

use std::collections::HashMap;

use thiserror::Error;

use crate::dialects::YIELD;
use crate::engine::is_class_op;
use crate::ir::{IrError, Module, OpId, ValueId};
use crate::symbol::Symbol;

pub use greedy::select_greedy;
pub use ilp::{select_ilp, select_ilp_with, IlpBackend, IlpOptions};
pub use replace::{annotate_selection, replace_selected, topo_sort, topo_sort_block};

pub const SELECTED: &str = "eqsat.selected";
pub const COST_ATTR: &str = "eqsat.cost";

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("cost config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("no acyclic finite-cost selection exists for {0}")]
    Infeasible(String),
    #[error("solver gave up: {0}")]
    Solver(String),
    #[error("selection index {index} out of range for a class with {len} members")]
    OutOfRange { index: usize, len: usize },
    #[error("selection is cyclic")]
    Cycle,
    #[error("`{0}` is not an eqsat.egraph")]
    NotAnEGraph(String),
    #[error(transparent)]
    Ir(#[from] IrError),
}

/// Per-operation costs. `f64::INFINITY` marks an operation as
/// unextractable.
#[derive(Clone, Debug)]
pub struct CostModel {
    pub base: HashMap<Symbol, f64>,
    pub default: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            base: HashMap::new(),
            default: 1.0,
        }
    }
}

impl CostModel {
    pub fn uniform(cost: f64) -> CostModel {
        CostModel {
            base: HashMap::new(),
            default: cost,
        }
    }

    pub fn set(&mut self, name: &str, cost: f64) -> &mut Self {
        self.base.insert(Symbol::new(name), cost);
        self
    }

    /// An `eqsat.cost` attribute on the op overrides the table.
    pub fn cost(&self, m: &Module, op: OpId) -> f64 {
        if let Some(c) = m.attr(op, COST_ATTR).and_then(|a| a.as_number()) {
            return c;
        }
        self.base.get(&m.op_name(op)).copied().unwrap_or(self.default)
    }
}

/// Parses `opname = cost` and `default = cost` lines, where `cost` is a
/// non-negative number or `inf`. `#` starts a comment.
pub fn load_cost_config(text: &str) -> Result<CostModel, ExtractError> {
    let mut model = CostModel::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| ExtractError::Config {
            line: i + 1,
            msg: msg.to_string(),
        };
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected `name = cost`"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(err("missing operation name"));
        }
        let cost = match v {
            "inf" | "infinity" => f64::INFINITY,
            _ => v.parse::<f64>().map_err(|_| err("cost must be a number or `inf`"))?,
        };
        if cost.is_nan() || cost < 0.0 {
            return Err(err("cost must be non-negative"));
        }
        if k == "default" {
            model.default = cost;
        } else {
            model.base.insert(Symbol::new(k), cost);
        }
    }
    Ok(model)
}

/// Chosen operand index per class op. Classes may be missing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selection {
    pub choice: HashMap<OpId, usize>,
    pub total_cost: Option<f64>,
}

/// One member of a class in a [`ClassGraph`].
#[derive(Clone, Debug)]
pub struct Member {
    /// Operand index in the class op.
    pub index: usize,
    pub op: Option<OpId>,
    pub cost: f64,
    /// Classes consumed by the member, as indices into `ClassGraph::classes`.
    pub children: Vec<usize>,
}

/// Cost-annotated view of an e-graph used by the selection algorithms.
#[derive(Clone, Debug)]
pub struct ClassGraph {
    pub classes: Vec<OpId>,
    pub members: Vec<Vec<Member>>,
    pub roots: Vec<usize>,
    index: HashMap<ValueId, usize>,
}

impl ClassGraph {
    pub fn new(m: &Module, egraph: OpId, cost: &CostModel) -> Result<ClassGraph, ExtractError> {
        let block = m
            .entry_block(egraph)
            .ok_or_else(|| ExtractError::NotAnEGraph(m.op_name(egraph).to_string()))?;
        let classes: Vec<OpId> = m.block_ops(block).filter(|&o| is_class_op(m, o)).collect();
        let index: HashMap<ValueId, usize> = classes.iter().enumerate().map(|(i, &c)| (m.result(c, 0), i)).collect();
        let members = classes
            .iter()
            .map(|&c| {
                m.operands(c)
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| match m.defining_op(v) {
                        Some(op) => Member {
                            index: i,
                            op: Some(op),
                            cost: cost.cost(m, op),
                            children: m.operands(op).iter().filter_map(|x| index.get(x).copied()).collect(),
                        },
                        None => Member {
                            index: i,
                            op: None,
                            cost: 0.0,
                            children: Vec::new(),
                        },
                    })
                    .collect()
            })
            .collect();
        let roots = m
            .block_last(block)
            .filter(|&y| m.op_name(y).as_str() == YIELD)
            .map(|y| m.operands(y).iter().filter_map(|v| index.get(v).copied()).collect())
            .unwrap_or_default();
        Ok(ClassGraph {
            classes,
            members,
            roots,
            index,
        })
    }

    pub fn class_index(&self, class: ValueId) -> Option<usize> {
        self.index.get(&class).copied()
    }

    /// Least tree cost of each class (children counted per use), by
    /// fixpoint iteration from infinity.
    pub fn tree_costs(&self) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.classes.len();
        let mut cost = vec![f64::INFINITY; n];
        let mut pick = vec![None; n];
        let mut changed = true;
        while changed {
            changed = false;
            for c in 0..n {
                for (k, mem) in self.members[c].iter().enumerate() {
                    let t = mem.cost + mem.children.iter().map(|&d| cost[d]).sum::<f64>();
                    if t < cost[c] {
                        cost[c] = t;
                        pick[c] = Some(k);
                        changed = true;
                    }
                }
            }
        }
        (cost, pick)
    }

    /// Cost of the term graph induced by `pick` from the roots, counting
    /// each class once. `None` when a reachable class is unselected or the
    /// induced graph is cyclic.
    pub fn dag_cost(&self, pick: &[Option<usize>]) -> Option<f64> {
        self.dag_cost_from(pick, &self.roots)
    }

    pub fn dag_cost_from(&self, pick: &[Option<usize>], roots: &[usize]) -> Option<f64> {
        let mut state = vec![0u8; self.classes.len()];
        let mut total = 0.0;
        fn visit(g: &ClassGraph, pick: &[Option<usize>], c: usize, state: &mut [u8], total: &mut f64) -> Option<()> {
            match state[c] {
                1 => return None,
                2 => return Some(()),
                _ => {}
            }
            state[c] = 1;
            let mem = &g.members[c][pick[c]?];
            *total += mem.cost;
            for &d in &mem.children {
                visit(g, pick, d, state, total)?;
            }
            state[c] = 2;
            Some(())
        }
        for &r in roots {
            visit(self, pick, r, &mut state, &mut total)?;
        }
        total.is_finite().then_some(total)
    }

    /// Selection over class ops from per-class member positions.
    pub fn to_selection(&self, pick: &[Option<usize>], total_cost: Option<f64>) -> Selection {
        let choice = pick
            .iter()
            .enumerate()
            .filter_map(|(c, k)| k.map(|k| (self.classes[c], self.members[c][k].index)))
            .collect();
        Selection { choice, total_cost }
    }

    /// Per-class member positions of a selection.
    pub fn picks(&self, sel: &Selection) -> Vec<Option<usize>> {
        self.classes
            .iter()
            .enumerate()
            .map(|(c, op)| {
                let idx = sel.choice.get(op)?;
                self.members[c].iter().position(|mem| mem.index == *idx)
            })
            .collect()
    }
}
