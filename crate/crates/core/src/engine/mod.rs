//! Equality saturation over an `eqsat.egraph` region.
//!
//! E-classes are `eqsat.eclass` / `eqsat.const_eclass` ops and e-nodes are
//! the ordinary ops whose results they wrap. A class is identified by its
//! op; a union physically merges the two ops and redirects every use of the
//! absorbed class to the survivor.

mod apply;
mod ematch;
mod saturate;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::dialects::{is_eqsat, CONST_ECLASS, ECLASS, EGRAPH, YIELD};
use crate::ir::{Attr, BlockId, InsertPoint, IrError, Module, OpId, ValueDef, ValueId};
use crate::pattern::Predicate;
use crate::symbol::Symbol;

pub use apply::{apply_matches, apply_matches_within, ApplyStats};
pub use ematch::{ematch, MatchRecord};
pub use saturate::{saturate, IterationStats, MatchMode, RuleSet, SaturationConfig, SaturationResult, StopReason};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("`{0}` is not an eqsat.egraph")]
    NotAnEGraph(String),
    #[error("malformed matcher program: {0}")]
    Malformed(String),
    #[error("analysis `{0}` is already registered")]
    DuplicateAnalysis(String),
    #[error("analyses must be registered before saturation starts")]
    AnalysisAfterStart,
    #[error("cannot merge classes of types {0} and {1}")]
    TypeMismatch(String, String),
    #[error("rewrite `{rule}`: {msg}")]
    Rewrite { rule: String, msg: String },
    #[error(transparent)]
    Ir(#[from] IrError),
}

/// Lattice facts maintained per e-class during saturation.
pub trait ClassAnalysis {
    fn name(&self) -> &str;
    /// Recomputes every class fact from the current graph.
    fn refresh(&mut self, m: &Module, g: &EGraph);
    /// Folds the facts of a freshly inserted e-node into its class.
    fn make(&mut self, m: &Module, g: &EGraph, enode: OpId);
    /// Combines the facts of two classes that were just merged.
    fn merge(&mut self, survivor: ValueId, absorbed: ValueId);
    /// `Some(true)` when the analysis proves `pred` for `class`.
    fn check(&self, class: ValueId, pred: Predicate) -> Option<bool>;
}

/// Hashcons key: op name, non-`eqsat.*` attributes and operand classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeKey {
    name: Symbol,
    attrs: Vec<(Symbol, Attr)>,
    operands: Vec<ValueId>,
}

pub fn is_class_op(m: &Module, op: OpId) -> bool {
    let n = m.op_name(op).as_str();
    n == ECLASS || n == CONST_ECLASS
}

/// Engine state for one e-graph region.
pub struct EGraph {
    op: OpId,
    block: BlockId,
    parent: HashMap<OpId, OpId>,
    hashcons: HashMap<NodeKey, OpId>,
    node_key: HashMap<OpId, NodeKey>,
    pending: Vec<OpId>,
    analyses: Vec<Box<dyn ClassAnalysis>>,
    started: bool,
    /// Merges of classes carrying different constants.
    pub contradictions: Vec<String>,
}

impl EGraph {
    /// Indexes an existing `eqsat.egraph` op. Structurally identical e-nodes
    /// already present are merged.
    pub fn new(m: &mut Module, egraph: OpId) -> Result<EGraph, EngineError> {
        if m.op_name(egraph).as_str() != EGRAPH {
            return Err(EngineError::NotAnEGraph(m.op_name(egraph).to_string()));
        }
        let block = m
            .entry_block(egraph)
            .ok_or_else(|| EngineError::NotAnEGraph("egraph without a body".into()))?;
        let mut g = EGraph {
            op: egraph,
            block,
            parent: HashMap::new(),
            hashcons: HashMap::new(),
            node_key: HashMap::new(),
            pending: Vec::new(),
            analyses: Vec::new(),
            started: false,
            contradictions: Vec::new(),
        };
        let mut dups = Vec::new();
        for op in g.enodes(m) {
            let key = g.key_of(m, op);
            match g.hashcons.get(&key) {
                Some(&q) => dups.push((op, q)),
                None => {
                    g.hashcons.insert(key.clone(), op);
                    g.node_key.insert(op, key);
                }
            }
        }
        for (p, q) in dups {
            g.merge_duplicate(m, p, q)?;
        }
        g.rebuild(m)?;
        Ok(g)
    }

    pub fn egraph_op(&self) -> OpId {
        self.op
    }

    pub fn block(&self) -> BlockId {
        self.block
    }

    /// Live e-nodes in block order.
    pub fn enodes(&self, m: &Module) -> Vec<OpId> {
        m.block_ops(self.block).filter(|&o| !is_eqsat(m.op_name(o))).collect()
    }

    /// Live class ops in block order.
    pub fn classes(&self, m: &Module) -> Vec<OpId> {
        m.block_ops(self.block).filter(|&o| is_class_op(m, o)).collect()
    }

    /// Non-eqsat ops in the region plus `const_eclass` ops.
    pub fn enode_count(&self, m: &Module) -> usize {
        m.block_ops(self.block)
            .filter(|&o| {
                let n = m.op_name(o);
                !is_eqsat(n) || n.as_str() == CONST_ECLASS
            })
            .count()
    }

    pub fn yield_op(&self, m: &Module) -> Option<OpId> {
        m.block_last(self.block).filter(|&o| m.op_name(o).as_str() == YIELD)
    }

    /// Canonical class op of `op` (a class op, possibly already absorbed).
    pub fn find_op(&self, mut op: OpId) -> OpId {
        while let Some(&p) = self.parent.get(&op) {
            op = p;
        }
        op
    }

    fn compress(&mut self, op: OpId) {
        let root = self.find_op(op);
        let mut cur = op;
        while let Some(&p) = self.parent.get(&cur) {
            if p != root {
                self.parent.insert(cur, root);
            }
            cur = p;
        }
    }

    /// Canonical class result for a class result, or `v` itself for values
    /// that are not class results.
    pub fn find(&self, m: &Module, v: ValueId) -> ValueId {
        match m.value_def(v) {
            ValueDef::OpResult { op, .. } if self.parent.contains_key(&op) || is_class_op(m, op) => {
                m.result(self.find_op(op), 0)
            }
            _ => v,
        }
    }

    /// Class result wrapping the result of e-node `op`.
    pub fn class_of(&self, m: &Module, op: OpId) -> Option<ValueId> {
        let r = *m.results(op).first()?;
        m.uses(r).iter().find(|u| is_class_op(m, u.op)).map(|u| m.result(u.op, 0))
    }

    /// Constant carried by a class, if any.
    pub fn class_constant(&self, m: &Module, class: ValueId) -> Option<Attr> {
        let op = m.defining_op(self.find(m, class))?;
        m.attr(op, "cst")
    }

    pub(crate) fn key_of(&self, m: &Module, op: OpId) -> NodeKey {
        NodeKey {
            name: m.op_name(op),
            attrs: m
                .attrs(op)
                .iter()
                .filter(|(k, _)| k.dialect() != "eqsat")
                .copied()
                .collect(),
            operands: m.operands(op).iter().map(|&v| self.find(m, v)).collect(),
        }
    }

    pub fn lookup(&self, m: &Module, key: &NodeKey) -> Option<OpId> {
        self.hashcons.get(key).copied().filter(|&o| m.is_live(o))
    }

    fn hashcons_insert(&mut self, key: NodeKey, op: OpId) {
        self.hashcons.insert(key.clone(), op);
        self.node_key.insert(op, key);
    }

    fn hashcons_remove(&mut self, op: OpId) {
        if let Some(k) = self.node_key.remove(&op) {
            if self.hashcons.get(&k) == Some(&op) {
                self.hashcons.remove(&k);
            }
        }
    }

    /// Inserts a new e-node (not yet in the IR) wrapped in a fresh class.
    /// Returns the class result.
    pub(crate) fn add_enode(
        &mut self,
        m: &mut Module,
        key: NodeKey,
        result: crate::ir::Type,
    ) -> Result<ValueId, EngineError> {
        let at = self.insert_point(m);
        let node = m.build_op(at, key.name.as_str(), &key.operands, key.attrs.clone(), &[result], vec![])?;
        let r = m.result(node, 0);
        let cls = if m.has_trait(node, crate::ir::Traits::CONSTANT) {
            let cst = m.attr(node, "value").expect("constants carry `value`");
            m.build_op(at, CONST_ECLASS, &[r], vec![(Symbol::new("cst"), cst)], &[result], vec![])?
        } else {
            m.build_op(at, ECLASS, &[r], vec![], &[result], vec![])?
        };
        self.hashcons_insert(key, node);
        let mut analyses = std::mem::take(&mut self.analyses);
        for a in &mut analyses {
            a.make(m, self, node);
        }
        self.analyses = analyses;
        Ok(m.result(cls, 0))
    }

    fn insert_point(&self, m: &Module) -> InsertPoint {
        match self.yield_op(m) {
            Some(y) => InsertPoint::Before(y),
            None => InsertPoint::End(self.block),
        }
    }

    /// Merges two classes. Returns the canonical class result and whether
    /// anything changed.
    pub fn union(&mut self, m: &mut Module, a: ValueId, b: ValueId) -> Result<(ValueId, bool), EngineError> {
        let (a, b) = (self.find(m, a), self.find(m, b));
        if a == b {
            return Ok((a, false));
        }
        let (ta, tb) = (m.value_type(a), m.value_type(b));
        if ta != tb {
            return Err(EngineError::TypeMismatch(ta.to_string(), tb.to_string()));
        }
        let ca = m.defining_op(a).expect("class results are op results");
        let cb = m.defining_op(b).expect("class results are op results");
        let rank = |op: OpId| {
            (
                m.op_name(op).as_str() == ECLASS,
                m.operands(op).len(),
                std::cmp::Reverse(op),
            )
        };
        let (keep, gone) = if rank(ca) >= rank(cb) { (ca, cb) } else { (cb, ca) };
        let (kr, gr) = (m.result(keep, 0), m.result(gone, 0));

        match (m.attr(keep, "cst"), m.attr(gone, "cst")) {
            (None, Some(c)) => m.set_attr(keep, "cst", c),
            (Some(x), Some(y)) if x != y => self.contradictions.push(format!("merged classes with constants {x} and {y}")),
            _ => {}
        }
        if m.op_name(keep).as_str() == CONST_ECLASS {
            m.set_op_name(keep, Symbol::new(ECLASS));
        }
        let have: HashSet<ValueId> = m.operands(keep).iter().copied().collect();
        let extra: Vec<ValueId> = m.operands(gone).iter().copied().filter(|v| !have.contains(v)).collect();
        for v in extra {
            m.push_operand(keep, v);
        }

        let parents: Vec<OpId> = m.uses(gr).iter().map(|u| u.op).filter(|&o| !is_eqsat(m.op_name(o))).collect();
        for &p in &parents {
            self.hashcons_remove(p);
        }
        m.replace_all_uses(gr, kr)?;
        m.erase_op(gone)?;
        self.parent.insert(gone, keep);
        for p in parents {
            if !self.node_key.contains_key(&p) {
                let key = self.key_of(m, p);
                if self.lookup(m, &key).is_none() {
                    self.hashcons_insert(key, p);
                }
            }
        }
        self.pending.push(keep);
        let mut analyses = std::mem::take(&mut self.analyses);
        for an in &mut analyses {
            an.merge(kr, gr);
        }
        self.analyses = analyses;
        Ok((kr, true))
    }

    /// Merges the classes of congruent e-nodes `dup` and `keep`, then drops
    /// `dup`. Returns whether two distinct classes were merged.
    fn merge_duplicate(&mut self, m: &mut Module, dup: OpId, keep: OpId) -> Result<bool, EngineError> {
        let cd = self.class_of(m, dup);
        let ck = self.class_of(m, keep);
        let merged = match (cd, ck) {
            (Some(a), Some(b)) => self.union(m, a, b)?.1,
            _ => false,
        };
        self.hashcons_remove(dup);
        let r = m.result(dup, 0);
        let users: Vec<(OpId, u32)> = m.uses(r).iter().map(|u| (u.op, u.index)).collect();
        let kr = m.result(keep, 0);
        for (u, idx) in users {
            if is_class_op(m, u) && m.operands(u).contains(&kr) {
                m.remove_operand(u, idx as usize);
            } else {
                m.set_operand(u, idx as usize, kr);
            }
        }
        m.erase_op(dup)?;
        Ok(merged)
    }

    /// Restores congruence. Returns the number of class merges performed.
    pub fn rebuild(&mut self, m: &mut Module) -> Result<usize, EngineError> {
        let mut repairs = 0;
        while !self.pending.is_empty() {
            let mut todo: Vec<OpId> = std::mem::take(&mut self.pending)
                .into_iter()
                .map(|c| self.find_op(c))
                .filter(|&c| m.is_live(c))
                .collect();
            todo.sort();
            todo.dedup();
            for c in todo {
                self.compress(c);
                if !m.is_live(c) {
                    continue;
                }
                let r = m.result(c, 0);
                let mut parents: Vec<OpId> =
                    m.uses(r).iter().map(|u| u.op).filter(|&o| !is_eqsat(m.op_name(o))).collect();
                parents.sort();
                parents.dedup();
                for p in parents {
                    if !m.is_live(p) {
                        continue;
                    }
                    self.hashcons_remove(p);
                    let key = self.key_of(m, p);
                    match self.lookup(m, &key) {
                        Some(q) if q != p => {
                            if self.merge_duplicate(m, p, q)? {
                                repairs += 1;
                            }
                        }
                        _ => self.hashcons_insert(key, p),
                    }
                }
            }
        }
        Ok(repairs)
    }

    /// Registers an e-class analysis; must happen before saturation.
    pub fn register_analysis(&mut self, m: &Module, mut a: Box<dyn ClassAnalysis>) -> Result<(), EngineError> {
        if self.started {
            return Err(EngineError::AnalysisAfterStart);
        }
        if self.analyses.iter().any(|x| x.name() == a.name()) {
            return Err(EngineError::DuplicateAnalysis(a.name().to_string()));
        }
        a.refresh(m, self);
        self.analyses.push(a);
        Ok(())
    }

    pub fn analyses(&self) -> &[Box<dyn ClassAnalysis>] {
        &self.analyses
    }

    pub(crate) fn refresh_analyses(&mut self, m: &Module) {
        let mut analyses = std::mem::take(&mut self.analyses);
        for a in &mut analyses {
            a.refresh(m, self);
        }
        self.analyses = analyses;
    }

    pub(crate) fn mark_started(&mut self) {
        self.started = true;
    }

    /// Whether some registered analysis proves `pred` for `class`.
    pub fn check_predicate(&self, m: &Module, class: ValueId, pred: Predicate) -> bool {
        let c = self.find(m, class);
        self.analyses.iter().any(|a| a.check(c, pred) == Some(true))
    }

    /// Live e-node pairs that are congruent but sit in different classes.
    /// Quadratic; intended for testing.
    pub fn congruence_violations(&self, m: &Module) -> Vec<(OpId, OpId)> {
        let nodes = self.enodes(m);
        let keys: Vec<NodeKey> = nodes.iter().map(|&n| self.key_of(m, n)).collect();
        let mut out = Vec::new();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                if keys[i] == keys[j] && self.class_of(m, nodes[i]) != self.class_of(m, nodes[j]) {
                    out.push((nodes[i], nodes[j]));
                }
            }
        }
        out
    }

    /// Live e-node pairs with identical keys.
    pub fn hashcons_duplicates(&self, m: &Module) -> usize {
        let mut seen = HashSet::new();
        self.enodes(m).into_iter().filter(|&n| !seen.insert(self.key_of(m, n))).count()
    }
}

#[cfg(test)]
mod tests;
