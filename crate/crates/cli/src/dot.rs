use std::collections::HashMap;
use std::fmt::Write;

use eqsat::engine::is_class_op;
use eqsat::ir::{value_names, Module, OpId, ValueId};

/// Graphviz rendering of one e-graph region: a dotted cluster per e-class
/// holding one node per member, and an edge from each e-node to every
/// operand class. Clusters and nodes follow block and operand order, so the
/// text is deterministic. An edge into the e-node's own cluster is a cycle.
pub fn emit_dot(m: &Module, egraph: OpId) -> String {
    let names = value_names(m);
    let classes: Vec<OpId> = m
        .entry_block(egraph)
        .map(|b| m.block_ops(b).filter(|&o| is_class_op(m, o)).collect())
        .unwrap_or_default();
    let cluster: HashMap<ValueId, usize> = classes.iter().enumerate().map(|(i, &c)| (m.result(c, 0), i)).collect();

    let mut out = String::new();
    let _ = writeln!(out, "digraph egraph {{");
    let _ = writeln!(out, "  compound=true;");
    let _ = writeln!(out, "  node [shape=box];");
    let mut edges = Vec::new();
    for (i, &c) in classes.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster{i} {{");
        let _ = writeln!(out, "    style=dotted;");
        let _ = writeln!(out, "    label={:?};", format!("%{}", names[&m.result(c, 0)]));
        for (k, &member) in m.operands(c).iter().enumerate() {
            let label = match m.defining_op(member) {
                Some(op) => match m.attr(op, "value") {
                    Some(v) if m.operands(op).is_empty() => format!("{v}"),
                    _ => m.op_name(op).to_string(),
                },
                None => format!("%{}", names[&member]),
            };
            let _ = writeln!(out, "    n{i}_{k} [label={label:?}];");
            if let Some(op) = m.defining_op(member) {
                for &arg in m.operands(op) {
                    if let Some(&j) = cluster.get(&arg) {
                        edges.push((i, k, j));
                    }
                }
            }
        }
        let _ = writeln!(out, "  }}");
    }
    for (i, k, j) in edges {
        if i == j {
            let _ = writeln!(out, "  n{i}_{k} -> n{j}_0 [style=dashed];");
        } else {
            let _ = writeln!(out, "  n{i}_{k} -> n{j}_0 [lhead=cluster{j}];");
        }
    }
    let _ = writeln!(out, "}}");
    out
}
