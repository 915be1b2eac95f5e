use super::{CONST_ECLASS, ECLASS, EGRAPH, YIELD};
use crate::ir::{InsertPoint, IrError, Module, OpId, RegionKind, Traits, Type, ValueId};
use crate::symbol::Symbol;

fn wrap(m: &mut Module, at: InsertPoint, v: ValueId) -> Result<OpId, IrError> {
    let ty = m.value_type(v);
    let constant = m.defining_op(v).filter(|&d| m.has_trait(d, Traits::CONSTANT));
    let op = match constant.and_then(|d| m.attr(d, "value")) {
        Some(cst) => m.build_op(at, CONST_ECLASS, &[v], vec![(Symbol::new("cst"), cst)], &[ty], vec![])?,
        None => m.build_op(at, ECLASS, &[v], vec![], &[ty], vec![])?,
    };
    if let Some(hint) = m.value_name(v).map(|h| format!("c_{h}")) {
        let r = m.result(op, 0);
        m.set_value_name(r, hint);
    }
    let r = m.result(op, 0);
    m.replace_uses_if(v, r, |u| u.op != op);
    Ok(op)
}

/// Wraps the body of a pure straight-line function in a trivial e-graph: one
/// e-class per argument and per op result, constants in `const_eclass`.
/// Returns the new `eqsat.egraph` op.
pub fn insert_eclasses(m: &mut Module, func: OpId) -> Result<OpId, IrError> {
    if m.op_name(func).as_str() != "func.func" {
        return Err(IrError::Invalid(format!("expected func.func, found `{}`", m.op_name(func))));
    }
    let region = m.regions(func)[0];
    if m.region_blocks(region).len() != 1 {
        return Err(IrError::Invalid("e-class insertion requires a single-block function".into()));
    }
    let entry = m.region_blocks(region)[0];
    let ret = m
        .block_last(entry)
        .filter(|&r| m.op_name(r).as_str() == "func.return")
        .ok_or_else(|| IrError::Invalid("function must end in func.return".into()))?;
    let body: Vec<OpId> = m.block_ops(entry).filter(|&o| o != ret).collect();
    for &op in &body {
        let name = m.op_name(op);
        if name.as_str() == EGRAPH {
            return Err(IrError::Invalid("function already contains an e-graph".into()));
        }
        if !m.has_trait(op, Traits::PURE) || !m.regions(op).is_empty() {
            return Err(IrError::Invalid(format!("`{name}` is not a pure region-free operation")));
        }
    }

    let ret_types: Vec<Type> = m.operands(ret).iter().map(|&v| m.value_type(v)).collect();
    let graph_region = m.new_region(RegionKind::Graph);
    let gblock = m.add_block(graph_region, &[]);
    let egraph = m.build_op(InsertPoint::Before(ret), EGRAPH, &[], vec![], &ret_types, vec![graph_region])?;

    let args: Vec<ValueId> = m.block_args(entry).to_vec();
    for a in args {
        wrap(m, InsertPoint::End(gblock), a)?;
    }
    for op in body {
        m.move_op(op, InsertPoint::End(gblock));
        let results: Vec<ValueId> = m.results(op).to_vec();
        for r in results {
            wrap(m, InsertPoint::End(gblock), r)?;
        }
    }
    let returned: Vec<ValueId> = m.operands(ret).to_vec();
    m.build_op(InsertPoint::End(gblock), YIELD, &returned, vec![], &[], vec![])?;
    let outs: Vec<ValueId> = m.results(egraph).to_vec();
    m.set_operands(ret, &outs);
    Ok(egraph)
}
