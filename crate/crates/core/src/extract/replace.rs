use std::collections::{BTreeSet, HashMap, HashSet};

use super::{ExtractError, Selection, SELECTED};
use crate::dialects::{CONST_ECLASS, ECLASS};
use crate::engine::is_class_op;
use crate::ir::{Attr, BlockId, InsertPoint, Module, OpId, RegionId, Traits, ValueId};
use crate::symbol::Symbol;

fn egraph_block(m: &Module, egraph: OpId) -> Result<BlockId, ExtractError> {
    m.entry_block(egraph)
        .ok_or_else(|| ExtractError::NotAnEGraph(m.op_name(egraph).to_string()))
}

/// Writes `eqsat.selected` on every class op in `sel` and clears it on
/// the others.
pub fn annotate_selection(m: &mut Module, egraph: OpId, sel: &Selection) -> Result<(), ExtractError> {
    let block = egraph_block(m, egraph)?;
    let classes: Vec<OpId> = m.block_ops(block).filter(|&o| is_class_op(m, o)).collect();
    for c in classes {
        match sel.choice.get(&c) {
            Some(&i) => {
                let len = m.operands(c).len();
                if i >= len {
                    return Err(ExtractError::OutOfRange { index: i, len });
                }
                m.set_attr(c, SELECTED, Attr::i64(i as i64));
            }
            None => {
                m.remove_attr(c, SELECTED);
            }
        }
    }
    Ok(())
}

fn selected_index(m: &Module, class: OpId) -> Result<Option<usize>, ExtractError> {
    let Some(a) = m.attr(class, SELECTED) else {
        return Ok(None);
    };
    let len = m.operands(class).len();
    match a.as_int() {
        Some(i) if i >= 0 && (i as usize) < len => Ok(Some(i as usize)),
        Some(i) => Err(ExtractError::OutOfRange {
            index: i.max(0) as usize,
            len,
        }),
        None => Err(ExtractError::OutOfRange { index: usize::MAX, len }),
    }
}

/// Replaces every annotated class with its chosen member and deletes what
/// the yield no longer reaches, unselected classes included. When no class is left the e-graph is dissolved
/// into its parent block in dependency order. Returns whether that
/// happened.
pub fn replace_selected(m: &mut Module, egraph: OpId) -> Result<bool, ExtractError> {
    let block = egraph_block(m, egraph)?;
    let mut chosen: HashMap<ValueId, ValueId> = HashMap::new();
    let mut class_ops = Vec::new();
    for c in m.block_ops(block).filter(|&o| is_class_op(m, o)).collect::<Vec<_>>() {
        if let Some(i) = selected_index(m, c)? {
            chosen.insert(m.result(c, 0), m.operand(c, i));
            class_ops.push(c);
        }
    }
    check_acyclic(m, &chosen)?;

    for &c in &class_ops {
        let r = m.result(c, 0);
        m.replace_all_uses(r, chosen[&r])?;
        m.erase_op(c)?;
    }

    let ops: Vec<OpId> = m.block_ops(block).collect();
    let in_block: HashSet<OpId> = ops.iter().copied().collect();
    let mut live: HashSet<OpId> = HashSet::new();
    let mut stack: Vec<OpId> = ops
        .iter()
        .copied()
        .filter(|&o| m.has_trait(o, Traits::TERMINATOR))
        .collect();
    while let Some(o) = stack.pop() {
        if !live.insert(o) {
            continue;
        }
        for &v in m.operands(o) {
            if let Some(d) = m.defining_op(v).filter(|d| in_block.contains(d)) {
                stack.push(d);
            }
        }
    }
    let dead: Vec<OpId> = ops.iter().copied().filter(|o| !live.contains(o)).collect();
    for &o in &dead {
        m.set_operands(o, &[]);
    }
    for &o in &dead {
        m.erase_op(o)?;
    }

    if m.block_ops(block).any(|o| is_class_op(m, o)) {
        rewrap_yield(m, block)?;
        return Ok(false);
    }
    topo_sort_block(m, block)?;
    let body: Vec<OpId> = m.block_ops(block).collect();
    let (yield_op, moved) = body.split_last().expect("e-graph block ends in a yield");
    for &o in moved {
        m.move_op(o, InsertPoint::Before(egraph));
    }
    let outs: Vec<ValueId> = m.operands(*yield_op).to_vec();
    for (i, v) in outs.into_iter().enumerate() {
        let r = m.result(egraph, i);
        m.replace_all_uses(r, v)?;
    }
    m.erase_op(egraph)?;
    Ok(true)
}

/// Yield operands of a surviving e-graph must stay class results, so each
/// replaced one is wrapped in a fresh single-member class.
fn rewrap_yield(m: &mut Module, block: BlockId) -> Result<(), ExtractError> {
    let y = m.block_last(block).expect("e-graph block ends in a yield");
    for i in 0..m.operands(y).len() {
        let v = m.operand(y, i);
        if m.defining_op(v).is_some_and(|d| is_class_op(m, d)) {
            continue;
        }
        let ty = m.value_type(v);
        let constant = m
            .defining_op(v)
            .filter(|&d| m.has_trait(d, Traits::CONSTANT))
            .and_then(|d| m.attr(d, "value"));
        let class = match constant {
            Some(cst) => m.build_op(InsertPoint::Before(y), CONST_ECLASS, &[v], vec![(Symbol::new("cst"), cst)], &[ty], vec![])?,
            None => m.build_op(InsertPoint::Before(y), ECLASS, &[v], vec![], &[ty], vec![])?,
        };
        let r = m.result(class, 0);
        m.set_operand(y, i, r);
    }
    Ok(())
}

/// Fails when following chosen members through replaced classes returns to
/// a class already on the path.
fn check_acyclic(m: &Module, chosen: &HashMap<ValueId, ValueId>) -> Result<(), ExtractError> {
    // 0 unvisited, 1 on stack, 2 done
    let mut state: HashMap<ValueId, u8> = HashMap::new();
    for &start in chosen.keys() {
        if state.get(&start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(ValueId, usize)> = vec![(start, 0)];
        state.insert(start, 1);
        while let Some(&mut (c, ref mut next)) = stack.last_mut() {
            let kids: &[ValueId] = match m.defining_op(chosen[&c]) {
                Some(op) => m.operands(op),
                None => &[],
            };
            let kid = kids[*next..].iter().position(|k| chosen.contains_key(k)).map(|p| p + *next);
            match kid {
                Some(p) => {
                    *next = p + 1;
                    let k = kids[p];
                    match state.get(&k).copied().unwrap_or(0) {
                        1 => return Err(ExtractError::Cycle),
                        0 => {
                            state.insert(k, 1);
                            stack.push((k, 0));
                        }
                        _ => {}
                    }
                }
                None => {
                    state.insert(c, 2);
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}

/// Topologically sorts every block of `region`.
pub fn topo_sort(m: &mut Module, region: RegionId) -> Result<(), ExtractError> {
    for b in m.region_blocks(region).to_vec() {
        topo_sort_block(m, b)?;
    }
    Ok(())
}

/// Reorders `block` so definitions precede uses, keeping the original
/// order wherever it is already valid. A trailing terminator stays last.
pub fn topo_sort_block(m: &mut Module, block: BlockId) -> Result<(), ExtractError> {
    let ops: Vec<OpId> = m.block_ops(block).collect();
    let terminator = ops.last().copied().filter(|&o| m.has_trait(o, Traits::TERMINATOR));
    let body = &ops[..ops.len() - usize::from(terminator.is_some())];
    let pos: HashMap<OpId, usize> = body.iter().enumerate().map(|(i, &o)| (o, i)).collect();

    let mut users: Vec<Vec<usize>> = vec![Vec::new(); body.len()];
    let mut indeg = vec![0usize; body.len()];
    for (i, &o) in body.iter().enumerate() {
        let mut deps = BTreeSet::new();
        m.walk_from(o, &mut |inner| {
            for &v in m.operands(inner) {
                if let Some(&d) = m.defining_op(v).and_then(|d| pos.get(&d)) {
                    if d != i {
                        deps.insert(d);
                    }
                }
            }
        });
        indeg[i] = deps.len();
        for d in deps {
            users[d].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..body.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(body.len());
    while let Some(i) = ready.pop_first() {
        order.push(body[i]);
        for &u in &users[i] {
            indeg[u] -= 1;
            if indeg[u] == 0 {
                ready.insert(u);
            }
        }
    }
    if order.len() != body.len() {
        return Err(ExtractError::Cycle);
    }
    for &o in order.iter().rev() {
        m.move_op(o, InsertPoint::Start(block));
    }
    Ok(())
}
