use super::{ClassGraph, CostModel, ExtractError, Selection};
use crate::ir::{Module, OpId};

/// Picks, per class, the member of least tree cost. Classes whose every
/// member has infinite cost stay unselected. `total_cost` is the shared
/// (DAG) cost of the induced program when every root is selected.
pub fn select_greedy(m: &Module, egraph: OpId, cost: &CostModel) -> Result<Selection, ExtractError> {
    let g = ClassGraph::new(m, egraph, cost)?;
    let (_, pick) = g.tree_costs();
    let total = g.dag_cost(&pick);
    Ok(g.to_selection(&pick, total))
}
