use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{ClassGraph, CostModel, ExtractError, Selection};
use crate::ir::{Module, OpId, ValueId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IlpBackend {
    /// Built-in exact search over selections.
    #[default]
    BranchAndBound,
    /// Mixed-integer program solved by `microlp`.
    MicroLp,
}

#[derive(Clone, Debug)]
pub struct IlpOptions {
    pub backend: IlpBackend,
    pub time_limit: Option<Duration>,
}

impl Default for IlpOptions {
    fn default() -> Self {
        IlpOptions {
            backend: IlpBackend::default(),
            time_limit: Some(Duration::from_secs(60)),
        }
    }
}

/// Minimum shared-cost selection for `roots` (all yielded classes when
/// empty). Each chosen member is paid once however often it is used.
pub fn select_ilp(m: &Module, egraph: OpId, cost: &CostModel, roots: &[ValueId]) -> Result<Selection, ExtractError> {
    select_ilp_with(m, egraph, cost, roots, &IlpOptions::default())
}

pub fn select_ilp_with(
    m: &Module,
    egraph: OpId,
    cost: &CostModel,
    roots: &[ValueId],
    opts: &IlpOptions,
) -> Result<Selection, ExtractError> {
    let g = ClassGraph::new(m, egraph, cost)?;
    let roots: Vec<usize> = if roots.is_empty() {
        g.roots.clone()
    } else {
        roots
            .iter()
            .map(|&r| g.class_index(r).ok_or_else(|| ExtractError::Infeasible(format!("{r:?} is not an e-class"))))
            .collect::<Result<_, _>>()?
    };
    let (pick, total) = solve(&g, &roots, opts)?;
    Ok(g.to_selection(&pick, Some(total)))
}

/// Members that can appear in some acyclic finite-cost selection.
fn viable(g: &ClassGraph) -> Vec<Vec<usize>> {
    let (tree, _) = g.tree_costs();
    (0..g.classes.len())
        .map(|c| {
            (0..g.members[c].len())
                .filter(|&k| {
                    let mem = &g.members[c][k];
                    mem.cost.is_finite() && mem.children.iter().all(|&d| d != c && tree[d].is_finite())
                })
                .collect()
        })
        .collect()
}

fn reachable(g: &ClassGraph, viable: &[Vec<usize>], roots: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; g.classes.len()];
    let mut stack: Vec<usize> = roots.to_vec();
    while let Some(c) = stack.pop() {
        if std::mem::replace(&mut seen[c], true) {
            continue;
        }
        for &k in &viable[c] {
            stack.extend(g.members[c][k].children.iter().copied().filter(|&d| !seen[d]));
        }
    }
    seen
}

/// Optimal member positions and their shared cost.
pub fn solve(g: &ClassGraph, roots: &[usize], opts: &IlpOptions) -> Result<(Vec<Option<usize>>, f64), ExtractError> {
    let via = viable(g);
    for &r in roots {
        if via[r].is_empty() {
            return Err(ExtractError::Infeasible(format!("class {r}")));
        }
    }
    let pick = match opts.backend {
        IlpBackend::BranchAndBound => BranchAndBound::run(g, &via, roots, opts.time_limit)?,
        IlpBackend::MicroLp => micro_lp(g, &via, roots, opts.time_limit)?,
    };
    let total = g
        .dag_cost_from(&pick, roots)
        .ok_or_else(|| ExtractError::Solver("solver returned an invalid selection".into()))?;
    Ok((pick, total))
}

struct BranchAndBound<'a> {
    g: &'a ClassGraph,
    order: Vec<Vec<usize>>,
    min_cost: Vec<f64>,
    pick: Vec<Option<usize>>,
    required: Vec<u32>,
    cost: f64,
    best: Option<(f64, Vec<Option<usize>>)>,
    deadline: Option<Instant>,
    steps: u64,
}

impl BranchAndBound<'_> {
    fn run(
        g: &ClassGraph,
        via: &[Vec<usize>],
        roots: &[usize],
        limit: Option<Duration>,
    ) -> Result<Vec<Option<usize>>, ExtractError> {
        let (tree, greedy) = g.tree_costs();
        let n = g.classes.len();
        let order: Vec<Vec<usize>> = (0..n)
            .map(|c| {
                let mut ks = via[c].clone();
                let t = |k: usize| {
                    let mem = &g.members[c][k];
                    mem.cost + mem.children.iter().map(|&d| tree[d]).sum::<f64>()
                };
                ks.sort_by(|&a, &b| t(a).total_cmp(&t(b)).then(a.cmp(&b)));
                ks
            })
            .collect();
        let min_cost = (0..n)
            .map(|c| via[c].iter().map(|&k| g.members[c][k].cost).fold(f64::INFINITY, f64::min))
            .collect();
        let mut bb = BranchAndBound {
            g,
            order,
            min_cost,
            pick: vec![None; n],
            required: vec![0; n],
            cost: 0.0,
            best: g.dag_cost_from(&greedy, roots).map(|c| (c, greedy.clone())),
            deadline: limit.map(|l| Instant::now() + l),
            steps: 0,
        };
        for &r in roots {
            bb.required[r] += 1;
        }
        bb.search()?;
        bb.best
            .map(|(_, p)| p)
            .ok_or_else(|| ExtractError::Infeasible("no acyclic selection reaches the roots".into()))
    }

    fn reaches(&self, from: usize, target: usize, seen: &mut Vec<bool>) -> bool {
        if from == target {
            return true;
        }
        if std::mem::replace(&mut seen[from], true) {
            return false;
        }
        match self.pick[from] {
            Some(k) => self.g.members[from][k].children.iter().any(|&d| self.reaches(d, target, seen)),
            None => false,
        }
    }

    fn search(&mut self) -> Result<(), ExtractError> {
        self.steps += 1;
        if self.steps % 4096 == 0 && self.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(ExtractError::Solver("time limit reached".into()));
        }
        let mut bound = self.cost;
        let mut next: Option<usize> = None;
        for c in 0..self.g.classes.len() {
            if self.required[c] > 0 && self.pick[c].is_none() {
                bound += self.min_cost[c];
                if next.is_none_or(|n| self.order[c].len() < self.order[n].len()) {
                    next = Some(c);
                }
            }
        }
        let incumbent = self.best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if bound >= incumbent - 1e-9 * incumbent.abs().max(1.0) {
            return Ok(());
        }
        let Some(c) = next else {
            self.best = Some((self.cost, self.pick.clone()));
            return Ok(());
        };
        for i in 0..self.order[c].len() {
            let k = self.order[c][i];
            let mem = &self.g.members[c][k];
            let mut seen = vec![false; self.g.classes.len()];
            if mem.children.iter().any(|&d| self.reaches(d, c, &mut seen)) {
                continue;
            }
            let children = mem.children.clone();
            let mc = mem.cost;
            self.pick[c] = Some(k);
            self.cost += mc;
            for &d in &children {
                self.required[d] += 1;
            }
            let r = self.search();
            for &d in &children {
                self.required[d] -= 1;
            }
            self.cost -= mc;
            self.pick[c] = None;
            r?;
        }
        Ok(())
    }
}

fn micro_lp(
    g: &ClassGraph,
    via: &[Vec<usize>],
    roots: &[usize],
    limit: Option<Duration>,
) -> Result<Vec<Option<usize>>, ExtractError> {
    let live = reachable(g, via, roots);
    let n = g.classes.len();
    let big = (live.iter().filter(|&&l| l).count() + 1) as f64;
    let mut p = Problem::new(OptimizationDirection::Minimize);
    if let Some(l) = limit {
        p.set_time_limit(l);
    }
    let mut x: Vec<Vec<(usize, microlp::Variable)>> = vec![Vec::new(); n];
    let mut level = vec![None; n];
    for c in (0..n).filter(|&c| live[c]) {
        level[c] = Some(p.add_var(0.0, (0.0, big)));
        for &k in &via[c] {
            x[c].push((k, p.add_binary_var(g.members[c][k].cost)));
        }
    }
    for c in (0..n).filter(|&c| live[c]) {
        let sum: Vec<(microlp::Variable, f64)> = x[c].iter().map(|&(_, v)| (v, 1.0)).collect();
        let rhs_op = if roots.contains(&c) { ComparisonOp::Eq } else { ComparisonOp::Le };
        p.add_constraint(sum.as_slice(), rhs_op, 1.0);
        for &(k, v) in &x[c] {
            for &d in &g.members[c][k].children {
                let mut e: Vec<(microlp::Variable, f64)> = vec![(v, 1.0)];
                e.extend(x[d].iter().map(|&(_, w)| (w, -1.0)));
                p.add_constraint(e.as_slice(), ComparisonOp::Le, 0.0);
                let (lc, ld) = (level[c].expect("live"), level[d].expect("live"));
                p.add_constraint([(lc, 1.0), (ld, -1.0), (v, -big)].as_slice(), ComparisonOp::Ge, 1.0 - big);
            }
        }
    }
    let outcome = p.solve().map_err(|e| match e {
        microlp::Error::Infeasible => ExtractError::Infeasible("the integer program".into()),
        other => ExtractError::Solver(format!("{other:?}")),
    })?;
    if !outcome.is_optimal() {
        return Err(ExtractError::Solver("no optimality proof within the time limit".into()));
    }
    let sol = outcome.solution().expect("optimal outcomes carry a solution");
    Ok((0..n)
        .map(|c| x[c].iter().find(|&&(_, v)| sol.var_value(v) > 0.5).map(|&(k, _)| k))
        .collect())
}
