//! Flat pass pipelines over a module. Every pass runs on all functions or
//! e-graphs of the module in program order, and the verifier runs after
//! each pass.

use std::collections::HashMap;
use std::fmt::Write;
use std::str::FromStr;

use eqsat::analysis::{run_dataflow, seed_args, EClassIntervals, Interval, IntervalAnalysis};
use eqsat::dialects::{insert_eclasses, EGRAPH};
use eqsat::engine::{saturate, EGraph, RuleSet, SaturationConfig};
use eqsat::extract::{annotate_selection, replace_selected, select_greedy, select_ilp, topo_sort, CostModel};
use eqsat::ir::{value_names, verify, Module, OpId};

use crate::dot::emit_dot;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pass {
    InsertEclasses,
    Saturate,
    SelectGreedy,
    SelectIlp,
    Replace,
    TopoSort,
    PrintAnalysis,
    EmitDot,
}

impl Pass {
    pub const ALL: [Pass; 8] = [
        Pass::InsertEclasses,
        Pass::Saturate,
        Pass::SelectGreedy,
        Pass::SelectIlp,
        Pass::Replace,
        Pass::TopoSort,
        Pass::PrintAnalysis,
        Pass::EmitDot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pass::InsertEclasses => "insert-eclasses",
            Pass::Saturate => "saturate",
            Pass::SelectGreedy => "select-greedy",
            Pass::SelectIlp => "select-ilp",
            Pass::Replace => "replace",
            Pass::TopoSort => "topo-sort",
            Pass::PrintAnalysis => "print-analysis",
            Pass::EmitDot => "emit-dot",
        }
    }

    fn is_select(self) -> bool {
        matches!(self, Pass::SelectGreedy | Pass::SelectIlp)
    }
}

impl FromStr for Pass {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Pass, CliError> {
        Pass::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown pass `{s}`")))
    }
}

/// Parses a comma-separated pass list. `select` stands for the selection
/// pass named by `default_select`.
pub fn parse_passes(list: &str, default_select: Pass) -> Result<Vec<Pass>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| if s == "select" { Ok(default_select) } else { s.parse() })
        .collect()
}

/// Checks the ordering constraints: `replace` needs an earlier selection
/// and `saturate` needs rules.
pub fn check_pipeline(passes: &[Pass], have_rules: bool) -> Result<(), CliError> {
    let mut selected = false;
    for &p in passes {
        match p {
            Pass::Saturate if !have_rules => {
                return Err(CliError::Usage("`saturate` needs a rule file (--rules)".into()));
            }
            Pass::Replace if !selected => {
                return Err(CliError::Usage("`replace` needs an earlier select pass".into()));
            }
            _ => {}
        }
        selected |= p.is_select();
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    pub rules: Option<RuleSet>,
    pub cost: CostModel,
    pub saturation: SaturationConfig,
    /// Boxes for the arguments of every function, used to seed interval
    /// facts for rule conditions and analysis printing.
    pub arg_ranges: Option<Vec<(f64, f64)>>,
}

/// Text produced by the passes. `output` belongs on stdout, `stats` on
/// stderr.
#[derive(Clone, Debug, Default)]
pub struct PipelineOutput {
    pub output: String,
    pub stats: Vec<String>,
}

fn funcs(m: &Module) -> Vec<OpId> {
    m.ops_named("func.func")
}

fn egraphs(m: &Module) -> Result<Vec<OpId>, CliError> {
    let gs = m.ops_named(EGRAPH);
    if gs.is_empty() {
        return Err(CliError::Pipeline("no e-graph in the module; run insert-eclasses first".into()));
    }
    Ok(gs)
}

fn func_name(m: &Module, f: OpId) -> String {
    m.attr(f, "sym_name")
        .and_then(|a| a.as_str().map(str::to_owned))
        .unwrap_or_else(|| "?".into())
}

fn seeds(m: &Module, f: OpId, opts: &PipelineOptions) -> HashMap<eqsat::ir::ValueId, Interval> {
    match &opts.arg_ranges {
        Some(r) => {
            let boxes: Vec<Interval> = r.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect();
            seed_args(m, f, &boxes)
        }
        None => HashMap::new(),
    }
}

/// Interval facts for every named value, one `%name: [lo,hi] nan=b` line
/// each, in program order.
pub fn print_intervals(m: &Module, opts: &PipelineOptions) -> Result<String, CliError> {
    let mut all = HashMap::new();
    for f in funcs(m) {
        all.extend(seeds(m, f, opts));
    }
    let facts = run_dataflow(m, &IntervalAnalysis, &all).map_err(|e| CliError::Pipeline(e.to_string()))?;
    let names = value_names(m);
    let mut out = String::new();
    for f in funcs(m) {
        let _ = writeln!(out, "// interval facts for @{}", func_name(m, f));
        let mut values: Vec<_> = m.entry_block(f).map(|b| m.block_args(b).to_vec()).unwrap_or_default();
        m.walk_from(f, &mut |op| {
            if op != f {
                values.extend_from_slice(m.results(op));
            }
        });
        for v in values {
            let _ = writeln!(out, "%{}: {}", names[&v], facts.get(v));
        }
    }
    Ok(out)
}

fn gate(m: &Module, pass: &str) -> Result<(), CliError> {
    let diags = verify(m);
    if diags.is_empty() {
        return Ok(());
    }
    let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
    Err(CliError::Verify {
        after: pass.to_owned(),
        diagnostics: msg.join("\n"),
    })
}

/// Runs `passes` in order, verifying the module before the first pass and
/// after every pass.
pub fn run_pipeline(m: &mut Module, passes: &[Pass], opts: &PipelineOptions) -> Result<PipelineOutput, CliError> {
    check_pipeline(passes, opts.rules.is_some())?;
    gate(m, "parsing")?;
    let mut out = PipelineOutput::default();
    for &pass in passes {
        run_pass(m, pass, opts, &mut out)?;
        gate(m, pass.name())?;
    }
    Ok(out)
}

fn run_pass(m: &mut Module, pass: Pass, opts: &PipelineOptions, out: &mut PipelineOutput) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Pipeline(format!("{}: {e}", pass.name()));
    match pass {
        Pass::InsertEclasses => {
            for f in funcs(m) {
                insert_eclasses(m, f).map_err(|e| fail(&e))?;
            }
        }
        Pass::Saturate => {
            let rules = opts.rules.as_ref().expect("checked by check_pipeline");
            for e in egraphs(m)? {
                let f = m.parent_op(e).filter(|&p| m.op_name(p).as_str() == "func.func");
                let seeds = f.map(|f| seeds(m, f, opts)).unwrap_or_default();
                let mut g = EGraph::new(m, e).map_err(|e| fail(&e))?;
                g.register_analysis(m, Box::new(EClassIntervals::new(seeds)))
                    .map_err(|e| fail(&e))?;
                let r = saturate(m, &mut g, rules, &opts.saturation).map_err(|e| fail(&e))?;
                for it in &r.per_iteration {
                    out.stats.push(format!("saturate: {it}"));
                }
                out.stats.push(format!(
                    "saturate: iters={} reason={} enodes={}",
                    r.iterations,
                    r.reason,
                    g.enode_count(m)
                ));
            }
        }
        Pass::SelectGreedy | Pass::SelectIlp => {
            for e in egraphs(m)? {
                let sel = if pass == Pass::SelectGreedy {
                    select_greedy(m, e, &opts.cost)
                } else {
                    select_ilp(m, e, &opts.cost, &[])
                }
                .map_err(|e| fail(&e))?;
                annotate_selection(m, e, &sel).map_err(|e| fail(&e))?;
                let cost = sel.total_cost.map_or("none".to_owned(), |c| c.to_string());
                out.stats.push(format!("{}: selected={} cost={cost}", pass.name(), sel.choice.len()));
            }
        }
        Pass::Replace => {
            for e in egraphs(m)? {
                let dissolved = replace_selected(m, e).map_err(|e| fail(&e))?;
                out.stats.push(format!("replace: dissolved={dissolved}"));
            }
        }
        Pass::TopoSort => {
            for f in funcs(m) {
                for r in m.regions(f).to_vec() {
                    topo_sort(m, r).map_err(|e| fail(&e))?;
                }
            }
        }
        Pass::PrintAnalysis => out.output.push_str(&print_intervals(m, opts)?),
        Pass::EmitDot => {
            for e in egraphs(m)? {
                out.output.push_str(&emit_dot(m, e));
            }
        }
    }
    Ok(())
}
