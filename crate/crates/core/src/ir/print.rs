use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::{Attr, Attribute, BlockId, Module, OpId, RegionId, Type, ValueId};
use crate::symbol::Symbol;

/// Renders the module in the textual IR format. The output re-parses to an
/// identical module text.
pub fn print_ir(m: &Module) -> String {
    let names = assign_names(m);
    let mut p = Printer {
        m,
        names,
        out: String::new(),
    };
    p.op(m.top(), 0);
    p.out.push('\n');
    p.out
}

/// The names `print_ir` gives every value, without the `%` sigil.
pub fn value_names(m: &Module) -> HashMap<ValueId, String> {
    assign_names(m)
}

pub(crate) fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

/// Values visible across the whole module are the results of ops directly in
/// the module body; every other value is scoped to its top-level op.
fn assign_names(m: &Module) -> HashMap<ValueId, String> {
    let mut names = HashMap::new();
    let mut global_taken = HashSet::new();
    let top_level: Vec<OpId> = m.block_ops(m.body()).collect();

    let globals: Vec<ValueId> = top_level.iter().flat_map(|&op| m.results(op).iter().copied()).collect();
    name_scope(m, &globals, &mut global_taken, &mut names);

    for &op in &top_level {
        let mut scoped = Vec::new();
        m.walk_from(op, &mut |o| {
            for &r in m.regions(o) {
                for &b in m.region_blocks(r) {
                    scoped.extend_from_slice(m.block_args(b));
                }
            }
            if o != op {
                scoped.extend_from_slice(m.results(o));
            }
        });
        let mut taken = global_taken.clone();
        name_scope(m, &scoped, &mut taken, &mut names);
    }
    names
}

fn name_scope(m: &Module, values: &[ValueId], taken: &mut HashSet<String>, names: &mut HashMap<ValueId, String>) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for &v in values {
        if let Some(h) = m.value_name(v) {
            *counts.entry(h).or_default() += 1;
        }
    }
    let mut pending = Vec::new();
    for &v in values {
        match m.value_name(v) {
            Some(h) if counts[h] == 1 && valid_name(h) && !taken.contains(h) => {
                taken.insert(h.to_owned());
                names.insert(v, h.to_owned());
            }
            _ => pending.push(v),
        }
    }
    let mut next = 0usize;
    for v in pending {
        let name = loop {
            let candidate = next.to_string();
            next += 1;
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        taken.insert(name.clone());
        names.insert(v, name);
    }
}

struct Printer<'a> {
    m: &'a Module,
    names: HashMap<ValueId, String>,
    out: String,
}

fn type_list(types: &[Type]) -> String {
    types.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

fn arrow_types(types: &[Type]) -> String {
    if types.len() == 1 {
        types[0].to_string()
    } else {
        format!("({})", type_list(types))
    }
}

pub fn func_result_types(m: &Module, op: OpId) -> Vec<Type> {
    match m.attr(op, "result_types").map(|a| a.get()) {
        Some(Attribute::Array(items)) => items
            .iter()
            .filter_map(|a| match a.get() {
                Attribute::Type(t) => Some(*t),
                _ => None,
            })
            .collect(),
        _ => Vec::new(),
    }
}

impl Printer<'_> {
    fn name(&self, v: ValueId) -> String {
        match self.names.get(&v) {
            Some(n) => format!("%{n}"),
            None => format!("%<{v:?}>"),
        }
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn op(&mut self, op: OpId, depth: usize) {
        let m = self.m;
        self.indent(depth);
        let results = m.results(op);
        if !results.is_empty() {
            let rs: Vec<String> = results.iter().map(|&r| self.name(r)).collect();
            let _ = write!(self.out, "{} = ", rs.join(", "));
        }
        let name = m.op_name(op);
        self.out.push_str(name.as_str());
        if name.as_str() == "func.func" {
            self.func(op, depth);
            return;
        }
        let sym_key = Symbol::new("sym_name");
        if let Some(s) = m.attr_sym(op, sym_key).and_then(|a| a.as_str()) {
            let _ = write!(self.out, " @{s}");
        }
        let operands = m.operands(op);
        if !operands.is_empty() {
            let os: Vec<String> = operands.iter().map(|&v| self.name(v)).collect();
            let _ = write!(self.out, " {}", os.join(", "));
        }
        let attrs: Vec<(Symbol, Attr)> = m.attrs(op).iter().copied().filter(|(k, _)| *k != sym_key).collect();
        self.attr_dict(&attrs, name.dialect() == "eqsat");
        let result_types: Vec<Type> = results.iter().map(|&r| m.value_type(r)).collect();
        let regions = m.regions(op);
        if !regions.is_empty() {
            if !result_types.is_empty() {
                let _ = write!(self.out, " -> {}", arrow_types(&result_types));
            }
            for &r in regions {
                self.out.push(' ');
                self.region(r, depth, false);
            }
        } else if !result_types.is_empty() {
            let _ = write!(self.out, " : {}", type_list(&result_types));
        } else if !operands.is_empty() {
            let ts: Vec<Type> = operands.iter().map(|&v| m.value_type(v)).collect();
            let _ = write!(self.out, " : {}", type_list(&ts));
        }
    }

    fn attr_dict(&mut self, attrs: &[(Symbol, Attr)], paren: bool) {
        if attrs.is_empty() {
            return;
        }
        let items: Vec<String> = attrs
            .iter()
            .map(|(k, v)| if paren { format!("{k}={v}") } else { format!("{k} = {v}") })
            .collect();
        if paren {
            let _ = write!(self.out, " ({})", items.join(", "));
        } else {
            let _ = write!(self.out, " {{{}}}", items.join(", "));
        }
    }

    fn func(&mut self, op: OpId, depth: usize) {
        let m = self.m;
        let sym = m.attr(op, "sym_name").and_then(|a| a.as_str()).unwrap_or("");
        let _ = write!(self.out, " @{sym}(");
        let region = m.regions(op).first().copied();
        let entry = region.and_then(|r| m.region_blocks(r).first().copied());
        if let Some(b) = entry {
            let args: Vec<String> = m
                .block_args(b)
                .iter()
                .map(|&a| format!("{} : {}", self.name(a), m.value_type(a)))
                .collect();
            self.out.push_str(&args.join(", "));
        }
        self.out.push(')');
        let rt = func_result_types(m, op);
        if !rt.is_empty() {
            let _ = write!(self.out, " -> {}", arrow_types(&rt));
        }
        let attrs: Vec<(Symbol, Attr)> = m
            .attrs(op)
            .iter()
            .copied()
            .filter(|(k, _)| k.as_str() != "sym_name" && k.as_str() != "result_types")
            .collect();
        if !attrs.is_empty() {
            self.out.push_str(" attributes");
            self.attr_dict(&attrs, false);
        }
        if let Some(r) = region {
            self.out.push(' ');
            self.region(r, depth, true);
        }
    }

    fn region(&mut self, r: RegionId, depth: usize, entry_args_inline: bool) {
        let m = self.m;
        let blocks = m.region_blocks(r);
        let single_plain = blocks.len() == 1 && (entry_args_inline || m.block_args(blocks[0]).is_empty());
        if blocks.is_empty() || (single_plain && m.block_len(blocks[0]) == 0) {
            self.out.push_str("{}");
            return;
        }
        self.out.push_str("{\n");
        for (i, &b) in blocks.iter().enumerate() {
            if !single_plain {
                self.block_header(b, i, depth + 1, i == 0 && entry_args_inline);
            }
            self.block(b, depth + 1);
        }
        self.indent(depth);
        self.out.push('}');
    }

    fn block_header(&mut self, b: BlockId, i: usize, depth: usize, hide_args: bool) {
        let m = self.m;
        self.indent(depth.saturating_sub(1));
        let _ = write!(self.out, "^bb{i}");
        if !hide_args && !m.block_args(b).is_empty() {
            let args: Vec<String> = m
                .block_args(b)
                .iter()
                .map(|&a| format!("{} : {}", self.name(a), m.value_type(a)))
                .collect();
            let _ = write!(self.out, "({})", args.join(", "));
        }
        self.out.push_str(":\n");
    }

    fn block(&mut self, b: BlockId, depth: usize) {
        let ops: Vec<OpId> = self.m.block_ops(b).collect();
        for op in ops {
            self.op(op, depth);
            self.out.push('\n');
        }
    }
}
