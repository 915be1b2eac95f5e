use std::fmt;

use super::{BlockId, Module, OpId, RegionKind, Traits, Type, ValueDef, ValueId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub op: Option<OpId>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            Some(op) => write!(f, "{op:?}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Arity, region count and type constraints of a registered op.
pub(crate) fn check_signature(m: &Module, op: OpId) -> Result<(), String> {
    let name = m.op_name(op);
    let def = m.def(op).ok_or_else(|| format!("unknown operation `{name}`"))?;
    let (n_in, n_out) = (m.operands(op).len(), m.results(op).len());
    if !def.operands.accepts(n_in) {
        return Err(format!("`{name}` expects {} operands, found {n_in}", def.operands));
    }
    if !def.results.accepts(n_out) {
        return Err(format!("`{name}` expects {} results, found {n_out}", def.results));
    }
    let regions = m.regions(op);
    if regions.len() != def.regions.len() {
        return Err(format!("`{name}` expects {} regions, found {}", def.regions.len(), regions.len()));
    }
    for (&r, &kind) in regions.iter().zip(&def.regions) {
        if m.region_kind(r) != kind {
            return Err(format!("`{name}` region must be a {kind:?} region"));
        }
    }
    let ins: Vec<Type> = m.operands(op).iter().map(|&v| m.value_type(v)).collect();
    let outs: Vec<Type> = m.results(op).iter().map(|&v| m.value_type(v)).collect();
    (def.type_check)(&ins, &outs, m.attrs(op)).map_err(|e| format!("`{name}`: {e}"))
}

/// Checks every structural invariant; an empty list means the module is
/// well formed.
pub fn verify(m: &Module) -> Vec<Diagnostic> {
    let mut v = Verifier {
        m,
        order: vec![u32::MAX; m.num_ops()],
        diags: Vec::new(),
    };
    v.run();
    v.diags
}

struct Verifier<'a> {
    m: &'a Module,
    /// Position of each linked op within its block.
    order: Vec<u32>,
    diags: Vec<Diagnostic>,
}

impl Verifier<'_> {
    fn report(&mut self, op: OpId, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            op: Some(op),
            message: message.into(),
        });
    }

    fn run(&mut self) {
        let m = self.m;
        let all = m.walk();
        for &op in &all {
            for &r in m.regions(op) {
                for &b in m.region_blocks(r) {
                    for (i, o) in m.block_ops(b).enumerate() {
                        self.order[o.index()] = i as u32;
                    }
                }
            }
        }
        for &op in &all {
            self.check_op(op);
        }
        if let Err(e) = m.check_use_def() {
            self.diags.push(Diagnostic { op: None, message: e });
        }
    }

    fn check_op(&mut self, op: OpId) {
        let m = self.m;
        if let Err(e) = check_signature(m, op) {
            self.report(op, e);
            return;
        }
        let def = m.def(op).expect("checked above");
        for &r in m.regions(op) {
            let blocks = m.region_blocks(r);
            if m.region_kind(r) == RegionKind::Graph && blocks.len() != 1 {
                self.report(op, format!("graph region must have exactly one block, found {}", blocks.len()));
            }
            if !def.has(Traits::NO_TERMINATOR) {
                for &b in blocks {
                    match m.block_last(b) {
                        Some(last) if m.has_trait(last, Traits::TERMINATOR) => {}
                        Some(last) => self.report(last, format!("block must end in a terminator, found `{}`", m.op_name(last))),
                        None => self.report(op, "block must end in a terminator"),
                    }
                }
            }
        }
        if def.has(Traits::TERMINATOR) && m.next_op(op).is_some() {
            self.report(op, "terminator must be the last operation of its block");
        }
        for (i, &v) in m.operands(op).iter().enumerate() {
            if let Err(e) = self.check_visible(v, op) {
                self.report(op, format!("operand {i}: {e}"));
            }
        }
        if let Some(hook) = def.verifier {
            if let Err(e) = hook(m, op) {
                self.report(op, e);
            }
        }
    }

    /// `v` must be defined in the user's block or an enclosing one, and in a
    /// cfg region it must precede the use.
    fn check_visible(&self, v: ValueId, user: OpId) -> Result<(), String> {
        let m = self.m;
        let def_block: BlockId = match m.value_def(v) {
            ValueDef::OpResult { op, .. } => {
                if !m.is_live(op) {
                    return Err("uses an erased value".into());
                }
                m.parent_block(op).ok_or("uses a value of a detached operation")?
            }
            ValueDef::BlockArg { block, .. } => block,
        };
        // Climb from the user to the ancestor that sits in `def_block`.
        let mut cur = user;
        loop {
            let Some(b) = m.parent_block(cur) else {
                return Err("value is not visible from this scope".into());
            };
            if b == def_block {
                break;
            }
            cur = m.block_owner(b).ok_or("value is not visible from this scope")?;
        }
        let region = m.block_parent(def_block).ok_or("value defined in a detached block")?;
        if m.region_kind(region) == RegionKind::Cfg {
            if let ValueDef::OpResult { op: def_op, .. } = m.value_def(v) {
                if self.order[def_op.index()] >= self.order[cur.index()] {
                    return Err(format!("use of `{}` result does not follow its definition", m.op_name(def_op)));
                }
            }
        }
        Ok(())
    }
}
