use super::{is_class_op, EGraph, EngineError};
use crate::dialects::is_eqsat;
use crate::ir::{Attribute, Module, OpId, Traits, ValueId};
use crate::pattern::{Inst, Literal, MatcherProgram};

/// One successful match of a pattern.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MatchRecord {
    /// Index into the rule set's pattern list.
    pub pattern: usize,
    /// Matched root e-node.
    pub root: OpId,
    /// Class containing the root e-node.
    pub root_class: ValueId,
    /// Class bound to each pattern variable.
    pub bindings: Vec<ValueId>,
}

#[derive(Copy, Clone, Debug)]
enum Slot {
    Empty,
    Op(OpId),
    Value(ValueId),
}

enum Frame {
    Defs { pc: usize, dst: u32, cands: Vec<OpId>, next: usize },
    Choose { branches: Vec<usize>, next: usize },
}

pub(crate) fn literal_matches(attr: &Attribute, lit: Literal) -> bool {
    match (attr, lit) {
        (Attribute::Int { value, .. }, Literal::Int(i)) => *value == i,
        (Attribute::Float { bits, .. }, Literal::Int(i)) => *bits == (i as f64).to_bits(),
        (Attribute::Float { bits, .. }, Literal::Float(f)) => *bits == f.to_bits(),
        (Attribute::Int { value, .. }, Literal::Float(f)) => (*value as f64).to_bits() == f.to_bits(),
        _ => false,
    }
}

struct Vm<'a> {
    m: &'a Module,
    g: &'a EGraph,
    p: &'a MatcherProgram,
    regs: Vec<Slot>,
    stack: Vec<Frame>,
}

impl Vm<'_> {
    fn op(&self, r: u32) -> Result<OpId, EngineError> {
        match self.regs.get(r as usize) {
            Some(Slot::Op(o)) => Ok(*o),
            _ => Err(EngineError::Malformed(format!("r{r} does not hold an operation"))),
        }
    }

    fn value(&self, r: u32) -> Result<ValueId, EngineError> {
        match self.regs.get(r as usize) {
            Some(Slot::Value(v)) => Ok(*v),
            _ => Err(EngineError::Malformed(format!("r{r} does not hold a value"))),
        }
    }

    /// Resumes at the most recent backtracking point, or `None` when
    /// exhausted.
    fn backtrack(&mut self) -> Option<usize> {
        loop {
            match self.stack.last_mut()? {
                Frame::Defs { pc, dst, cands, next } => {
                    if *next < cands.len() {
                        let o = cands[*next];
                        *next += 1;
                        let (pc, dst) = (*pc, *dst);
                        self.regs[dst as usize] = Slot::Op(o);
                        return Some(pc);
                    }
                }
                Frame::Choose { branches, next } => {
                    if *next < branches.len() {
                        let b = branches[*next];
                        *next += 1;
                        return Some(b);
                    }
                }
            }
            self.stack.pop();
        }
    }

    fn members(&self, v: ValueId) -> Vec<OpId> {
        match self.m.defining_op(v) {
            Some(c) if is_class_op(self.m, c) => {
                self.m.operands(c).iter().filter_map(|&x| self.m.defining_op(x)).collect()
            }
            Some(d) => vec![d],
            None => Vec::new(),
        }
    }

    fn run(&mut self, root: OpId, out: &mut Vec<MatchRecord>) -> Result<(), EngineError> {
        self.regs.iter_mut().for_each(|r| *r = Slot::Empty);
        self.regs[0] = Slot::Op(root);
        self.stack.clear();
        let mut pc = 0usize;
        let (m, g) = (self.m, self.g);
        loop {
            let inst = &self.p.insts[pc];
            let ok = match inst {
                Inst::GetOperand { op, index, dst } => {
                    let o = self.op(*op)?;
                    match m.operands(o).get(*index as usize) {
                        Some(&v) => {
                            self.regs[*dst as usize] = Slot::Value(g.find(m, v));
                            true
                        }
                        None => false,
                    }
                }
                Inst::GetResult { op, index, dst } => {
                    let o = self.op(*op)?;
                    match m.results(o).get(*index as usize) {
                        Some(_) => {
                            let v = g.class_of(m, o).unwrap_or_else(|| m.result(o, *index as usize));
                            self.regs[*dst as usize] = Slot::Value(v);
                            true
                        }
                        None => false,
                    }
                }
                Inst::GetDefiningOp { value, dst } => {
                    let cands = self.members(self.value(*value)?);
                    self.stack.push(Frame::Defs {
                        pc: pc + 1,
                        dst: *dst,
                        cands,
                        next: 0,
                    });
                    match self.backtrack() {
                        Some(next) => {
                            pc = next;
                            continue;
                        }
                        None => return Ok(()),
                    }
                }
                Inst::CheckOperationName { op, name } => m.op_name(self.op(*op)?) == *name,
                Inst::CheckOperandCount { op, count } => m.operands(self.op(*op)?).len() == *count as usize,
                Inst::CheckAttribute { op, key, value } => m.attr_sym(self.op(*op)?, *key) == Some(*value),
                Inst::CheckConstant { op, literal } => {
                    let o = self.op(*op)?;
                    let attr = if m.has_trait(o, Traits::CONSTANT) { m.attr(o, "value") } else { m.attr(o, "cst") };
                    attr.is_some_and(|a| literal_matches(a.get(), *literal))
                }
                Inst::AreEqual { a, b } => g.find(m, self.value(*a)?) == g.find(m, self.value(*b)?),
                Inst::ApplyConstraint { pred, args } => {
                    let mut ok = true;
                    for &a in args {
                        ok &= g.check_predicate(m, self.value(a)?, *pred);
                    }
                    ok
                }
                Inst::Choose { branches } => {
                    self.stack.push(Frame::Choose {
                        branches: branches.clone(),
                        next: 0,
                    });
                    match self.backtrack() {
                        Some(next) => {
                            pc = next;
                            continue;
                        }
                        None => return Ok(()),
                    }
                }
                Inst::RecordMatch { pattern, root, bindings } => {
                    let r = self.op(*root)?;
                    let root_class = g.class_of(m, r).map(|c| g.find(m, c)).unwrap_or(m.result(r, 0));
                    let mut bs = Vec::with_capacity(bindings.len());
                    for &b in bindings {
                        bs.push(g.find(m, self.value(b)?));
                    }
                    out.push(MatchRecord {
                        pattern: *pattern as usize,
                        root: r,
                        root_class,
                        bindings: bs,
                    });
                    true
                }
                Inst::Finalize => false,
            };
            if ok {
                pc += 1;
            } else {
                match self.backtrack() {
                    Some(next) => pc = next,
                    None => return Ok(()),
                }
            }
        }
    }
}

/// Runs `program` with every e-node of the graph as candidate root, in
/// block order. Matching never mutates the IR.
pub fn ematch(m: &Module, g: &EGraph, program: &MatcherProgram) -> Result<Vec<MatchRecord>, EngineError> {
    let mut vm = Vm {
        m,
        g,
        p: program,
        regs: vec![Slot::Empty; program.num_regs.max(1) as usize],
        stack: Vec::new(),
    };
    let mut out = Vec::new();
    if program.insts.is_empty() {
        return Ok(out);
    }
    for op in m.block_ops(g.block()) {
        if is_eqsat(m.op_name(op)) || m.results(op).is_empty() {
            continue;
        }
        vm.run(op, &mut out)?;
    }
    Ok(out)
}
