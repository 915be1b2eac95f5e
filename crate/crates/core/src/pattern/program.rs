use std::fmt;
use std::sync::Arc;

use super::{Literal, Pattern, Predicate};
use crate::ir::Attr;
use crate::symbol::Symbol;

/// A virtual register. Register 0 holds the candidate root operation.
pub type Reg = u32;

/// Matcher instructions. Checks fall through on success and backtrack on
/// failure; `GetDefiningOp` and `Choose` push backtracking points.
#[derive(Clone, Debug, PartialEq)]
pub enum Inst {
    GetOperand { op: Reg, index: u32, dst: Reg },
    GetResult { op: Reg, index: u32, dst: Reg },
    /// On an e-class result, enumerates the defining op of every member.
    GetDefiningOp { value: Reg, dst: Reg },
    CheckOperationName { op: Reg, name: Symbol },
    CheckOperandCount { op: Reg, count: u32 },
    CheckAttribute { op: Reg, key: Symbol, value: Attr },
    /// Passes when `op` is a constant (or constant e-class) equal to `literal`.
    CheckConstant { op: Reg, literal: Literal },
    AreEqual { a: Reg, b: Reg },
    ApplyConstraint { pred: Predicate, args: Vec<Reg> },
    Choose { branches: Vec<usize> },
    /// `bindings[v]` holds the value bound to variable `v`.
    RecordMatch { pattern: u32, root: Reg, bindings: Vec<Reg> },
    Finalize,
}

impl Inst {
    pub fn reads(&self) -> Vec<Reg> {
        match self {
            Inst::GetOperand { op, .. } | Inst::GetResult { op, .. } => vec![*op],
            Inst::GetDefiningOp { value, .. } => vec![*value],
            Inst::CheckOperationName { op, .. }
            | Inst::CheckOperandCount { op, .. }
            | Inst::CheckAttribute { op, .. }
            | Inst::CheckConstant { op, .. } => vec![*op],
            Inst::AreEqual { a, b } => vec![*a, *b],
            Inst::ApplyConstraint { args, .. } => args.clone(),
            Inst::RecordMatch { root, bindings, .. } => {
                let mut v = bindings.clone();
                v.push(*root);
                v
            }
            Inst::Choose { .. } | Inst::Finalize => Vec::new(),
        }
    }

    pub fn writes(&self) -> Option<Reg> {
        match self {
            Inst::GetOperand { dst, .. } | Inst::GetResult { dst, .. } | Inst::GetDefiningOp { dst, .. } => Some(*dst),
            _ => None,
        }
    }

    /// Checks constrain already-fetched values without fetching new ones.
    pub fn is_check(&self) -> bool {
        matches!(
            self,
            Inst::CheckOperationName { .. }
                | Inst::CheckOperandCount { .. }
                | Inst::CheckAttribute { .. }
                | Inst::CheckConstant { .. }
                | Inst::AreEqual { .. }
                | Inst::ApplyConstraint { .. }
        )
    }
}

impl fmt::Display for Inst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inst::GetOperand { op, index, dst } => write!(f, "r{dst} = get_operand r{op}, {index}"),
            Inst::GetResult { op, index, dst } => write!(f, "r{dst} = get_result r{op}, {index}"),
            Inst::GetDefiningOp { value, dst } => write!(f, "r{dst} = get_defining_op r{value}"),
            Inst::CheckOperationName { op, name } => write!(f, "check_operation_name r{op}, {name}"),
            Inst::CheckOperandCount { op, count } => write!(f, "check_operand_count r{op}, {count}"),
            Inst::CheckAttribute { op, key, value } => write!(f, "check_attribute r{op}, {key} = {value}"),
            Inst::CheckConstant { op, literal } => write!(f, "check_constant r{op}, {literal}"),
            Inst::AreEqual { a, b } => write!(f, "are_equal r{a}, r{b}"),
            Inst::ApplyConstraint { pred, args } => {
                write!(f, "apply_constraint {}", pred.name())?;
                for a in args {
                    write!(f, " r{a}")?;
                }
                Ok(())
            }
            Inst::Choose { branches } => {
                f.write_str("choose")?;
                for b in branches {
                    write!(f, " @{b}")?;
                }
                Ok(())
            }
            Inst::RecordMatch { pattern, root, bindings } => {
                write!(f, "record_match #{pattern} root=r{root}")?;
                for b in bindings {
                    write!(f, " r{b}")?;
                }
                Ok(())
            }
            Inst::Finalize => f.write_str("finalize"),
        }
    }
}

/// Compiled matcher for one or more patterns.
#[derive(Clone, Debug)]
pub struct MatcherProgram {
    pub insts: Vec<Inst>,
    pub num_regs: u32,
    /// `RecordMatch::pattern` indexes this list.
    pub patterns: Arc<Vec<Pattern>>,
}

impl MatcherProgram {
    pub fn count(&self, pred: impl Fn(&Inst) -> bool) -> usize {
        self.insts.iter().filter(|i| pred(i)).count()
    }

    /// Instruction sequences from entry to each `finalize`, following every
    /// `choose` branch.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((mut pc, mut path)) = stack.pop() {
            loop {
                let Some(inst) = self.insts.get(pc) else {
                    out.push(path);
                    break;
                };
                path.push(pc);
                match inst {
                    Inst::Finalize => {
                        out.push(path);
                        break;
                    }
                    Inst::Choose { branches } => {
                        for &b in branches.iter().rev() {
                            stack.push((b, path.clone()));
                        }
                        break;
                    }
                    _ => pc += 1,
                }
            }
        }
        out.sort();
        out
    }

    /// Every register read along a path is written earlier on it, and every
    /// path ends in `finalize`.
    pub fn validate(&self) -> Result<(), String> {
        for path in self.paths() {
            let mut defined = vec![false; self.num_regs.max(1) as usize];
            defined[0] = true;
            for &pc in &path {
                let inst = &self.insts[pc];
                for r in inst.reads() {
                    if !defined.get(r as usize).copied().unwrap_or(false) {
                        return Err(format!("instruction {pc} (`{inst}`) reads unset register r{r}"));
                    }
                }
                if let Some(w) = inst.writes() {
                    match defined.get_mut(w as usize) {
                        Some(d) => *d = true,
                        None => return Err(format!("instruction {pc} writes out-of-range register r{w}")),
                    }
                }
            }
            if path.last().map(|&pc| &self.insts[pc]) != Some(&Inst::Finalize) {
                return Err("a path does not end in finalize".into());
            }
        }
        Ok(())
    }
}

impl fmt::Display for MatcherProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, inst) in self.insts.iter().enumerate() {
            writeln!(f, "{i:4}: {inst}")?;
        }
        Ok(())
    }
}

/// Checks the eager-check property: along every path, once all registers a
/// check reads are available, the check precedes the next `get_defining_op`.
pub fn check_eager(p: &MatcherProgram) -> Result<(), String> {
    for path in p.paths() {
        let mut defined_at = vec![usize::MAX; p.num_regs.max(1) as usize];
        defined_at[0] = 0;
        for (k, &pc) in path.iter().enumerate() {
            if let Some(w) = p.insts[pc].writes() {
                defined_at[w as usize] = k;
            }
        }
        let gdo: Vec<usize> = path
            .iter()
            .enumerate()
            .filter(|(_, &pc)| matches!(p.insts[pc], Inst::GetDefiningOp { .. }))
            .map(|(k, _)| k)
            .collect();
        for (k, &pc) in path.iter().enumerate() {
            let inst = &p.insts[pc];
            if !inst.is_check() {
                continue;
            }
            let ready = inst.reads().iter().map(|&r| defined_at[r as usize]).max().unwrap_or(0);
            if let Some(&next) = gdo.iter().find(|&&g| g > ready) {
                if next < k {
                    return Err(format!(
                        "`{inst}` (at {pc}) is delayed past `{}` (at {})",
                        p.insts[path[next]], path[next]
                    ));
                }
            }
        }
    }
    Ok(())
}
