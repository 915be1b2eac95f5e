//! SSA IR: operations, values, blocks and regions with use-def chains, a
//! verifier and a textual format.

mod attr;
mod module;
mod parse;
mod print;
mod verify;

use std::collections::HashMap;
use std::fmt;

use bitflags::bitflags;
use thiserror::Error;

pub use attr::{Attr, Attribute, Type};
pub use attr::format_f64;
pub use module::{BlockId, BlockOps, InsertPoint, Module, OpId, RegionId, RegionKind, Use, ValueDef, ValueId};
pub use parse::{parse_ir, parse_ir_with, ParseOptions};
pub use print::{func_result_types, print_ir, value_names};
pub use verify::{verify, Diagnostic};

use crate::symbol::Symbol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrError {
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("`{op}` expects {expected} {what}, found {found}")]
    Arity {
        op: String,
        what: &'static str,
        expected: String,
        found: usize,
    },
    #[error("`{op}`: {msg}")]
    TypeMismatch { op: String, msg: String },
    #[error("cannot replace a value of type {old} with one of type {new}")]
    ReplaceTypeMismatch { old: Type, new: Type },
    #[error("cannot erase `{op}`: {uses} live use(s) remain")]
    LiveUses { op: String, uses: usize },
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("operation `{0}` registered twice")]
    DuplicateOp(String),
    #[error("{0}")]
    Invalid(String),
}

bitflags! {
    #[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
    pub struct Traits: u8 {
        const PURE = 1;
        const TERMINATOR = 1 << 1;
        const CONSTANT = 1 << 2;
        const COMMUTATIVE = 1 << 3;
        /// Regions of this op need not end in a terminator.
        const NO_TERMINATOR = 1 << 4;
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
    Any,
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
            Arity::Any => true,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
            Arity::Any => f.write_str("any number of"),
        }
    }
}

pub type TypeCheck = fn(&[Type], &[Type], &[(Symbol, Attr)]) -> Result<(), String>;
pub type OpVerifier = fn(&Module, OpId) -> Result<(), String>;
/// Folds an op given its attributes and one constant per operand.
pub type FoldHook = fn(&[(Symbol, Attr)], &[Attr]) -> Option<Attr>;

fn accept_any(_: &[Type], _: &[Type], _: &[(Symbol, Attr)]) -> Result<(), String> {
    Ok(())
}

#[derive(Clone)]
pub struct OpDefinition {
    pub name: Symbol,
    pub operands: Arity,
    pub results: Arity,
    pub regions: Vec<RegionKind>,
    pub traits: Traits,
    pub type_check: TypeCheck,
    pub verifier: Option<OpVerifier>,
    pub fold: Option<FoldHook>,
}

impl OpDefinition {
    pub fn new(name: &str, operands: Arity, results: Arity) -> OpDefinition {
        OpDefinition {
            name: Symbol::new(name),
            operands,
            results,
            regions: Vec::new(),
            traits: Traits::empty(),
            type_check: accept_any,
            verifier: None,
            fold: None,
        }
    }

    pub fn traits(mut self, traits: Traits) -> Self {
        self.traits = traits;
        self
    }

    pub fn regions(mut self, regions: Vec<RegionKind>) -> Self {
        self.regions = regions;
        self
    }

    pub fn type_check(mut self, check: TypeCheck) -> Self {
        self.type_check = check;
        self
    }

    pub fn verifier(mut self, v: OpVerifier) -> Self {
        self.verifier = Some(v);
        self
    }

    pub fn fold(mut self, f: FoldHook) -> Self {
        self.fold = Some(f);
        self
    }

    pub fn has(&self, t: Traits) -> bool {
        self.traits.contains(t)
    }
}

impl fmt::Debug for OpDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpDefinition")
            .field("name", &self.name)
            .field("operands", &self.operands)
            .field("results", &self.results)
            .field("traits", &self.traits)
            .finish()
    }
}

/// Operation definitions keyed by name. Immutable once shared.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    defs: HashMap<Symbol, OpDefinition>,
}

impl Registry {
    pub fn new() -> Registry {
        let mut r = Registry::default();
        r.register(
            OpDefinition::new("builtin.module", Arity::Exactly(0), Arity::Exactly(0))
                .regions(vec![RegionKind::Graph])
                .traits(Traits::NO_TERMINATOR),
        )
        .expect("fresh registry");
        r
    }

    pub fn register(&mut self, def: OpDefinition) -> Result<(), IrError> {
        if self.defs.contains_key(&def.name) {
            return Err(IrError::DuplicateOp(def.name.to_string()));
        }
        self.defs.insert(def.name, def);
        Ok(())
    }

    pub fn get(&self, name: Symbol) -> Option<&OpDefinition> {
        self.defs.get(&name)
    }

    pub fn lookup(&self, name: &str) -> Option<&OpDefinition> {
        self.get(Symbol::new(name))
    }

    pub fn has_trait(&self, name: Symbol, t: Traits) -> bool {
        self.get(name).is_some_and(|d| d.has(t))
    }

    /// Sorted names of every registered operation.
    pub fn names(&self) -> Vec<Symbol> {
        let mut v: Vec<Symbol> = self.defs.keys().copied().collect();
        v.sort();
        v
    }
}

impl Module {
    pub fn def(&self, op: OpId) -> Option<&OpDefinition> {
        self.registry().get(self.op_name(op))
    }

    pub fn has_trait(&self, op: OpId, t: Traits) -> bool {
        self.registry().has_trait(self.op_name(op), t)
    }
}

/// Runs the fold hook of `op` when every operand is a known constant.
pub fn fold(module: &Module, op: OpId, constants: &[Option<Attr>]) -> Option<Attr> {
    let def = module.def(op)?;
    let hook = def.fold?;
    let operands: Option<Vec<Attr>> = constants.iter().copied().collect();
    hook(module.attrs(op), &operands?)
}
