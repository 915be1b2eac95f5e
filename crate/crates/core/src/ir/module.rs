use std::sync::Arc;

use smallvec::SmallVec;

use super::{Attr, IrError, Registry, Type};
use crate::symbol::Symbol;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident, $prefix:literal) => {
        $(#[$m])*
        #[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub(crate) u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(/// Stable identity of an operation.
    OpId, "op");
id_type!(BlockId, "bb");
id_type!(RegionId, "region");
id_type!(/// Stable identity of an SSA value. Printed names are not identity.
    ValueId, "v");

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum RegionKind {
    /// Ordered execution; definitions must dominate uses.
    Cfg,
    /// Single block, no ordering requirement, cycles allowed.
    Graph,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValueDef {
    OpResult { op: OpId, index: u32 },
    BlockArg { block: BlockId, index: u32 },
}

/// One use of a value: operand `index` of `op`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Use {
    pub op: OpId,
    pub index: u32,
}

#[derive(Clone, Debug)]
pub(crate) struct OpData {
    pub name: Symbol,
    pub operands: SmallVec<[ValueId; 3]>,
    pub results: SmallVec<[ValueId; 1]>,
    pub attrs: Vec<(Symbol, Attr)>,
    pub regions: SmallVec<[RegionId; 1]>,
    pub parent: Option<BlockId>,
    pub prev: Option<OpId>,
    pub next: Option<OpId>,
    pub live: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct BlockData {
    pub args: Vec<ValueId>,
    pub first: Option<OpId>,
    pub last: Option<OpId>,
    pub len: usize,
    pub parent: Option<RegionId>,
}

#[derive(Clone, Debug)]
pub(crate) struct RegionData {
    pub kind: RegionKind,
    pub blocks: Vec<BlockId>,
    pub parent: Option<OpId>,
}

#[derive(Clone, Debug)]
pub(crate) struct ValueData {
    pub ty: Type,
    pub def: ValueDef,
    pub uses: Vec<Use>,
    pub name: Option<String>,
}

/// Where a newly built operation is placed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum InsertPoint {
    End(BlockId),
    Start(BlockId),
    Before(OpId),
    After(OpId),
}

/// An SSA module: arena storage for every operation, block, region and value,
/// rooted at a `builtin.module` operation.
#[derive(Clone)]
pub struct Module {
    registry: Arc<Registry>,
    pub(crate) ops: Vec<OpData>,
    pub(crate) blocks: Vec<BlockData>,
    pub(crate) regions: Vec<RegionData>,
    pub(crate) values: Vec<ValueData>,
    top: OpId,
}

impl std::fmt::Debug for Module {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&super::print_ir(self))
    }
}

impl Module {
    /// An empty `builtin.module` with a single graph-region body block.
    pub fn new(registry: Arc<Registry>) -> Module {
        let mut m = Module {
            registry,
            ops: Vec::new(),
            blocks: Vec::new(),
            regions: Vec::new(),
            values: Vec::new(),
            top: OpId(0),
        };
        let region = m.new_region(RegionKind::Graph);
        m.add_block(region, &[]);
        let top = m.create_op_unchecked(Symbol::new("builtin.module"), &[], Vec::new(), &[], vec![region]);
        m.top = top;
        m
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn top(&self) -> OpId {
        self.top
    }

    /// The single block of the top-level module body.
    pub fn body(&self) -> BlockId {
        let region = self.ops[self.top.index()].regions[0];
        self.regions[region.index()].blocks[0]
    }

    // ---- regions and blocks -------------------------------------------------

    /// A detached region, to be handed to an operation on creation.
    pub fn new_region(&mut self, kind: RegionKind) -> RegionId {
        let id = RegionId(self.regions.len() as u32);
        self.regions.push(RegionData {
            kind,
            blocks: Vec::new(),
            parent: None,
        });
        id
    }

    pub fn add_block(&mut self, region: RegionId, arg_types: &[Type]) -> BlockId {
        let id = BlockId(self.blocks.len() as u32);
        let args = arg_types
            .iter()
            .enumerate()
            .map(|(i, &ty)| {
                self.new_value(
                    ty,
                    ValueDef::BlockArg {
                        block: id,
                        index: i as u32,
                    },
                )
            })
            .collect();
        self.blocks.push(BlockData {
            args,
            first: None,
            last: None,
            len: 0,
            parent: Some(region),
        });
        self.regions[region.index()].blocks.push(id);
        id
    }

    pub fn region_kind(&self, region: RegionId) -> RegionKind {
        self.regions[region.index()].kind
    }

    pub fn region_blocks(&self, region: RegionId) -> &[BlockId] {
        &self.regions[region.index()].blocks
    }

    pub fn region_parent(&self, region: RegionId) -> Option<OpId> {
        self.regions[region.index()].parent
    }

    pub fn block_args(&self, block: BlockId) -> &[ValueId] {
        &self.blocks[block.index()].args
    }

    pub fn block_parent(&self, block: BlockId) -> Option<RegionId> {
        self.blocks[block.index()].parent
    }

    pub fn block_len(&self, block: BlockId) -> usize {
        self.blocks[block.index()].len
    }

    pub fn block_first(&self, block: BlockId) -> Option<OpId> {
        self.blocks[block.index()].first
    }

    pub fn block_last(&self, block: BlockId) -> Option<OpId> {
        self.blocks[block.index()].last
    }

    /// Operations of a block in order.
    pub fn block_ops(&self, block: BlockId) -> BlockOps<'_> {
        BlockOps {
            module: self,
            next: self.blocks[block.index()].first,
        }
    }

    // ---- values -------------------------------------------------------------

    fn new_value(&mut self, ty: Type, def: ValueDef) -> ValueId {
        let id = ValueId(self.values.len() as u32);
        self.values.push(ValueData {
            ty,
            def,
            uses: Vec::new(),
            name: None,
        });
        id
    }

    pub fn value_type(&self, v: ValueId) -> Type {
        self.values[v.index()].ty
    }

    pub fn value_def(&self, v: ValueId) -> ValueDef {
        self.values[v.index()].def
    }

    pub fn uses(&self, v: ValueId) -> &[Use] {
        &self.values[v.index()].uses
    }

    pub fn has_uses(&self, v: ValueId) -> bool {
        !self.values[v.index()].uses.is_empty()
    }

    /// The operation defining `v`, or `None` for block arguments.
    pub fn defining_op(&self, v: ValueId) -> Option<OpId> {
        match self.values[v.index()].def {
            ValueDef::OpResult { op, .. } => Some(op),
            ValueDef::BlockArg { .. } => None,
        }
    }

    /// The block in which `v` is defined.
    pub fn value_block(&self, v: ValueId) -> Option<BlockId> {
        match self.values[v.index()].def {
            ValueDef::OpResult { op, .. } => self.ops[op.index()].parent,
            ValueDef::BlockArg { block, .. } => Some(block),
        }
    }

    pub fn value_name(&self, v: ValueId) -> Option<&str> {
        self.values[v.index()].name.as_deref()
    }

    pub fn set_value_name(&mut self, v: ValueId, name: impl Into<String>) {
        self.values[v.index()].name = Some(name.into());
    }

    pub fn num_values(&self) -> usize {
        self.values.len()
    }

    // ---- operations ---------------------------------------------------------

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn is_live(&self, op: OpId) -> bool {
        self.ops[op.index()].live
    }

    pub fn op_name(&self, op: OpId) -> Symbol {
        self.ops[op.index()].name
    }

    /// Renames an operation in place. Callers are responsible for keeping the
    /// operation valid for its new definition.
    pub fn set_op_name(&mut self, op: OpId, name: Symbol) {
        self.ops[op.index()].name = name;
    }

    pub fn operands(&self, op: OpId) -> &[ValueId] {
        &self.ops[op.index()].operands
    }

    pub fn operand(&self, op: OpId, i: usize) -> ValueId {
        self.ops[op.index()].operands[i]
    }

    pub fn results(&self, op: OpId) -> &[ValueId] {
        &self.ops[op.index()].results
    }

    pub fn result(&self, op: OpId, i: usize) -> ValueId {
        self.ops[op.index()].results[i]
    }

    pub fn attrs(&self, op: OpId) -> &[(Symbol, Attr)] {
        &self.ops[op.index()].attrs
    }

    pub fn attr(&self, op: OpId, key: &str) -> Option<Attr> {
        let key = Symbol::new(key);
        self.attr_sym(op, key)
    }

    pub fn attr_sym(&self, op: OpId, key: Symbol) -> Option<Attr> {
        self.ops[op.index()]
            .attrs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, a)| *a)
    }

    pub fn set_attr(&mut self, op: OpId, key: &str, value: Attr) {
        let key = Symbol::new(key);
        let attrs = &mut self.ops[op.index()].attrs;
        match attrs.binary_search_by(|(k, _)| k.cmp(&key)) {
            Ok(i) => attrs[i].1 = value,
            Err(i) => attrs.insert(i, (key, value)),
        }
    }

    pub fn remove_attr(&mut self, op: OpId, key: &str) -> Option<Attr> {
        let key = Symbol::new(key);
        let attrs = &mut self.ops[op.index()].attrs;
        let i = attrs.iter().position(|(k, _)| *k == key)?;
        Some(attrs.remove(i).1)
    }

    pub fn regions(&self, op: OpId) -> &[RegionId] {
        &self.ops[op.index()].regions
    }

    pub fn parent_block(&self, op: OpId) -> Option<BlockId> {
        self.ops[op.index()].parent
    }

    /// The operation owning the region that contains `op`.
    pub fn parent_op(&self, op: OpId) -> Option<OpId> {
        let block = self.ops[op.index()].parent?;
        let region = self.blocks[block.index()].parent?;
        self.regions[region.index()].parent
    }

    /// The operation whose region (transitively) owns `block`.
    pub fn block_owner(&self, block: BlockId) -> Option<OpId> {
        let region = self.blocks[block.index()].parent?;
        self.regions[region.index()].parent
    }

    pub fn next_op(&self, op: OpId) -> Option<OpId> {
        self.ops[op.index()].next
    }

    pub fn prev_op(&self, op: OpId) -> Option<OpId> {
        self.ops[op.index()].prev
    }

    /// Creates a detached operation after checking it against its registered
    /// definition.
    pub fn create_op(
        &mut self,
        name: &str,
        operands: &[ValueId],
        attrs: Vec<(Symbol, Attr)>,
        result_types: &[Type],
        regions: Vec<RegionId>,
    ) -> Result<OpId, IrError> {
        let sym = Symbol::new(name);
        let def = self
            .registry
            .get(sym)
            .ok_or_else(|| IrError::UnknownOp(name.to_owned()))?;
        if !def.operands.accepts(operands.len()) {
            return Err(IrError::Arity {
                op: name.to_owned(),
                what: "operands",
                expected: def.operands.to_string(),
                found: operands.len(),
            });
        }
        if !def.results.accepts(result_types.len()) {
            return Err(IrError::Arity {
                op: name.to_owned(),
                what: "results",
                expected: def.results.to_string(),
                found: result_types.len(),
            });
        }
        if regions.len() != def.regions.len() {
            return Err(IrError::Arity {
                op: name.to_owned(),
                what: "regions",
                expected: def.regions.len().to_string(),
                found: regions.len(),
            });
        }
        let operand_types: SmallVec<[Type; 4]> = operands.iter().map(|&v| self.value_type(v)).collect();
        let mut attrs = attrs;
        attrs.sort_by(|a, b| a.0.cmp(&b.0));
        (def.type_check)(&operand_types, result_types, &attrs).map_err(|msg| IrError::TypeMismatch {
            op: name.to_owned(),
            msg,
        })?;
        Ok(self.create_op_unchecked(sym, operands, attrs, result_types, regions))
    }

    /// Creates a detached operation without consulting the registry.
    pub fn create_op_unchecked(
        &mut self,
        name: Symbol,
        operands: &[ValueId],
        mut attrs: Vec<(Symbol, Attr)>,
        result_types: &[Type],
        regions: Vec<RegionId>,
    ) -> OpId {
        attrs.sort_by(|a, b| a.0.cmp(&b.0));
        attrs.dedup_by(|a, b| a.0 == b.0);
        let id = OpId(self.ops.len() as u32);
        let results = result_types
            .iter()
            .enumerate()
            .map(|(i, &ty)| {
                self.new_value(
                    ty,
                    ValueDef::OpResult {
                        op: id,
                        index: i as u32,
                    },
                )
            })
            .collect();
        for &r in &regions {
            self.regions[r.index()].parent = Some(id);
        }
        self.ops.push(OpData {
            name,
            operands: operands.into(),
            results,
            attrs,
            regions: regions.into(),
            parent: None,
            prev: None,
            next: None,
            live: true,
        });
        for (i, &v) in operands.iter().enumerate() {
            self.values[v.index()].uses.push(Use {
                op: id,
                index: i as u32,
            });
        }
        id
    }

    /// Creates an operation and inserts it at `at`.
    pub fn build_op(
        &mut self,
        at: InsertPoint,
        name: &str,
        operands: &[ValueId],
        attrs: Vec<(Symbol, Attr)>,
        result_types: &[Type],
        regions: Vec<RegionId>,
    ) -> Result<OpId, IrError> {
        let op = self.create_op(name, operands, attrs, result_types, regions)?;
        self.insert_op(op, at);
        Ok(op)
    }

    /// Links a detached operation into a block.
    pub fn insert_op(&mut self, op: OpId, at: InsertPoint) {
        debug_assert!(self.ops[op.index()].parent.is_none(), "operation already linked");
        let (block, prev, next) = match at {
            InsertPoint::End(b) => (b, self.blocks[b.index()].last, None),
            InsertPoint::Start(b) => (b, None, self.blocks[b.index()].first),
            InsertPoint::Before(anchor) => {
                let b = self.ops[anchor.index()].parent.expect("anchor not linked");
                (b, self.ops[anchor.index()].prev, Some(anchor))
            }
            InsertPoint::After(anchor) => {
                let b = self.ops[anchor.index()].parent.expect("anchor not linked");
                (b, Some(anchor), self.ops[anchor.index()].next)
            }
        };
        {
            let data = &mut self.ops[op.index()];
            data.parent = Some(block);
            data.prev = prev;
            data.next = next;
        }
        match prev {
            Some(p) => self.ops[p.index()].next = Some(op),
            None => self.blocks[block.index()].first = Some(op),
        }
        match next {
            Some(n) => self.ops[n.index()].prev = Some(op),
            None => self.blocks[block.index()].last = Some(op),
        }
        self.blocks[block.index()].len += 1;
    }

    /// Unlinks an operation from its block, leaving it detached but alive.
    pub fn detach_op(&mut self, op: OpId) {
        let Some(block) = self.ops[op.index()].parent else {
            return;
        };
        let (prev, next) = {
            let d = &self.ops[op.index()];
            (d.prev, d.next)
        };
        match prev {
            Some(p) => self.ops[p.index()].next = next,
            None => self.blocks[block.index()].first = next,
        }
        match next {
            Some(n) => self.ops[n.index()].prev = prev,
            None => self.blocks[block.index()].last = prev,
        }
        self.blocks[block.index()].len -= 1;
        let d = &mut self.ops[op.index()];
        d.parent = None;
        d.prev = None;
        d.next = None;
    }

    pub fn move_op(&mut self, op: OpId, at: InsertPoint) {
        self.detach_op(op);
        self.insert_op(op, at);
    }

    fn remove_use(&mut self, v: ValueId, u: Use) {
        let uses = &mut self.values[v.index()].uses;
        if let Some(pos) = uses.iter().position(|&x| x == u) {
            uses.swap_remove(pos);
        }
    }

    pub fn set_operand(&mut self, op: OpId, i: usize, v: ValueId) {
        let old = self.ops[op.index()].operands[i];
        if old == v {
            return;
        }
        let u = Use {
            op,
            index: i as u32,
        };
        self.remove_use(old, u);
        self.ops[op.index()].operands[i] = v;
        self.values[v.index()].uses.push(u);
    }

    /// Replaces the whole operand list of `op`.
    pub fn set_operands(&mut self, op: OpId, operands: &[ValueId]) {
        let old: SmallVec<[ValueId; 4]> = self.ops[op.index()].operands.iter().copied().collect();
        for (i, v) in old.into_iter().enumerate() {
            self.remove_use(
                v,
                Use {
                    op,
                    index: i as u32,
                },
            );
        }
        self.ops[op.index()].operands = operands.into();
        for (i, &v) in operands.iter().enumerate() {
            self.values[v.index()].uses.push(Use {
                op,
                index: i as u32,
            });
        }
    }

    pub fn push_operand(&mut self, op: OpId, v: ValueId) {
        let index = self.ops[op.index()].operands.len() as u32;
        self.ops[op.index()].operands.push(v);
        self.values[v.index()].uses.push(Use { op, index });
    }

    /// Removes operand `i`, shifting later operands down.
    pub fn remove_operand(&mut self, op: OpId, i: usize) {
        let mut operands: SmallVec<[ValueId; 4]> = self.ops[op.index()].operands.iter().copied().collect();
        operands.remove(i);
        self.set_operands(op, &operands);
    }

    /// Rewires every use of `old` to `new`.
    pub fn replace_all_uses(&mut self, old: ValueId, new: ValueId) -> Result<(), IrError> {
        if old == new {
            return Ok(());
        }
        let (to, tn) = (self.value_type(old), self.value_type(new));
        if to != tn {
            return Err(IrError::ReplaceTypeMismatch { old: to, new: tn });
        }
        let uses = std::mem::take(&mut self.values[old.index()].uses);
        for u in &uses {
            self.ops[u.op.index()].operands[u.index as usize] = new;
        }
        self.values[new.index()].uses.extend(uses);
        Ok(())
    }

    /// Rewires the uses of `old` accepted by `pred`.
    pub fn replace_uses_if(&mut self, old: ValueId, new: ValueId, mut pred: impl FnMut(Use) -> bool) {
        let uses = std::mem::take(&mut self.values[old.index()].uses);
        let (moved, kept): (Vec<Use>, Vec<Use>) = uses.into_iter().partition(|&u| pred(u));
        for u in &moved {
            self.ops[u.op.index()].operands[u.index as usize] = new;
        }
        self.values[old.index()].uses = kept;
        self.values[new.index()].uses.extend(moved);
    }

    /// Erases an operation whose results are all unused, including any
    /// operations nested in its regions.
    pub fn erase_op(&mut self, op: OpId) -> Result<(), IrError> {
        for &r in self.results(op) {
            if self.has_uses(r) {
                let users = self.uses(r).iter().filter(|u| !self.is_nested_in(u.op, op)).count();
                if users > 0 {
                    return Err(IrError::LiveUses {
                        op: self.op_name(op).to_string(),
                        uses: users,
                    });
                }
            }
        }
        self.detach_op(op);
        self.drop_op(op);
        Ok(())
    }

    fn drop_op(&mut self, op: OpId) {
        let regions: SmallVec<[RegionId; 1]> = self.ops[op.index()].regions.clone();
        for r in regions {
            let blocks = self.regions[r.index()].blocks.clone();
            for b in blocks {
                let nested: Vec<OpId> = self.block_ops(b).collect();
                for n in nested.into_iter().rev() {
                    self.detach_op(n);
                    self.drop_op(n);
                }
            }
        }
        let operands: SmallVec<[ValueId; 4]> = self.ops[op.index()].operands.iter().copied().collect();
        for (i, v) in operands.into_iter().enumerate() {
            self.remove_use(
                v,
                Use {
                    op,
                    index: i as u32,
                },
            );
        }
        let d = &mut self.ops[op.index()];
        d.operands.clear();
        d.live = false;
    }

    /// Whether `op` is `ancestor` or nested inside one of its regions.
    pub fn is_nested_in(&self, op: OpId, ancestor: OpId) -> bool {
        let mut cur = Some(op);
        while let Some(o) = cur {
            if o == ancestor {
                return true;
            }
            cur = self.parent_op(o);
        }
        false
    }

    /// Pre-order walk over every live operation below (and including) `root`.
    pub fn walk_from(&self, root: OpId, f: &mut impl FnMut(OpId)) {
        f(root);
        for &r in self.regions(root) {
            for &b in self.region_blocks(r) {
                let mut cur = self.block_first(b);
                while let Some(op) = cur {
                    cur = self.next_op(op);
                    self.walk_from(op, f);
                }
            }
        }
    }

    /// All live operations in pre-order.
    pub fn walk(&self) -> Vec<OpId> {
        let mut out = Vec::new();
        self.walk_from(self.top, &mut |op| out.push(op));
        out
    }

    /// Top-level operations with the given name (e.g. every `func.func`).
    pub fn ops_named(&self, name: &str) -> Vec<OpId> {
        let sym = Symbol::new(name);
        self.walk().into_iter().filter(|&op| self.op_name(op) == sym).collect()
    }

    /// Finds a `func.func` by its symbol name.
    pub fn lookup_func(&self, name: &str) -> Option<OpId> {
        self.ops_named("func.func")
            .into_iter()
            .find(|&f| self.attr(f, "sym_name").and_then(|a| a.as_str()) == Some(name))
    }

    /// The entry block of the first region of `op`.
    pub fn entry_block(&self, op: OpId) -> Option<BlockId> {
        let r = *self.regions(op).first()?;
        self.region_blocks(r).first().copied()
    }

    /// Checks that every recorded use matches an operand slot and vice versa.
    pub fn check_use_def(&self) -> Result<(), String> {
        for op in self.walk() {
            for (i, &v) in self.operands(op).iter().enumerate() {
                let u = Use {
                    op,
                    index: i as u32,
                };
                if !self.uses(v).contains(&u) {
                    return Err(format!("{op:?} operand {i} ({v:?}) missing from use list"));
                }
            }
        }
        for (vi, data) in self.values.iter().enumerate() {
            for u in &data.uses {
                let od = &self.ops[u.op.index()];
                if !od.live || od.operands.get(u.index as usize).map(|v| v.index()) != Some(vi) {
                    return Err(format!("stale use {u:?} recorded on v{vi}"));
                }
            }
        }
        Ok(())
    }
}

pub struct BlockOps<'a> {
    module: &'a Module,
    next: Option<OpId>,
}

impl Iterator for BlockOps<'_> {
    type Item = OpId;

    fn next(&mut self) -> Option<OpId> {
        let cur = self.next?;
        self.next = self.module.ops[cur.index()].next;
        Some(cur)
    }
}
