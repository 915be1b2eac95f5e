//! Built-in dialects: `func`, `arith`, `math`, the `cplx` toy dialect and
//! the `eqsat` e-graph dialect.

mod fold;
mod insert;
mod interp;

use std::sync::{Arc, OnceLock};

use crate::ir::{Arity, Attr, IrError, Module, OpDefinition, OpId, RegionKind, Registry, Traits, Type, ValueDef};
use crate::symbol::Symbol;

pub use insert::insert_eclasses;
pub use interp::{eval_op, interpret_func, Scalar};

pub const ECLASS: &str = "eqsat.eclass";
pub const CONST_ECLASS: &str = "eqsat.const_eclass";
pub const EGRAPH: &str = "eqsat.egraph";
pub const YIELD: &str = "eqsat.yield";

/// A shared registry with every built-in dialect.
pub fn builtin_registry() -> Arc<Registry> {
    static REG: OnceLock<Arc<Registry>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r = Registry::new();
        register_builtin_dialects(&mut r).expect("built-in dialects register once");
        Arc::new(r)
    })
    .clone()
}

fn same_types(ins: &[Type], outs: &[Type], want: fn(Type) -> bool, kind: &str) -> Result<(), String> {
    let Some(&first) = ins.first().or(outs.first()) else {
        return Ok(());
    };
    if !want(first) {
        return Err(format!("expected {kind} operands, found {first}"));
    }
    if ins.iter().chain(outs).any(|&t| t != first) {
        return Err("operand and result types must match".into());
    }
    Ok(())
}

fn int_op(ins: &[Type], outs: &[Type], _: &[(Symbol, Attr)]) -> Result<(), String> {
    same_types(ins, outs, Type::is_integer, "integer")
}

fn float_op(ins: &[Type], outs: &[Type], _: &[(Symbol, Attr)]) -> Result<(), String> {
    same_types(ins, outs, Type::is_float, "f64")
}

fn any_same(ins: &[Type], outs: &[Type], _: &[(Symbol, Attr)]) -> Result<(), String> {
    same_types(ins, outs, |_| true, "matching")
}

fn fixed(ins: &[Type], outs: &[Type], want_in: &[Type], want_out: &[Type]) -> Result<(), String> {
    if ins != want_in || outs != want_out {
        return Err(format!("expected ({}) -> ({})", join(want_in), join(want_out)));
    }
    Ok(())
}

fn join(ts: &[Type]) -> String {
    ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

fn constant_types(_: &[Type], outs: &[Type], attrs: &[(Symbol, Attr)]) -> Result<(), String> {
    let value = attrs
        .iter()
        .find(|(k, _)| k.as_str() == "value")
        .map(|(_, v)| *v)
        .ok_or("missing `value` attribute")?;
    match value.value_type() {
        Some(t) if outs == [t] => Ok(()),
        _ => Err(format!("value {value} does not match result type {}", join(outs))),
    }
}

fn const_eclass_types(ins: &[Type], outs: &[Type], attrs: &[(Symbol, Attr)]) -> Result<(), String> {
    if !attrs.iter().any(|(k, _)| k.as_str() == "cst") {
        return Err("missing `cst` attribute".into());
    }
    any_same(ins, outs, attrs)
}

fn in_egraph(m: &Module, op: OpId) -> Result<(), String> {
    match m.parent_op(op) {
        Some(p) if m.op_name(p).as_str() == EGRAPH => Ok(()),
        _ => Err(format!("`{}` must be nested directly in an `{EGRAPH}`", m.op_name(op))),
    }
}

fn verify_const_eclass(m: &Module, op: OpId) -> Result<(), String> {
    in_egraph(m, op)?;
    let cst = m.attr(op, "cst").ok_or("missing `cst` attribute")?;
    let def = m.defining_op(m.operand(op, 0)).ok_or("operand must be defined by a constant")?;
    if !m.has_trait(def, Traits::CONSTANT) {
        return Err("operand must be defined by a constant".into());
    }
    if m.attr(def, "value") != Some(cst) {
        return Err("`cst` differs from the wrapped constant".into());
    }
    Ok(())
}

fn verify_egraph(m: &Module, op: OpId) -> Result<(), String> {
    let block = m.entry_block(op).ok_or("egraph needs a body")?;
    let y = m.block_last(block).ok_or("egraph body must end in a yield")?;
    if m.op_name(y).as_str() != YIELD {
        return Err("egraph body must end in a yield".into());
    }
    let yielded: Vec<Type> = m.operands(y).iter().map(|&v| m.value_type(v)).collect();
    let results: Vec<Type> = m.results(op).iter().map(|&v| m.value_type(v)).collect();
    if yielded != results {
        return Err("egraph result types must match the yielded types".into());
    }
    Ok(())
}

fn verify_yield(m: &Module, op: OpId) -> Result<(), String> {
    in_egraph(m, op).map_err(|_| "yield must terminate an egraph".to_string())?;
    for &v in m.operands(op) {
        let ok = matches!(m.value_def(v), ValueDef::OpResult { op: d, .. }
            if matches!(m.op_name(d).as_str(), ECLASS | CONST_ECLASS));
        if !ok {
            return Err("yield operands must be e-class results".into());
        }
    }
    Ok(())
}

fn verify_return(m: &Module, op: OpId) -> Result<(), String> {
    let Some(f) = m.parent_op(op) else {
        return Err("return outside a function".into());
    };
    if m.op_name(f).as_str() != "func.func" {
        return Err("return must terminate a function".into());
    }
    let want = crate::ir::func_result_types(m, f);
    let got: Vec<Type> = m.operands(op).iter().map(|&v| m.value_type(v)).collect();
    if want != got {
        return Err(format!("returns ({}) but the function declares ({})", join(&got), join(&want)));
    }
    Ok(())
}

pub fn register_builtin_dialects(r: &mut Registry) -> Result<(), IrError> {
    use Arity::*;
    let pure = Traits::PURE;
    let comm = Traits::PURE | Traits::COMMUTATIVE;

    r.register(OpDefinition::new("func.func", Exactly(0), Exactly(0)).regions(vec![RegionKind::Cfg]))?;
    r.register(OpDefinition::new("func.return", Any, Exactly(0)).traits(Traits::TERMINATOR).verifier(verify_return))?;

    r.register(
        OpDefinition::new("arith.constant", Exactly(0), Exactly(1))
            .traits(pure | Traits::CONSTANT)
            .type_check(constant_types)
            .fold(fold::constant),
    )?;
    for (name, traits, hook) in [
        ("arith.addi", comm, fold::addi as crate::ir::FoldHook),
        ("arith.subi", pure, fold::subi),
        ("arith.muli", comm, fold::muli),
        ("arith.shli", pure, fold::shli),
    ] {
        r.register(OpDefinition::new(name, Exactly(2), Exactly(1)).traits(traits).type_check(int_op).fold(hook))?;
    }
    for (name, traits, hook) in [
        ("arith.addf", comm, fold::addf as crate::ir::FoldHook),
        ("arith.subf", pure, fold::subf),
        ("arith.mulf", comm, fold::mulf),
        ("arith.divf", pure, fold::divf),
        ("math.powf", pure, fold::powf),
    ] {
        r.register(OpDefinition::new(name, Exactly(2), Exactly(1)).traits(traits).type_check(float_op).fold(hook))?;
    }
    for (name, hook) in [
        ("arith.negf", fold::negf as crate::ir::FoldHook),
        ("math.sqrt", fold::sqrt),
        ("math.log", fold::log),
        ("math.exp", fold::exp),
        ("math.sin", fold::sin),
        ("math.cos", fold::cos),
        ("math.absf", fold::absf),
    ] {
        r.register(OpDefinition::new(name, Exactly(1), Exactly(1)).traits(pure).type_check(float_op).fold(hook))?;
    }

    r.register(
        OpDefinition::new("cplx.create", Exactly(2), Exactly(1))
            .traits(pure)
            .type_check(|i, o, _| fixed(i, o, &[Type::F64, Type::F64], &[Type::Cplx])),
    )?;
    for name in ["cplx.re", "cplx.im", "cplx.abs"] {
        r.register(
            OpDefinition::new(name, Exactly(1), Exactly(1))
                .traits(pure)
                .type_check(|i, o, _| fixed(i, o, &[Type::Cplx], &[Type::F64])),
        )?;
    }
    r.register(
        OpDefinition::new("cplx.div", Exactly(2), Exactly(1))
            .traits(pure)
            .type_check(|i, o, _| fixed(i, o, &[Type::Cplx, Type::Cplx], &[Type::Cplx])),
    )?;

    r.register(
        OpDefinition::new(ECLASS, AtLeast(1), Exactly(1))
            .traits(pure)
            .type_check(any_same)
            .verifier(in_egraph),
    )?;
    r.register(
        OpDefinition::new(CONST_ECLASS, Exactly(1), Exactly(1))
            .traits(pure)
            .type_check(const_eclass_types)
            .verifier(verify_const_eclass),
    )?;
    r.register(
        OpDefinition::new(EGRAPH, Exactly(0), Any)
            .traits(pure)
            .regions(vec![RegionKind::Graph])
            .verifier(verify_egraph),
    )?;
    r.register(OpDefinition::new(YIELD, Any, Exactly(0)).traits(Traits::TERMINATOR).verifier(verify_yield))?;

    r.register(OpDefinition::new("debug.print", Exactly(1), Exactly(0)))?;
    Ok(())
}

/// Result type of a single-result op applied to `operands`, found by probing
/// the registered type check. The first operand's type is tried first.
pub fn infer_result_type(reg: &Registry, name: Symbol, operands: &[Type]) -> Option<Type> {
    let def = reg.get(name)?;
    let mut candidates = Vec::with_capacity(5);
    candidates.extend(operands.first().copied());
    candidates.extend([Type::F64, Type::I64, Type::Cplx, Type::I1]);
    candidates.into_iter().find(|&t| {
        def.operands.accepts(operands.len()) && (def.type_check)(operands, &[t], &[]).is_ok()
    })
}

/// Whether `name` belongs to the e-graph bookkeeping dialect.
pub fn is_eqsat(name: Symbol) -> bool {
    name.dialect() == "eqsat"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_ir, print_ir, verify, InsertPoint};

    #[test]
    fn registry_traits() {
        let r = builtin_registry();
        let muli = r.lookup("arith.muli").unwrap();
        assert!(muli.has(Traits::PURE | Traits::COMMUTATIVE));
        assert!(r.lookup(YIELD).unwrap().has(Traits::TERMINATOR));
        let abs = r.lookup("cplx.abs").unwrap();
        assert_eq!(abs.operands, Arity::Exactly(1));
        assert!((abs.type_check)(&[Type::Cplx], &[Type::F64], &[]).is_ok());
        assert!((abs.type_check)(&[Type::F64], &[Type::F64], &[]).is_err());
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut r = Registry::new();
        register_builtin_dialects(&mut r).unwrap();
        assert!(matches!(register_builtin_dialects(&mut r), Err(IrError::DuplicateOp(_))));
    }

    #[test]
    fn build_constant_and_self_use() {
        let mut m = Module::new(builtin_registry());
        let body = m.body();
        let c = m
            .build_op(InsertPoint::End(body), "arith.constant", &[], vec![(Symbol::new("value"), Attr::i64(2))], &[Type::I64], vec![])
            .unwrap();
        let v = m.result(c, 0);
        assert_eq!(m.value_type(v), Type::I64);
        let mul = m.build_op(InsertPoint::End(body), "arith.muli", &[v, v], vec![], &[Type::I64], vec![]).unwrap();
        assert_eq!(m.uses(v).len(), 2);
        assert!(m.build_op(InsertPoint::End(body), "arith.bogus", &[], vec![], &[], vec![]).is_err());
        let f = m.build_op(InsertPoint::End(body), "arith.constant", &[], vec![(Symbol::new("value"), Attr::f64(1.0))], &[Type::F64], vec![]).unwrap();
        let fv = m.result(f, 0);
        assert!(m.build_op(InsertPoint::End(body), "arith.muli", &[v, fv], vec![], &[Type::I64], vec![]).is_err());
        assert!(m.erase_op(c).is_err());
        m.erase_op(mul).unwrap();
        assert!(!m.has_uses(v));
        m.erase_op(c).unwrap();
        m.check_use_def().unwrap();
    }

    #[test]
    fn yield_is_accepted_as_egraph_terminator() {
        let text = "func.func @f(%a : i64) -> i64 {\n  %g = eqsat.egraph -> i64 {\n    %c = eqsat.eclass %a : i64\n    eqsat.yield %c : i64\n  }\n  func.return %g : i64\n}\n";
        let m = parse_ir(text, builtin_registry()).unwrap();
        assert!(verify(&m).is_empty(), "{:?}", verify(&m));
        assert_eq!(print_ir(&m), format!("builtin.module {{\n  {}}}\n", text.replace('\n', "\n  ").trim_end_matches("  ")));
    }
}
