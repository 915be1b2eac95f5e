use std::collections::{HashMap, HashSet};

use super::{CONST_ECLASS, ECLASS, EGRAPH};

use crate::ir::{Attr, Attribute, Module, OpId, ValueId};
use crate::symbol::Symbol;

/// A runtime value of the reference interpreter.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Scalar {
    Int(i64),
    F64(f64),
    Cplx(f64, f64),
}

impl Scalar {
    /// Bitwise equality; NaNs compare equal to identical NaNs.
    pub fn same(self, other: Scalar) -> bool {
        match (self, other) {
            (Scalar::Int(a), Scalar::Int(b)) => a == b,
            (Scalar::F64(a), Scalar::F64(b)) => a.to_bits() == b.to_bits(),
            (Scalar::Cplx(a, b), Scalar::Cplx(c, d)) => a.to_bits() == c.to_bits() && b.to_bits() == d.to_bits(),
            _ => false,
        }
    }

    pub fn from_attr(a: Attr) -> Option<Scalar> {
        match a.get() {
            Attribute::Int { value, .. } => Some(Scalar::Int(*value)),
            Attribute::Float { bits, .. } => Some(Scalar::F64(f64::from_bits(*bits))),
            _ => None,
        }
    }
}

fn int(s: Scalar) -> Result<i64, String> {
    match s {
        Scalar::Int(v) => Ok(v),
        other => Err(format!("expected an integer, found {other:?}")),
    }
}

fn float(s: Scalar) -> Result<f64, String> {
    match s {
        Scalar::F64(v) => Ok(v),
        other => Err(format!("expected a float, found {other:?}")),
    }
}

fn cplx(s: Scalar) -> Result<(f64, f64), String> {
    match s {
        Scalar::Cplx(a, b) => Ok((a, b)),
        other => Err(format!("expected a complex value, found {other:?}")),
    }
}

/// Evaluates one pure operation on concrete operands.
pub fn eval_op(name: &str, attrs: &[(Symbol, Attr)], args: &[Scalar]) -> Result<Scalar, String> {
    let a = |i: usize| args.get(i).copied().ok_or_else(|| format!("`{name}` is missing operand {i}"));
    Ok(match name {
        "arith.constant" => {
            let v = attrs
                .iter()
                .find(|(k, _)| k.as_str() == "value")
                .and_then(|(_, v)| Scalar::from_attr(*v))
                .ok_or("constant without a numeric value")?;
            v
        }
        "arith.addi" => Scalar::Int(int(a(0)?)?.wrapping_add(int(a(1)?)?)),
        "arith.subi" => Scalar::Int(int(a(0)?)?.wrapping_sub(int(a(1)?)?)),
        "arith.muli" => Scalar::Int(int(a(0)?)?.wrapping_mul(int(a(1)?)?)),
        "arith.shli" => Scalar::Int(int(a(0)?)?.wrapping_shl(int(a(1)?)? as u32)),
        "arith.addf" => Scalar::F64(float(a(0)?)? + float(a(1)?)?),
        "arith.subf" => Scalar::F64(float(a(0)?)? - float(a(1)?)?),
        "arith.mulf" => Scalar::F64(float(a(0)?)? * float(a(1)?)?),
        "arith.divf" => Scalar::F64(float(a(0)?)? / float(a(1)?)?),
        "arith.negf" => Scalar::F64(-float(a(0)?)?),
        "math.powf" => Scalar::F64(float(a(0)?)?.powf(float(a(1)?)?)),
        "math.sqrt" => Scalar::F64(float(a(0)?)?.sqrt()),
        "math.log" => Scalar::F64(float(a(0)?)?.ln()),
        "math.exp" => Scalar::F64(float(a(0)?)?.exp()),
        "math.sin" => Scalar::F64(float(a(0)?)?.sin()),
        "math.cos" => Scalar::F64(float(a(0)?)?.cos()),
        "math.absf" => Scalar::F64(float(a(0)?)?.abs()),
        "cplx.create" => Scalar::Cplx(float(a(0)?)?, float(a(1)?)?),
        "cplx.re" => Scalar::F64(cplx(a(0)?)?.0),
        "cplx.im" => Scalar::F64(cplx(a(0)?)?.1),
        "cplx.abs" => {
            let (x, y) = cplx(a(0)?)?;
            Scalar::F64((x * x + y * y).sqrt())
        }
        "cplx.div" => {
            let ((p, q), (r, s)) = (cplx(a(0)?)?, cplx(a(1)?)?);
            let d = r * r + s * s;
            Scalar::Cplx((p * r + q * s) / d, (q * r - p * s) / d)
        }
        "eqsat.eclass" | "eqsat.const_eclass" => a(0)?,
        other => return Err(format!("cannot interpret `{other}`")),
    })
}

/// Evaluates a value inside a graph region on demand. A class evaluates
/// through its first member that does not depend on itself.
fn eval_graph_value(
    m: &Module,
    v: ValueId,
    env: &mut HashMap<ValueId, Scalar>,
    open: &mut HashSet<ValueId>,
) -> Result<Scalar, String> {
    if let Some(&s) = env.get(&v) {
        return Ok(s);
    }
    let op = m.defining_op(v).ok_or_else(|| format!("{v:?} has no value"))?;
    if !open.insert(v) {
        return Err(format!("{v:?} depends on itself"));
    }
    let name = m.op_name(op);
    let out = if name.as_str() == ECLASS || name.as_str() == CONST_ECLASS {
        let mut found = Err(format!("{v:?} has no acyclic member"));
        for &x in m.operands(op) {
            if let Ok(s) = eval_graph_value(m, x, env, open) {
                found = Ok(s);
                break;
            }
        }
        found
    } else {
        m.operands(op)
            .iter()
            .map(|&x| eval_graph_value(m, x, env, open))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|ins| eval_op(name.as_str(), m.attrs(op), &ins))
    };
    open.remove(&v);
    let out = out?;
    env.insert(v, out);
    Ok(out)
}

/// Runs a straight-line function on concrete arguments. An `eqsat.egraph`
/// is evaluated through the members of its classes.
pub fn interpret_func(m: &Module, func: OpId, args: &[Scalar]) -> Result<Vec<Scalar>, String> {
    let entry = m.entry_block(func).ok_or("function has no body")?;
    let params = m.block_args(entry);
    if params.len() != args.len() {
        return Err(format!("expected {} arguments, got {}", params.len(), args.len()));
    }
    let mut env: HashMap<ValueId, Scalar> = params.iter().copied().zip(args.iter().copied()).collect();
    for op in m.block_ops(entry) {
        let ins: Vec<Scalar> = m
            .operands(op)
            .iter()
            .map(|v| env.get(v).copied().ok_or_else(|| format!("{v:?} used before definition")))
            .collect::<Result<_, _>>()?;
        let name = m.op_name(op);
        if name.as_str() == "func.return" {
            return Ok(ins);
        }
        if name.as_str() == EGRAPH {
            let body = m.entry_block(op).ok_or("egraph has no body")?;
            let y = m.block_last(body).ok_or("egraph has no yield")?;
            let mut open = HashSet::new();
            for (i, &v) in m.operands(y).iter().enumerate() {
                let out = eval_graph_value(m, v, &mut env, &mut open)?;
                env.insert(m.result(op, i), out);
            }
            continue;
        }
        if !m.regions(op).is_empty() {
            return Err(format!("cannot interpret `{name}` with regions"));
        }
        let out = eval_op(name.as_str(), m.attrs(op), &ins)?;
        env.insert(m.result(op, 0), out);
    }
    Err("function body has no return".into())
}
