//! FPCore front end: the arithmetic subset Herbie benchmarks use, mapped
//! one operator to one IR operation.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write};

use eqsat::dialects::builtin_registry;
use eqsat::ir::{format_f64, parse_ir, Attribute, Module, OpId, ValueDef, ValueId};
use eqsat::sexp::{read_all, Sexp};

use crate::FpError;

/// Inputs without a precondition bound are drawn from `[-BOUND, BOUND]`.
pub const BOUND: f64 = 1e9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum FpOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sqrt,
    Pow,
    Log,
    Exp,
    Sin,
    Cos,
    Fabs,
}

const OPS: [(FpOp, &str, &str, usize); 12] = [
    (FpOp::Add, "+", "arith.addf", 2),
    (FpOp::Sub, "-", "arith.subf", 2),
    (FpOp::Mul, "*", "arith.mulf", 2),
    (FpOp::Div, "/", "arith.divf", 2),
    (FpOp::Neg, "neg", "arith.negf", 1),
    (FpOp::Sqrt, "sqrt", "math.sqrt", 1),
    (FpOp::Pow, "pow", "math.powf", 2),
    (FpOp::Log, "log", "math.log", 1),
    (FpOp::Exp, "exp", "math.exp", 1),
    (FpOp::Sin, "sin", "math.sin", 1),
    (FpOp::Cos, "cos", "math.cos", 1),
    (FpOp::Fabs, "fabs", "math.absf", 1),
];

/// FPCore operators that exist but have no IR counterpart here.
const KNOWN_UNSUPPORTED: &[&str] = &[
    "hypot", "fma", "tan", "atan", "atan2", "asin", "acos", "sinh", "cosh", "tanh", "cbrt", "expm1", "log1p", "log2",
    "log10", "exp2", "fmin", "fmax", "fmod", "remainder", "floor", "ceil", "round", "trunc", "copysign", "if",
    "while", "while*", "erf", "erfc", "lgamma", "tgamma",
];

impl FpOp {
    pub fn symbol(self) -> &'static str {
        OPS.iter().find(|o| o.0 == self).unwrap().1
    }

    pub fn ir_name(self) -> &'static str {
        OPS.iter().find(|o| o.0 == self).unwrap().2
    }

    pub fn arity(self) -> usize {
        OPS.iter().find(|o| o.0 == self).unwrap().3
    }

    pub fn from_ir(name: &str) -> Option<FpOp> {
        OPS.iter().find(|o| o.2 == name).map(|o| o.0)
    }

    fn from_symbol(s: &str, argc: usize) -> Option<FpOp> {
        if s == "-" && argc == 1 {
            return Some(FpOp::Neg);
        }
        OPS.iter().find(|o| o.1 == s).map(|o| o.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Op(FpOp, Vec<Expr>),
    /// With `sequential` (`let*`) each binding sees the earlier ones;
    /// otherwise (`let`) all bindings see only the enclosing scope.
    Let {
        binds: Vec<(String, Expr)>,
        body: Box<Expr>,
        sequential: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FPCore {
    pub name: Option<String>,
    pub args: Vec<String>,
    pub pre: Option<Sexp>,
    pub body: Expr,
}

fn syntax(s: &Sexp, msg: impl Into<String>) -> FpError {
    FpError::Syntax(format!("{}: {}", s.loc(), msg.into()))
}

fn number(s: &str) -> Option<f64> {
    match s {
        "PI" => return Some(std::f64::consts::PI),
        "E" => return Some(std::f64::consts::E),
        "INFINITY" => return Some(f64::INFINITY),
        "NAN" => return Some(f64::NAN),
        _ => {}
    }
    if !s.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.') || s == "-" || s == "+" {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        return Some(n.parse::<f64>().ok()? / d.parse::<f64>().ok()?);
    }
    s.parse::<f64>().ok()
}

fn parse_expr(s: &Sexp, scope: &mut Vec<String>) -> Result<Expr, FpError> {
    match s {
        Sexp::Atom(a, _) => {
            if let Some(v) = number(a) {
                return Ok(Expr::Num(v));
            }
            if scope.iter().any(|x| x == a) {
                Ok(Expr::Var(a.clone()))
            } else {
                Err(FpError::Unbound(a.clone()))
            }
        }
        Sexp::List(items, _) => {
            let head = items.first().and_then(Sexp::atom).ok_or_else(|| syntax(s, "expected an operator"))?;
            if head == "let" || head == "let*" {
                return parse_let(s, items, head == "let*", scope);
            }
            let args = &items[1..];
            let op = FpOp::from_symbol(head, args.len()).ok_or_else(|| {
                if KNOWN_UNSUPPORTED.contains(&head) {
                    FpError::Unsupported(head.to_string())
                } else {
                    syntax(s, format!("unknown operator `{head}`"))
                }
            })?;
            if args.len() != op.arity() {
                return Err(syntax(s, format!("`{head}` takes {} argument(s)", op.arity())));
            }
            let args = args.iter().map(|a| parse_expr(a, scope)).collect::<Result<_, _>>()?;
            Ok(Expr::Op(op, args))
        }
    }
}

fn parse_let(s: &Sexp, items: &[Sexp], sequential: bool, scope: &mut Vec<String>) -> Result<Expr, FpError> {
    let [_, binds, body] = items else {
        return Err(syntax(s, "expected (let ((name expr) ...) body)"));
    };
    let binds = binds.list().ok_or_else(|| syntax(binds, "expected a binding list"))?;
    let depth = scope.len();
    let mut out = Vec::new();
    let mut names = Vec::new();
    for b in binds {
        let (name, e) = match b.list() {
            Some([Sexp::Atom(n, _), e]) => (n.clone(), e),
            _ => return Err(syntax(b, "expected (name expr)")),
        };
        // Plain `let` evaluates every binding in the outer scope.
        let e = if sequential {
            let e = parse_expr(e, scope)?;
            scope.push(name.clone());
            e
        } else {
            parse_expr(e, scope)?
        };
        names.push(name.clone());
        out.push((name, e));
    }
    if !sequential {
        scope.extend(names);
    }
    let body = parse_expr(body, scope)?;
    scope.truncate(depth);
    Ok(Expr::Let {
        binds: out,
        body: Box::new(body),
        sequential,
    })
}

/// Parses one `(FPCore [name] (args...) props... body)` form.
pub fn parse_fpcore(text: &str) -> Result<FPCore, FpError> {
    let forms = read_all(text).map_err(|e| FpError::Syntax(e.to_string()))?;
    let [form] = forms.as_slice() else {
        return Err(FpError::Syntax(format!("expected one FPCore form, found {}", forms.len())));
    };
    let items = form.list().ok_or_else(|| syntax(form, "expected (FPCore ...)"))?;
    if items.first().and_then(Sexp::atom) != Some("FPCore") {
        return Err(syntax(form, "expected (FPCore ...)"));
    }
    let mut i = 1;
    let mut name = None;
    if let Some(Sexp::Atom(n, _)) = items.get(i) {
        name = Some(n.clone());
        i += 1;
    }
    let arg_list = items.get(i).and_then(Sexp::list).ok_or_else(|| syntax(form, "expected an argument list"))?;
    let mut args = Vec::new();
    for a in arg_list {
        match a {
            Sexp::Atom(n, _) => args.push(n.clone()),
            // `(! :precision binary64 x)` style annotations keep the last atom.
            Sexp::List(parts, _) => match parts.last() {
                Some(Sexp::Atom(n, _)) => args.push(n.clone()),
                _ => return Err(syntax(a, "expected an argument name")),
            },
        }
    }
    i += 1;
    let mut pre = None;
    while i + 1 < items.len() {
        let key = items[i].atom().filter(|k| k.starts_with(':')).ok_or_else(|| syntax(&items[i], "expected a property"))?;
        let val = &items[i + 1];
        match key {
            ":name" if name.is_none() => name = val.atom().map(|s| s.trim_matches('"').to_string()),
            ":pre" => pre = Some(val.clone()),
            ":precision" if val.atom() != Some("binary64") => {
                return Err(FpError::Unsupported(format!("precision {val}")));
            }
            _ => {}
        }
        i += 2;
    }
    let body = items.get(i).ok_or_else(|| syntax(form, "missing body"))?;
    let mut scope = args.clone();
    let body = parse_expr(body, &mut scope)?;
    Ok(FPCore { name, args, pre, body })
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => f.write_str(&fpcore_number(*v)),
            Expr::Var(x) => f.write_str(x),
            Expr::Op(op, args) => {
                write!(f, "({}", if *op == FpOp::Neg { "-" } else { op.symbol() })?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
            Expr::Let { binds, body, sequential } => {
                f.write_str(if *sequential { "(let* (" } else { "(let (" })?;
                for (i, (n, e)) in binds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "[{n} {e}]")?;
                }
                write!(f, ") {body})")
            }
        }
    }
}

fn fpcore_number(v: f64) -> String {
    if v.is_nan() {
        "NAN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "INFINITY" } else { "(- INFINITY)" }.into()
    } else {
        format_f64(v)
    }
}

impl fmt::Display for FPCore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(FPCore ({})", self.args.join(" "))?;
        if let Some(n) = &self.name {
            write!(f, " :name {n:?}")?;
        }
        if let Some(p) = &self.pre {
            write!(f, " :pre {p}")?;
        }
        write!(f, " {})", self.body)
    }
}

impl FPCore {
    /// Per-argument sampling box implied by the precondition, clipped to
    /// `[-BOUND, BOUND]`. Only comparisons between one argument and
    /// literals, optionally under `and`, are understood.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        let mut r = vec![(-BOUND, BOUND); self.args.len()];
        if let Some(p) = &self.pre {
            self.narrow(p, &mut r);
        }
        r
    }

    fn narrow(&self, p: &Sexp, r: &mut [(f64, f64)]) {
        let Some(items) = p.list() else { return };
        let Some(head) = items.first().and_then(Sexp::atom) else { return };
        if head == "and" {
            for q in &items[1..] {
                self.narrow(q, r);
            }
            return;
        }
        let (less, strict) = match head {
            "<" => (true, true),
            "<=" => (true, false),
            ">" => (false, true),
            ">=" => (false, false),
            "==" => {
                for w in items[1..].windows(2) {
                    self.bound(&w[0], &w[1], true, false, r);
                    self.bound(&w[0], &w[1], false, false, r);
                }
                return;
            }
            _ => return,
        };
        // A chain a < b < c bounds every adjacent pair.
        for w in items[1..].windows(2) {
            self.bound(&w[0], &w[1], less, strict, r);
        }
    }

    /// Applies `a < b` (or `<=`, `>`, `>=`) when one side is an argument and
    /// the other a literal.
    fn bound(&self, a: &Sexp, b: &Sexp, less: bool, strict: bool, r: &mut [(f64, f64)]) {
        let var = |s: &Sexp| s.atom().and_then(|n| self.args.iter().position(|x| x == n));
        let lit = |s: &Sexp| s.atom().and_then(number);
        let (i, c, upper) = match (var(a), lit(b), lit(a), var(b)) {
            (Some(i), Some(c), _, _) => (i, c, less),
            (_, _, Some(c), Some(i)) => (i, c, !less),
            _ => return,
        };
        if upper {
            let c = if strict { c.next_down() } else { c };
            r[i].1 = r[i].1.min(c);
        } else {
            let c = if strict { c.next_up() } else { c };
            r[i].0 = r[i].0.max(c);
        }
    }

    /// IR text of a function `@f` with one `f64` argument per FPCore
    /// argument, one operation per operator occurrence.
    pub fn to_ir_text(&self) -> String {
        let mut out = String::new();
        let mut names = Names::default();
        let mut env: HashMap<String, String> = HashMap::new();
        let mut params = Vec::new();
        for a in &self.args {
            let v = names.fresh(a);
            params.push(format!("{v} : f64"));
            env.insert(a.clone(), v);
        }
        let _ = writeln!(out, "func.func @f({}) -> f64 {{", params.join(", "));
        let r = lower(&self.body, &mut env, &mut names, &mut out);
        let _ = writeln!(out, "  func.return {r} : f64\n}}");
        out
    }

    pub fn to_module(&self) -> Result<(Module, OpId), FpError> {
        let m = parse_ir(&self.to_ir_text(), builtin_registry()).map_err(|e| FpError::Stage {
            stage: "lower",
            msg: e.to_string(),
        })?;
        let f = m.lookup_func("f").expect("lowered function is named f");
        Ok((m, f))
    }
}

#[derive(Default)]
struct Names {
    used: HashSet<String>,
    counter: usize,
}

impl Names {
    fn fresh(&mut self, hint: &str) -> String {
        let clean = !hint.is_empty() && hint.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        let mut name = if clean { format!("%{hint}") } else { format!("%v{}", self.counter) };
        while !self.used.insert(name.clone()) {
            self.counter += 1;
            name = format!("%v{}", self.counter);
        }
        name
    }
}

fn lower(e: &Expr, env: &mut HashMap<String, String>, names: &mut Names, out: &mut String) -> String {
    match e {
        Expr::Num(v) => {
            let r = names.fresh("");
            let _ = writeln!(out, "  {r} = arith.constant {{value = {}}} : f64", format_f64(*v));
            r
        }
        Expr::Var(x) => env[x].clone(),
        Expr::Op(op, args) => {
            let vs: Vec<String> = args.iter().map(|a| lower(a, env, names, out)).collect();
            let r = names.fresh("");
            let _ = writeln!(out, "  {r} = {} {} : f64", op.ir_name(), vs.join(", "));
            r
        }
        Expr::Let { binds, body, sequential } => {
            let saved: Vec<(String, Option<String>)> = binds.iter().map(|(n, _)| (n.clone(), env.get(n).cloned())).collect();
            let mut pending = Vec::new();
            for (n, b) in binds {
                let v = lower(b, env, names, out);
                if *sequential {
                    env.insert(n.clone(), v);
                } else {
                    pending.push((n.clone(), v));
                }
            }
            env.extend(pending);
            let r = lower(body, env, names, out);
            for (n, old) in saved {
                match old {
                    Some(v) => env.insert(n, v),
                    None => env.remove(&n),
                };
            }
            r
        }
    }
}

/// Rebuilds an FPCore body from the value returned by `func`. Values used
/// more than once become `let*` bindings.
pub fn raise(m: &Module, func: OpId, template: &FPCore) -> Result<FPCore, FpError> {
    let block = m.entry_block(func).ok_or_else(|| FpError::Stage {
        stage: "print",
        msg: "function has no body".into(),
    })?;
    let ret = m.block_last(block).filter(|&r| m.op_name(r).as_str() == "func.return");
    let root = match ret.map(|r| m.operands(r)) {
        Some([v]) => *v,
        _ => {
            return Err(FpError::Stage {
                stage: "print",
                msg: "expected a single returned value".into(),
            })
        }
    };
    let params = m.block_args(block).to_vec();
    let mut uses: HashMap<ValueId, usize> = HashMap::new();
    let mut order = Vec::new();
    count_uses(m, root, &mut uses, &mut order);

    let reserved: HashSet<&str> = template.args.iter().map(String::as_str).collect();
    let mut k = 0;
    let mut bound: HashMap<ValueId, String> = HashMap::new();
    let mut binds = Vec::new();
    for &v in &order {
        if v == root || uses[&v] < 2 || matches!(m.value_def(v), ValueDef::BlockArg { .. }) {
            continue;
        }
        if m.defining_op(v).is_some_and(|o| m.op_name(o).as_str() == "arith.constant") {
            continue;
        }
        let e = expr_of(m, v, &params, template, &bound)?;
        let mut name = format!("t{k}");
        while reserved.contains(name.as_str()) {
            k += 1;
            name = format!("t{k}");
        }
        k += 1;
        bound.insert(v, name.clone());
        binds.push((name, e));
    }
    let body = expr_of(m, root, &params, template, &bound)?;
    let body = if binds.is_empty() {
        body
    } else {
        Expr::Let {
            binds,
            body: Box::new(body),
            sequential: true,
        }
    };
    Ok(FPCore {
        name: template.name.clone(),
        args: template.args.clone(),
        pre: template.pre.clone(),
        body,
    })
}

/// Post-order over the values reachable from `v`, counting uses.
fn count_uses(m: &Module, v: ValueId, uses: &mut HashMap<ValueId, usize>, order: &mut Vec<ValueId>) {
    let n = uses.entry(v).or_insert(0);
    *n += 1;
    if *n > 1 {
        return;
    }
    if let Some(op) = m.defining_op(v) {
        for &x in m.operands(op) {
            count_uses(m, x, uses, order);
        }
    }
    order.push(v);
}

fn expr_of(
    m: &Module,
    v: ValueId,
    params: &[ValueId],
    template: &FPCore,
    bound: &HashMap<ValueId, String>,
) -> Result<Expr, FpError> {
    if let Some(n) = bound.get(&v) {
        return Ok(Expr::Var(n.clone()));
    }
    if let Some(i) = params.iter().position(|&p| p == v) {
        return Ok(Expr::Var(template.args[i].clone()));
    }
    let err = |msg: String| FpError::Stage { stage: "print", msg };
    let op = m.defining_op(v).ok_or_else(|| err(format!("{v:?} has no definition")))?;
    let name = m.op_name(op);
    if name.as_str() == "arith.constant" {
        return match m.attr(op, "value").map(|a| a.get()) {
            Some(Attribute::Float { bits, .. }) => Ok(Expr::Num(f64::from_bits(*bits))),
            Some(Attribute::Int { value, .. }) => Ok(Expr::Num(*value as f64)),
            _ => Err(err("constant without a value".into())),
        };
    }
    let fop = FpOp::from_ir(name.as_str()).ok_or_else(|| err(format!("`{name}` has no FPCore form")))?;
    let args = m
        .operands(op)
        .iter()
        .map(|&x| expr_of(m, x, params, template, bound))
        .collect::<Result<_, _>>()?;
    Ok(Expr::Op(fop, args))
}
