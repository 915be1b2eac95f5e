//! Random program and e-graph generators in IR text form, used by property
//! tests and benchmarks.

use std::collections::HashSet;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;

const INT_BINARY: [&str; 4] = ["arith.addi", "arith.subi", "arith.muli", "arith.shli"];
const FLOAT_BINARY: [&str; 5] = ["arith.addf", "arith.subf", "arith.mulf", "arith.divf", "math.powf"];
const FLOAT_UNARY: [&str; 7] = ["arith.negf", "math.sqrt", "math.log", "math.exp", "math.sin", "math.cos", "math.absf"];

fn header(out: &mut String, ty: &str, n_args: usize) {
    let args: Vec<String> = (0..n_args).map(|i| format!("%a{i} : {ty}")).collect();
    let _ = writeln!(out, "func.func @f({}) -> {ty} {{", args.join(", "));
}

/// Straight-line `i64` function over `n_args` arguments with `n_ops`
/// operations. Every value after the arguments is an op result, and the
/// last one is returned.
pub fn int_function(rng: &mut impl Rng, n_args: usize, n_ops: usize) -> String {
    let mut out = String::new();
    header(&mut out, "i64", n_args);
    let mut vals: Vec<String> = (0..n_args).map(|i| format!("%a{i}")).collect();
    for i in 0..n_ops {
        let name = format!("%v{i}");
        if rng.gen_bool(0.15) {
            let c: i64 = rng.gen_range(-8..=8);
            let _ = writeln!(out, "  {name} = arith.constant {{value = {c}}} : i64");
        } else {
            let op = *INT_BINARY.choose(rng).unwrap();
            let x = vals.choose(rng).unwrap().clone();
            let y = if op == "arith.shli" {
                let s = format!("%s{i}");
                let _ = writeln!(out, "  {s} = arith.constant {{value = {}}} : i64", rng.gen_range(0..4));
                s
            } else {
                vals.choose(rng).unwrap().clone()
            };
            let _ = writeln!(out, "  {name} = {op} {x}, {y} : i64");
        }
        vals.push(name);
    }
    let _ = writeln!(out, "  func.return {} : i64\n}}", vals.last().unwrap());
    out
}

/// Straight-line `f64` function mixing unary and binary float operations
/// with occasional constants.
pub fn float_function(rng: &mut impl Rng, n_args: usize, n_ops: usize) -> String {
    let mut out = String::new();
    header(&mut out, "f64", n_args);
    let mut vals: Vec<String> = (0..n_args).map(|i| format!("%a{i}")).collect();
    for i in 0..n_ops {
        let name = format!("%v{i}");
        match rng.gen_range(0..10) {
            0 => {
                let c: f64 = rng.gen_range(-4.0..4.0);
                let _ = writeln!(out, "  {name} = arith.constant {{value = {c:?}}} : f64");
            }
            1..=4 => {
                let op = FLOAT_UNARY.choose(rng).unwrap();
                let x = vals.choose(rng).unwrap();
                let _ = writeln!(out, "  {name} = {op} {x} : f64");
            }
            _ => {
                let op = FLOAT_BINARY.choose(rng).unwrap();
                let x = vals.choose(rng).unwrap();
                let y = vals.choose(rng).unwrap();
                let _ = writeln!(out, "  {name} = {op} {x}, {y} : f64");
            }
        }
        vals.push(name);
    }
    let _ = writeln!(out, "  func.return {} : f64\n}}", vals.last().unwrap());
    out
}

/// Acyclic e-graph with `n_classes` classes in a function of two `i64`
/// arguments. Classes 0 and 1 hold the arguments; every later class has
/// between 1 and `max_nodes` binary e-nodes whose operands are earlier
/// classes, each with a random `eqsat.cost` in 0..=9. The last class is
/// the root.
pub fn acyclic_egraph(rng: &mut impl Rng, n_classes: usize, max_nodes: usize) -> String {
    let n = n_classes.max(3);
    let mut out = String::new();
    let _ = writeln!(out, "func.func @f(%a : i64, %b : i64) -> i64 {{");
    let _ = writeln!(out, "  %r = eqsat.egraph -> i64 {{");
    let _ = writeln!(out, "    %c0 = eqsat.eclass %a : i64");
    let _ = writeln!(out, "    %c1 = eqsat.eclass %b : i64");
    let mut seen = HashSet::new();
    for c in 2..n {
        let k = rng.gen_range(1..=max_nodes.max(1));
        let mut members = Vec::new();
        for j in 0..k {
            let op = *INT_BINARY.choose(rng).unwrap();
            let x = rng.gen_range(0..c);
            let y = rng.gen_range(0..c);
            if !seen.insert((op, x, y)) {
                continue;
            }
            let name = format!("%n{c}_{j}");
            let cost = rng.gen_range(0..10);
            let _ = writeln!(out, "    {name} = {op} %c{x}, %c{y} {{eqsat.cost = {cost}}} : i64");
            members.push(name);
        }
        if members.is_empty() {
            let name = format!("%n{c}_fallback");
            let _ = writeln!(out, "    {name} = arith.addi %c{}, %c{} {{eqsat.cost = 9}} : i64", c - 1, c - 2 + usize::from(c == 2));
            members.push(name);
        }
        let _ = writeln!(out, "    %c{c} = eqsat.eclass {} : i64", members.join(", "));
    }
    let _ = writeln!(out, "    eqsat.yield %c{} : i64\n  }}", n - 1);
    let _ = writeln!(out, "  func.return %r : i64\n}}");
    out
}
