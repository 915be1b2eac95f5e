use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eqsat::dialects::{builtin_registry, EGRAPH};
use eqsat::engine::RuleSet;
use eqsat::ir::{parse_ir, print_ir};
use eqsat::pattern::parse_patterns;
use eqsat_opt::bench::{bench_matching, ARITH_INPUTS, ARITH_RULES};
use eqsat_opt::pipeline::{check_pipeline, print_intervals};
use eqsat_opt::{emit_dot, parse_passes, run_pipeline, CliError, Pass, PipelineOptions};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn opt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqsat-opt")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rules(text: &str) -> RuleSet {
    RuleSet::new(parse_patterns(text, &builtin_registry()).unwrap()).unwrap()
}

#[test]
fn insert_eclasses_output_shape() {
    let o = opt(&[path(&data("mul_two.ir")), "--passes=insert-eclasses"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("eqsat.egraph").count(), 1, "{text}");
    assert_eq!(text.matches("eqsat.eclass ").count(), 2, "{text}");
    assert_eq!(text.matches("eqsat.const_eclass").count(), 1, "{text}");
    assert!(text.contains("(cst=2)"), "{text}");
    assert!(text.contains("eqsat.yield"), "{text}");
    let m = parse_ir(&text, builtin_registry()).unwrap();
    assert_eq!(print_ir(&m), text);
}

#[test]
fn toy_flow_extracts_the_short_program() {
    let o = opt(&[
        path(&data("abs_div.ir")),
        "--passes=insert-eclasses,saturate,select,replace,topo-sort",
        "--select=ilp",
        &format!("--rules={}", path(&data("toy.rules"))),
        &format!("--cost-config={}", path(&data("toy.cost"))),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let ops = text.lines().filter(|l| l.contains(" = arith.") || l.contains(" = math.")).count();
    assert_eq!(ops, 8, "{text}");
    assert!(!text.contains("cplx") && !text.contains("eqsat"), "{text}");
    assert!(stderr(&o).is_empty(), "stats only with --stats");
}

#[test]
fn greedy_keeps_the_identity_on_the_sum() {
    let o = opt(&[
        path(&data("abs_re_im.ir")),
        "--passes=insert-eclasses,saturate,select-greedy,replace,topo-sort",
        &format!("--rules={}", path(&data("toy.rules"))),
        &format!("--cost-config={}", path(&data("toy.cost"))),
        "--stats",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ops = stdout(&o).lines().filter(|l| l.contains(" = arith.") || l.contains(" = math.")).count();
    // Tree-cost greedy picks the quotient of roots and loses the sharing.
    assert_eq!(ops, 18);
    let err = stderr(&o);
    assert!(err.contains("reason=saturated") && err.contains("dissolved=true"), "{err}");
}

#[test]
fn output_is_deterministic() {
    let args = [
        path(&data("abs_re_im.ir")).to_owned(),
        "--passes=insert-eclasses,saturate,emit-dot,select-ilp,replace,topo-sort".to_owned(),
        format!("--rules={}", path(&data("toy.rules"))),
        format!("--cost-config={}", path(&data("toy.cost"))),
    ];
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let a = opt(&args);
    let b = opt(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn fpcore_improve_prints_program_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.fpcore");
    std::fs::write(&input, "(FPCore (x) :pre (>= x 0) (- (sqrt (+ x 1)) (sqrt x)))").unwrap();
    let o = opt(&["--fpcore", path(&input), "--improve", "--samples=64"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    let program = lines.next().unwrap();
    eqsat_fp::parse_fpcore(program).unwrap();
    let report = lines.next().unwrap();
    assert!(report.starts_with("; input_bits_err="), "{report}");
    for key in ["output_bits_err=", "samples=", "enodes=", "iters=", "reason="] {
        assert!(report.contains(key), "{report}");
    }
    // The report is a comment, so the whole output is still FPCore.
    eqsat_fp::parse_fpcore(&text).unwrap();
}

#[test]
fn fpcore_round_trips_without_rules() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.fpcore");
    std::fs::write(&input, "(FPCore (x y) (+ (* x y) (sqrt x)))").unwrap();
    let o = opt(&[
        "--fpcore",
        path(&input),
        "--passes=insert-eclasses,select-greedy,replace,topo-sort",
        "--emit=fpcore",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "(FPCore (x y) (+ (* x y) (sqrt x)))");
}

#[test]
fn interval_dump_lists_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.fpcore");
    std::fs::write(&input, "(FPCore (x) :pre (<= 1 x 4) (sqrt x))").unwrap();
    let o = opt(&["--fpcore", path(&input), "--print-analysis=interval", "--emit=fpcore"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("%x: [1e0,4e0] nan=false"), "{text}");
    assert!(text.contains(": [1e0,2e0] nan=false"), "{text}");
    let o = opt(&["--fpcore", path(&input), "--print-analysis=sign"]);
    assert!(!o.status.success());
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let missing = opt(&["/definitely/not/here.ir"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("error:"));

    let ir = data("mul_two.ir");
    let cases: [&[&str]; 5] = [
        &[path(&ir), "--passes=insert-eclasses,frobnicate"],
        &[path(&ir), "--passes=insert-eclasses,replace"],
        &[path(&ir), "--passes=insert-eclasses,saturate"],
        &[path(&ir), "--passes=select-greedy"],
        &[path(&ir), "--improve"],
    ];
    for args in cases {
        let o = opt(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!stderr(&o).is_empty() && stdout(&o).is_empty(), "{args:?}");
    }
    assert_eq!(opt(&[path(&ir), "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn invalid_input_fails_the_verifier_gate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.ir");
    std::fs::write(
        &input,
        "func.func @f(%a : i64) -> i64 {\n  %y = arith.addi %x, %a : i64\n  %x = arith.addi %a, %a : i64\n  func.return %y : i64\n}\n",
    )
    .unwrap();
    let o = opt(&[path(&input)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("verification failed after parsing"), "{}", stderr(&o));
}

#[test]
fn pass_lists() {
    let p = parse_passes("insert-eclasses, select ,replace", Pass::SelectIlp).unwrap();
    assert_eq!(p, [Pass::InsertEclasses, Pass::SelectIlp, Pass::Replace]);
    assert!(parse_passes("emit-dot,print-analysis,topo-sort", Pass::SelectGreedy).is_ok());
    assert!(matches!(parse_passes("saturate,nope", Pass::SelectGreedy), Err(CliError::Usage(_))));
    assert!(check_pipeline(&[Pass::Replace, Pass::SelectGreedy], true).is_err());
    assert!(check_pipeline(&[Pass::SelectGreedy, Pass::Replace], false).is_ok());
    assert!(check_pipeline(&[Pass::Saturate], false).is_err());
    for p in Pass::ALL {
        assert_eq!(p.name().parse::<Pass>().unwrap(), p);
    }
}

fn saturated(src_file: &str, rule_text: &str) -> eqsat::ir::Module {
    let src = std::fs::read_to_string(data(src_file)).unwrap();
    let mut m = parse_ir(&src, builtin_registry()).unwrap();
    let opts = PipelineOptions {
        rules: Some(rules(rule_text)),
        ..PipelineOptions::default()
    };
    run_pipeline(&mut m, &[Pass::InsertEclasses, Pass::Saturate], &opts).unwrap();
    m
}

fn dot_counts(dot: &str) -> (usize, usize, usize) {
    let clusters = dot.matches("subgraph cluster").count();
    let nodes = dot.lines().filter(|l| l.trim_start().starts_with('n') && l.contains("[label=")).count();
    let edges = dot.matches(" -> ").count();
    (clusters, nodes, edges)
}

#[test]
fn dot_for_the_trivial_graph() {
    let m = saturated("mul_two.ir", "");
    let dot = emit_dot(&m, m.ops_named(EGRAPH)[0]);
    // a, 2 and a * 2, one member each.
    assert_eq!(dot_counts(&dot), (3, 3, 2), "{dot}");
    assert!(dot.starts_with("digraph egraph {") && dot.ends_with("}\n"));
}

#[test]
fn dot_after_the_shift_rewrite() {
    let m = saturated("mul_two.ir", &std::fs::read_to_string(data("mul_two.rules")).unwrap());
    let dot = emit_dot(&m, m.ops_named(EGRAPH)[0]);
    // Classes a, 2, a * 2 and the new constant 1; the product class holds
    // both the multiplication and the shift.
    assert_eq!(dot_counts(&dot), (4, 5, 4), "{dot}");
    assert!(dot.contains("[label=\"arith.muli\"]") && dot.contains("[label=\"arith.shli\"]"));
    assert_eq!(dot, emit_dot(&m, m.ops_named(EGRAPH)[0]));
}

#[test]
fn dot_marks_the_cycle() {
    let m = saturated("add_zero.ir", &std::fs::read_to_string(data("add_zero.rules")).unwrap());
    let dot = emit_dot(&m, m.ops_named(EGRAPH)[0]);
    assert_eq!(dot_counts(&dot), (2, 3, 2), "{dot}");
    assert!(dot.contains("n0_1 -> n0_0 [style=dashed];"), "{dot}");
}

#[test]
fn analysis_dump_covers_eclasses() {
    let m = saturated("mul_two.ir", "");
    let text = print_intervals(&m, &PipelineOptions::default()).unwrap();
    assert!(text.contains("%c_two: [2e0,2e0] nan=false"), "{text}");
    assert!(text.contains("%a: [-inf,inf] nan=true"), "{text}");
}

#[test]
fn bench_reports_every_input() {
    let report = bench_matching(&ARITH_INPUTS, &rules(ARITH_RULES), 5).unwrap();
    assert_eq!(report.inputs.len(), 6);
    assert!(report.inputs.iter().all(|s| s.same_final_graph && s.iterations >= 1));
    let g = report.geomean_speedup();
    assert!(g.is_finite() && g > 0.0);
    let text = report.to_string();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().last().unwrap().starts_with("geomean_speedup="));
}

#[test]
fn bench_with_one_pattern() {
    let rs = rules("(rule comm-add (arith.addi ?a ?b) (arith.addi ?b ?a))");
    let report = bench_matching(&ARITH_INPUTS[2..3], &rs, 5).unwrap();
    let s = &report.inputs[0];
    assert!(s.matches > 0 && s.same_final_graph);
}

#[test]
fn bench_with_disjoint_roots() {
    // Patterns rooted at different ops never share matcher work, and the
    // fused program must still find exactly the same matches.
    let rs = rules(
        "(rule zero-add (arith.addi ?a (const 0)) ?a)\n(rule one-mul (arith.muli ?a (const 1)) ?a)\n(rule cancel (arith.subi ?a ?a) (const 0))",
    );
    let report = bench_matching(&ARITH_INPUTS, &rs, 5).unwrap();
    assert!(report.inputs.iter().all(|s| s.same_final_graph));
    assert!(report.inputs.iter().map(|s| s.matches).sum::<usize>() >= 3);
}
