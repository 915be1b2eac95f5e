//! The `eqsat-opt` driver: pass pipelines over textual IR, the FPCore
//! accuracy flow, DOT rendering of e-graphs and the matcher benchmark.

pub mod bench;
pub mod dot;
pub mod pipeline;

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use eqsat::dialects::{builtin_registry, EGRAPH};
use eqsat::engine::{MatchMode, RuleSet, SaturationConfig};
use eqsat::extract::{load_cost_config, CostModel};
use eqsat::ir::{parse_ir, print_ir};
use eqsat::pattern::parse_patterns;
use eqsat_fp::fpcore::raise;
use eqsat_fp::{improve, parse_fpcore, FpError, ImproveConfig};
use thiserror::Error;

pub use bench::{bench_matching, BenchReport};
pub use dot::emit_dot;
pub use pipeline::{parse_passes, run_pipeline, Pass, PipelineOptions, PipelineOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("verification failed after {after}:\n{diagnostics}")]
    Verify { after: String, diagnostics: String },
    #[error("{0}")]
    Pipeline(String),
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error("{input}: combined and individual matching disagree in iteration {iter} ({combined} vs {individual} matches)")]
    Mismatch {
        input: String,
        iter: usize,
        combined: usize,
        individual: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectKind {
    Greedy,
    Ilp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Combined,
    Individual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Ir,
    Fpcore,
    Dot,
}

#[derive(Debug, Parser)]
#[command(name = "eqsat-opt", version, about = "Equality saturation passes over textual IR and FPCore")]
pub struct Args {
    /// Input file, or `-` for stdin.
    pub input: String,
    /// Comma-separated passes, run in order.
    #[arg(long)]
    pub passes: Option<String>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long = "cost-config")]
    pub cost_config: Option<PathBuf>,
    /// Selection algorithm used by the `select` pass name.
    #[arg(long, value_enum, default_value = "greedy")]
    pub select: SelectKind,
    #[arg(long = "max-enodes", default_value_t = 4000)]
    pub max_enodes: usize,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Wall-clock limit for saturation, in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long = "match-mode", value_enum, default_value = "combined")]
    pub match_mode: ModeArg,
    #[arg(long, value_enum, default_value = "ir")]
    pub emit: Emit,
    /// Prints the named analysis after the pipeline unless a
    /// `print-analysis` pass already did.
    #[arg(long = "print-analysis")]
    pub print_analysis: Option<String>,
    /// Per-pass statistics on stderr.
    #[arg(long)]
    pub stats: bool,
    /// Treat the input as an FPCore expression.
    #[arg(long)]
    pub fpcore: bool,
    /// Run the accuracy improvement flow (needs --fpcore).
    #[arg(long)]
    pub improve: bool,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long = "precision-bits", default_value_t = eqsat_fp::real::DEFAULT_PRECISION)]
    pub precision_bits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// What a run wrote: `stdout` is the program or rendering, `stderr` the
/// statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub stdout: String,
    pub stderr: String,
}

fn read(path: &str) -> Result<String, CliError> {
    let io = |source| CliError::Io {
        path: path.to_owned(),
        source,
    };
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(io)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(io)
}

fn load_rules(path: &std::path::Path) -> Result<RuleSet, CliError> {
    let text = read(&path.to_string_lossy())?;
    let pats = parse_patterns(&text, &builtin_registry()).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    RuleSet::new(pats).map_err(|e| CliError::Pipeline(e.to_string()))
}

fn mode(m: ModeArg) -> MatchMode {
    match m {
        ModeArg::Combined => MatchMode::Combined,
        ModeArg::Individual => MatchMode::Individual,
    }
}

pub fn run(args: &Args) -> Result<RunOutput, CliError> {
    if args.improve && !args.fpcore {
        return Err(CliError::Usage("--improve needs --fpcore".into()));
    }
    if let Some(name) = &args.print_analysis {
        if name != "interval" {
            return Err(CliError::Usage(format!("unknown analysis `{name}` (available: interval)")));
        }
    }
    let text = read(&args.input)?;
    let rules = args.rules.as_deref().map(load_rules).transpose()?;
    let timeout = args.timeout.map(Duration::from_secs_f64);

    if args.improve {
        let rules = rules.unwrap_or_else(eqsat_fp::default_rules);
        let config = ImproveConfig {
            samples: args.samples,
            precision_bits: args.precision_bits,
            max_enodes: args.max_enodes,
            max_iterations: args.max_iters,
            timeout,
            match_mode: mode(args.match_mode),
            seed: args.seed,
        };
        let r = improve(&text, &rules, &config)?;
        let mut out = RunOutput {
            stdout: format!("{}\n; {}\n", r.output, r.report),
            stderr: String::new(),
        };
        if args.stats {
            for it in &r.saturation.per_iteration {
                out.stderr.push_str(&format!("saturate: {it}\n"));
            }
        }
        return Ok(out);
    }

    let default_select = match args.select {
        SelectKind::Greedy => Pass::SelectGreedy,
        SelectKind::Ilp => Pass::SelectIlp,
    };
    let mut passes = match &args.passes {
        Some(list) => parse_passes(list, default_select)?,
        None => Vec::new(),
    };
    if args.print_analysis.is_some() && !passes.contains(&Pass::PrintAnalysis) {
        passes.push(Pass::PrintAnalysis);
    }
    let cost = match &args.cost_config {
        Some(p) => {
            let t = read(&p.to_string_lossy())?;
            load_cost_config(&t).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
        }
        None => CostModel::default(),
    };

    let (mut m, core) = if args.fpcore {
        let core = parse_fpcore(&text)?;
        let (m, _) = core.to_module()?;
        (m, Some(core))
    } else {
        let m = parse_ir(&text, builtin_registry()).map_err(|e| CliError::Parse(format!("{}: {e}", args.input)))?;
        (m, None)
    };
    let opts = PipelineOptions {
        rules,
        cost,
        saturation: SaturationConfig {
            max_iterations: args.max_iters,
            max_enodes: args.max_enodes,
            wall_timeout: timeout,
            match_mode: mode(args.match_mode),
        },
        arg_ranges: core.as_ref().map(|c| c.ranges()),
    };
    let result = run_pipeline(&mut m, &passes, &opts)?;

    let mut stdout = result.output;
    match args.emit {
        Emit::Ir => stdout.push_str(&print_ir(&m)),
        Emit::Dot => {
            for e in m.ops_named(EGRAPH) {
                stdout.push_str(&emit_dot(&m, e));
            }
        }
        Emit::Fpcore => {
            let template = match &core {
                Some(c) => c.clone(),
                None => return Err(CliError::Usage("--emit=fpcore needs --fpcore input".into())),
            };
            for f in m.ops_named("func.func") {
                stdout.push_str(&raise(&m, f, &template)?.to_string());
                stdout.push('\n');
            }
        }
    }
    let stderr = if args.stats {
        result.stats.iter().map(|s| format!("{s}\n")).collect()
    } else {
        String::new()
    };
    Ok(RunOutput { stdout, stderr })
}
