use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{apply_matches_within, ematch, EGraph, EngineError, MatchRecord};
use crate::ir::{Module, ValueId};
use crate::pattern::{lower_combined, lower_single, MatcherProgram, Pattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// One fused program for all patterns.
    #[default]
    Combined,
    /// One program per pattern.
    Individual,
}

/// Patterns with their compiled matchers.
#[derive(Clone, Debug)]
pub struct RuleSet {
    pub patterns: Arc<Vec<Pattern>>,
    pub combined: MatcherProgram,
    pub singles: Vec<MatcherProgram>,
}

impl RuleSet {
    pub fn new(patterns: Vec<Pattern>) -> Result<RuleSet, EngineError> {
        let combined = lower_combined(&patterns);
        combined.validate().map_err(EngineError::Malformed)?;
        let singles: Vec<MatcherProgram> = patterns.iter().map(lower_single).collect();
        for s in &singles {
            s.validate().map_err(EngineError::Malformed)?;
        }
        Ok(RuleSet {
            patterns: Arc::new(patterns),
            combined,
            singles,
        })
    }

    /// All matches against the current graph, with duplicates (same
    /// pattern, same canonical root class and bindings) removed. The result
    /// is sorted by that key, so application order is the same in both
    /// modes.
    pub fn match_all(&self, m: &Module, g: &EGraph, mode: MatchMode) -> Result<Vec<MatchRecord>, EngineError> {
        let raw = match mode {
            MatchMode::Combined => ematch(m, g, &self.combined)?,
            MatchMode::Individual => {
                let mut all = Vec::new();
                for (i, prog) in self.singles.iter().enumerate() {
                    all.extend(ematch(m, g, prog)?.into_iter().map(|mut r| {
                        r.pattern = i;
                        r
                    }));
                }
                all
            }
        };
        let mut seen: HashSet<(usize, ValueId, Vec<ValueId>)> = HashSet::new();
        let mut out: Vec<MatchRecord> = raw
            .into_iter()
            .filter(|r| seen.insert((r.pattern, r.root_class, r.bindings.clone())))
            .collect();
        out.sort_by(|a, b| (a.pattern, a.root_class, &a.bindings).cmp(&(b.pattern, b.root_class, &b.bindings)));
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct SaturationConfig {
    pub max_iterations: Option<usize>,
    pub max_enodes: usize,
    pub wall_timeout: Option<Duration>,
    pub match_mode: MatchMode,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        SaturationConfig {
            max_iterations: None,
            max_enodes: 4000,
            wall_timeout: None,
            match_mode: MatchMode::Combined,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Saturated,
    NodeLimit,
    IterationLimit,
    Timeout,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Saturated => "saturated",
            StopReason::NodeLimit => "node_limit",
            StopReason::IterationLimit => "iteration_limit",
            StopReason::Timeout => "timeout",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterationStats {
    pub iter: usize,
    pub matches: usize,
    pub new_enodes: usize,
    pub unions: usize,
    pub aborted: usize,
    pub enodes: usize,
    pub ms: u128,
}

impl fmt::Display for IterationStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} matches={} new_enodes={} unions={} enodes={} ms={}",
            self.iter, self.matches, self.new_enodes, self.unions, self.enodes, self.ms
        )
    }
}

#[derive(Clone, Debug)]
pub struct SaturationResult {
    pub iterations: usize,
    pub reason: StopReason,
    pub per_iteration: Vec<IterationStats>,
}

/// Runs match / apply / rebuild rounds until nothing changes or a limit is
/// hit. Application stops before the e-node count could exceed
/// `max_enodes`, so the limit is never crossed by rewriting.
pub fn saturate(
    m: &mut Module,
    g: &mut EGraph,
    rules: &RuleSet,
    config: &SaturationConfig,
) -> Result<SaturationResult, EngineError> {
    let start = Instant::now();
    g.mark_started();
    g.rebuild(m)?;
    g.refresh_analyses(m);
    let mut per_iteration = Vec::new();
    let reason = loop {
        if config.max_iterations.is_some_and(|n| per_iteration.len() >= n) {
            break StopReason::IterationLimit;
        }
        if config.wall_timeout.is_some_and(|t| start.elapsed() >= t) {
            break StopReason::Timeout;
        }
        if g.enode_count(m) > config.max_enodes {
            break StopReason::NodeLimit;
        }
        let t0 = Instant::now();
        let matches = rules.match_all(m, g, config.match_mode)?;
        let budget = config.max_enodes.saturating_sub(g.enode_count(m));
        let applied = apply_matches_within(m, g, &rules.patterns, &matches, budget)?;
        let repairs = g.rebuild(m)?;
        g.refresh_analyses(m);
        let stats = IterationStats {
            iter: per_iteration.len() + 1,
            matches: matches.len(),
            new_enodes: applied.new_enodes,
            unions: applied.unions + repairs,
            aborted: applied.aborted,
            enodes: g.enode_count(m),
            ms: t0.elapsed().as_millis(),
        };
        per_iteration.push(stats);
        if applied.skipped > 0 || stats.enodes > config.max_enodes {
            break StopReason::NodeLimit;
        }
        if stats.new_enodes == 0 && stats.unions == 0 {
            break StopReason::Saturated;
        }
    };
    Ok(SaturationResult {
        iterations: per_iteration.len(),
        reason,
        per_iteration,
    })
}
