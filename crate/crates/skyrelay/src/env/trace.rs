//! Episode traces: line-delimited records of every simulated slot, plus
//! enough header context to re-run the episode and diff it.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Env, EnvParams, StepOutcome, WaypointGraph};
use crate::error::{Error, Result};

/// Format marker for stored traces.
pub const TRACE_VERSION: u32 = 1;

/// First line of a trace file: everything needed to reconstruct the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    /// Hash of the scenario configuration the run was launched with.
    pub config_hash: String,
    pub episode_seed: u64,
    pub graph: WaypointGraph,
    pub params: EnvParams,
}

/// One line per simulated slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub slot: u32,
    pub action_index: usize,
    /// Per-relay waypoint after the move.
    pub positions: Vec<usize>,
    pub reward: f64,
    pub eta: f64,
    pub avg_aoi: f64,
    pub flags: [bool; 4],
    pub done: bool,
}

impl TraceStep {
    pub fn from_outcome(action_index: usize, positions: Vec<usize>, outcome: &StepOutcome) -> Self {
        Self {
            slot: outcome.slot,
            action_index,
            positions,
            reward: outcome.reward,
            eta: outcome.eta,
            avg_aoi: outcome.avg_aoi,
            flags: outcome.flags.as_array(),
            done: outcome.done,
        }
    }
}

/// A full episode log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn new(config_hash: String, episode_seed: u64, env: &Env) -> Self {
        Self {
            header: TraceHeader {
                version: TRACE_VERSION,
                config_hash,
                episode_seed,
                graph: env.graph().clone(),
                params: env.params().clone(),
            },
            steps: Vec::new(),
        }
    }

    pub fn episode_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Writes the trace as line-delimited JSON: header, then one line per
    /// slot.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_string(&self.header)
            .map_err(|e| Error::MalformedArtifact(e.to_string()))?;
        writeln!(out, "{header}")?;
        for step in &self.steps {
            let line = serde_json::to_string(step)
                .map_err(|e| Error::MalformedArtifact(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::MalformedArtifact("empty trace".into()))??;
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::MalformedArtifact(format!("bad trace header: {e}")))?;
        if header.version != TRACE_VERSION {
            return Err(Error::MalformedArtifact(format!(
                "unsupported trace version {}",
                header.version
            )));
        }
        let mut steps = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let step: TraceStep = serde_json::from_str(&line)
                .map_err(|e| Error::MalformedArtifact(format!("bad trace line: {e}")))?;
            steps.push(step);
        }
        Ok(Self { header, steps })
    }

    /// Re-runs the logged episode from its seed and reports one line per
    /// mismatching slot. An unmodified trace replays with zero diffs.
    pub fn replay_diffs(&self) -> Result<Vec<String>> {
        let mut env = Env::new(
            self.header.graph.clone(),
            self.header.params.clone(),
            self.header.episode_seed,
        )?;
        let mut diffs = Vec::new();
        for (i, logged) in self.steps.iter().enumerate() {
            let outcome = env.step(logged.action_index)?;
            let replayed =
                TraceStep::from_outcome(logged.action_index, env.state().positions.clone(), &outcome);
            if &replayed != logged {
                diffs.push(format!(
                    "slot {}: logged {logged:?} replayed {replayed:?}",
                    logged.slot
                ));
            }
            if outcome.done && i + 1 != self.steps.len() {
                diffs.push(format!(
                    "slot {}: episode ended early on replay",
                    logged.slot
                ));
                break;
            }
        }
        Ok(diffs)
    }
}

/// Runs one episode under a caller-supplied policy, recording the trace.
pub fn run_episode<F>(
    env: &mut Env,
    episode_seed: u64,
    config_hash: &str,
    mut policy: F,
) -> Result<EpisodeTrace>
where
    F: FnMut(&Env) -> Result<usize>,
{
    env.reset(episode_seed);
    let mut trace = EpisodeTrace::new(config_hash.to_string(), episode_seed, env);
    loop {
        let action = policy(env)?;
        let outcome = env.step(action)?;
        trace.steps.push(TraceStep::from_outcome(
            action,
            env.state().positions.clone(),
            &outcome,
        ));
        if outcome.done {
            break;
        }
    }
    Ok(trace)
}
