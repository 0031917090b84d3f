//! Experiment orchestration: sweeps over waypoint count, discount
//! factor, and freshness threshold; seed-averaged aggregation; run
//! manifests tying every emitted number back to its scenario and seed.

pub mod export;
pub mod validate;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agent::{self, AgentKind, EvalSummary, TrainConfig};
use crate::config::ScenarioConfig;
use crate::env::Env;
use crate::error::{Error, Result};

pub use crate::config::ScenarioConfig as Config;

/// The three sweep axes of the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Waypoints,
    Gamma,
    AoiThreshold,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::Waypoints => "waypoints",
            SweepAxis::Gamma => "gamma",
            SweepAxis::AoiThreshold => "aoi-threshold",
        }
    }

    /// The evaluation grid for this axis.
    pub fn grid(&self) -> Vec<f64> {
        match self {
            SweepAxis::Waypoints => vec![6.0, 8.0, 10.0, 12.0, 14.0],
            SweepAxis::Gamma => vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            SweepAxis::AoiThreshold => vec![0.3, 0.5, 0.7, 0.9],
        }
    }

    /// A copy of `base` with this axis set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut config = base.clone();
        match self {
            SweepAxis::Waypoints => config.scenario.waypoint_count = value as usize,
            SweepAxis::Gamma => config.learning.gamma = value,
            SweepAxis::AoiThreshold => config.constraints.aoi_threshold = value,
        }
        config
    }
}

/// One run's seed-level result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Hash of the exact cell configuration.
    pub scenario_id: String,
    pub experiment: String,
    pub axis_value: f64,
    pub agent: AgentKind,
    pub seed: u64,
    /// Episodes the means below were taken over.
    pub episodes: u32,
    pub mean_return: f64,
    pub mean_eta: f64,
    pub mean_eta_raw: f64,
    pub mean_avg_aoi: f64,
    pub mean_bandwidth_efficiency: f64,
    pub mean_utilization: f64,
    /// False when the run failed; failed runs carry zeroed means and the
    /// error text, and are excluded from aggregation.
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Run manifest written beside each run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario_id: String,
    pub experiment: String,
    pub axis_value: f64,
    pub agent: AgentKind,
    pub seed: u64,
    pub hyperparameters: TrainConfig,
    pub eval_episodes: u32,
    pub record: MetricsRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network_path: Option<String>,
}

/// Output of one (cell, agent, seed) run.
pub struct CellRun {
    pub record: MetricsRecord,
    pub evaluation: Option<EvalSummary>,
}

/// Trains (where applicable) and evaluates one agent on one cell
/// configuration with one seed, writing artifacts under `out_dir` when
/// given.
pub fn run_cell(
    config: &ScenarioConfig,
    experiment: &str,
    axis_value: f64,
    kind: AgentKind,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<CellRun> {
    let scenario_id = config.hash()?;
    let graph = config.build_graph()?;
    let params = config.env_params()?;
    let eval_episodes = config.experiment.eval_episodes;

    let mut network_path = None;
    let evaluation = match kind {
        AgentKind::Greedy => {
            let mut env = Env::new(graph, params, seed)?;
            agent::evaluate_greedy(&mut env, eval_episodes, seed)?
        }
        AgentKind::ReplayDqn | AgentKind::BaselineDqn => {
            let mut env = Env::new(graph.clone(), params.clone(), seed)?;
            let cfg = config.train_config();
            let trained = if kind == AgentKind::ReplayDqn {
                agent::train(&mut env, &cfg, seed)?
            } else {
                agent::train_without_replay(&mut env, &cfg, seed)?
            };
            if let Some(dir) = out_dir {
                let name = format!("network_{experiment}_{axis_value}_{}_{seed}.txt", kind.label());
                let path = dir.join(name);
                let file = std::fs::File::create(&path)?;
                trained.network.save(std::io::BufWriter::new(file))?;
                network_path = Some(path.to_string_lossy().into_owned());
            }
            let mut eval_env = Env::new(graph, params, seed)?;
            agent::evaluate(&trained.network, &mut eval_env, eval_episodes, seed)?
        }
    };

    let record = MetricsRecord {
        scenario_id: scenario_id.clone(),
        experiment: experiment.to_string(),
        axis_value,
        agent: kind,
        seed,
        episodes: eval_episodes,
        mean_return: evaluation.mean_return(),
        mean_eta: evaluation.mean_eta(),
        mean_eta_raw: evaluation.mean_eta_raw(),
        mean_avg_aoi: evaluation.mean_avg_aoi(),
        mean_bandwidth_efficiency: evaluation.mean_bandwidth_efficiency(),
        mean_utilization: evaluation.mean_utilization(),
        ok: true,
        error: None,
    };

    if let Some(dir) = out_dir {
        let manifest = RunManifest {
            scenario_id,
            experiment: experiment.to_string(),
            axis_value,
            agent: kind,
            seed,
            hyperparameters: config.train_config(),
            eval_episodes,
            record: record.clone(),
            network_path,
        };
        let name = format!("manifest_{experiment}_{axis_value}_{}_{seed}.json", kind.label());
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::MalformedArtifact(e.to_string()))?;
        std::fs::write(dir.join(name), text)?;
        let rows = serde_json::to_string(&evaluation.episodes)
            .map_err(|e| Error::MalformedArtifact(e.to_string()))?;
        let name = format!("episodes_{experiment}_{axis_value}_{}_{seed}.json", kind.label());
        std::fs::write(dir.join(name), rows)?;
    }

    Ok(CellRun {
        record,
        evaluation: Some(evaluation),
    })
}

/// Runs the full grid of (axis value, agent, seed) combinations.
/// Failures become failure-marked records rather than aborting the
/// sweep. Runs execute on as many worker threads as the host offers.
pub fn run_experiment(
    base: &ScenarioConfig,
    axis: SweepAxis,
    agents: &[AgentKind],
    out_dir: Option<&Path>,
) -> Result<Vec<MetricsRecord>> {
    if agents.is_empty() {
        return Err(Error::InvalidArgument("no agents selected".into()));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let experiment = axis.label();

    struct Job {
        config: ScenarioConfig,
        axis_value: f64,
        kind: AgentKind,
        seed: u64,
    }
    let mut jobs = Vec::new();
    for &value in &axis.grid() {
        let cell = axis.apply(base, value);
        for &kind in agents {
            for &seed in &cell.experiment.seeds {
                jobs.push(Job {
                    config: cell.clone(),
                    axis_value: value,
                    kind,
                    seed,
                });
            }
        }
    }

    let next = AtomicUsize::new(0);
    let records: Mutex<Vec<MetricsRecord>> = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let job = &jobs[i];
                let record = match run_cell(
                    &job.config,
                    experiment,
                    job.axis_value,
                    job.kind,
                    job.seed,
                    out_dir,
                ) {
                    Ok(run) => run.record,
                    Err(e) => MetricsRecord {
                        scenario_id: job.config.hash().unwrap_or_default(),
                        experiment: experiment.to_string(),
                        axis_value: job.axis_value,
                        agent: job.kind,
                        seed: job.seed,
                        episodes: 0,
                        mean_return: 0.0,
                        mean_eta: 0.0,
                        mean_eta_raw: 0.0,
                        mean_avg_aoi: 0.0,
                        mean_bandwidth_efficiency: 0.0,
                        mean_utilization: 0.0,
                        ok: false,
                        error: Some(e.to_string()),
                    },
                };
                records.lock().unwrap().push(record);
            });
        }
    });

    let mut records = records.into_inner().unwrap();
    records.sort_by(|a, b| {
        a.axis_value
            .total_cmp(&b.axis_value)
            .then_with(|| a.agent.label().cmp(b.agent.label()))
            .then_with(|| a.seed.cmp(&b.seed))
    });
    Ok(records)
}

/// Seed-aggregated statistics for one (axis value, agent) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub axis_value: f64,
    pub agent: AgentKind,
    pub runs: usize,
    pub failed_runs: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_eta: f64,
    pub std_eta: f64,
    pub mean_avg_aoi: f64,
    pub std_avg_aoi: f64,
    pub mean_bandwidth_efficiency: f64,
    pub std_bandwidth_efficiency: f64,
    pub mean_utilization: f64,
    pub std_utilization: f64,
    /// Columns scaled so the experiment maximum is 1.0.
    pub norm_mean_return: f64,
    pub norm_mean_eta: f64,
    pub norm_mean_avg_aoi: f64,
}

/// A whole experiment's aggregated table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub cells: Vec<AggregateCell>,
}

fn mean_std<F: Fn(&MetricsRecord) -> f64>(records: &[&MetricsRecord], f: F) -> (f64, f64) {
    let n = records.len() as f64;
    let mean = records.iter().map(|r| f(r)).sum::<f64>() / n;
    let var = records.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scales a column so its maximum maps to 1.0. Falls back to min-max
/// scaling when the maximum is not positive.
fn normalize_column(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        return values.iter().map(|v| v / max).collect();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return vec![1.0; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Collapses seed-level records into per-cell means and deviations with
/// per-experiment normalized columns.
pub fn aggregate(records: &[MetricsRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::DegenerateInput("no records to aggregate"));
    }
    let experiment = records[0].experiment.clone();

    let mut keys: Vec<(f64, AgentKind)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.axis_value, r.agent)) {
            keys.push((r.axis_value, r.agent));
        }
    }
    keys.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.label().cmp(b.1.label()))
    });

    let mut cells = Vec::with_capacity(keys.len());
    for (axis_value, agent) in keys {
        let ok_records: Vec<&MetricsRecord> = records
            .iter()
            .filter(|r| r.axis_value == axis_value && r.agent == agent && r.ok)
            .collect();
        let failed = records
            .iter()
            .filter(|r| r.axis_value == axis_value && r.agent == agent && !r.ok)
            .count();
        if ok_records.is_empty() {
            return Err(Error::DegenerateInput(
                "aggregation cell has no successful runs",
            ));
        }
        let (mean_return, std_return) = mean_std(&ok_records, |r| r.mean_return);
        let (mean_eta, std_eta) = mean_std(&ok_records, |r| r.mean_eta);
        let (mean_avg_aoi, std_avg_aoi) = mean_std(&ok_records, |r| r.mean_avg_aoi);
        let (mean_bw, std_bw) = mean_std(&ok_records, |r| r.mean_bandwidth_efficiency);
        let (mean_util, std_util) = mean_std(&ok_records, |r| r.mean_utilization);
        cells.push(AggregateCell {
            axis_value,
            agent,
            runs: ok_records.len(),
            failed_runs: failed,
            mean_return,
            std_return,
            mean_eta,
            std_eta,
            mean_avg_aoi,
            std_avg_aoi,
            mean_bandwidth_efficiency: mean_bw,
            std_bandwidth_efficiency: std_bw,
            mean_utilization: mean_util,
            std_utilization: std_util,
            norm_mean_return: 0.0,
            norm_mean_eta: 0.0,
            norm_mean_avg_aoi: 0.0,
        });
    }

    let returns: Vec<f64> = cells.iter().map(|c| c.mean_return).collect();
    let etas: Vec<f64> = cells.iter().map(|c| c.mean_eta).collect();
    let aois: Vec<f64> = cells.iter().map(|c| c.mean_avg_aoi).collect();
    let norm_returns = normalize_column(&returns);
    let norm_etas = normalize_column(&etas);
    let norm_aois = normalize_column(&aois);
    for (i, cell) in cells.iter_mut().enumerate() {
        cell.norm_mean_return = norm_returns[i];
        cell.norm_mean_eta = norm_etas[i];
        cell.norm_mean_avg_aoi = norm_aois[i];
    }

    Ok(Summary { experiment, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(axis: f64, agent: AgentKind, seed: u64, eta: f64, ret: f64) -> MetricsRecord {
        MetricsRecord {
            scenario_id: "test".into(),
            experiment: "gamma".into(),
            axis_value: axis,
            agent,
            seed,
            episodes: 4,
            mean_return: ret,
            mean_eta: eta,
            mean_eta_raw: eta * 100.0,
            mean_avg_aoi: 0.4,
            mean_bandwidth_efficiency: 0.1,
            mean_utilization: 0.2,
            ok: true,
            error: None,
        }
    }

    #[test]
    fn identical_records_have_zero_stddev() {
        let records = vec![
            record(0.4, AgentKind::ReplayDqn, 1, 0.5, 10.0),
            record(0.4, AgentKind::ReplayDqn, 2, 0.5, 10.0),
        ];
        let summary = aggregate(&records).unwrap();
        assert_eq!(summary.cells.len(), 1);
        assert_eq!(summary.cells[0].std_eta, 0.0);
        assert_eq!(summary.cells[0].mean_eta, 0.5);
    }

    #[test]
    fn normalization_maps_max_to_one() {
        let records = vec![
            record(0.3, AgentKind::ReplayDqn, 1, 0.2, 5.0),
            record(0.5, AgentKind::ReplayDqn, 1, 0.4, 20.0),
            record(0.9, AgentKind::ReplayDqn, 1, 0.8, 40.0),
        ];
        let summary = aggregate(&records).unwrap();
        let top = summary
            .cells
            .iter()
            .find(|c| c.axis_value == 0.9)
            .unwrap();
        assert_eq!(top.norm_mean_return, 1.0);
        assert_eq!(top.norm_mean_eta, 1.0);
        let bottom = summary
            .cells
            .iter()
            .find(|c| c.axis_value == 0.3)
            .unwrap();
        assert!((bottom.norm_mean_return - 0.125).abs() < 1e-12);
    }

    #[test]
    fn aggregation_matches_bruteforce_recomputation() {
        let records = vec![
            record(0.4, AgentKind::ReplayDqn, 1, 0.5, 12.0),
            record(0.4, AgentKind::ReplayDqn, 2, 0.7, 18.0),
            record(0.4, AgentKind::Greedy, 1, 0.6, 14.0),
        ];
        let summary = aggregate(&records).unwrap();
        let cell = summary
            .cells
            .iter()
            .find(|c| c.agent == AgentKind::ReplayDqn)
            .unwrap();
        // Brute-force oracle over the raw rows.
        let mean = (0.5 + 0.7) / 2.0;
        let var = ((0.5f64 - mean).powi(2) + (0.7 - mean).powi(2)) / 2.0;
        assert!((cell.mean_eta - mean).abs() < 1e-15);
        assert!((cell.std_eta - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn failed_runs_are_flagged_not_dropped() {
        let mut bad = record(0.4, AgentKind::ReplayDqn, 3, 0.0, 0.0);
        bad.ok = false;
        bad.error = Some("boom".into());
        let records = vec![record(0.4, AgentKind::ReplayDqn, 1, 0.5, 10.0), bad];
        let summary = aggregate(&records).unwrap();
        assert_eq!(summary.cells[0].runs, 1);
        assert_eq!(summary.cells[0].failed_runs, 1);
        // A cell with only failures refuses to aggregate.
        let mut only_bad = record(0.5, AgentKind::Greedy, 1, 0.0, 0.0);
        only_bad.ok = false;
        assert!(aggregate(&[only_bad]).is_err());
    }

    #[test]
    fn axis_application_sets_the_right_field() {
        let base = ScenarioConfig::default();
        let w = SweepAxis::Waypoints.apply(&base, 8.0);
        assert_eq!(w.scenario.waypoint_count, 8);
        let g = SweepAxis::Gamma.apply(&base, 0.5);
        assert_eq!(g.learning.gamma, 0.5);
        let t = SweepAxis::AoiThreshold.apply(&base, 0.9);
        assert_eq!(t.constraints.aoi_threshold, 0.9);
        assert_eq!(SweepAxis::Waypoints.grid(), vec![6.0, 8.0, 10.0, 12.0, 14.0]);
    }
}
