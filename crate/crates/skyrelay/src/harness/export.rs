//! Table and figure-dataset export: RFC-4180 CSV, JSON variants, and
//! plain gnuplot-consumable series.

use std::path::{Path, PathBuf};

use crate::agent::AgentKind;
use crate::error::{Error, Result};
use crate::harness::{MetricsRecord, Summary};

/// The per-metric figure datasets emitted for each sweep.
const FIGURE_METRICS: [(&str, fn(&super::AggregateCell) -> (f64, f64)); 5] = [
    ("cumulative-reward", |c| (c.mean_return, c.std_return)),
    ("energy-efficiency", |c| (c.mean_eta, c.std_eta)),
    ("average-aoi", |c| (c.mean_avg_aoi, c.std_avg_aoi)),
    ("bandwidth-efficiency", |c| {
        (c.mean_bandwidth_efficiency, c.std_bandwidth_efficiency)
    }),
    ("uav-utilization", |c| (c.mean_utilization, c.std_utilization)),
];

/// Writes every export artifact for one experiment into `dir`:
/// seed-level records, the aggregate summary, per-metric-per-agent
/// figure CSVs and gnuplot `.dat` series, and the two paper-shaped
/// tables when the axis matches.
pub fn export_all(records: &[MetricsRecord], summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    written.push(write_records_csv(records, dir)?);
    written.push(write_records_json(records, dir)?);
    written.push(write_summary_json(summary, dir)?);
    written.extend(write_figure_datasets(summary, dir)?);
    if summary.experiment == "gamma" {
        written.push(write_gamma_table(summary, dir)?);
    }
    if summary.experiment == "aoi-threshold" {
        written.push(write_aoi_tradeoff_table(summary, dir)?);
    }
    Ok(written)
}

fn write_records_csv(records: &[MetricsRecord], dir: &Path) -> Result<PathBuf> {
    let experiment = records.first().map_or("empty", |r| r.experiment.as_str());
    let path = dir.join(format!("records_{experiment}.csv"));
    let mut writer = csv::Writer::from_path(&path)?;
    writer
        .write_record([
            "experiment",
            "axis_value",
            "agent",
            "seed",
            "episodes",
            "mean_return",
            "mean_eta",
            "mean_eta_raw",
            "mean_avg_aoi",
            "mean_bandwidth_efficiency",
            "mean_utilization",
            "ok",
            "scenario_id",
        ])
        ?;
    for r in records {
        writer
            .write_record([
                r.experiment.clone(),
                r.axis_value.to_string(),
                r.agent.label().to_string(),
                r.seed.to_string(),
                r.episodes.to_string(),
                r.mean_return.to_string(),
                r.mean_eta.to_string(),
                r.mean_eta_raw.to_string(),
                r.mean_avg_aoi.to_string(),
                r.mean_bandwidth_efficiency.to_string(),
                r.mean_utilization.to_string(),
                r.ok.to_string(),
                r.scenario_id.clone(),
            ])
            ?;
    }
    writer.flush()?;
    Ok(path)
}

fn write_records_json(records: &[MetricsRecord], dir: &Path) -> Result<PathBuf> {
    let experiment = records.first().map_or("empty", |r| r.experiment.as_str());
    let path = dir.join(format!("records_{experiment}.json"));
    let text = serde_json::to_string_pretty(records).map_err(|e| Error::MalformedArtifact(e.to_string()))?;
    std::fs::write(&path, text)?;
    Ok(path)
}

fn write_summary_json(summary: &Summary, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("summary_{}.json", summary.experiment));
    let text =
        serde_json::to_string_pretty(summary).map_err(|e| Error::MalformedArtifact(e.to_string()))?;
    std::fs::write(&path, text)?;
    Ok(path)
}

/// One `(axis value, mean, stddev)` series per metric per agent, as both
/// CSV and a space-separated gnuplot `.dat`.
fn write_figure_datasets(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let agents: Vec<AgentKind> = {
        let mut seen = Vec::new();
        for cell in &summary.cells {
            if !seen.contains(&cell.agent) {
                seen.push(cell.agent);
            }
        }
        seen
    };
    for (metric, extract) in FIGURE_METRICS {
        for &agent in &agents {
            let rows: Vec<(f64, f64, f64)> = summary
                .cells
                .iter()
                .filter(|c| c.agent == agent)
                .map(|c| {
                    let (mean, std) = extract(c);
                    (c.axis_value, mean, std)
                })
                .collect();
            if rows.is_empty() {
                continue;
            }
            let stem = format!("{metric}_{}_{}", summary.experiment, agent.label());

            let csv_path = dir.join(format!("{stem}.csv"));
            let mut writer = csv::Writer::from_path(&csv_path)?;
            writer
                .write_record(["axis_value", "mean", "stddev"])
                ?;
            for (axis, mean, std) in &rows {
                writer
                    .write_record([axis.to_string(), mean.to_string(), std.to_string()])
                    ?;
            }
            writer.flush()?;
            written.push(csv_path);

            let dat_path = dir.join(format!("{stem}.dat"));
            let mut text = String::from("# axis_value mean stddev\n");
            for (axis, mean, std) in &rows {
                text.push_str(&format!("{axis} {mean} {std}\n"));
            }
            std::fs::write(&dat_path, text)?;
            written.push(dat_path);
        }
    }
    Ok(written)
}

/// Discount-factor table: average efficiency of the replay and no-replay
/// learners per gamma.
fn write_gamma_table(summary: &Summary, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("table_gamma_effects.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    writer
        .write_record(["gamma", "replay_dqn_mean_eta", "baseline_dqn_mean_eta"])
        ?;
    let mut gammas: Vec<f64> = summary.cells.iter().map(|c| c.axis_value).collect();
    gammas.dedup();
    for gamma in gammas {
        let find = |agent: AgentKind| {
            summary
                .cells
                .iter()
                .find(|c| c.axis_value == gamma && c.agent == agent)
                .map(|c| c.mean_eta.to_string())
                .unwrap_or_default()
        };
        writer
            .write_record([
                gamma.to_string(),
                find(AgentKind::ReplayDqn),
                find(AgentKind::BaselineDqn),
            ])
            ?;
    }
    writer.flush()?;
    Ok(path)
}

/// Freshness-threshold trade-off table: normalized mean reward against
/// normalized mean age.
fn write_aoi_tradeoff_table(summary: &Summary, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("table_aoi_tradeoff.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    writer
        .write_record([
            "aoi_threshold",
            "normalized_mean_reward",
            "normalized_mean_aoi",
        ])
        ?;
    for cell in summary
        .cells
        .iter()
        .filter(|c| c.agent == AgentKind::ReplayDqn)
    {
        writer
            .write_record([
                cell.axis_value.to_string(),
                cell.norm_mean_return.to_string(),
                cell.norm_mean_avg_aoi.to_string(),
            ])
            ?;
    }
    writer.flush()?;
    Ok(path)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::aggregate;

    fn sample_records() -> Vec<MetricsRecord> {
        let mut records = Vec::new();
        for (axis, agent, seed, eta) in [
            (0.4, AgentKind::ReplayDqn, 1u64, 0.48),
            (0.4, AgentKind::ReplayDqn, 2, 0.50),
            (0.4, AgentKind::BaselineDqn, 1, 0.47),
            (0.7, AgentKind::ReplayDqn, 1, 0.52),
            (0.7, AgentKind::ReplayDqn, 2, 0.51),
            (0.7, AgentKind::BaselineDqn, 1, 0.49),
        ] {
            records.push(MetricsRecord {
                scenario_id: "abc".into(),
                experiment: "gamma".into(),
                axis_value: axis,
                agent,
                seed,
                episodes: 10,
                mean_return: eta * 20.0,
                mean_eta: eta,
                mean_eta_raw: eta * 1e4,
                mean_avg_aoi: 0.4 - eta / 10.0,
                mean_bandwidth_efficiency: 0.2,
                mean_utilization: 0.3,
                ok: true,
                error: None,
            });
        }
        records
    }

    #[test]
    fn csv_round_trips_to_identical_values() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample_records();
        let summary = aggregate(&records).unwrap();
        export_all(&records, &summary, dir.path()).unwrap();

        let path = dir.path().join("records_gamma.csv");
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), records.len());
        for (row, record) in rows.iter().zip(&records) {
            assert_eq!(row[1].parse::<f64>().unwrap(), record.axis_value);
            assert_eq!(row[6].parse::<f64>().unwrap(), record.mean_eta);
            assert_eq!(&row[2], record.agent.label());
        }
    }

    #[test]
    fn figure_datasets_follow_naming_convention() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample_records();
        let summary = aggregate(&records).unwrap();
        let written = export_all(&records, &summary, dir.path()).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"energy-efficiency_gamma_replay-dqn.csv".to_string()));
        assert!(names.contains(&"energy-efficiency_gamma_replay-dqn.dat".to_string()));
        assert!(names.contains(&"table_gamma_effects.csv".to_string()));

        // Figure dataset columns: axis, mean, stddev.
        let mut reader = csv::Reader::from_path(
            dir.path().join("energy-efficiency_gamma_replay-dqn.csv"),
        )
        .unwrap();
        assert_eq!(
            reader.headers().unwrap(),
            &csv::StringRecord::from(vec!["axis_value", "mean", "stddev"])
        );
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2); // two gamma grid points present
    }

    #[test]
    fn unwritable_path_reported() {
        let records = sample_records();
        let summary = aggregate(&records).unwrap();
        let result = export_all(&records, &summary, Path::new("/proc/definitely/not/writable"));
        assert!(result.is_err());
    }
}
