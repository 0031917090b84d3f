//! Thin command-line front end over the library: train one
//! configuration, evaluate a stored network, run a sweep, run the
//! validation suites, or replay a logged episode.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use skyrelay::agent::{self, AgentKind};
use skyrelay::env::{trace::EpisodeTrace, Env};
use skyrelay::harness::{self, export, validate, SweepAxis};
use skyrelay::net::MlpQNetwork;
use skyrelay::{Error, ScenarioConfig};

#[derive(Parser)]
#[command(name = "skyrelay", version, about = "Aerial relay trajectory simulator and learner")]
struct Cli {
    /// Scenario configuration file (TOML); defaults to built-in values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for single runs; defaults to the first configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Agent selection where a command supports it.
    #[arg(long, global = true, value_enum)]
    agent: Option<AgentArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentArg {
    Replay,
    Baseline,
    Greedy,
}

impl From<AgentArg> for AgentKind {
    fn from(value: AgentArg) -> Self {
        match value {
            AgentArg::Replay => AgentKind::ReplayDqn,
            AgentArg::Baseline => AgentKind::BaselineDqn,
            AgentArg::Greedy => AgentKind::Greedy,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    Waypoints,
    Gamma,
    AoiThreshold,
}

impl From<AxisArg> for SweepAxis {
    fn from(value: AxisArg) -> Self {
        match value {
            AxisArg::Waypoints => SweepAxis::Waypoints,
            AxisArg::Gamma => SweepAxis::Gamma,
            AxisArg::AoiThreshold => SweepAxis::AoiThreshold,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent on one configuration and store the network.
    Train,
    /// Evaluate a stored network (or the greedy policy) on a configuration.
    Eval {
        /// Stored network file; required unless --agent greedy.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Run a full sweep over one axis and export tables and figure data.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Number of seeds per grid cell (defaults to the configured list).
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Run the invariant and determinism property suites.
    Validate,
    /// Re-run a logged episode and report any divergence.
    Replay {
        /// Episode trace file (JSON lines).
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let config = load_config(&cli.config)?;
    let seed = cli
        .seed
        .or_else(|| config.experiment.seeds.first().copied())
        .unwrap_or(0);

    match cli.command {
        Command::Train => {
            let kind = cli.agent.map(AgentKind::from).unwrap_or(AgentKind::ReplayDqn);
            if kind == AgentKind::Greedy {
                return Err(Error::InvalidArgument(
                    "the greedy policy has nothing to train; use `eval --agent greedy`".into(),
                ));
            }
            std::fs::create_dir_all(&cli.out)?;
            let graph = config.build_graph()?;
            let params = config.env_params()?;
            let mut env = Env::new(graph, params, seed)?;
            let cfg = config.train_config();
            let result = match kind {
                AgentKind::ReplayDqn => agent::train(&mut env, &cfg, seed)?,
                AgentKind::BaselineDqn => agent::train_without_replay(&mut env, &cfg, seed)?,
                AgentKind::Greedy => unreachable!(),
            };
            let network_path = cli.out.join(format!("network_{}_{seed}.txt", kind.label()));
            result
                .network
                .save(BufWriter::new(File::create(&network_path)?))?;
            let log_path = cli.out.join(format!("train_log_{}_{seed}.json", kind.label()));
            std::fs::write(
                &log_path,
                serde_json::to_string_pretty(&result.log)
                    .map_err(|e| Error::MalformedArtifact(e.to_string()))?,
            )?;
            let last = result.log.episodes.last().expect("at least one episode");
            println!(
                "trained {} for {} episodes ({} gradient steps)",
                kind.label(),
                result.log.episodes.len(),
                result.log.gradient_steps
            );
            println!(
                "final episode: return {:.4}, eta {:.4}, avg aoi {:.4}",
                last.metrics.episode_return, last.metrics.eta, last.metrics.avg_aoi
            );
            println!("network: {}", network_path.display());
            println!("log: {}", log_path.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Eval { network } => {
            let kind = cli.agent.map(AgentKind::from).unwrap_or(AgentKind::ReplayDqn);
            let graph = config.build_graph()?;
            let params = config.env_params()?;
            let mut env = Env::new(graph, params, seed)?;
            let episodes = config.experiment.eval_episodes;
            let summary = match kind {
                AgentKind::Greedy => agent::evaluate_greedy(&mut env, episodes, seed)?,
                _ => {
                    let path = network.ok_or_else(|| {
                        Error::InvalidArgument("--network is required unless --agent greedy".into())
                    })?;
                    let net = MlpQNetwork::load(BufReader::new(File::open(path)?))?;
                    agent::evaluate(&net, &mut env, episodes, seed)?
                }
            };
            println!("agent: {}", kind.label());
            println!("episodes: {}", summary.episodes.len());
            println!("mean return:               {:.6}", summary.mean_return());
            println!("mean energy efficiency:    {:.6}", summary.mean_eta());
            println!("mean normalized aoi:       {:.6}", summary.mean_avg_aoi());
            println!(
                "mean bandwidth efficiency: {:.6}",
                summary.mean_bandwidth_efficiency()
            );
            println!("mean uav utilization:      {:.6}", summary.mean_utilization());
            Ok(ExitCode::SUCCESS)
        }

        Command::Sweep { axis, seeds } => {
            let mut config = config;
            if let Some(n) = seeds {
                let mut list = config.experiment.seeds.clone();
                let last = *list.last().unwrap_or(&0);
                while list.len() < n {
                    list.push(last + (list.len() - config.experiment.seeds.len() + 1) as u64);
                }
                list.truncate(n);
                config.experiment.seeds = list;
            }
            let agents: Vec<AgentKind> = match cli.agent {
                Some(a) => vec![a.into()],
                None => vec![AgentKind::ReplayDqn, AgentKind::BaselineDqn, AgentKind::Greedy],
            };
            let axis: SweepAxis = axis.into();
            println!(
                "sweep over {}: {} grid points x {} agents x {} seeds",
                axis.label(),
                axis.grid().len(),
                agents.len(),
                config.experiment.seeds.len()
            );
            let records = harness::run_experiment(&config, axis, &agents, Some(&cli.out))?;
            let failures = records.iter().filter(|r| !r.ok).count();
            let summary = harness::aggregate(&records)?;
            let written = export::export_all(&records, &summary, &cli.out)?;
            for cell in &summary.cells {
                println!(
                    "{} {:>6} | {} | eta {:.4} +/- {:.4} | reward {:.4} | aoi {:.4}",
                    axis.label(),
                    cell.axis_value,
                    cell.agent.label(),
                    cell.mean_eta,
                    cell.std_eta,
                    cell.mean_return,
                    cell.mean_avg_aoi
                );
            }
            println!("{} artifacts written to {}", written.len(), cli.out.display());
            if failures > 0 {
                println!("{failures} runs failed (recorded with failure markers)");
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Validate => {
            let results = validate::run_all(&config)?;
            let mut all_passed = true;
            for check in &results {
                let status = if check.passed { "pass" } else { "FAIL" };
                println!("{status}  {:<28} {}", check.name, check.detail);
                all_passed &= check.passed;
            }
            Ok(if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }

        Command::Replay { trace } => {
            let parsed = EpisodeTrace::read_jsonl(BufReader::new(File::open(trace)?))?;
            let diffs = parsed.replay_diffs()?;
            if diffs.is_empty() {
                println!(
                    "replayed {} slots with zero diffs (seed {})",
                    parsed.steps.len(),
                    parsed.header.episode_seed
                );
                Ok(ExitCode::SUCCESS)
            } else {
                for diff in &diffs {
                    println!("{diff}");
                }
                println!("{} diffs", diffs.len());
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
