//! Temporary calibration probe (not a deliverable example).

use skyrelay::agent::{self, AgentKind};
use skyrelay::env::Env;
use skyrelay::ScenarioConfig;

fn graph_scan() {
    for seed in 0..400u64 {
        let mut config = ScenarioConfig::default();
        config.experiment.graph_seed = seed;
        let Ok(graph) = config.build_graph() else { continue };
        let max_deg = graph.max_degree();
        if max_deg > 6 {
            continue;
        }
        let mut counts: Vec<u32> = (0..graph.len()).map(|p| graph.iot_count(p)).collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let top3: u32 = counts.iter().take(3).sum();
        println!(
            "seed {seed}: max_degree {max_deg}, actions {}, top3 devices {top3}, counts {counts:?}",
            (max_deg + 1usize).pow(3)
        );
    }
}

fn main() {
    if std::env::var("GRAPHSCAN").is_ok() {
        graph_scan();
        return;
    }
    let episodes: u32 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(30);
    let seeds: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2);

    let mut config = ScenarioConfig::default();
    config.learning.episodes = episodes;
    config.experiment.eval_episodes = episodes;
    if let Ok(te) = std::env::var("TRAINEP") {
        config.learning.episodes = te.parse().unwrap();
    }
    if let Ok(lr) = std::env::var("LR") {
        config.learning.learning_rate = lr.parse().unwrap();
    }
    if let Ok(sync) = std::env::var("SYNC") {
        config.learning.target_sync_period = sync.parse().unwrap();
    }
    if let Ok(frac) = std::env::var("EPSFRAC") {
        config.learning.epsilon_decay_fraction = frac.parse().unwrap();
    }
    if let Ok(end) = std::env::var("EPSEND") {
        config.learning.epsilon_end = end.parse().unwrap();
    }
    let only: Option<String> = std::env::var("ONLY").ok();
    let graph = config.build_graph().unwrap();
    let params = config.env_params().unwrap();
    let cfg = config.train_config();

    for kind in [AgentKind::ReplayDqn, AgentKind::BaselineDqn, AgentKind::Greedy] {
        if only.as_deref().is_some_and(|o| o != kind.label()) {
            continue;
        }
        let mut etas = Vec::new();
        let mut aois = Vec::new();
        let mut returns = Vec::new();
        let mut raws = Vec::new();
        for seed in 101..101 + seeds {
            let start = std::time::Instant::now();
            let summary = match kind {
                AgentKind::Greedy => {
                    let mut env = Env::new(graph.clone(), params.clone(), seed).unwrap();
                    agent::evaluate_greedy(&mut env, config.experiment.eval_episodes, seed).unwrap()
                }
                _ => {
                    let mut env = Env::new(graph.clone(), params.clone(), seed).unwrap();
                    let trained = if kind == AgentKind::ReplayDqn {
                        agent::train(&mut env, &cfg, seed).unwrap()
                    } else {
                        agent::train_without_replay(&mut env, &cfg, seed).unwrap()
                    };
                    if std::env::var("TRACE").is_ok() {
                        let mut env = Env::new(graph.clone(), params.clone(), 777).unwrap();
                        env.reset(777);
                        let devs: Vec<u32> = (0..graph.len()).map(|p| graph.iot_count(p)).collect();
                        println!("    devices: {devs:?}");
                        let mut positions = vec![env.state().positions.clone()];
                        loop {
                            let q = trained.network.forward(&env.encode_state()).unwrap();
                            let mask = env.feasible_mask();
                            let a = skyrelay::agent::greedy_over_mask(&q, &mask).unwrap();
                            let out = env.step(a).unwrap();
                            positions.push(env.state().positions.clone());
                            if out.done || env.state().slot > 40 {
                                break;
                            }
                        }
                        for (t, p) in positions.iter().enumerate() {
                            print!("{t}:{p:?} ");
                        }
                        println!();
                    }
                    let rows = &trained.log.episodes;
                    let chunk = (rows.len() / 5).max(1);
                    let prog: Vec<String> = rows
                        .chunks(chunk)
                        .map(|c| {
                            let m = c.iter().map(|r| r.metrics.episode_return).sum::<f64>()
                                / c.len() as f64;
                            format!("{m:.0}")
                        })
                        .collect();
                    println!("    train returns: [{}]", prog.join(", "));
                    let mut eval_env = Env::new(graph.clone(), params.clone(), seed).unwrap();
                    agent::evaluate(
                        &trained.network,
                        &mut eval_env,
                        config.experiment.eval_episodes,
                        seed,
                    )
                    .unwrap()
                }
            };
            println!(
                "  {} seed {seed}: eta {:.4} raw {:.1} aoi {:.4} return {:.2} util {:.3} bw {:.4} ({:.1}s)",
                kind.label(),
                summary.mean_eta(),
                summary.mean_eta_raw(),
                summary.mean_avg_aoi(),
                summary.mean_return(),
                summary.mean_utilization(),
                summary.mean_bandwidth_efficiency(),
                start.elapsed().as_secs_f64()
            );
            etas.push(summary.mean_eta());
            aois.push(summary.mean_avg_aoi());
            returns.push(summary.mean_return());
            raws.push(summary.mean_eta_raw());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "{}: eta {:.4} raw {:.1} aoi {:.4} return {:.2}\n",
            kind.label(),
            mean(&etas),
            mean(&raws),
            mean(&aois),
            mean(&returns)
        );
    }
}
