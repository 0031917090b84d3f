//! Runnable property suites behind the `validate` subcommand: fast
//! self-checks of the simulator's documented invariants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{select_action, Experience, ReplayMemory};
use crate::aoi::AoiTable;
use crate::channel::{self, LinkGeometry};
use crate::config::ScenarioConfig;
use crate::env::{reward_from_flags, trace, ConstraintFlags, Env, EnvParams, WaypointGraph};
use crate::error::Result;
use crate::net::MlpQNetwork;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: true,
            detail: detail.into(),
        }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: false,
            detail: detail.into(),
        }
    }
}

/// Runs every property suite; all are deterministic and fast.
pub fn run_all(config: &ScenarioConfig) -> Result<Vec<CheckResult>> {
    Ok(vec![
        aoi_recurrence(),
        los_nlos_complementarity(config),
        replay_fifo(),
        replay_uniform_sampling(),
        feasibility_mask_respect(config)?,
        reward_case_table(),
        partition_property()?,
        seed_determinism_replay(config)?,
    ])
}

/// Ages either reset on delivery or increment by exactly one per slot.
fn aoi_recurrence() -> CheckResult {
    const NAME: &str = "aoi-recurrence";
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let waypoints = 6;
    let mut table = AoiTable::new(waypoints);
    let mut previous: Vec<u32> = table.ages().to_vec();
    for t in 1..=400u32 {
        if table.tick(t).is_err() {
            return CheckResult::fail(NAME, format!("tick rejected slot {t}"));
        }
        let mut delivered = vec![false; waypoints];
        for p in 0..waypoints {
            if rng.gen::<f64>() < 0.2 {
                if table.record_delivery(p, t).is_err() {
                    return CheckResult::fail(NAME, format!("delivery rejected at slot {t}"));
                }
                delivered[p] = true;
            }
        }
        for p in 0..waypoints {
            let age = table.age(p);
            let expected_reset = delivered[p] && age == 0;
            let expected_step = !delivered[p] && age == previous[p] + 1;
            if !(expected_reset || expected_step) {
                return CheckResult::fail(
                    NAME,
                    format!(
                        "slot {t} waypoint {p}: age {age}, previous {}, delivered {}",
                        previous[p], delivered[p]
                    ),
                );
            }
        }
        previous = table.ages().to_vec();
    }
    CheckResult::pass(NAME, "400 slots, 6 waypoints, random just-in-time deliveries")
}

/// The two condition probabilities always sum to exactly one.
fn los_nlos_complementarity(config: &ScenarioConfig) -> CheckResult {
    const NAME: &str = "los-nlos-complementarity";
    let params = config.channel_params();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let d = rng.gen_range(0.0..2000.0);
        let h = rng.gen_range(1.0..500.0);
        let geom = match LinkGeometry::new(d, h) {
            Ok(g) => g,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        match channel::los_probability(&geom, &params) {
            Ok((p_los, p_nlos)) => {
                if p_los + p_nlos != 1.0 || !(0.0..=1.0).contains(&p_los) {
                    return CheckResult::fail(
                        NAME,
                        format!("p_los {p_los} + p_nlos {p_nlos} != 1 at d={d}, h={h}"),
                    );
                }
            }
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        }
    }
    CheckResult::pass(NAME, "10000 random geometries")
}

/// Inserting past capacity evicts exactly the oldest entries, in order.
fn replay_fifo() -> CheckResult {
    const NAME: &str = "replay-fifo";
    let capacity = 200;
    let extra = 37;
    let mut memory = ReplayMemory::new(capacity);
    for tag in 0..capacity + extra {
        memory.push(Experience {
            features: vec![tag as f64],
            action: tag,
            reward: 0.0,
            next_features: vec![],
            next_mask: vec![true],
            done: false,
        });
    }
    let tags: Vec<usize> = memory.iter().map(|e| e.action).collect();
    let expected: Vec<usize> = (extra..capacity + extra).collect();
    if tags != expected {
        return CheckResult::fail(NAME, "eviction order mismatch".to_string());
    }
    CheckResult::pass(NAME, format!("{} inserts into capacity {capacity}", capacity + extra))
}

/// Sampling frequencies from a full memory stay within five standard
/// deviations of uniform.
fn replay_uniform_sampling() -> CheckResult {
    const NAME: &str = "replay-uniform-sampling";
    let capacity = 200;
    let draws = 100_000usize;
    let mut memory = ReplayMemory::new(capacity);
    for tag in 0..capacity {
        memory.push(Experience {
            features: vec![],
            action: tag,
            reward: 0.0,
            next_features: vec![],
            next_mask: vec![true],
            done: false,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = vec![0u32; capacity];
    for sample in memory.sample(draws, &mut rng) {
        counts[sample.action] += 1;
    }
    let p = 1.0 / capacity as f64;
    let expected = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for (slot, &count) in counts.iter().enumerate() {
        if (count as f64 - expected).abs() > 5.0 * sigma {
            return CheckResult::fail(
                NAME,
                format!("slot {slot}: {count} draws vs expected {expected:.1}"),
            );
        }
    }
    CheckResult::pass(NAME, format!("{draws} draws over {capacity} slots"))
}

/// Epsilon-greedy selection never returns a masked action, at any
/// exploration rate.
fn feasibility_mask_respect(config: &ScenarioConfig) -> Result<CheckResult> {
    const NAME: &str = "feasibility-mask-respect";
    let mut small = config.clone();
    small.scenario.waypoint_count = 6;
    small.scenario.uav_count = 2;
    let graph = small.build_graph()?;
    let params = small.env_params()?;
    let mut env = Env::new(graph, params, 23)?;
    let sizes = [env.feature_len(), 16, env.action_space_size()];
    let net = MlpQNetwork::new(&sizes, 1e-3, 23)?;
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut checked = 0usize;
    for episode in 0..5u64 {
        env.reset(1000 + episode);
        loop {
            let features = env.encode_state();
            let mask = env.feasible_mask();
            let epsilon = [0.0, 0.25, 0.5, 0.75, 1.0][checked % 5];
            let action = select_action(&net, &features, &mask, epsilon, &mut rng)?;
            if !mask[action] {
                return Ok(CheckResult::fail(
                    NAME,
                    format!("masked action {action} selected at epsilon {epsilon}"),
                ));
            }
            checked += 1;
            if env.step(action)?.done {
                break;
            }
        }
    }
    Ok(CheckResult::pass(NAME, format!("{checked} selections")))
}

/// The reward's case analysis over every constraint truth assignment,
/// mid-episode and at the episode end, against a frozen table.
fn reward_case_table() -> CheckResult {
    const NAME: &str = "reward-case-table";
    let alpha1 = 1.0;
    let eta = 0.4;
    for bits in 0..16u8 {
        let flags = ConstraintFlags {
            disjoint_visits: bits & 1 != 0,
            coverage: bits & 2 != 0,
            energy_efficiency: bits & 4 != 0,
            freshness: bits & 8 != 0,
        };
        for end in [false, true] {
            let got = reward_from_flags(&flags, eta, alpha1, end);
            // Frozen expectations: hard violations dominate, then the
            // end-of-episode coverage gate, then the freshness zero,
            // then the efficiency payout.
            let expected = if !flags.disjoint_visits || !flags.energy_efficiency {
                -alpha1
            } else if end && !flags.coverage {
                -alpha1
            } else if !flags.freshness {
                0.0
            } else {
                alpha1 * eta
            };
            if got != expected {
                return CheckResult::fail(
                    NAME,
                    format!("flags {flags:?} end={end}: got {got}, expected {expected}"),
                );
            }
            // A positive reward certifies the binding constraints hold.
            if got > 0.0
                && !(flags.disjoint_visits
                    && flags.energy_efficiency
                    && flags.freshness
                    && (!end || flags.coverage))
            {
                return CheckResult::fail(NAME, format!("positive reward leaked at {flags:?}"));
            }
        }
    }
    CheckResult::pass(NAME, "all 16 flag assignments, mid-episode and terminal")
}

/// Episodes that end with every constraint satisfied partition the
/// waypoints: visits cover everything and overlap only at the station.
fn partition_property() -> Result<CheckResult> {
    const NAME: &str = "partition-property";
    // Two relays on a five-point star of two arms; scripted tours that
    // split the arms and return to backhaul range.
    let graph = WaypointGraph::new(
        vec![
            (0.0, 0.0),
            (250.0, 0.0),
            (500.0, 0.0),
            (-250.0, 0.0),
            (-500.0, 0.0),
        ],
        &[(0, 1), (1, 2), (0, 3), (3, 4)],
        0,
        vec![0, 3, 3, 2, 2],
    )?;
    let mut params = relaxed_params(2);
    params.height_range = (150.0, 150.0);
    let mut env_seed = None;
    for seed in 0..20_000u64 {
        let env = Env::new(graph.clone(), params.clone(), seed)?;
        if env.state().positions == vec![1, 3] {
            env_seed = Some(seed);
            break;
        }
    }
    let Some(seed) = env_seed else {
        return Ok(CheckResult::fail(NAME, "no seed with the scripted starts"));
    };
    let mut env = Env::new(graph, params, seed)?;
    let tour: [(usize, usize); 4] = [(2, 4), (2, 4), (1, 3), (1, 3)];
    let mut last_flags = None;
    for (a, b) in tour {
        let index = (0..env.action_space_size())
            .find(|&i| {
                env.decode_action(i)
                    .is_some_and(|ja| ja.destinations == vec![a, b])
            })
            .expect("scripted move must be feasible");
        let outcome = env.step(index)?;
        let done = outcome.done;
        last_flags = Some((outcome.flags, done));
        if done {
            break;
        }
    }
    let (flags, done) = last_flags.unwrap();
    if !done || !flags.all() {
        return Ok(CheckResult::fail(
            NAME,
            format!("scripted tour did not end accepting: flags {flags:?}, done {done}"),
        ));
    }
    let state = env.state();
    let station_bit = 1u64 << env.graph().base_station();
    let union = state.visited.iter().fold(0u64, |acc, &v| acc | v);
    let full = (1u64 << env.graph().len()) - 1;
    let overlap = state.visited[0] & state.visited[1];
    if union != full || overlap != station_bit {
        return Ok(CheckResult::fail(
            NAME,
            format!("union {union:b} overlap {overlap:b}"),
        ));
    }
    Ok(CheckResult::pass(
        NAME,
        "accepting two-relay episode partitions the graph",
    ))
}

fn relaxed_params(uav_count: usize) -> EnvParams {
    let mut config = ScenarioConfig::default();
    config.scenario.uav_count = uav_count;
    config.constraints.eta_threshold = 0.0;
    config.constraints.aoi_threshold = 1.0;
    let mut params = config.env_params().expect("default params are valid");
    params.horizon = 30;
    params
}

/// A logged episode replays from its seed with zero diffs.
fn seed_determinism_replay(config: &ScenarioConfig) -> Result<CheckResult> {
    const NAME: &str = "seed-determinism-replay";
    let mut small = config.clone();
    small.scenario.waypoint_count = 8;
    small.scenario.uav_count = 2;
    small.scenario.horizon_slots = 40;
    let graph = small.build_graph()?;
    let params = small.env_params()?;
    let hash = small.hash()?;
    let mut env = Env::new(graph, params, 31)?;
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let trace = trace::run_episode(&mut env, 31, &hash, |env| {
        let mask = env.feasible_mask();
        let feasible: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        Ok(feasible[rng.gen_range(0..feasible.len())])
    })?;
    let diffs = trace.replay_diffs()?;
    if !diffs.is_empty() {
        return Ok(CheckResult::fail(
            NAME,
            format!("{} diffs, first: {}", diffs.len(), diffs[0]),
        ));
    }
    Ok(CheckResult::pass(
        NAME,
        format!("{}-slot random episode replayed bit-identical", trace.steps.len()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_on_the_default_config() {
        let config = ScenarioConfig::default();
        let results = run_all(&config).unwrap();
        assert_eq!(results.len(), 8);
        for check in &results {
            assert!(check.passed, "{} failed: {}", check.name, check.detail);
        }
    }
}
