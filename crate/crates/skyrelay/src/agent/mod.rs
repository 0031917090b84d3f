//! Policies and training loops: epsilon-greedy action selection over
//! masked Q-values, the replay-memory DQN trainer, the no-replay
//! baseline trainer, greedy one-step-lookahead rollouts, and evaluation.

pub mod replay;

pub use replay::{Experience, ReplayMemory};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Env;
use crate::error::{Error, Result};
use crate::net::{td_target_masked, MlpQNetwork, TargetNetwork, TrainSample};

// Seed salts so the independent random streams of one run never collide.
const SALT_NET: u64 = 0x6E65_7477_6F72_6B73;
const SALT_EPISODE: u64 = 0x6570_6973_6F64_6573;
const SALT_EXPLORE: u64 = 0x6578_706C_6F72_6521;
const SALT_SAMPLE: u64 = 0x7361_6D70_6C65_7272;
const SALT_EVAL: u64 = 0x6576_616C_7561_7465;

/// Which policy produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// DQN trained with experience replay.
    ReplayDqn,
    /// DQN trained on each transition once, immediately.
    BaselineDqn,
    /// One-step-lookahead maximization of the immediate reward.
    Greedy,
}

impl AgentKind {
    pub fn label(&self) -> &'static str {
        match self {
            AgentKind::ReplayDqn => "replay-dqn",
            AgentKind::BaselineDqn => "baseline-dqn",
            AgentKind::Greedy => "greedy",
        }
    }
}

/// Linearly decaying exploration rate, constant after the decay window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl ExplorationSchedule {
    pub fn new(start: f64, end: f64, decay_steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || end > start {
            return Err(Error::InvalidArgument(format!(
                "epsilon schedule must satisfy 0 <= end <= start <= 1, got {start}..{end}"
            )));
        }
        Ok(Self {
            start,
            end,
            decay_steps,
        })
    }

    pub fn epsilon(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    /// Step size at the end of training; the rate anneals linearly from
    /// `learning_rate` over the nominal step budget.
    pub learning_rate_final: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the nominal step budget over which epsilon decays.
    pub epsilon_decay_fraction: f64,
    /// Gradient steps between target-network synchronizations.
    pub target_sync_period: u32,
    pub hidden_layers: Vec<usize>,
    pub episodes: u32,
    /// Record per-episode action sequences in the log.
    pub record_actions: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be in [0,1], got {}",
                self.gamma
            )));
        }
        if self.batch_size == 0 || self.episodes == 0 || self.target_sync_period == 0 {
            return Err(Error::InvalidArgument(
                "batch size, episodes, and sync period must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// End-of-episode scalars shared by training logs and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub steps: u32,
    pub episode_return: f64,
    /// Normalized running efficiency at episode end.
    pub eta: f64,
    /// Raw efficiency sum over relays (the written double sum).
    pub eta_raw: f64,
    /// Normalized average age at episode end.
    pub avg_aoi: f64,
    /// Delivered plus collected bits per hertz of combined bandwidth per
    /// active slot.
    pub bandwidth_efficiency: f64,
    /// Fraction of device-slots actually served.
    pub utilization: f64,
    pub violations: [u32; 4],
}

/// Reads the episode-end metrics off a finished environment.
pub fn episode_metrics(env: &Env, episode_return: f64, seed: u64) -> EpisodeMetrics {
    let state = env.state();
    let params = env.params();
    let bandwidth = params.channel.bw_uplink + params.channel.bw_mmwave;
    let bandwidth_efficiency = if state.active_rate_slots == 0 {
        0.0
    } else {
        (state.delivered_bits + state.collected_bits)
            / (bandwidth * state.active_rate_slots as f64)
    };
    let device_slots = state.slot as u64 * params.iot_total as u64;
    let utilization = if device_slots == 0 {
        0.0
    } else {
        state.served_device_slots as f64 / device_slots as f64
    };
    let eta_raw: f64 = state.eta_raw().iter().sum();
    // Episode-level efficiency: the written double sum averaged per slot
    // and relay, on the same normalized scale as the state value but
    // unclamped.
    let eta_norm = if state.slot == 0 {
        0.0
    } else {
        eta_raw / (state.slot as f64 * params.uav_count as f64) / params.eta_cap
    };
    EpisodeMetrics {
        seed,
        steps: state.slot,
        episode_return,
        eta: eta_norm,
        eta_raw,
        avg_aoi: state.avg_aoi,
        bandwidth_efficiency,
        utilization,
        violations: state.violation_counts,
    }
}

/// One training episode's log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEpisodeRow {
    pub episode: u32,
    pub metrics: EpisodeMetrics,
    pub epsilon: f64,
    pub mean_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<usize>>,
}

/// Full training log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<TrainEpisodeRow>,
    pub gradient_steps: u64,
    pub replay_capacity: usize,
}

/// A trained network plus its log.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub network: MlpQNetwork,
    pub log: TrainingLog,
}

/// Epsilon-greedy selection over the feasible actions: explore uniformly
/// with probability `epsilon`, otherwise take the feasible argmax with
/// ties broken toward the lowest index.
pub fn select_action<R: Rng>(
    net: &MlpQNetwork,
    features: &[f64],
    mask: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let feasible: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if feasible.is_empty() {
        return Err(Error::InvalidArgument("empty feasibility mask".into()));
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(feasible[rng.gen_range(0..feasible.len())]);
    }
    let q = net.forward(features)?;
    if q.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            expected: mask.len(),
            got: q.len(),
        });
    }
    greedy_over_mask(&q, mask).ok_or_else(|| Error::InvalidArgument("empty mask".into()))
}

/// Feasible argmax with lowest-index tie-breaking.
pub fn greedy_over_mask(q: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&value, &ok)) in q.iter().zip(mask).enumerate() {
        if !ok {
            continue;
        }
        match best {
            Some((_, bv)) if value <= bv => {}
            _ => best = Some((i, value)),
        }
    }
    best.map(|(i, _)| i)
}

/// Trains a DQN with experience replay on the given environment.
pub fn train(env: &mut Env, cfg: &TrainConfig, seed: u64) -> Result<TrainResult> {
    train_impl(env, cfg, seed, true)
}

/// The no-replay baseline: identical loop, but every transition is
/// consumed once, immediately, as a singleton gradient step.
pub fn train_without_replay(env: &mut Env, cfg: &TrainConfig, seed: u64) -> Result<TrainResult> {
    train_impl(env, cfg, seed, false)
}

fn train_impl(env: &mut Env, cfg: &TrainConfig, seed: u64, use_replay: bool) -> Result<TrainResult> {
    cfg.validate()?;
    let mut sizes = vec![env.feature_len()];
    sizes.extend_from_slice(&cfg.hidden_layers);
    sizes.push(env.action_space_size());

    let mut net = MlpQNetwork::new(&sizes, cfg.learning_rate, seed ^ SALT_NET)?;
    let mut target = TargetNetwork::from(&net);
    let mut memory = ReplayMemory::new(cfg.replay_capacity);

    let mut episode_rng = ChaCha8Rng::seed_from_u64(seed ^ SALT_EPISODE);
    let mut explore_rng = ChaCha8Rng::seed_from_u64(seed ^ SALT_EXPLORE);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(seed ^ SALT_SAMPLE);

    let nominal_steps = cfg.episodes as u64 * env.params().horizon as u64;
    let schedule = ExplorationSchedule::new(
        cfg.epsilon_start,
        cfg.epsilon_end,
        (cfg.epsilon_decay_fraction * nominal_steps as f64) as u64,
    )?;

    let mut log = TrainingLog {
        episodes: Vec::with_capacity(cfg.episodes as usize),
        gradient_steps: 0,
        replay_capacity: if use_replay { cfg.replay_capacity } else { 0 },
    };
    let mut global_step = 0u64;
    let mut grad_steps = 0u64;

    for episode in 0..cfg.episodes {
        let episode_seed = episode_rng.gen::<u64>();
        env.reset(episode_seed);
        let mut episode_return = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0u32;
        let mut actions = cfg.record_actions.then(Vec::new);
        let epsilon_at_start = schedule.epsilon(global_step);

        loop {
            let features = env.encode_state();
            let mask = env.feasible_mask();
            let epsilon = schedule.epsilon(global_step);
            let anneal = (global_step as f64 / nominal_steps.max(1) as f64).min(1.0);
            net.learning_rate =
                cfg.learning_rate + (cfg.learning_rate_final - cfg.learning_rate) * anneal;
            let action = select_action(&net, &features, &mask, epsilon, &mut explore_rng)?;
            let outcome = env.step(action)?;
            let next_features = env.encode_state();
            let next_mask = env.feasible_mask();
            episode_return += outcome.reward;
            if let Some(recorded) = actions.as_mut() {
                recorded.push(action);
            }

            if use_replay {
                memory.push(Experience {
                    features,
                    action,
                    reward: outcome.reward,
                    next_features,
                    next_mask,
                    done: outcome.done,
                });
                if memory.len() >= cfg.batch_size {
                    let batch: Vec<TrainSample> = memory
                        .sample(cfg.batch_size, &mut sample_rng)
                        .into_iter()
                        .map(|e| {
                            Ok(TrainSample {
                                features: e.features.clone(),
                                action: e.action,
                                target: td_target_masked(
                                    e.reward,
                                    &e.next_features,
                                    &e.next_mask,
                                    e.done,
                                    &target,
                                    cfg.gamma,
                                )?,
                            })
                        })
                        .collect::<Result<_>>()?;
                    loss_sum += net.sgd_step(&batch)?;
                    loss_count += 1;
                    grad_steps += 1;
                    if grad_steps % cfg.target_sync_period as u64 == 0 {
                        target.sync_from(&net)?;
                    }
                }
            } else {
                let sample = TrainSample {
                    target: td_target_masked(
                        outcome.reward,
                        &next_features,
                        &next_mask,
                        outcome.done,
                        &target,
                        cfg.gamma,
                    )?,
                    features,
                    action,
                };
                loss_sum += net.sgd_step(std::slice::from_ref(&sample))?;
                loss_count += 1;
                grad_steps += 1;
                if grad_steps % cfg.target_sync_period as u64 == 0 {
                    target.sync_from(&net)?;
                }
            }

            global_step += 1;
            if outcome.done {
                break;
            }
        }

        log.episodes.push(TrainEpisodeRow {
            episode,
            metrics: episode_metrics(env, episode_return, episode_seed),
            epsilon: epsilon_at_start,
            mean_loss: if loss_count == 0 {
                0.0
            } else {
                loss_sum / loss_count as f64
            },
            actions,
        });
    }
    log.gradient_steps = grad_steps;

    Ok(TrainResult { network: net, log })
}

/// Summary of a batch of evaluation rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: Vec<EpisodeMetrics>,
}

impl EvalSummary {
    fn mean<F: Fn(&EpisodeMetrics) -> f64>(&self, f: F) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(f).sum::<f64>() / self.episodes.len() as f64
    }

    pub fn mean_return(&self) -> f64 {
        self.mean(|m| m.episode_return)
    }

    pub fn mean_eta(&self) -> f64 {
        self.mean(|m| m.eta)
    }

    pub fn mean_eta_raw(&self) -> f64 {
        self.mean(|m| m.eta_raw)
    }

    pub fn mean_avg_aoi(&self) -> f64 {
        self.mean(|m| m.avg_aoi)
    }

    pub fn mean_bandwidth_efficiency(&self) -> f64 {
        self.mean(|m| m.bandwidth_efficiency)
    }

    pub fn mean_utilization(&self) -> f64 {
        self.mean(|m| m.utilization)
    }
}

/// Greedy (epsilon = 0) rollouts of a trained network. Never touches a
/// replay memory.
pub fn evaluate(
    net: &MlpQNetwork,
    env: &mut Env,
    episodes: u32,
    seed: u64,
) -> Result<EvalSummary> {
    if net.input_len() != env.feature_len() {
        return Err(Error::ShapeMismatch {
            expected: env.feature_len(),
            got: net.input_len(),
        });
    }
    if net.output_len() != env.action_space_size() {
        return Err(Error::ShapeMismatch {
            expected: env.action_space_size(),
            got: net.output_len(),
        });
    }
    let mut episode_rng = ChaCha8Rng::seed_from_u64(seed ^ SALT_EVAL);
    let mut rows = Vec::with_capacity(episodes as usize);
    for _ in 0..episodes {
        let episode_seed = episode_rng.gen::<u64>();
        env.reset(episode_seed);
        let mut episode_return = 0.0;
        loop {
            let features = env.encode_state();
            let mask = env.feasible_mask();
            let q = net.forward(&features)?;
            let action = greedy_over_mask(&q, &mask)
                .ok_or_else(|| Error::InvalidArgument("empty feasibility mask".into()))?;
            let outcome = env.step(action)?;
            episode_return += outcome.reward;
            if outcome.done {
                break;
            }
        }
        rows.push(episode_metrics(env, episode_return, episode_seed));
    }
    Ok(EvalSummary { episodes: rows })
}

/// One-step lookahead: evaluates every feasible joint action on a state
/// clone and returns the one with the largest immediate reward, ties to
/// the lowest index.
pub fn greedy_action(env: &Env) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for index in 0..env.action_space_size() {
        if env.decode_action(index).is_none() {
            continue;
        }
        let outcome = env.peek(index)?;
        match best {
            Some((_, r)) if outcome.reward <= r => {}
            _ => best = Some((index, outcome.reward)),
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidArgument("no feasible action".into()))
}

/// Rollouts of the greedy one-step-lookahead policy.
pub fn evaluate_greedy(env: &mut Env, episodes: u32, seed: u64) -> Result<EvalSummary> {
    let mut episode_rng = ChaCha8Rng::seed_from_u64(seed ^ SALT_EVAL);
    let mut rows = Vec::with_capacity(episodes as usize);
    for _ in 0..episodes {
        let episode_seed = episode_rng.gen::<u64>();
        env.reset(episode_seed);
        let mut episode_return = 0.0;
        loop {
            let action = greedy_action(env)?;
            let outcome = env.step(action)?;
            episode_return += outcome.reward;
            if outcome.done {
                break;
            }
        }
        rows.push(episode_metrics(env, episode_return, episode_seed));
    }
    Ok(EvalSummary { episodes: rows })
}
