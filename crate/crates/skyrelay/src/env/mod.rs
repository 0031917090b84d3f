//! The decision process the learner interacts with: joint relay
//! positions on a waypoint graph, per-slot channel realizations, energy
//! and age bookkeeping, constraint checks, and the shaped reward.

mod graph;
pub mod trace;

pub use graph::WaypointGraph;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aoi::AoiTable;
use crate::channel::{self, ChannelKind, ChannelParams, LinkGeometry, UplinkPath};
use crate::energy::{self, EnergyLedger, PropulsionParams, SlotEntry};
use crate::error::{Error, Result};

/// Everything the simulator needs beyond the graph itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub channel: ChannelParams,
    /// Propulsion profile while moving between waypoints.
    pub cruise: PropulsionParams,
    /// Propulsion profile while holding position; the velocity floor
    /// keeps the induced-power term finite.
    pub hover: PropulsionParams,
    pub uav_count: usize,
    /// Area bounds used for coordinate normalization, m.
    pub area: (f64, f64),
    /// Altitudes are sampled uniformly from this range at reset, m.
    pub height_range: (f64, f64),
    /// Episode horizon in slots.
    pub horizon: u32,
    /// Device population sharing the uplink bandwidth.
    pub iot_total: u32,
    /// Raw per-slot efficiency that maps to a normalized value of 1.
    pub eta_cap: f64,
    /// Slots in the recent window behind the instantaneous efficiency
    /// used for the state, the reward, and the efficiency constraint.
    pub eta_window: u32,
    /// Minimum normalized efficiency; below it the hard penalty applies.
    pub eta_threshold: f64,
    /// Maximum normalized average age; above it the soft penalty applies.
    pub aoi_threshold: f64,
    /// Reward coefficient and penalty magnitude.
    pub alpha1: f64,
    /// Account backhaul energy as transmit power times slot duration
    /// instead of power times rate. Off by default.
    pub backhaul_power_duration: bool,
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.cruise.validate()?;
        self.hover.validate()?;
        if self.uav_count == 0 {
            return Err(Error::InvalidArgument("need at least one relay".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if self.eta_cap <= 0.0 {
            return Err(Error::InvalidArgument("eta_cap must be positive".into()));
        }
        if self.eta_window == 0 {
            return Err(Error::InvalidArgument("eta_window must be positive".into()));
        }
        if self.height_range.0 <= 0.0 || self.height_range.1 < self.height_range.0 {
            return Err(Error::InvalidArgument("bad height range".into()));
        }
        Ok(())
    }
}

/// Truth values of the four trajectory constraints, in statement order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintFlags {
    /// Visited sets pairwise intersect only at the station and no two
    /// relays sit on the same non-station waypoint.
    pub disjoint_visits: bool,
    /// Every waypoint has been visited by some relay.
    pub coverage: bool,
    /// Normalized efficiency meets its minimum threshold.
    pub energy_efficiency: bool,
    /// Normalized average age is within its threshold.
    pub freshness: bool,
}

impl ConstraintFlags {
    pub fn all(&self) -> bool {
        self.disjoint_visits && self.coverage && self.energy_efficiency && self.freshness
    }

    pub fn as_array(&self) -> [bool; 4] {
        [
            self.disjoint_visits,
            self.coverage,
            self.energy_efficiency,
            self.freshness,
        ]
    }
}

/// One joint move: a destination waypoint per relay; staying put encodes
/// hovering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointAction {
    pub destinations: Vec<usize>,
}

/// What one simulated slot produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub slot: u32,
    pub reward: f64,
    /// Normalized running efficiency after the step.
    pub eta: f64,
    /// Normalized average age after the step.
    pub avg_aoi: f64,
    pub flags: ConstraintFlags,
    pub done: bool,
}

/// Joint simulator state. Kept compact so candidate actions can be
/// evaluated on a clone without copying episode history.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub slot: u32,
    /// Current waypoint per relay.
    pub positions: Vec<usize>,
    /// Fixed altitude per relay for this episode.
    pub heights: Vec<f64>,
    /// Visited-waypoint bitmask per relay.
    pub visited: Vec<u64>,
    /// Collection slot of undelivered data per relay per waypoint.
    pending: Vec<Vec<Option<u32>>>,
    pub aoi: AoiTable,
    /// Cumulative raw efficiency sum per relay.
    eta_raw: Vec<f64>,
    /// Relay-averaged efficiency terms of the most recent slots.
    recent_terms: std::collections::VecDeque<f64>,
    /// Normalized recent efficiency.
    pub eta: f64,
    /// Normalized running average age.
    pub avg_aoi: f64,
    /// Total bits handed to the ground station.
    pub delivered_bits: f64,
    /// Total bits collected from devices.
    pub collected_bits: f64,
    /// Slots in which any link carried a positive rate.
    pub active_rate_slots: u32,
    /// Sum over slots of devices at relay-occupied waypoints.
    pub served_device_slots: u64,
    /// Per-constraint violation counts over the episode so far.
    pub violation_counts: [u32; 4],
    rng: ChaCha8Rng,
}

impl WorldState {
    /// Raw cumulative efficiency sums, one per relay.
    pub fn eta_raw(&self) -> &[f64] {
        &self.eta_raw
    }
}

/// The environment: a waypoint graph, physics parameters, the mutable
/// world state, and the per-slot energy ledger for the live episode.
#[derive(Debug, Clone)]
pub struct Env {
    graph: WaypointGraph,
    params: EnvParams,
    state: WorldState,
    ledger: EnergyLedger,
    /// Per-relay action radix: hover plus one slot per possible neighbor.
    radix: usize,
}

impl Env {
    /// Builds an environment over a fixed graph and resets it with the
    /// given episode seed.
    pub fn new(graph: WaypointGraph, params: EnvParams, episode_seed: u64) -> Result<Self> {
        params.validate()?;
        if params.uav_count > graph.len() {
            return Err(Error::InvalidArgument(format!(
                "{} relays cannot start on {} distinct waypoints",
                params.uav_count,
                graph.len()
            )));
        }
        if graph.len() > 64 {
            return Err(Error::InvalidArgument(
                "at most 64 waypoints are supported".into(),
            ));
        }
        let radix = graph.max_degree() + 1;
        let uav_count = params.uav_count;
        let mut env = Self {
            state: WorldState {
                slot: 0,
                positions: Vec::new(),
                heights: Vec::new(),
                visited: Vec::new(),
                pending: Vec::new(),
                aoi: AoiTable::new(graph.len()),
                eta_raw: Vec::new(),
                recent_terms: std::collections::VecDeque::new(),
                eta: 0.0,
                avg_aoi: 0.0,
                delivered_bits: 0.0,
                collected_bits: 0.0,
                active_rate_slots: 0,
                served_device_slots: 0,
                violation_counts: [0; 4],
                rng: ChaCha8Rng::seed_from_u64(episode_seed),
            },
            ledger: EnergyLedger::new(uav_count),
            graph,
            params,
            radix,
        };
        env.reset(episode_seed);
        Ok(env)
    }

    /// Starts a fresh episode: relays on distinct uniformly drawn
    /// waypoints, altitudes redrawn, age table and ledgers zeroed.
    pub fn reset(&mut self, episode_seed: u64) {
        let n = self.graph.len();
        let u = self.params.uav_count;
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);

        let heights = (0..u)
            .map(|_| rng.gen_range(self.params.height_range.0..=self.params.height_range.1))
            .collect();

        let mut positions: Vec<usize> = Vec::with_capacity(u);
        while positions.len() < u {
            let p = rng.gen_range(0..n);
            if !positions.contains(&p) {
                positions.push(p);
            }
        }

        let station = self.graph.base_station();
        let mut visited = vec![0u64; u];
        let mut pending = vec![vec![None; n]; u];
        for (i, &p) in positions.iter().enumerate() {
            visited[i] |= 1 << station;
            visited[i] |= 1 << p;
            pending[i][p] = Some(0);
        }

        self.state = WorldState {
            slot: 0,
            positions,
            heights,
            visited,
            pending,
            aoi: AoiTable::new(n),
            eta_raw: vec![0.0; u],
            recent_terms: std::collections::VecDeque::with_capacity(
                self.params.eta_window as usize,
            ),
            eta: 0.0,
            avg_aoi: 0.0,
            delivered_bits: 0.0,
            collected_bits: 0.0,
            active_rate_slots: 0,
            served_device_slots: 0,
            violation_counts: [0; 4],
            rng,
        };
        self.ledger = EnergyLedger::new(u);
    }

    pub fn graph(&self) -> &WaypointGraph {
        &self.graph
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    /// Size of the fixed joint-action index space for this scenario.
    pub fn action_space_size(&self) -> usize {
        self.radix.pow(self.params.uav_count as u32)
    }

    /// Length of the state feature vector.
    pub fn feature_len(&self) -> usize {
        2 * self.params.uav_count + 4
    }

    /// Decodes a joint-action index against the current state. Returns
    /// `None` when any per-relay slot exceeds that relay's neighbor count
    /// or the joint move would co-locate two relays off the station.
    pub fn decode_action(&self, index: usize) -> Option<JointAction> {
        decode_action(&self.graph, self.radix, &self.state.positions, index)
    }

    /// Feasibility of every joint-action index in the current state.
    pub fn feasible_mask(&self) -> Vec<bool> {
        (0..self.action_space_size())
            .map(|i| self.decode_action(i).is_some())
            .collect()
    }

    /// All feasible joint actions in the current state, in index order.
    pub fn enumerate_actions(&self) -> Vec<JointAction> {
        (0..self.action_space_size())
            .filter_map(|i| self.decode_action(i))
            .collect()
    }

    /// Fixed-length feature vector in `[0, 1]^d`: per-relay normalized
    /// coordinates, normalized target (station) coordinates, normalized
    /// efficiency, normalized average age.
    pub fn encode_state(&self) -> Vec<f64> {
        let mut features = Vec::with_capacity(self.feature_len());
        let (ax, ay) = self.params.area;
        for &p in &self.state.positions {
            let (x, y) = self.graph.point(p);
            features.push((x / ax).clamp(0.0, 1.0));
            features.push((y / ay).clamp(0.0, 1.0));
        }
        let (bx, by) = self.graph.point(self.graph.base_station());
        features.push((bx / ax).clamp(0.0, 1.0));
        features.push((by / ay).clamp(0.0, 1.0));
        features.push(self.state.eta.clamp(0.0, 1.0));
        features.push(self.state.avg_aoi.clamp(0.0, 1.0));
        features
    }

    /// Current truth values of the four constraints.
    pub fn check_constraints(&self) -> ConstraintFlags {
        check_constraints(&self.graph, &self.params, &self.state)
    }

    /// Applies one slot of simulation for the given joint-action index.
    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome> {
        let action = self.decode_action(action_index).ok_or_else(|| {
            Error::InfeasibleAction(format!(
                "index {action_index} infeasible from {:?}",
                self.state.positions
            ))
        })?;
        let (outcome, rows) = transition(&self.graph, &self.params, &mut self.state, &action)?;
        for (u, row) in rows.into_iter().enumerate() {
            self.ledger.record(u, row);
        }
        Ok(outcome)
    }

    /// Evaluates an action's immediate outcome on a throwaway copy of the
    /// state (same RNG stream position, so a committed step matches).
    pub fn peek(&self, action_index: usize) -> Result<StepOutcome> {
        let action = self.decode_action(action_index).ok_or_else(|| {
            Error::InfeasibleAction(format!(
                "index {action_index} infeasible from {:?}",
                self.state.positions
            ))
        })?;
        let mut scratch = self.state.clone();
        let (outcome, _) = transition(&self.graph, &self.params, &mut scratch, &action)?;
        Ok(outcome)
    }
}

fn decode_action(
    graph: &WaypointGraph,
    radix: usize,
    positions: &[usize],
    index: usize,
) -> Option<JointAction> {
    let mut remaining = index;
    let mut destinations = Vec::with_capacity(positions.len());
    for &pos in positions {
        let digit = remaining % radix;
        remaining /= radix;
        if digit == 0 {
            destinations.push(pos);
        } else {
            let neighbors = graph.neighbors(pos);
            if digit - 1 >= neighbors.len() {
                return None;
            }
            destinations.push(neighbors[digit - 1]);
        }
    }
    if remaining != 0 {
        return None;
    }
    // Two relays may share a destination only at the station.
    let station = graph.base_station();
    for i in 0..destinations.len() {
        for j in (i + 1)..destinations.len() {
            if destinations[i] == destinations[j] && destinations[i] != station {
                return None;
            }
        }
    }
    Some(JointAction { destinations })
}

/// Constraint evaluation on a state. Coverage reports progress
/// mid-episode; the reward logic decides when it binds.
pub fn check_constraints(
    graph: &WaypointGraph,
    params: &EnvParams,
    state: &WorldState,
) -> ConstraintFlags {
    let station = graph.base_station();
    let station_bit = 1u64 << station;

    let mut disjoint = true;
    for i in 0..state.visited.len() {
        for j in (i + 1)..state.visited.len() {
            if state.visited[i] & state.visited[j] & !station_bit != 0 {
                disjoint = false;
            }
            if state.positions[i] == state.positions[j] && state.positions[i] != station {
                disjoint = false;
            }
        }
    }

    let all_mask = if graph.len() == 64 {
        u64::MAX
    } else {
        (1u64 << graph.len()) - 1
    };
    let coverage = state.visited.iter().fold(0u64, |acc, &v| acc | v) == all_mask;

    ConstraintFlags {
        disjoint_visits: disjoint,
        coverage,
        energy_efficiency: state.eta >= params.eta_threshold,
        freshness: state.avg_aoi <= params.aoi_threshold,
    }
}

/// The reward case table. Hard violations (overlapping trajectories,
/// efficiency floor) always penalize; incomplete coverage penalizes only
/// on the episode's final slot; an age violation alone zeroes the reward;
/// otherwise the reward is the scaled normalized efficiency.
pub fn reward_from_flags(
    flags: &ConstraintFlags,
    eta: f64,
    alpha1: f64,
    end_of_episode: bool,
) -> f64 {
    if !flags.disjoint_visits || !flags.energy_efficiency {
        return -alpha1;
    }
    if end_of_episode && !flags.coverage {
        return -alpha1;
    }
    if !flags.freshness {
        return 0.0;
    }
    alpha1 * eta
}

/// Advances the state by one slot under `action`, returning the outcome
/// and the per-relay ledger rows for the slot.
fn transition(
    graph: &WaypointGraph,
    params: &EnvParams,
    state: &mut WorldState,
    action: &JointAction,
) -> Result<(StepOutcome, Vec<SlotEntry>)> {
    let uav_count = params.uav_count;
    if action.destinations.len() != uav_count {
        return Err(Error::ShapeMismatch {
            expected: uav_count,
            got: action.destinations.len(),
        });
    }
    let t = state.slot + 1;
    state.aoi.tick(t)?;
    let station = graph.base_station();
    // The station's own point is always fresh at the station.
    state.aoi.record_delivery_from(station, t)?;

    // Movement, visit bookkeeping, and propulsion energy.
    let mut mobility = vec![0.0; uav_count];
    for u in 0..uav_count {
        let from = state.positions[u];
        let to = action.destinations[u];
        if to == from {
            mobility[u] = energy::propulsion_power(&params.hover)?;
        } else {
            if !graph.is_adjacent(from, to) {
                return Err(Error::InfeasibleAction(format!(
                    "waypoints {from} and {to} are not linked"
                )));
            }
            let horizontal = graph.horizontal_distance(from, to);
            let distance = horizontal.hypot(state.heights[u]);
            mobility[u] = energy::mobility_energy(distance, &params.cruise)?;
            state.positions[u] = to;
            state.visited[u] |= 1 << to;
        }
        // Just-in-time collection at the occupied waypoint.
        state.pending[u][state.positions[u]] = Some(t);
    }

    // Each waypoint's devices are served by the lowest-indexed relay
    // occupying it; other relays' devices are interference.
    let mut server_of = vec![None; graph.len()];
    for u in 0..uav_count {
        let p = state.positions[u];
        if server_of[p].is_none() {
            server_of[p] = Some(u);
        }
    }

    // Devices at a relay's waypoint are its serving links. The shared
    // uplink band is split equally over the whole device population, so
    // concurrent device transmissions ride orthogonal slices and the
    // interference sum is empty; each link still draws its own channel
    // condition.
    let mut uplink = vec![0.0; uav_count];
    let mut served_devices = 0u64;
    for u in 0..uav_count {
        let p = state.positions[u];
        if server_of[p] != Some(u) {
            continue;
        }
        let n_serving = graph.iot_count(p);
        if n_serving == 0 {
            continue;
        }
        served_devices += n_serving as u64;
        let serving_geom = LinkGeometry::new(0.0, state.heights[u])?;
        for _ in 0..n_serving {
            let path = UplinkPath {
                geometry: serving_geom,
                kind: sample_kind(&serving_geom, &params.channel, &mut state.rng)?,
            };
            let sinr = channel::uplink_sinr(&path, &[], &params.channel)?;
            uplink[u] += channel::uplink_rate(sinr, params.iot_total as usize, &params.channel)?;
        }
    }

    // Backhaul contact, transmission energy, and deliveries.
    let mut backhaul = vec![0.0; uav_count];
    let mut backhaul_energy = vec![0.0; uav_count];
    for u in 0..uav_count {
        let p = state.positions[u];
        let geom = LinkGeometry::new(graph.horizontal_distance(p, station), state.heights[u])?;
        if geom.slant_distance <= params.channel.backhaul_range {
            let rate = channel::backhaul_rate(&geom, &params.channel)?;
            backhaul[u] = rate;
            backhaul_energy[u] = if params.backhaul_power_duration {
                params.channel.tx_power_uav
            } else {
                energy::backhaul_energy(rate, &params.channel)?
            };
            state.delivered_bits += rate;
            for wp in 0..graph.len() {
                if let Some(origin) = state.pending[u][wp].take() {
                    state.aoi.record_delivery_from(wp, origin)?;
                }
            }
            // The occupied waypoint stays pending-fresh after handover.
            state.pending[u][p] = Some(t);
        }
    }
    state.aoi.finalize_slot();

    // Ledger rows and the running efficiency.
    let mut rows = Vec::with_capacity(uav_count);
    for u in 0..uav_count {
        let entry = SlotEntry {
            backhaul_rate: backhaul[u],
            uplink_rate: uplink[u],
            backhaul_energy: backhaul_energy[u],
            mobility_energy: mobility[u],
        };
        state.eta_raw[u] += energy::slot_efficiency(&entry, graph.len())?;
        state.collected_bits += uplink[u];
        rows.push(entry);
    }

    state.slot = t;
    let slot_term = rows
        .iter()
        .map(|r| energy::slot_efficiency(r, graph.len()))
        .sum::<Result<f64>>()?
        / uav_count as f64;
    if state.recent_terms.len() == params.eta_window as usize {
        state.recent_terms.pop_front();
    }
    state.recent_terms.push_back(slot_term);
    let recent_mean =
        state.recent_terms.iter().sum::<f64>() / state.recent_terms.len() as f64;
    state.eta = (recent_mean / params.eta_cap).clamp(0.0, 1.0);
    state.avg_aoi = state.aoi.normalized_average_aoi(params.horizon)?;

    if rows
        .iter()
        .any(|r| r.backhaul_rate > 0.0 || r.uplink_rate > 0.0)
    {
        state.active_rate_slots += 1;
    }
    state.served_device_slots += served_devices;

    let full_flags = check_constraints(graph, params, state);
    let all_returned = (0..uav_count).all(|u| {
        let p = state.positions[u];
        let slant = graph
            .horizontal_distance(p, station)
            .hypot(state.heights[u]);
        slant <= params.channel.backhaul_range
    });
    let done = (full_flags.coverage && all_returned) || t >= params.horizon;

    // Visited-set disjointness, like coverage, is a property of the
    // finished trajectory: once two sets overlap no later step could
    // mend them, so mid-episode only instantaneous co-location counts
    // as a trajectory violation. The full condition binds on the final
    // slot.
    let mut colocated = false;
    for i in 0..uav_count {
        for j in (i + 1)..uav_count {
            if state.positions[i] == state.positions[j] && state.positions[i] != station {
                colocated = true;
            }
        }
    }
    let flags = ConstraintFlags {
        disjoint_visits: if done {
            full_flags.disjoint_visits
        } else {
            !colocated
        },
        ..full_flags
    };
    let reward = reward_from_flags(&flags, state.eta, params.alpha1, done);

    for (i, ok) in flags.as_array().iter().enumerate() {
        if !ok {
            state.violation_counts[i] += 1;
        }
    }

    Ok((
        StepOutcome {
            slot: t,
            reward,
            eta: state.eta,
            avg_aoi: state.avg_aoi,
            flags,
            done,
        },
        rows,
    ))
}

fn sample_kind<R: Rng>(
    geom: &LinkGeometry,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelKind> {
    let (p_los, _) = channel::los_probability(geom, params)?;
    Ok(if rng.gen::<f64>() < p_los {
        ChannelKind::LineOfSight
    } else {
        ChannelKind::NonLineOfSight
    })
}
