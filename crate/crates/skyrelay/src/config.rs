//! Scenario configuration: a human-editable TOML file carrying every
//! physical constant and hyperparameter of a run, in the units people
//! write them in (dB, dBm, dBi). Conversions to linear quantities happen
//! once, when the simulation parameters are derived.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::channel::{self, ChannelParams};
use crate::energy::PropulsionParams;
use crate::env::{EnvParams, WaypointGraph};
use crate::error::{Error, Result};

/// Top-level configuration. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub channel: ChannelSection,
    pub energy: EnergySection,
    pub constraints: ConstraintSection,
    pub learning: LearningSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub uav_count: usize,
    pub waypoint_count: usize,
    pub iot_count: u32,
    pub area_x_m: f64,
    pub area_y_m: f64,
    pub height_min_m: f64,
    pub height_max_m: f64,
    /// Link radius for the geometric waypoint graph.
    pub coverage_radius_m: f64,
    pub horizon_slots: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub alpha: f64,
    pub alpha_hat: f64,
    pub epsilon_los_db: f64,
    pub epsilon_nlos_db: f64,
    pub fc_uplink_hz: f64,
    pub fc_mmwave_hz: f64,
    pub bw_uplink_hz: f64,
    pub bw_mmwave_hz: f64,
    pub noise_power_dbm: f64,
    pub sinr_threshold_db: f64,
    pub backhaul_range_m: f64,
    pub tx_power_iot_dbm: f64,
    pub tx_power_uav_dbm: f64,
    pub gain_tx_dbi: f64,
    pub gain_rx_dbi: f64,
    pub squared_backhaul_friis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub k1: f64,
    pub k2: f64,
    pub gravity: f64,
    pub max_velocity_mps: f64,
    pub max_acceleration_mps2: f64,
    pub cruise_velocity_mps: f64,
    pub hover_velocity_mps: f64,
    /// Account backhaul energy as power times slot duration instead of
    /// power times rate.
    pub backhaul_power_duration: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    /// Raw per-slot efficiency mapping to a normalized value of 1.
    pub eta_cap: f64,
    /// Recent-window length (slots) behind the instantaneous efficiency.
    pub eta_window: u32,
    /// Minimum normalized efficiency.
    pub eta_threshold: f64,
    /// Maximum normalized average age.
    pub aoi_threshold: f64,
    /// Reward coefficient.
    pub alpha1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSection {
    pub gamma: f64,
    pub learning_rate: f64,
    pub learning_rate_final: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
    pub target_sync_period: u32,
    pub hidden_layers: Vec<usize>,
    pub episodes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Seeds for repeated runs; one run per seed per grid point.
    pub seeds: Vec<u64>,
    /// Episodes per evaluation pass.
    pub eval_episodes: u32,
    /// Seed for waypoint-graph generation.
    pub graph_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSection {
                uav_count: 3,
                waypoint_count: 14,
                iot_count: 100,
                area_x_m: 1000.0,
                area_y_m: 1000.0,
                height_min_m: 140.0,
                height_max_m: 250.0,
                coverage_radius_m: 300.0,
                horizon_slots: 200,
            },
            channel: ChannelSection {
                alpha: 9.61,
                alpha_hat: 0.16,
                epsilon_los_db: 1.0,
                epsilon_nlos_db: 20.0,
                fc_uplink_hz: 2e9,
                fc_mmwave_hz: 28e9,
                bw_uplink_hz: 20e6,
                bw_mmwave_hz: 2e9,
                noise_power_dbm: -100.0,
                sinr_threshold_db: 5.0,
                backhaul_range_m: 300.0,
                tx_power_iot_dbm: 20.0,
                tx_power_uav_dbm: 20.0,
                gain_tx_dbi: 10.0,
                gain_rx_dbi: 10.0,
                squared_backhaul_friis: false,
            },
            energy: EnergySection {
                k1: 9.26e-4,
                k2: 2250.0,
                gravity: 9.8,
                max_velocity_mps: 100.0,
                max_acceleration_mps2: 5.0,
                cruise_velocity_mps: 20.0,
                hover_velocity_mps: 1.0,
                backhaul_power_duration: false,
            },
            constraints: ConstraintSection {
                eta_cap: 14000.0,
                eta_window: 1,
                eta_threshold: 0.0,
                aoi_threshold: 0.7,
                alpha1: 1.0,
            },
            learning: LearningSection {
                gamma: 0.7,
                learning_rate: 1e-3,
                learning_rate_final: 1e-4,
                replay_capacity: 200,
                batch_size: 32,
                epsilon_start: 1.0,
                epsilon_end: 0.05,
                epsilon_decay_fraction: 0.5,
                target_sync_period: 50,
                hidden_layers: vec![100, 100],
                episodes: 100,
            },
            experiment: ExperimentSection {
                seeds: vec![101, 102, 103, 104, 105],
                eval_episodes: 100,
                graph_seed: 375,
            },
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.uav_count == 0 || s.uav_count > s.waypoint_count {
            return Err(Error::Config(format!(
                "uav_count {} must be in 1..=waypoint_count {}",
                s.uav_count, s.waypoint_count
            )));
        }
        if s.waypoint_count < 2 || s.waypoint_count > 64 {
            return Err(Error::Config(format!(
                "waypoint_count {} must be in 2..=64",
                s.waypoint_count
            )));
        }
        self.env_params()?.validate()?;
        self.train_config().validate()?;
        if self.experiment.seeds.is_empty() {
            return Err(Error::Config("experiment.seeds must not be empty".into()));
        }
        if self.experiment.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        Ok(())
    }

    /// Physical channel parameters with all dB quantities made linear.
    pub fn channel_params(&self) -> ChannelParams {
        let c = &self.channel;
        ChannelParams {
            alpha: c.alpha,
            alpha_hat: c.alpha_hat,
            epsilon_los: c.epsilon_los_db,
            epsilon_nlos: c.epsilon_nlos_db,
            fc_uplink: c.fc_uplink_hz,
            fc_mmwave: c.fc_mmwave_hz,
            bw_uplink: c.bw_uplink_hz,
            bw_mmwave: c.bw_mmwave_hz,
            noise_power: channel::dbm_to_watts(c.noise_power_dbm),
            sinr_threshold: channel::db_to_linear(c.sinr_threshold_db),
            backhaul_range: c.backhaul_range_m,
            tx_power_iot: channel::dbm_to_watts(c.tx_power_iot_dbm),
            tx_power_uav: channel::dbm_to_watts(c.tx_power_uav_dbm),
            gain_tx: channel::db_to_linear(c.gain_tx_dbi),
            gain_rx: channel::db_to_linear(c.gain_rx_dbi),
            light_speed: channel::LIGHT_SPEED,
            squared_backhaul_friis: c.squared_backhaul_friis,
        }
    }

    fn propulsion(&self, velocity: f64) -> PropulsionParams {
        PropulsionParams {
            k1: self.energy.k1,
            k2: self.energy.k2,
            gravity: self.energy.gravity,
            velocity,
            acceleration: 0.0,
        }
    }

    pub fn env_params(&self) -> Result<EnvParams> {
        let params = EnvParams {
            channel: self.channel_params(),
            cruise: self.propulsion(self.energy.cruise_velocity_mps),
            hover: self.propulsion(self.energy.hover_velocity_mps),
            uav_count: self.scenario.uav_count,
            area: (self.scenario.area_x_m, self.scenario.area_y_m),
            height_range: (self.scenario.height_min_m, self.scenario.height_max_m),
            horizon: self.scenario.horizon_slots,
            iot_total: self.scenario.iot_count,
            eta_cap: self.constraints.eta_cap,
            eta_window: self.constraints.eta_window,
            eta_threshold: self.constraints.eta_threshold,
            aoi_threshold: self.constraints.aoi_threshold,
            alpha1: self.constraints.alpha1,
            backhaul_power_duration: self.energy.backhaul_power_duration,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn train_config(&self) -> TrainConfig {
        let l = &self.learning;
        TrainConfig {
            gamma: l.gamma,
            learning_rate: l.learning_rate,
            learning_rate_final: l.learning_rate_final,
            replay_capacity: l.replay_capacity,
            batch_size: l.batch_size,
            epsilon_start: l.epsilon_start,
            epsilon_end: l.epsilon_end,
            epsilon_decay_fraction: l.epsilon_decay_fraction,
            target_sync_period: l.target_sync_period,
            hidden_layers: l.hidden_layers.clone(),
            episodes: l.episodes,
            record_actions: false,
        }
    }

    /// Samples the scenario's waypoint graph from the configured seed.
    pub fn build_graph(&self) -> Result<WaypointGraph> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.experiment.graph_seed);
        WaypointGraph::random(
            self.scenario.waypoint_count,
            (self.scenario.area_x_m, self.scenario.area_y_m),
            self.scenario.coverage_radius_m,
            self.scenario.iot_count,
            &mut rng,
        )
    }

    /// Stable FNV-1a hash of the canonical serialized form; used to tie
    /// manifests, traces, and exports back to their configuration.
    pub fn hash(&self) -> Result<String> {
        let text = self.to_toml_string()?;
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for byte in text.bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok(format!("{hash:016x}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_with_paper_values() {
        let config = ScenarioConfig::default();
        config.validate().unwrap();
        assert_eq!(config.scenario.uav_count, 3);
        assert_eq!(config.scenario.iot_count, 100);
        assert_eq!(config.learning.gamma, 0.7);
        assert_eq!(config.learning.replay_capacity, 200);
        assert_eq!(config.learning.hidden_layers, vec![100, 100]);
        let params = config.channel_params();
        assert!((params.sinr_threshold - 3.1622776601683795).abs() < 1e-12);
        assert!((params.tx_power_uav - 0.1).abs() < 1e-15);
        assert!((params.noise_power - 1e-13).abs() < 1e-25);
        assert!((params.gain_tx - 10.0).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip_is_identity() {
        let config = ScenarioConfig::default();
        let text = config.to_toml_string().unwrap();
        let parsed = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(parsed, config);
        let text2 = parsed.to_toml_string().unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = ScenarioConfig::default().to_toml_string().unwrap();
        text.push_str("\n[scenario2]\nbogus = 1\n");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());

        let sneaky = text.replace("[scenario2]\nbogus = 1", "");
        let mut with_field = sneaky;
        with_field.push_str("\n[experiment2]\nx = 2\n");
        assert!(ScenarioConfig::from_toml_str(&with_field).is_err());
    }

    #[test]
    fn unknown_field_within_section_rejected() {
        let text = ScenarioConfig::default().to_toml_string().unwrap();
        let tampered = text.replace("uav_count = 3", "uav_count = 3\nwarp_drive = true");
        assert!(ScenarioConfig::from_toml_str(&tampered).is_err());
    }

    #[test]
    fn invalid_counts_rejected() {
        let mut config = ScenarioConfig::default();
        config.scenario.uav_count = 20;
        config.scenario.waypoint_count = 6;
        assert!(config.validate().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let config = ScenarioConfig::default();
        let h1 = config.hash().unwrap();
        let h2 = config.hash().unwrap();
        assert_eq!(h1, h2);
        let mut other = config.clone();
        other.learning.gamma = 0.8;
        assert_ne!(h1, other.hash().unwrap());
    }

    #[test]
    fn graph_build_is_seed_stable() {
        let config = ScenarioConfig::default();
        let g1 = config.build_graph().unwrap();
        let g2 = config.build_graph().unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.len(), 14);
        assert_eq!(g1.total_iot(), 100);
    }
}
