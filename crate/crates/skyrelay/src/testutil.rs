//! Shared fixtures for unit tests.

use crate::channel::{self, ChannelParams};
use crate::energy::{self, PropulsionParams};
use crate::env::{EnvParams, WaypointGraph};

/// Default-like physics with relaxed constraint thresholds and a short
/// horizon, sized for `uav_count` relays.
pub(crate) fn test_params(uav_count: usize) -> EnvParams {
    EnvParams {
        channel: ChannelParams {
            alpha: 9.61,
            alpha_hat: 0.16,
            epsilon_los: 1.0,
            epsilon_nlos: 20.0,
            fc_uplink: 2e9,
            fc_mmwave: 28e9,
            bw_uplink: 20e6,
            bw_mmwave: 2e9,
            noise_power: 1e-13,
            sinr_threshold: channel::db_to_linear(5.0),
            backhaul_range: 300.0,
            tx_power_iot: 0.1,
            tx_power_uav: 0.1,
            gain_tx: 10.0,
            gain_rx: 10.0,
            light_speed: channel::LIGHT_SPEED,
            squared_backhaul_friis: false,
        },
        cruise: PropulsionParams {
            k1: 9.26e-4,
            k2: 2250.0,
            gravity: energy::GRAVITY,
            velocity: 20.0,
            acceleration: 0.0,
        },
        hover: PropulsionParams {
            k1: 9.26e-4,
            k2: 2250.0,
            gravity: energy::GRAVITY,
            velocity: 1.0,
            acceleration: 0.0,
        },
        uav_count,
        area: (1000.0, 1000.0),
        height_range: (140.0, 250.0),
        horizon: 50,
        iot_total: 100,
        eta_cap: 14000.0,
        eta_window: 10,
        eta_threshold: 0.0,
        aoi_threshold: 1.0,
        alpha1: 1.0,
        backhaul_power_duration: false,
    }
}

/// A three-point line: station - p1 - p2, with devices on the far two.
pub(crate) fn line3_graph() -> WaypointGraph {
    WaypointGraph::new(
        vec![(0.0, 0.0), (200.0, 0.0), (400.0, 0.0)],
        &[(0, 1), (1, 2)],
        0,
        vec![0, 2, 3],
    )
    .unwrap()
}
