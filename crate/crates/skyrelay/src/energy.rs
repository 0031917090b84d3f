//! Propulsion and transmission energy accounting, and the
//! rate-per-energy efficiency metric the whole optimization runs on.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};

/// Standard gravitational acceleration, m/s^2.
pub const GRAVITY: f64 = 9.8;

/// Rotorcraft propulsion constants and the velocity profile they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropulsionParams {
    /// Cubic drag coefficient.
    pub k1: f64,
    /// Induced-power coefficient.
    pub k2: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Airspeed, m/s. Must be positive; the induced term diverges at rest.
    pub velocity: f64,
    /// Acceleration magnitude, m/s^2.
    pub acceleration: f64,
}

impl PropulsionParams {
    pub fn validate(&self) -> Result<()> {
        if self.k1 <= 0.0 || self.k2 <= 0.0 {
            return Err(Error::InvalidArgument(
                "propulsion constants must be positive".into(),
            ));
        }
        if self.velocity <= 0.0 || !self.velocity.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "velocity must be finite and positive, got {}",
                self.velocity
            )));
        }
        Ok(())
    }
}

/// Upper-bound propulsion power at the configured velocity profile:
/// `k1*v^3 + (k2/v)*(1 + a^2/g^2)`.
pub fn propulsion_power(params: &PropulsionParams) -> Result<f64> {
    params.validate()?;
    let v = params.velocity;
    let a = params.acceleration;
    Ok(params.k1 * v.powi(3) + params.k2 / v * (1.0 + a * a / (params.gravity * params.gravity)))
}

/// Mobility energy for covering `distance` at the configured profile.
pub fn mobility_energy(distance: f64, params: &PropulsionParams) -> Result<f64> {
    if distance < 0.0 || !distance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "distance must be finite and non-negative, got {distance}"
        )));
    }
    Ok(distance * propulsion_power(params)?)
}

/// Backhaul transmission energy for one slot, as the model is written:
/// transmit power times the achieved rate.
pub fn backhaul_energy(rate: f64, params: &ChannelParams) -> Result<f64> {
    if rate < 0.0 || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rate must be finite and non-negative, got {rate}"
        )));
    }
    Ok(params.tx_power_uav * rate)
}

/// Per-slot ledger row for one relay: the rates it achieved and the
/// energy it spent during that slot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotEntry {
    /// Backhaul rate toward the ground station, bits/s.
    pub backhaul_rate: f64,
    /// Sum of device uplink rates collected at the occupied waypoint, bits/s.
    pub uplink_rate: f64,
    /// Backhaul transmission energy spent this slot.
    pub backhaul_energy: f64,
    /// Propulsion energy spent this slot (move or hover).
    pub mobility_energy: f64,
}

/// Episode-long energy and rate bookkeeping for a set of relays.
///
/// One writer per episode; rows are appended once per slot per relay and
/// cumulative totals never decrease.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// `rows[u][t-1]` is relay `u`'s entry for slot `t`.
    rows: Vec<Vec<SlotEntry>>,
    /// Cumulative mobility energy per relay.
    mobility_total: Vec<f64>,
    /// Cumulative backhaul energy per relay.
    backhaul_total: Vec<f64>,
}

impl EnergyLedger {
    pub fn new(uav_count: usize) -> Self {
        Self {
            rows: vec![Vec::new(); uav_count],
            mobility_total: vec![0.0; uav_count],
            backhaul_total: vec![0.0; uav_count],
        }
    }

    pub fn uav_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of recorded slots (identical across relays).
    pub fn slots(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Appends one slot entry for a relay.
    pub fn record(&mut self, uav: usize, entry: SlotEntry) {
        self.rows[uav].push(entry);
        self.mobility_total[uav] += entry.mobility_energy;
        self.backhaul_total[uav] += entry.backhaul_energy;
    }

    pub fn entries(&self, uav: usize) -> &[SlotEntry] {
        &self.rows[uav]
    }

    pub fn cumulative_mobility_energy(&self, uav: usize) -> f64 {
        self.mobility_total[uav]
    }

    pub fn cumulative_backhaul_energy(&self, uav: usize) -> f64 {
        self.backhaul_total[uav]
    }
}

/// The per-slot efficiency term for one ledger row over `waypoint_count`
/// trajectory points: the backhaul rate is credited once per waypoint in
/// the written double sum, so the numerator is
/// `waypoint_count * backhaul_rate + uplink_rate`.
pub fn slot_efficiency(entry: &SlotEntry, waypoint_count: usize) -> Result<f64> {
    let denominator = entry.backhaul_energy + entry.mobility_energy;
    if denominator <= 0.0 {
        return Err(Error::DegenerateInput(
            "slot energy must be positive to define efficiency",
        ));
    }
    let numerator = waypoint_count as f64 * entry.backhaul_rate + entry.uplink_rate;
    Ok(numerator / denominator)
}

/// Total energy efficiency of one relay over the first `horizon` recorded
/// slots: the double sum over slots and waypoints of per-slot rate sums
/// divided by per-slot energy.
pub fn energy_efficiency(
    ledger: &EnergyLedger,
    uav: usize,
    horizon: usize,
    waypoint_count: usize,
) -> Result<f64> {
    if horizon == 0 || waypoint_count == 0 {
        return Err(Error::DegenerateInput("empty efficiency window"));
    }
    let entries = ledger.entries(uav);
    if entries.len() < horizon {
        return Err(Error::InvalidArgument(format!(
            "ledger holds {} slots, requested horizon {horizon}",
            entries.len()
        )));
    }
    entries[..horizon]
        .iter()
        .map(|e| slot_efficiency(e, waypoint_count))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel;

    fn cruise(velocity: f64, acceleration: f64) -> PropulsionParams {
        PropulsionParams {
            k1: 9.26e-4,
            k2: 2250.0,
            gravity: GRAVITY,
            velocity,
            acceleration,
        }
    }

    #[test]
    fn propulsion_matches_scalar_oracle() {
        // 9.26e-4 * 100^3 + 2250/100 = 948.5 exactly.
        let p = propulsion_power(&cruise(100.0, 0.0)).unwrap();
        assert!((p - 948.5).abs() < 1e-9);
    }

    #[test]
    fn zero_acceleration_minimizes_induced_factor() {
        let base = propulsion_power(&cruise(20.0, 0.0)).unwrap();
        let accel = propulsion_power(&cruise(20.0, 5.0)).unwrap();
        assert!(accel > base);
        let expected = 9.26e-4 * 8000.0 + 2250.0 / 20.0;
        assert!((base - expected).abs() < 1e-9);
    }

    #[test]
    fn propulsion_rejects_nonpositive_velocity() {
        assert!(propulsion_power(&cruise(0.0, 0.0)).is_err());
        assert!(propulsion_power(&cruise(-5.0, 0.0)).is_err());
    }

    #[test]
    fn propulsion_is_midpoint_convex_in_velocity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a: f64 = rng.gen_range(0.5..150.0);
            let b: f64 = rng.gen_range(0.5..150.0);
            let mid = 0.5 * (a + b);
            let fa = propulsion_power(&cruise(a, 2.0)).unwrap();
            let fb = propulsion_power(&cruise(b, 2.0)).unwrap();
            let fm = propulsion_power(&cruise(mid, 2.0)).unwrap();
            assert!(fm <= 0.5 * (fa + fb) + 1e-9);
        }
    }

    #[test]
    fn mobility_energy_matches_oracle() {
        // 300 m at the v=100 profile: 300 * 948.5 = 284550.
        let e = mobility_energy(300.0, &cruise(100.0, 0.0)).unwrap();
        assert!((e - 284550.0).abs() < 1e-6);
        assert_eq!(mobility_energy(0.0, &cruise(100.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn energies_are_degree_one_homogeneous() {
        let p = cruise(20.0, 0.0);
        let e1 = mobility_energy(123.0, &p).unwrap();
        let e2 = mobility_energy(246.0, &p).unwrap();
        assert!((e2 - 2.0 * e1).abs() < 1e-9);

        let params = test_channel_params();
        let b1 = backhaul_energy(1e6, &params).unwrap();
        let b2 = backhaul_energy(2e6, &params).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-9);
    }

    fn test_channel_params() -> ChannelParams {
        ChannelParams {
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
        }
    }

    #[test]
    fn backhaul_energy_is_power_times_rate() {
        let params = test_channel_params();
        assert_eq!(backhaul_energy(0.0, &params).unwrap(), 0.0);
        let e = backhaul_energy(1e6, &params).unwrap();
        assert!((e - 1e5).abs() < 1e-9);
    }

    #[test]
    fn efficiency_zero_rates_zero_value() {
        let mut ledger = EnergyLedger::new(1);
        for _ in 0..4 {
            ledger.record(
                0,
                SlotEntry {
                    backhaul_rate: 0.0,
                    uplink_rate: 0.0,
                    backhaul_energy: 0.0,
                    mobility_energy: 100.0,
                },
            );
        }
        let eta = energy_efficiency(&ledger, 0, 4, 5).unwrap();
        assert_eq!(eta, 0.0);
    }

    #[test]
    fn efficiency_is_linear_in_rates() {
        let mut a = EnergyLedger::new(1);
        let mut b = EnergyLedger::new(1);
        for t in 0..3 {
            let entry = SlotEntry {
                backhaul_rate: 1e6 * (t + 1) as f64,
                uplink_rate: 5e5,
                backhaul_energy: 2e4,
                mobility_energy: 1e3,
            };
            a.record(0, entry);
            b.record(
                0,
                SlotEntry {
                    backhaul_rate: 2.0 * entry.backhaul_rate,
                    uplink_rate: 2.0 * entry.uplink_rate,
                    ..entry
                },
            );
        }
        let ea = energy_efficiency(&a, 0, 3, 7).unwrap();
        let eb = energy_efficiency(&b, 0, 3, 7).unwrap();
        assert!((eb - 2.0 * ea).abs() / ea < 1e-12);
    }

    #[test]
    fn efficiency_matches_double_sum_oracle() {
        // Brute-force recomputation of the written double sum.
        let waypoints = 4;
        let entries = [
            SlotEntry {
                backhaul_rate: 3e5,
                uplink_rate: 1e5,
                backhaul_energy: 3e4,
                mobility_energy: 5e2,
            },
            SlotEntry {
                backhaul_rate: 0.0,
                uplink_rate: 9e5,
                backhaul_energy: 0.0,
                mobility_energy: 2.2e3,
            },
        ];
        let mut ledger = EnergyLedger::new(1);
        let mut expected = 0.0;
        for e in entries {
            ledger.record(0, e);
            for _ in 0..waypoints {
                expected += (e.backhaul_rate + e.uplink_rate / waypoints as f64)
                    / (e.backhaul_energy + e.mobility_energy);
            }
        }
        // The uplink sum over waypoints collapses to the per-slot total;
        // spread it evenly in the oracle to keep the sums identical.
        let eta = energy_efficiency(&ledger, 0, 2, waypoints).unwrap();
        assert!((eta - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn efficiency_rejects_zero_energy_window() {
        let mut ledger = EnergyLedger::new(1);
        ledger.record(0, SlotEntry::default());
        assert!(matches!(
            energy_efficiency(&ledger, 0, 1, 3),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn ledger_totals_never_decrease() {
        let mut ledger = EnergyLedger::new(2);
        let mut last = (0.0, 0.0);
        for t in 0..10 {
            ledger.record(
                0,
                SlotEntry {
                    backhaul_rate: 0.0,
                    uplink_rate: 0.0,
                    backhaul_energy: (t % 3) as f64,
                    mobility_energy: 1.0,
                },
            );
            let now = (
                ledger.cumulative_mobility_energy(0),
                ledger.cumulative_backhaul_energy(0),
            );
            assert!(now.0 >= last.0 && now.1 >= last.1);
            last = now;
        }
    }
}
