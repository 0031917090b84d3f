//! Air-to-ground uplink and mmWave backhaul channel models.
//!
//! The uplink side models the sigmoid line-of-sight probability of an
//! aerial receiver over an urban deployment, distance-dependent path loss
//! with per-condition attenuation offsets, interference-aware SINR, and a
//! thresholded equal-share Shannon rate. The backhaul side models a
//! range-gated directional mmWave link between a relay and the ground
//! station. Everything here is a pure function of its inputs; channel
//! condition sampling is owned by the environment's RNG.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const LIGHT_SPEED: f64 = 299_792_458.0;

/// Converts a decibel quantity to its linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Line-of-sight vs non-line-of-sight channel condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    LineOfSight,
    NonLineOfSight,
}

/// Physical-layer constants shared by the uplink and backhaul models.
///
/// All powers and gains are linear (watts / ratios); the configuration
/// layer converts from the dB units people actually write down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Environment constant of the LoS probability sigmoid.
    pub alpha: f64,
    /// Environment constant scaling the sigmoid's angle response.
    pub alpha_hat: f64,
    /// Excess attenuation on LoS links, dB.
    pub epsilon_los: f64,
    /// Excess attenuation on NLoS links, dB.
    pub epsilon_nlos: f64,
    /// Uplink carrier frequency, Hz.
    pub fc_uplink: f64,
    /// Backhaul carrier frequency, Hz.
    pub fc_mmwave: f64,
    /// Uplink bandwidth shared by all devices, Hz.
    pub bw_uplink: f64,
    /// Aggregate backhaul bandwidth, Hz.
    pub bw_mmwave: f64,
    /// Receiver noise power, W.
    pub noise_power: f64,
    /// Minimum SINR (linear) for a successful uplink transmission.
    pub sinr_threshold: f64,
    /// Maximum relay-to-ground-station distance for backhaul contact, m.
    pub backhaul_range: f64,
    /// Device transmit power, W.
    pub tx_power_iot: f64,
    /// Relay transmit power on the backhaul, W.
    pub tx_power_uav: f64,
    /// Relay transmit antenna gain, linear.
    pub gain_tx: f64,
    /// Ground-station receive antenna gain, linear.
    pub gain_rx: f64,
    /// Propagation speed, m/s.
    pub light_speed: f64,
    /// Square the free-space factor in the backhaul received-power
    /// expression instead of using it linearly. Off by default.
    pub squared_backhaul_friis: bool,
}

impl ChannelParams {
    /// Validates positivity requirements on frequencies, bandwidths,
    /// powers, gains, and thresholds.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("alpha_hat", self.alpha_hat),
            ("fc_uplink", self.fc_uplink),
            ("fc_mmwave", self.fc_mmwave),
            ("bw_uplink", self.bw_uplink),
            ("bw_mmwave", self.bw_mmwave),
            ("noise_power", self.noise_power),
            ("sinr_threshold", self.sinr_threshold),
            ("backhaul_range", self.backhaul_range),
            ("tx_power_iot", self.tx_power_iot),
            ("tx_power_uav", self.tx_power_uav),
            ("gain_tx", self.gain_tx),
            ("gain_rx", self.gain_rx),
            ("light_speed", self.light_speed),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "channel parameter `{name}` must be finite and positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Geometry of one transmitter-receiver link with an elevated receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Ground-plane distance between endpoints, m.
    pub horizontal_distance: f64,
    /// Receiver altitude above the ground endpoint, m.
    pub uav_height: f64,
    /// Elevation angle seen from the ground endpoint, rad.
    pub elevation_angle: f64,
    /// Straight-line distance between endpoints, m.
    pub slant_distance: f64,
}

impl LinkGeometry {
    /// Builds a link from horizontal separation and receiver height,
    /// deriving the slant distance and elevation angle.
    pub fn new(horizontal_distance: f64, uav_height: f64) -> Result<Self> {
        if !horizontal_distance.is_finite() || !uav_height.is_finite() {
            return Err(Error::NonFinite("link geometry"));
        }
        if horizontal_distance < 0.0 || uav_height < 0.0 {
            return Err(Error::InvalidGeometry("negative distance or height"));
        }
        let slant_distance = horizontal_distance.hypot(uav_height);
        let elevation_angle = uav_height.atan2(horizontal_distance);
        Ok(Self {
            horizontal_distance,
            uav_height,
            elevation_angle,
            slant_distance,
        })
    }
}

/// One realized uplink path: geometry plus the sampled channel condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkPath {
    pub geometry: LinkGeometry,
    pub kind: ChannelKind,
}

/// Probability of line-of-sight (and its complement) for a link.
///
/// Returns `(p_los, p_nlos)`; the pair sums to 1 exactly.
pub fn los_probability(geom: &LinkGeometry, params: &ChannelParams) -> Result<(f64, f64)> {
    if !geom.elevation_angle.is_finite() {
        return Err(Error::NonFinite("elevation angle"));
    }
    let degrees = geom.elevation_angle * 180.0 / PI;
    let p_los = 1.0 / (1.0 + params.alpha * (-params.alpha_hat * (degrees - params.alpha)).exp());
    Ok((p_los, 1.0 - p_los))
}

/// Path loss in dB over a link for the given channel condition.
///
/// `20*log10(4*pi*fc*slant/c)` plus the per-condition attenuation offset.
pub fn path_loss_db(geom: &LinkGeometry, kind: ChannelKind, params: &ChannelParams) -> Result<f64> {
    if !geom.slant_distance.is_finite() {
        return Err(Error::NonFinite("slant distance"));
    }
    if geom.slant_distance <= 0.0 {
        return Err(Error::InvalidGeometry("slant distance must be positive"));
    }
    let epsilon = match kind {
        ChannelKind::LineOfSight => params.epsilon_los,
        ChannelKind::NonLineOfSight => params.epsilon_nlos,
    };
    let free_space =
        20.0 * (4.0 * PI * params.fc_uplink * geom.slant_distance / params.light_speed).log10();
    Ok(free_space + epsilon)
}

/// Received power at the relay from one device: transmit power divided by
/// the linear path loss of the realized condition.
pub fn received_power(path: &UplinkPath, params: &ChannelParams) -> Result<f64> {
    let pl_db = path_loss_db(&path.geometry, path.kind, params)?;
    Ok(params.tx_power_iot / db_to_linear(pl_db))
}

/// The probability weight applied in the SINR expression: the realized
/// condition's occurrence probability from [`los_probability`].
pub fn condition_probability(path: &UplinkPath, params: &ChannelParams) -> Result<f64> {
    let (p_los, p_nlos) = los_probability(&path.geometry, params)?;
    Ok(match path.kind {
        ChannelKind::LineOfSight => p_los,
        ChannelKind::NonLineOfSight => p_nlos,
    })
}

/// Received SINR (linear) for one serving uplink path against a set of
/// concurrently transmitting interferer paths.
///
/// Each path contributes its received power discounted by
/// `10^(zeta/10)` where `zeta` is the path's condition probability; the
/// interferers' discounted powers and the noise power form the
/// denominator.
pub fn uplink_sinr(
    serving: &UplinkPath,
    interferers: &[UplinkPath],
    params: &ChannelParams,
) -> Result<f64> {
    let signal = discounted_power(serving, params)?;
    let mut interference = 0.0;
    for path in interferers {
        interference += discounted_power(path, params)?;
    }
    let sinr = signal / (interference + params.noise_power);
    if !sinr.is_finite() {
        return Err(Error::NonFinite("sinr"));
    }
    Ok(sinr)
}

fn discounted_power(path: &UplinkPath, params: &ChannelParams) -> Result<f64> {
    let power = received_power(path, params)?;
    let zeta = condition_probability(path, params)?;
    Ok(power / db_to_linear(zeta))
}

/// Uplink rate in bits/s for one device under equal bandwidth sharing.
///
/// Zero exactly when the SINR does not clear the configured threshold.
pub fn uplink_rate(sinr: f64, device_count: usize, params: &ChannelParams) -> Result<f64> {
    if device_count == 0 {
        return Err(Error::InvalidArgument(
            "device_count must be at least 1".into(),
        ));
    }
    if sinr <= params.sinr_threshold {
        return Ok(0.0);
    }
    Ok(params.bw_uplink / device_count as f64 * (1.0 + sinr).log2())
}

/// Backhaul received power at the ground station from a relay.
///
/// The free-space factor `c / (4*pi*slant*fc)` enters linearly as the
/// model is written; `squared_backhaul_friis` opts into the squared
/// variant.
pub fn backhaul_received_power(geom: &LinkGeometry, params: &ChannelParams) -> Result<f64> {
    if geom.slant_distance <= 0.0 {
        return Err(Error::InvalidGeometry("slant distance must be positive"));
    }
    let friis = params.light_speed / (4.0 * PI * geom.slant_distance * params.fc_mmwave);
    let factor = if params.squared_backhaul_friis {
        friis * friis
    } else {
        friis
    };
    Ok(params.tx_power_uav * params.gain_tx * params.gain_rx * factor)
}

/// Backhaul rate in bits/s, gated to zero beyond the contact range.
pub fn backhaul_rate(geom: &LinkGeometry, params: &ChannelParams) -> Result<f64> {
    if geom.slant_distance > params.backhaul_range {
        return Ok(0.0);
    }
    let power = backhaul_received_power(geom, params)?;
    Ok(params.bw_mmwave * (1.0 + power / (params.bw_mmwave * params.noise_power)).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn urban_params() -> ChannelParams {
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
            sinr_threshold: db_to_linear(5.0),
            backhaul_range: 300.0,
            tx_power_iot: 0.1,
            tx_power_uav: 0.1,
            gain_tx: 10.0,
            gain_rx: 10.0,
            light_speed: LIGHT_SPEED,
            squared_backhaul_friis: false,
        }
    }

    fn rel_err(got: f64, want: f64) -> f64 {
        (got - want).abs() / want.abs().max(1e-300)
    }

    #[test]
    fn los_probability_at_45_degrees_matches_oracle() {
        // Independent scalar evaluation: 1/(1+9.61*exp(-0.16*(45-9.61))).
        let geom = LinkGeometry::new(100.0, 100.0).unwrap();
        let (p_los, p_nlos) = los_probability(&geom, &urban_params()).unwrap();
        assert!(rel_err(p_los, 0.9676918999472423) < 1e-12);
        assert_eq!(p_los + p_nlos, 1.0);
    }

    #[test]
    fn los_probability_complement_is_exact() {
        let params = urban_params();
        for (d, h) in [(1.0, 500.0), (300.0, 140.0), (1000.0, 250.0), (0.0, 10.0)] {
            let geom = LinkGeometry::new(d, h).unwrap();
            let (p_los, p_nlos) = los_probability(&geom, &params).unwrap();
            assert_eq!(p_los + p_nlos, 1.0);
            assert!((0.0..=1.0).contains(&p_los));
        }
    }

    #[test]
    fn path_loss_matches_scalar_oracle() {
        // 20*log10(4*pi*2e9*100/c) + 1 computed independently.
        let geom = LinkGeometry {
            horizontal_distance: 100.0,
            uav_height: 0.0,
            elevation_angle: 0.0,
            slant_distance: 100.0,
        };
        let pl = path_loss_db(&geom, ChannelKind::LineOfSight, &urban_params()).unwrap();
        assert!(rel_err(pl, 79.468383135163) < 1e-12);
    }

    #[test]
    fn nlos_exceeds_los_by_attenuation_gap() {
        let params = urban_params();
        let geom = LinkGeometry::new(50.0, 150.0).unwrap();
        let los = path_loss_db(&geom, ChannelKind::LineOfSight, &params).unwrap();
        let nlos = path_loss_db(&geom, ChannelKind::NonLineOfSight, &params).unwrap();
        assert!((nlos - los - 19.0).abs() < 1e-12);
    }

    #[test]
    fn path_loss_rejects_zero_slant() {
        let geom = LinkGeometry {
            horizontal_distance: 0.0,
            uav_height: 0.0,
            elevation_angle: 0.0,
            slant_distance: 0.0,
        };
        assert!(path_loss_db(&geom, ChannelKind::LineOfSight, &urban_params()).is_err());
    }

    #[test]
    fn path_loss_monotone_in_distance() {
        let params = urban_params();
        let mut last = f64::NEG_INFINITY;
        for slant in [1.0, 10.0, 100.0, 1000.0, 10000.0] {
            let geom = LinkGeometry {
                horizontal_distance: slant,
                uav_height: 0.0,
                elevation_angle: 0.0,
                slant_distance: slant,
            };
            let pl = path_loss_db(&geom, ChannelKind::NonLineOfSight, &params).unwrap();
            assert!(pl > last);
            last = pl;
        }
    }

    #[test]
    fn sinr_matches_interference_free_oracle() {
        // Construct a path whose received power is exactly 1e-9 W and whose
        // condition probability is exactly 1, then check
        // 1e-9 / 10^(1/10) / 1e-13 = 7943.282347242815.
        let mut params = urban_params();
        let geom = LinkGeometry::new(100.0, 100.0).unwrap();
        let path = UplinkPath {
            geometry: geom,
            kind: ChannelKind::LineOfSight,
        };
        let pl = path_loss_db(&geom, ChannelKind::LineOfSight, &params).unwrap();
        params.tx_power_iot = 1e-9 * db_to_linear(pl);
        // Force zeta to 1 by making the sigmoid saturate.
        params.alpha_hat = 1e3;
        let sinr = uplink_sinr(&path, &[], &params).unwrap();
        assert!(rel_err(sinr, 7943.282347242815) < 1e-9);
    }

    #[test]
    fn interferer_strictly_decreases_sinr() {
        let params = urban_params();
        let serving = UplinkPath {
            geometry: LinkGeometry::new(0.0, 150.0).unwrap(),
            kind: ChannelKind::LineOfSight,
        };
        let interferer = UplinkPath {
            geometry: LinkGeometry::new(400.0, 150.0).unwrap(),
            kind: ChannelKind::LineOfSight,
        };
        let clean = uplink_sinr(&serving, &[], &params).unwrap();
        let jammed = uplink_sinr(&serving, &[interferer], &params).unwrap();
        assert!(jammed < clean);
    }

    #[test]
    fn uplink_rate_matches_scalar_oracle() {
        // (20e6/100) * log2(11) = 691886.3237274594.
        let rate = uplink_rate(10.0, 100, &urban_params()).unwrap();
        assert!(rel_err(rate, 691886.3237274594) < 1e-12);
    }

    #[test]
    fn uplink_rate_zero_at_or_below_threshold() {
        let params = urban_params();
        assert_eq!(uplink_rate(params.sinr_threshold, 10, &params).unwrap(), 0.0);
        assert_eq!(uplink_rate(0.5, 10, &params).unwrap(), 0.0);
        assert!(uplink_rate(params.sinr_threshold * 1.001, 10, &params).unwrap() > 0.0);
    }

    #[test]
    fn uplink_rate_increasing_in_sinr() {
        let params = urban_params();
        let r1 = uplink_rate(4.0, 10, &params).unwrap();
        let r2 = uplink_rate(8.0, 10, &params).unwrap();
        assert!(r2 > r1 && r1 > 0.0);
    }

    #[test]
    fn backhaul_zero_beyond_range() {
        let params = urban_params();
        let geom = LinkGeometry::new(290.0, 140.0).unwrap(); // slant > 300
        assert_eq!(backhaul_rate(&geom, &params).unwrap(), 0.0);
        let close = LinkGeometry::new(100.0, 140.0).unwrap();
        assert!(backhaul_rate(&close, &params).unwrap() > 0.0);
    }

    #[test]
    fn backhaul_rate_increases_as_distance_halves() {
        let params = urban_params();
        let far = LinkGeometry::new(0.0, 280.0).unwrap();
        let near = LinkGeometry::new(0.0, 140.0).unwrap();
        let r_far = backhaul_rate(&far, &params).unwrap();
        let r_near = backhaul_rate(&near, &params).unwrap();
        assert!(r_near > r_far && r_far > 0.0);
    }

    #[test]
    fn squared_friis_variant_reduces_power() {
        let mut params = urban_params();
        let geom = LinkGeometry::new(0.0, 150.0).unwrap();
        let linear = backhaul_received_power(&geom, &params).unwrap();
        params.squared_backhaul_friis = true;
        let squared = backhaul_received_power(&geom, &params).unwrap();
        // The free-space factor is far below 1 at these scales.
        assert!(squared < linear);
    }

    #[test]
    fn geometry_invariants_hold() {
        let geom = LinkGeometry::new(300.0, 400.0).unwrap();
        assert!((geom.slant_distance - 500.0).abs() < 1e-12);
        assert!((geom.elevation_angle - (400f64).atan2(300.0)).abs() < 1e-15);
        assert!(LinkGeometry::new(f64::NAN, 10.0).is_err());
        assert!(LinkGeometry::new(-1.0, 10.0).is_err());
    }
}
