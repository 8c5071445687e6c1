//! Network geometry, line-of-sight link rates and the per-bit delay and
//! energy coefficients every problem builder works from.
//!
//! Terrestrial devices (TDs) sit on the ground, UAVs hover at a common
//! altitude and a single HAP sits far above them. All links are free-space
//! line of sight: gain falls off with the squared distance and the rate is
//! the Shannon capacity of the resulting SNR.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream_rng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("snapshot rates inconsistent with geometry: {0}")]
    InconsistentRates(String),
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn require_positive(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn require_nonnegative(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {v}")))
    }
}

/// Point in meters; `z` is the altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ScenarioError> {
        let p = Self { x, y, z };
        p.validate("position")?;
        Ok(p)
    }

    fn validate(&self, field: &str) -> Result<(), ScenarioError> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(invalid(field, "coordinates must be finite"));
        }
        if self.z < 0.0 {
            return Err(invalid(field, format!("altitude must be >= 0, got {}", self.z)));
        }
        Ok(())
    }
}

/// Euclidean distance in meters. Used for both TD-UAV and UAV-HAP links.
pub fn distance(a: &Position3D, b: &Position3D) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Free-space gain `ref_gain / d^2`.
pub fn channel_gain(ref_gain: f64, distance: f64) -> Result<f64, ScenarioError> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(ScenarioError::Domain(format!(
            "channel gain needs a positive distance, got {distance}"
        )));
    }
    Ok(ref_gain / (distance * distance))
}

/// Shannon rate `B log2(1 + p g / noise)` in bits/s.
pub fn link_rate(bandwidth: f64, tx_power: f64, gain: f64, noise: f64) -> Result<f64, ScenarioError> {
    if !(bandwidth > 0.0) || !(noise > 0.0) {
        return Err(ScenarioError::Domain(format!(
            "bandwidth ({bandwidth}) and noise power ({noise}) must be positive"
        )));
    }
    if !(tx_power >= 0.0) || !(gain >= 0.0) {
        return Err(ScenarioError::Domain(format!(
            "transmit power ({tx_power}) and gain ({gain}) must be nonnegative"
        )));
    }
    // ln_1p keeps precision at the tiny SNRs typical of km-scale links
    Ok(bandwidth * (tx_power * gain / noise).ln_1p() / std::f64::consts::LN_2)
}

/// Linear-scale radio parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub ref_gain_td_uav: f64,
    pub ref_gain_uav_hap: f64,
    pub bandwidth_td_uav: f64,
    pub bandwidth_uav_hap: f64,
    pub noise_power: f64,
    pub tx_power_td: f64,
    pub tx_power_uav: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        require_positive("ref_gain_td_uav", self.ref_gain_td_uav)?;
        require_positive("ref_gain_uav_hap", self.ref_gain_uav_hap)?;
        require_positive("bandwidth_td_uav", self.bandwidth_td_uav)?;
        require_positive("bandwidth_uav_hap", self.bandwidth_uav_hap)?;
        require_positive("noise_power", self.noise_power)?;
        require_positive("tx_power_td", self.tx_power_td)?;
        require_positive("tx_power_uav", self.tx_power_uav)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    /// cycles/s
    pub uav_capability: f64,
    /// cycles/s
    pub hap_capability: f64,
    /// cycles/bit
    pub uav_cycles_per_bit: f64,
    /// cycles/bit
    pub hap_cycles_per_bit: f64,
}

impl ComputeParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        require_positive("uav_capability", self.uav_capability)?;
        require_positive("hap_capability", self.hap_capability)?;
        require_positive("uav_cycles_per_bit", self.uav_cycles_per_bit)?;
        require_positive("hap_cycles_per_bit", self.hap_cycles_per_bit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub uav_basic: f64,
    pub hap_basic: f64,
    pub uav_chip_coeff: f64,
    pub hap_chip_coeff: f64,
    pub uav_budget: f64,
    pub hap_budget: f64,
    /// Transmit power of a UAV when relaying to the HAP, watts.
    pub uav_relay_power: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        require_nonnegative("uav_basic", self.uav_basic)?;
        require_nonnegative("hap_basic", self.hap_basic)?;
        require_nonnegative("uav_chip_coeff", self.uav_chip_coeff)?;
        require_nonnegative("hap_chip_coeff", self.hap_chip_coeff)?;
        require_nonnegative("uav_relay_power", self.uav_relay_power)?;
        if !(self.uav_budget.is_finite() && self.uav_budget > self.uav_basic) {
            return Err(invalid("uav_budget", "must exceed uav_basic"));
        }
        if !(self.hap_budget.is_finite() && self.hap_budget > self.hap_basic) {
            return Err(invalid("hap_budget", "must exceed hap_basic"));
        }
        Ok(())
    }
}

/// Per-bit delays (s/bit) and energies (J/bit) of every route segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEnergyCoeffs {
    /// `[i][j]`: TD `i` uploading to UAV `j`.
    pub access_delay: Vec<Vec<f64>>,
    /// UAV `j` computing locally.
    pub uav_compute_delay: Vec<f64>,
    /// UAV `j` relaying to the HAP plus HAP compute.
    pub relay_path_delay: Vec<f64>,
    pub uav_relay_energy: Vec<f64>,
    pub uav_compute_energy: Vec<f64>,
    pub hap_compute_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tds: Vec<Position3D>,
    pub uavs: Vec<Position3D>,
    pub hap: Position3D,
    pub radio: RadioParams,
    pub compute: ComputeParams,
    pub energy: EnergyParams,
    pub quota_uav: usize,
    pub quota_hap: usize,
    /// `[i][j]`, bits/s
    pub rate_td_uav: Vec<Vec<f64>>,
    /// `[j]`, bits/s
    pub rate_uav_hap: Vec<f64>,
}

impl Scenario {
    /// Builds a scenario and computes all link rates from the geometry.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tds: Vec<Position3D>,
        uavs: Vec<Position3D>,
        hap: Position3D,
        radio: RadioParams,
        compute: ComputeParams,
        energy: EnergyParams,
        quota_uav: usize,
        quota_hap: usize,
    ) -> Result<Self, ScenarioError> {
        let mut s = Self {
            tds,
            uavs,
            hap,
            radio,
            compute,
            energy,
            quota_uav,
            quota_hap,
            rate_td_uav: Vec::new(),
            rate_uav_hap: Vec::new(),
        };
        s.validate_parameters()?;
        let (r_td, r_hap) = s.compute_rates()?;
        s.rate_td_uav = r_td;
        s.rate_uav_hap = r_hap;
        Ok(s)
    }

    pub fn num_tds(&self) -> usize {
        self.tds.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    fn validate_parameters(&self) -> Result<(), ScenarioError> {
        if self.tds.is_empty() {
            return Err(invalid("tds", "at least one device is required"));
        }
        if self.uavs.is_empty() {
            return Err(invalid("uavs", "at least one UAV is required"));
        }
        for p in &self.tds {
            p.validate("tds")?;
        }
        for p in &self.uavs {
            p.validate("uavs")?;
        }
        self.hap.validate("hap")?;
        self.radio.validate()?;
        self.compute.validate()?;
        self.energy.validate()
    }

    fn compute_rates(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>), ScenarioError> {
        let r = &self.radio;
        let td_uav = self
            .tds
            .iter()
            .map(|td| {
                self.uavs
                    .iter()
                    .map(|uav| {
                        let g = channel_gain(r.ref_gain_td_uav, distance(td, uav))?;
                        link_rate(r.bandwidth_td_uav, r.tx_power_td, g, r.noise_power)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let uav_hap = self
            .uavs
            .iter()
            .map(|uav| {
                let g = channel_gain(r.ref_gain_uav_hap, distance(uav, &self.hap))?;
                link_rate(r.bandwidth_uav_hap, r.tx_power_uav, g, r.noise_power)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let positive = td_uav.iter().flatten().chain(&uav_hap).all(|&v| v > 0.0);
        if !positive {
            return Err(ScenarioError::Domain("link rate underflowed to zero".into()));
        }
        Ok((td_uav, uav_hap))
    }

    /// Checks a deserialized snapshot: parameters valid and stored rates
    /// within `1e-9` relative of the rates recomputed from the positions.
    pub fn verify(&self) -> Result<(), ScenarioError> {
        self.validate_parameters()?;
        let (r_td, r_hap) = self.compute_rates()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        if self.rate_td_uav.len() != r_td.len()
            || self.rate_td_uav.iter().zip(&r_td).any(|(a, b)| {
                a.len() != b.len() || a.iter().zip(b).any(|(x, y)| !close(*x, *y))
            })
        {
            return Err(ScenarioError::InconsistentRates("rate_td_uav".into()));
        }
        if self.rate_uav_hap.len() != r_hap.len()
            || self.rate_uav_hap.iter().zip(&r_hap).any(|(x, y)| !close(*x, *y))
        {
            return Err(ScenarioError::InconsistentRates("rate_uav_hap".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| invalid("snapshot", e.to_string()))?;
        s.verify()?;
        Ok(s)
    }

    pub fn per_bit_coefficients(&self) -> DelayEnergyCoeffs {
        let c = &self.compute;
        let e = &self.energy;
        let uav_compute_delay = c.uav_cycles_per_bit / c.uav_capability;
        let hap_compute_delay = c.hap_cycles_per_bit / c.hap_capability;
        // beta * C^3 * (lambda / C) seconds of compute per bit
        let uav_compute_energy = e.uav_chip_coeff * c.uav_capability.powi(2) * c.uav_cycles_per_bit;
        let hap_compute_energy = e.hap_chip_coeff * c.hap_capability.powi(2) * c.hap_cycles_per_bit;
        let j = self.num_uavs();
        DelayEnergyCoeffs {
            access_delay: self
                .rate_td_uav
                .iter()
                .map(|row| row.iter().map(|r| 1.0 / r).collect())
                .collect(),
            uav_compute_delay: vec![uav_compute_delay; j],
            relay_path_delay: self
                .rate_uav_hap
                .iter()
                .map(|r| 1.0 / r + hap_compute_delay)
                .collect(),
            uav_relay_energy: self
                .rate_uav_hap
                .iter()
                .map(|r| e.uav_relay_power / r)
                .collect(),
            uav_compute_energy: vec![uav_compute_energy; j],
            hap_compute_energy,
        }
    }
}

/// Everything needed to place a random scenario. Values are linear-scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_tds: usize,
    pub num_uavs: usize,
    /// Side of the square deployment area, meters.
    pub area_side: f64,
    pub uav_altitude: f64,
    pub hap_position: Position3D,
    pub radio: RadioParams,
    pub compute: ComputeParams,
    pub energy: EnergyParams,
    pub quota_uav: usize,
    pub quota_hap: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_tds: 10,
            num_uavs: 3,
            area_side: 10_000.0,
            uav_altitude: 2_000.0,
            hap_position: Position3D {
                x: 5_000.0,
                y: 5_000.0,
                z: 20_000.0,
            },
            radio: RadioParams {
                ref_gain_td_uav: 1e-6,
                ref_gain_uav_hap: 1e-6,
                bandwidth_td_uav: 1e6,
                bandwidth_uav_hap: 2e7,
                noise_power: 1e-10,
                tx_power_td: 0.5,
                tx_power_uav: 10.0,
            },
            compute: ComputeParams {
                uav_capability: 3e9,
                hap_capability: 5e10,
                uav_cycles_per_bit: 270.0,
                hap_cycles_per_bit: 1100.0,
            },
            energy: EnergyParams {
                uav_basic: 0.0,
                hap_basic: 0.0,
                uav_chip_coeff: 1e-28,
                hap_chip_coeff: 1e-28,
                uav_budget: 100e3,
                hap_budget: 1000e3,
                uav_relay_power: 10.0,
            },
            quota_uav: 4,
            quota_hap: 4,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.num_tds == 0 {
            return Err(invalid("num_tds", "must be >= 1"));
        }
        if self.num_uavs == 0 {
            return Err(invalid("num_uavs", "must be >= 1"));
        }
        require_positive("area_side", self.area_side)?;
        require_nonnegative("uav_altitude", self.uav_altitude)?;
        self.hap_position.validate("hap_position")?;
        self.radio.validate()?;
        self.compute.validate()?;
        self.energy.validate()
    }
}

/// Places TDs on the ground and UAVs at `uav_altitude`, both uniformly over
/// the square area. Deterministic in `seed`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    config.validate()?;
    let mut rng = stream_rng(seed, Stream::Placement);
    let side = config.area_side;
    let uavs = (0..config.num_uavs)
        .map(|_| Position3D {
            x: rng.gen_range(0.0..side),
            y: rng.gen_range(0.0..side),
            z: config.uav_altitude,
        })
        .collect();
    let tds = (0..config.num_tds)
        .map(|_| Position3D {
            x: rng.gen_range(0.0..side),
            y: rng.gen_range(0.0..side),
            z: 0.0,
        })
        .collect();
    Scenario::new(
        tds,
        uavs,
        config.hap_position,
        config.radio,
        config.compute,
        config.energy,
        config.quota_uav,
        config.quota_hap,
    )
}
