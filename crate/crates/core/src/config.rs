//! Run configuration file. Gains and noise are written in dB and converted
//! to linear values here; task sizes are written in Mbit. Unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ambiguity::{AmbiguityError, Distribution, SampleSpace};
use crate::evaluation::{ExperimentConfig, RadiusSpec, SweepParam};
use crate::geometry::{ComputeParams, EnergyParams, Position3D, RadioParams, ScenarioConfig, ScenarioError};
use crate::mdrloa::Method;

const MBIT: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field '{field}': {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub ref_gain_td_uav_db: f64,
    pub ref_gain_uav_hap_db: f64,
    pub bandwidth_td_uav_hz: f64,
    pub bandwidth_uav_hap_hz: f64,
    pub noise_power_db: f64,
    pub tx_power_td_w: f64,
    pub tx_power_uav_w: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        Self {
            ref_gain_td_uav_db: -60.0,
            ref_gain_uav_hap_db: -60.0,
            bandwidth_td_uav_hz: 1e6,
            bandwidth_uav_hap_hz: 2e7,
            noise_power_db: -100.0,
            tx_power_td_w: 0.5,
            tx_power_uav_w: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeSection {
    pub uav_capability_hz: f64,
    pub hap_capability_hz: f64,
    pub uav_cycles_per_bit: f64,
    pub hap_cycles_per_bit: f64,
}

impl Default for ComputeSection {
    fn default() -> Self {
        Self {
            uav_capability_hz: 3e9,
            hap_capability_hz: 5e10,
            uav_cycles_per_bit: 270.0,
            hap_cycles_per_bit: 1100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub uav_basic_j: f64,
    pub hap_basic_j: f64,
    pub uav_chip_coeff: f64,
    pub hap_chip_coeff: f64,
    pub uav_budget_j: f64,
    pub hap_budget_j: f64,
    pub uav_relay_power_w: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self {
            uav_basic_j: 0.0,
            hap_basic_j: 0.0,
            uav_chip_coeff: 1e-28,
            hap_chip_coeff: 1e-28,
            uav_budget_j: 1e5,
            hap_budget_j: 1e6,
            uav_relay_power_w: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub num_tds: usize,
    pub num_uavs: usize,
    pub area_side_m: f64,
    pub uav_altitude_m: f64,
    pub hap_position_m: [f64; 3],
    pub quota_uav: usize,
    pub quota_hap: usize,
    pub radio: RadioSection,
    pub compute: ComputeSection,
    pub energy: EnergySection,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            num_tds: 10,
            num_uavs: 3,
            area_side_m: 10_000.0,
            uav_altitude_m: 2_000.0,
            hap_position_m: [5_000.0, 5_000.0, 20_000.0],
            quota_uav: 4,
            quota_hap: 4,
            radio: RadioSection::default(),
            compute: ComputeSection::default(),
            energy: EnergySection::default(),
        }
    }
}

/// Either the keyword `"uniform"` or explicit probabilities per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthSpec {
    Named(String),
    Probabilities(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmbiguitySection {
    pub atoms_mbit: Vec<f64>,
    pub history_len: usize,
    /// Fixed L1 radius. Mutually exclusive with `confidence`.
    pub tolerance: Option<f64>,
    /// Confidence level from which the radius is derived.
    pub confidence: Option<f64>,
    pub truth: TruthSpec,
    pub per_device_history: bool,
}

impl Default for AmbiguitySection {
    fn default() -> Self {
        Self {
            atoms_mbit: vec![3.0, 9.0, 15.0, 21.0, 27.0],
            history_len: 200,
            tolerance: None,
            confidence: None,
            truth: TruthSpec::Named("uniform".into()),
            per_device_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
    pub jobs: usize,
    pub sweep: Option<SweepSection>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seeds: (1..=20).collect(),
            methods: vec!["dro".into(), "do".into(), "ro".into()],
            jobs: 1,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub ambiguity: AmbiguitySection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Checks everything, so that no work starts on a bad config.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario_config()?.validate()?;
        self.experiment_config()?;
        if self.experiment.seeds.is_empty() {
            return Err(invalid("experiment.seeds", "at least one seed is required"));
        }
        if let Some(sw) = &self.experiment.sweep {
            self.sweep_spec_from(&sw.param, &sw.values)?;
        }
        Ok(())
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig, ConfigError> {
        let s = &self.scenario;
        let [hx, hy, hz] = s.hap_position_m;
        Ok(ScenarioConfig {
            num_tds: s.num_tds,
            num_uavs: s.num_uavs,
            area_side: s.area_side_m,
            uav_altitude: s.uav_altitude_m,
            hap_position: Position3D::new(hx, hy, hz)
                .map_err(|e| invalid("scenario.hap_position_m", e.to_string()))?,
            radio: RadioParams {
                ref_gain_td_uav: db_to_linear(s.radio.ref_gain_td_uav_db),
                ref_gain_uav_hap: db_to_linear(s.radio.ref_gain_uav_hap_db),
                bandwidth_td_uav: s.radio.bandwidth_td_uav_hz,
                bandwidth_uav_hap: s.radio.bandwidth_uav_hap_hz,
                noise_power: db_to_linear(s.radio.noise_power_db),
                tx_power_td: s.radio.tx_power_td_w,
                tx_power_uav: s.radio.tx_power_uav_w,
            },
            compute: ComputeParams {
                uav_capability: s.compute.uav_capability_hz,
                hap_capability: s.compute.hap_capability_hz,
                uav_cycles_per_bit: s.compute.uav_cycles_per_bit,
                hap_cycles_per_bit: s.compute.hap_cycles_per_bit,
            },
            energy: EnergyParams {
                uav_basic: s.energy.uav_basic_j,
                hap_basic: s.energy.hap_basic_j,
                uav_chip_coeff: s.energy.uav_chip_coeff,
                hap_chip_coeff: s.energy.hap_chip_coeff,
                uav_budget: s.energy.uav_budget_j,
                hap_budget: s.energy.hap_budget_j,
                uav_relay_power: s.energy.uav_relay_power_w,
            },
            quota_uav: s.quota_uav,
            quota_hap: s.quota_hap,
        })
    }

    pub fn radius_spec(&self) -> Result<RadiusSpec, ConfigError> {
        match (self.ambiguity.tolerance, self.ambiguity.confidence) {
            (Some(_), Some(_)) => Err(invalid(
                "ambiguity.tolerance",
                "give either tolerance or confidence, not both",
            )),
            (Some(eps), None) if eps >= 0.0 && eps.is_finite() => Ok(RadiusSpec::Tolerance(eps)),
            (Some(eps), None) => Err(invalid("ambiguity.tolerance", format!("must be >= 0, got {eps}"))),
            (None, Some(nu)) if nu > 0.0 && nu < 1.0 => Ok(RadiusSpec::Confidence(nu)),
            (None, Some(nu)) => Err(invalid("ambiguity.confidence", format!("must lie in (0, 1), got {nu}"))),
            (None, None) => Ok(RadiusSpec::Tolerance(0.3)),
        }
    }

    pub fn methods(&self) -> Result<Vec<Method>, ConfigError> {
        if self.experiment.methods.is_empty() {
            return Err(invalid("experiment.methods", "at least one method is required"));
        }
        self.experiment
            .methods
            .iter()
            .map(|m| m.parse().map_err(|e: String| invalid("experiment.methods", e)))
            .collect()
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig, ConfigError> {
        let a = &self.ambiguity;
        let space = SampleSpace::from_atoms(a.atoms_mbit.iter().map(|m| m * MBIT).collect())
            .map_err(|e| invalid("ambiguity.atoms_mbit", e.to_string()))?;
        if a.history_len == 0 {
            return Err(invalid("ambiguity.history_len", "must be >= 1"));
        }
        let truth = match &a.truth {
            TruthSpec::Named(n) if n == "uniform" => Distribution::uniform(space.len()),
            TruthSpec::Named(n) => {
                return Err(invalid("ambiguity.truth", format!("unknown distribution '{n}'")));
            }
            TruthSpec::Probabilities(p) if p.len() != space.len() => {
                return Err(invalid(
                    "ambiguity.truth",
                    format!("{} probabilities for {} atoms", p.len(), space.len()),
                ));
            }
            TruthSpec::Probabilities(p) => {
                Distribution::new(p.clone()).map_err(|e| invalid("ambiguity.truth", e.to_string()))?
            }
        };
        Ok(ExperimentConfig {
            scenario: self.scenario_config()?,
            space,
            history_len: a.history_len,
            radius: self.radius_spec()?,
            truth,
            per_device_history: a.per_device_history,
            methods: self.methods()?,
        })
    }

    pub fn sweep_spec_from(&self, param: &str, values: &[f64]) -> Result<(SweepParam, Vec<f64>), ConfigError> {
        let p: SweepParam = param.parse().map_err(|e: String| invalid("experiment.sweep.param", e))?;
        if values.is_empty() {
            return Err(invalid("experiment.sweep.values", "at least one value is required"));
        }
        let base = self.experiment_config()?;
        for &v in values {
            p.apply(&base, v)
                .map_err(|e| invalid("experiment.sweep.values", e.to_string()))?;
        }
        Ok((p, values.to_vec()))
    }
}
