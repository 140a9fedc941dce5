use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon_stats::{ReadoutPhysics, DEFAULT_TAIL_TOL};
use crate::povm::{ModelKind, ReadoutModel};
use crate::quantum::{pauli_bases, MeasurementProtocol};

/// Experiment description as read from a TOML file.
///
/// ```toml
/// seed = 7
/// out = "out/fig1"
///
/// [physics]
/// t = 1.0
/// lambda = 0.05        # or T1 = 20.0
/// lambda_b = 3.0
/// lambda_d = 0.05
///
/// [model]
/// kind = "photon_count"
/// k0 = "optimal"
///
/// [run]
/// shots = 1000000
/// ensemble = 200
/// ```
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateConfig>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub check: BTreeMap<String, CheckConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, rename = "T1", skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    pub lambda_b: f64,
    pub lambda_d: f64,
}

impl PhysicsConfig {
    pub fn resolve(&self) -> Result<ReadoutPhysics> {
        let lambda = match (self.lambda, self.t1) {
            (Some(l), None) => l,
            (None, Some(t1)) if t1 > 0.0 => 1.0 / t1,
            (None, Some(t1)) => return Err(Error::Config(format!("T1 must be positive, got {t1}"))),
            (Some(_), Some(_)) => return Err(Error::Config("give either lambda or T1, not both".into())),
            (None, None) => return Err(Error::Config("physics needs lambda or T1".into())),
        };
        ReadoutPhysics::new(self.t, lambda, self.lambda_b, self.lambda_d)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub qubits: usize,
    pub bases: String,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            qubits: 2,
            bases: "pauli".into(),
        }
    }
}

impl ProtocolConfig {
    pub fn resolve(&self) -> Result<MeasurementProtocol> {
        if self.bases != "pauli" {
            return Err(Error::Config(format!("unknown basis set '{}', expected \"pauli\"", self.bases)));
        }
        if !(1..=3).contains(&self.qubits) {
            return Err(Error::Config(format!("qubits must be 1, 2 or 3, got {}", self.qubits)));
        }
        pauli_bases(self.qubits)
    }
}

/// Threshold policy: `"optimal"` or a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThresholdPolicy {
    #[default]
    Optimal,
    Fixed(usize),
}

impl Serialize for ThresholdPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThresholdPolicy::Optimal => s.serialize_str("optimal"),
            ThresholdPolicy::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(k) => Ok(ThresholdPolicy::Fixed(k as usize)),
            Raw::Name(s) if s == "optimal" => Ok(ThresholdPolicy::Optimal),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "k0 must be \"optimal\" or a positive integer, got \"{s}\""
            ))),
        }
    }
}

impl ThresholdPolicy {
    pub fn fixed(&self) -> Option<usize> {
        match self {
            ThresholdPolicy::Optimal => None,
            ThresholdPolicy::Fixed(k) => Some(*k),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub k0: ThresholdPolicy,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// Rank of the reconstructed density matrix.
    #[serde(default = "default_rank")]
    pub rank: usize,
}

fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}

fn default_rank() -> usize {
    1
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::PhotonCount,
            k0: ThresholdPolicy::Optimal,
            tail_tol: DEFAULT_TAIL_TOL,
            rank: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub shots: u64,
    pub ensemble: usize,
    /// Also simulate data and reconstruct every ensemble state.
    #[serde(default)]
    pub simulate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            shots: 1_000_000,
            ensemble: 200,
            simulate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum SweepAxis {
    #[serde(rename = "time")]
    Time,
    #[serde(rename = "T1")]
    T1,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Time => "t",
            SweepAxis::T1 => "T1",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    /// One reconstruction for each of `reconstructions` Haar states.
    #[default]
    Ensemble,
    /// Repeated reconstructions of a single Haar state.
    Fixed,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub reconstructions: usize,
    #[serde(default)]
    pub source: StateSource,
    /// Index of the Haar state used when `source = "fixed"`.
    #[serde(default)]
    pub state_index: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Physics used for the theory curve when it should differ from the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory_physics: Option<PhysicsConfig>,
}

fn default_bins() -> usize {
    40
}

/// Tolerance band on the headline number of a command, keyed by model name.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub target: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_p_value: Option<f64>,
}

impl CheckConfig {
    pub fn verify(&self, what: &str, value: f64) -> Result<()> {
        if (value - self.target).abs() > self.tolerance {
            return Err(Error::CheckViolation(format!(
                "{what} = {value:.6} outside {} ± {}",
                self.target, self.tolerance
            )));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.resolve()?;
        self.protocol.resolve()?;
        if self.model.rank == 0 || self.model.rank > 1 << self.protocol.qubits {
            return Err(Error::Config(format!("rank {} out of range", self.model.rank)));
        }
        if !(self.model.tail_tol > 0.0 && self.model.tail_tol < 1.0) {
            return Err(Error::Config("tail_tol must lie in (0, 1)".into()));
        }
        if self.run.shots == 0 || self.run.ensemble == 0 {
            return Err(Error::Config("shots and ensemble must be positive".into()));
        }
        if let ThresholdPolicy::Fixed(0) = self.model.k0 {
            return Err(Error::Config("k0 must be at least 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
            if sweep.grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config("sweep grid must be strictly increasing".into()));
            }
            if sweep.grid.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Config("sweep grid values must be positive and finite".into()));
            }
        }
        if let Some(v) = &self.validate {
            if v.reconstructions < 2 || v.bins == 0 {
                return Err(Error::Config("validate needs at least 2 reconstructions and 1 bin".into()));
            }
            if let Some(p) = &v.theory_physics {
                p.resolve()?;
            }
        }
        for key in self.check.keys() {
            key.parse::<ModelKind>()
                .map_err(|_| Error::Config(format!("[check.{key}] does not name a model")))?;
        }
        Ok(())
    }

    pub fn readout(&self) -> Result<ReadoutModel> {
        self.readout_for(self.physics.resolve()?)
    }

    pub fn readout_for(&self, physics: ReadoutPhysics) -> Result<ReadoutModel> {
        ReadoutModel::new(physics, self.model.tail_tol, self.model.k0.fixed())
    }

    pub fn check_for(&self, kind: ModelKind) -> Option<&CheckConfig> {
        self.check
            .iter()
            .find(|(key, _)| key.parse::<ModelKind>().ok() == Some(kind))
            .map(|(_, c)| c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"
seed = 7

[physics]
t = 1.0
lambda = 0.05
lambda_b = 3.0
lambda_d = 0.05

[model]
kind = "threshold"
k0 = 2
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(FIG1).unwrap();
        assert_eq!(cfg.model.k0, ThresholdPolicy::Fixed(2));
        assert_eq!(cfg.model.kind, ModelKind::Threshold);
        assert_eq!(cfg.run.shots, 1_000_000);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn t1_alias_and_conflicts() {
        let text = FIG1.replace("lambda = 0.05", "T1 = 20.0");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!((cfg.physics.resolve().unwrap().lambda() - 0.05).abs() < 1e-15);
        let both = FIG1.replace("lambda = 0.05", "lambda = 0.05\nT1 = 20.0");
        assert!(matches!(ExperimentConfig::from_toml(&both), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            FIG1.replace("k0 = 2", "k0 = \"best\""),
            FIG1.replace("k0 = 2", "k0 = 0"),
            FIG1.replace("seed = 7", ""),
            FIG1.replace("lambda_b = 3.0", "lambda_b = 0.01"),
            format!("{FIG1}\n[sweep]\naxis = \"time\"\ngrid = [1.0, 0.5]\n"),
            format!("{FIG1}\n[check.bogus]\ntarget = 1.0\ntolerance = 0.1\n"),
            format!("{FIG1}\nextra = 1\n"),
        ] {
            assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn check_band() {
        let c = CheckConfig {
            target: 5.5,
            tolerance: 0.1,
            min_p_value: None,
        };
        assert!(c.verify("L", 5.55).is_ok());
        assert!(matches!(c.verify("L", 5.7), Err(Error::CheckViolation(_))));
    }
}
