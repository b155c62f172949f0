//! Experiment configuration: one JSON document with sections `crypto`,
//! `quant`, `dag`, `fed`, `data` and `sim`.
//!
//! Every section except `sim.seed` has defaults. Unknown keys are rejected so
//! a typo never silently falls back to a default.

use std::path::Path;

use fedchain_core::dag_ledger::{DagConfig, WalkParams};
use fedchain_core::local_model::SyntheticSpec;
use fedchain_core::secure_agg::{ParamRequest, QuantParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config value `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryptoSection {
    pub degree: usize,
    pub external_degree: Option<usize>,
    pub plaintext_modulus: u64,
    pub sigma: f64,
    pub gadget_base: u64,
}

impl Default for CryptoSection {
    fn default() -> Self {
        let r = ParamRequest::default();
        CryptoSection {
            degree: r.degree,
            external_degree: r.external_degree,
            plaintext_modulus: r.plaintext_modulus,
            sigma: r.sigma,
            gadget_base: r.gadget_base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantSection {
    pub scale: f64,
    pub clip: f64,
    pub max_parties: usize,
}

impl Default for QuantSection {
    fn default() -> Self {
        let q = QuantParams::default();
        QuantSection {
            scale: q.scale,
            clip: q.clip,
            max_parties: q.max_parties,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DagSection {
    pub rho: f64,
    pub theta: f64,
    pub clamp: bool,
    pub tolerance: f64,
    pub walkers: usize,
    pub start_depth: usize,
    pub max_steps: Option<usize>,
}

impl Default for DagSection {
    fn default() -> Self {
        let d = DagConfig::default();
        let w = WalkParams::default();
        DagSection {
            rho: 0.5,
            theta: d.theta,
            clamp: d.clamp,
            tolerance: d.tolerance,
            walkers: w.walkers,
            start_depth: w.start_depth,
            max_steps: w.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FedSection {
    /// Local SGD learning rate.
    pub eta: f64,
    pub gradients_per_hospital: usize,
    pub batch_size: usize,
    /// Step size applied to the aggregated update.
    pub server_eta: f64,
    /// Per-hospital credibility; `None` means 1 for everyone.
    pub credibility: Option<Vec<f64>>,
    /// Per-hospital time limits in simulated milliseconds; `None` means unlimited.
    pub time_limits_ms: Option<Vec<f64>>,
    pub plateau_window: usize,
    pub plateau_tol: f64,
}

impl Default for FedSection {
    fn default() -> Self {
        FedSection {
            eta: 0.05,
            gradients_per_hospital: 1000,
            batch_size: 16,
            server_eta: 1.0,
            credibility: None,
            time_limits_ms: None,
            plateau_window: 5,
            plateau_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub classes: usize,
    pub features: usize,
    pub samples_per_hospital: usize,
    pub separation: f64,
    pub std: f64,
    /// Feature `f` is scaled by `scale_decay^f`; 1 keeps classes isotropic.
    pub scale_decay: f64,
    /// Shared validation split used to re-evaluate DAG parents.
    pub validation_samples: usize,
    /// Held-out split for the reported global accuracy.
    pub test_samples: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        DataSection {
            classes: s.classes,
            features: s.features,
            samples_per_hospital: s.samples,
            separation: s.separation,
            std: s.std,
            scale_decay: s.scale_decay,
            validation_samples: 600,
            test_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dropout {
    /// First round (1-based) in which the hospital is absent.
    pub round: u64,
    pub hospital: usize,
}

/// How hospital updates reach the leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    /// Encrypted shares, ledger unwrap and sum decryption.
    Secure,
    /// The same weighted updates sent in the clear; the control run.
    Plaintext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub seed: u64,
    #[serde(default = "default_hospitals")]
    pub hospitals: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_slots")]
    pub slots_per_episode: usize,
    #[serde(default = "default_mode")]
    pub mode: AggregationMode,
    #[serde(default)]
    pub dropouts: Vec<Dropout>,
}

fn default_hospitals() -> usize {
    3
}
fn default_episodes() -> usize {
    5
}
fn default_slots() -> usize {
    2
}
fn default_mode() -> AggregationMode {
    AggregationMode::Secure
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub crypto: CryptoSection,
    #[serde(default)]
    pub quant: QuantSection,
    #[serde(default)]
    pub dag: DagSection,
    #[serde(default)]
    pub fed: FedSection,
    #[serde(default)]
    pub data: DataSection,
    pub sim: SimSection,
}

impl ExperimentConfig {
    /// A config with every default and the given seed.
    pub fn with_seed(seed: u64) -> Self {
        ExperimentConfig {
            crypto: CryptoSection::default(),
            quant: QuantSection::default(),
            dag: DagSection::default(),
            fed: FedSection::default(),
            data: DataSection::default(),
            sim: SimSection {
                seed,
                hospitals: default_hospitals(),
                episodes: default_episodes(),
                slots_per_episode: default_slots(),
                mode: default_mode(),
                dropouts: Vec::new(),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn param_request(&self) -> ParamRequest {
        ParamRequest {
            degree: self.crypto.degree,
            external_degree: self.crypto.external_degree,
            plaintext_modulus: self.crypto.plaintext_modulus,
            sigma: self.crypto.sigma,
            gadget_base: self.crypto.gadget_base,
            max_parties: self.quant.max_parties,
        }
    }

    pub fn quant_params(&self) -> QuantParams {
        QuantParams {
            scale: self.quant.scale,
            clip: self.quant.clip,
            max_parties: self.quant.max_parties,
            plaintext_modulus: self.crypto.plaintext_modulus,
        }
    }

    pub fn dag_config(&self) -> DagConfig {
        DagConfig {
            theta: self.dag.theta,
            clamp: self.dag.clamp,
            tolerance: self.dag.tolerance,
        }
    }

    pub fn walk_params(&self) -> WalkParams {
        WalkParams {
            walkers: self.dag.walkers,
            start_depth: self.dag.start_depth,
            max_steps: self.dag.max_steps,
        }
    }

    /// Synthetic spec for `samples` draws.
    pub fn synthetic(&self, samples: usize) -> SyntheticSpec {
        SyntheticSpec {
            classes: self.data.classes,
            features: self.data.features,
            samples,
            separation: self.data.separation,
            std: self.data.std,
            scale_decay: self.data.scale_decay,
        }
    }

    pub fn rounds(&self) -> u64 {
        (self.sim.episodes * self.sim.slots_per_episode) as u64
    }

    /// Check every cross-field constraint, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.sim.hospitals;
        if n == 0 {
            return Err(invalid("sim.hospitals", "need at least one hospital"));
        }
        if n > self.quant.max_parties {
            return Err(invalid(
                "sim.hospitals",
                format!(
                    "{n} hospitals exceed quant.max_parties = {}",
                    self.quant.max_parties
                ),
            ));
        }
        if self.sim.episodes == 0 {
            return Err(invalid("sim.episodes", "must be at least 1"));
        }
        if self.sim.slots_per_episode == 0 {
            return Err(invalid("sim.slots_per_episode", "must be at least 1"));
        }
        let rounds = self.rounds();
        let mut dropped = vec![false; n];
        for d in &self.sim.dropouts {
            if d.hospital >= n {
                return Err(invalid(
                    "sim.dropouts",
                    format!("hospital {} does not exist", d.hospital),
                ));
            }
            if d.round == 0 || d.round > rounds {
                return Err(invalid(
                    "sim.dropouts",
                    format!("round {} outside 1..={rounds}", d.round),
                ));
            }
            if std::mem::replace(&mut dropped[d.hospital], true) {
                return Err(invalid(
                    "sim.dropouts",
                    format!("hospital {} drops out twice", d.hospital),
                ));
            }
        }
        if dropped.iter().all(|&d| d) {
            return Err(invalid("sim.dropouts", "at least one hospital must remain"));
        }
        if self.fed.gradients_per_hospital == 0 {
            return Err(invalid("fed.gradients_per_hospital", "must be at least 1"));
        }
        if self.fed.batch_size == 0 {
            return Err(invalid("fed.batch_size", "must be at least 1"));
        }
        if !(self.fed.eta > 0.0 && self.fed.eta.is_finite()) {
            return Err(invalid("fed.eta", "must be positive and finite"));
        }
        if !(self.fed.server_eta > 0.0 && self.fed.server_eta.is_finite()) {
            return Err(invalid("fed.server_eta", "must be positive and finite"));
        }
        if let Some(c) = &self.fed.credibility {
            if c.len() != n {
                return Err(invalid(
                    "fed.credibility",
                    format!("need {n} entries, got {}", c.len()),
                ));
            }
            if c.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(invalid("fed.credibility", "entries must lie in [0, 1]"));
            }
        }
        if let Some(t) = &self.fed.time_limits_ms {
            if t.len() != n {
                return Err(invalid(
                    "fed.time_limits_ms",
                    format!("need {n} entries, got {}", t.len()),
                ));
            }
            if t.iter().any(|x| x.is_nan() || *x < 0.0) {
                return Err(invalid("fed.time_limits_ms", "limits must be non-negative"));
            }
        }
        if self.fed.plateau_window == 0 {
            return Err(invalid("fed.plateau_window", "must be at least 1"));
        }
        if self.fed.plateau_tol.is_nan() || self.fed.plateau_tol < 0.0 {
            return Err(invalid("fed.plateau_tol", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.dag.rho) {
            return Err(invalid("dag.rho", "must lie in [0, 1]"));
        }
        if self.dag.walkers == 0 {
            return Err(invalid("dag.walkers", "must be at least 1"));
        }
        self.dag_config()
            .validate()
            .map_err(|e| invalid("dag", e.to_string()))?;
        if self.data.validation_samples == 0 {
            return Err(invalid("data.validation_samples", "must be at least 1"));
        }
        if self.data.test_samples == 0 {
            return Err(invalid("data.test_samples", "must be at least 1"));
        }
        self.synthetic(self.data.samples_per_hospital)
            .validate()
            .map_err(|e| invalid("data", e.to_string()))?;
        self.quant_params()
            .validate()
            .map_err(|e| invalid("quant", e.to_string()))?;
        Ok(())
    }
}
