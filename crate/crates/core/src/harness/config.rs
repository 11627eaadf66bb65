//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{AlgoSettings, Method};
use crate::channel::TopologyConfig;
use crate::error::{Error, Result};
use crate::uncertainty::RobustParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub robust: RobustParams,
    pub algo: AlgoSettings,
    /// Variance of the additive CSI error before path-loss scaling.
    pub error_var: f64,
    /// Target SINR grid in dB for the sweeps.
    pub gamma_db: Vec<f64>,
    /// Target SINR of the QoS table.
    pub qos_gamma_db: f64,
    /// Total QoS test realizations.
    pub qos_tests: usize,
    /// Test realizations per training set.
    pub qos_retrain: usize,
    pub feasibility_realizations: usize,
    pub power_realizations: usize,
    /// Methods compared in the power sweep.
    pub methods: Vec<Method>,
    /// Check `zeta > delta + eps (1 - delta)`.
    pub robust_mode: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologyConfig::default(),
            robust: RobustParams::default(),
            algo: AlgoSettings::default(),
            error_var: 1e-4,
            gamma_db: vec![0.0, 2.0, 4.0, 6.0],
            qos_gamma_db: 4.0,
            qos_tests: 2000,
            qos_retrain: 200,
            feasibility_realizations: 25,
            power_realizations: 20,
            methods: vec![Method::ReweightedDc, Method::ReweightedSdr, Method::MixedL1L2, Method::CbSdr],
            robust_mode: true,
            seed: 1,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.gamma_db.is_empty() {
            return bad("gamma grid is empty");
        }
        if self.gamma_db.iter().chain([&self.qos_gamma_db]).any(|g| !g.is_finite()) {
            return bad("gamma values must be finite");
        }
        let counts = [
            self.qos_tests,
            self.qos_retrain,
            self.feasibility_realizations,
            self.power_realizations,
        ];
        if counts.contains(&0) {
            return bad("realization and test counts must be >= 1");
        }
        if self.methods.is_empty() {
            return bad("method list is empty");
        }
        if !(self.error_var >= 0.0) || !self.error_var.is_finite() {
            return bad("error variance must be finite and >= 0");
        }
        if self.robust_mode {
            self.robust.validate()?;
        } else if self.robust.shape_samples < 1 || self.robust.shape_samples >= self.robust.samples {
            return bad("need 1 <= D1 < D");
        }
        self.algo.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Target SINRs in linear scale for every user.
    pub fn gamma_linear(&self, db: f64) -> Vec<f64> {
        vec![crate::algorithms::db_to_linear(db); self.topology.n_users]
    }
}
