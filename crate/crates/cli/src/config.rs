//! Run configuration. Angles are in degrees here and converted to radians
//! when physical parameters are built.

use std::path::PathBuf;

use hetqkd::channel::loss_db_to_eta;
use hetqkd::estimation::EstimationInputs;
use hetqkd::finite_size::FiniteSizeConfig;
use hetqkd::{KeyRateVariant, PhysicalParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory; results go to stdout when absent.
    pub out: Option<PathBuf>,
    pub params: ParamsConfig,
    pub keyrate: KeyrateConfig,
    pub tolerance: ToleranceConfig,
    pub finite: FiniteConfig,
    pub simulate: SimulateConfig,
    pub estimate: EstimateConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }
}

/// Physical parameters. Give at most one of `eta` and `loss_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub eta: Option<f64>,
    pub loss_db: Option<f64>,
    pub eps: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub eta_d: f64,
    pub eta_bs: f64,
    pub alpha: f64,
    pub v_a: f64,
    pub beta: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            eta: None,
            loss_db: Some(3.5),
            eps: 0.005,
            theta_deg: 10.0,
            phi_deg: 0.0,
            eta_d: 1.0,
            eta_bs: 0.5,
            alpha: 1.0,
            v_a: 3.3,
            beta: 0.95,
        }
    }
}

impl ParamsConfig {
    pub fn physical(&self) -> Result<PhysicalParams, CliError> {
        let eta = match (self.eta, self.loss_db) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("params: give either eta or loss_db, not both".into()))
            }
            (Some(eta), None) => eta,
            (None, Some(db)) => loss_db_to_eta(db),
            (None, None) => return Err(CliError::Config("params: eta or loss_db is required".into())),
        };
        let p = PhysicalParams {
            eta,
            eps: self.eps,
            theta: self.theta_deg.to_radians(),
            phi: self.phi_deg.to_radians(),
            eta_d: self.eta_d,
            eta_bs: self.eta_bs,
            alpha: self.alpha,
            v_a: self.v_a,
            beta: self.beta,
        };
        p.validate().map_err(|e| CliError::Config(format!("params: {e}")))?;
        Ok(p)
    }
}

pub(crate) fn parse_variants(names: &[String]) -> Result<Vec<KeyRateVariant>, CliError> {
    if names.is_empty() {
        return Err(CliError::Config("variants must not be empty".into()));
    }
    names
        .iter()
        .map(|n| n.parse().map_err(|e| CliError::Config(format!("{e}"))))
        .collect()
}

fn all_variants() -> Vec<String> {
    KeyRateVariant::all().iter().map(|v| v.to_string()).collect()
}

/// Grid for `keyrate`; every combination is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyrateConfig {
    pub eta: Vec<f64>,
    pub eps: Vec<f64>,
    pub theta_deg: Vec<f64>,
    pub phi_deg: Vec<f64>,
    pub variants: Vec<String>,
}

impl Default for KeyrateConfig {
    fn default() -> Self {
        Self {
            eta: vec![0.1, 0.2, 0.4467, 0.8],
            eps: vec![0.0, 0.005, 0.01],
            theta_deg: vec![0.0, 10.0, 15.0, 30.0],
            phi_deg: vec![0.0],
            variants: all_variants(),
        }
    }
}

/// Grid for `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub eta: Vec<f64>,
    pub theta_deg: Vec<f64>,
    pub variants: Vec<String>,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            eta: (0..10).map(|k| 10f64.powf(-0.2 * k as f64) * 0.95).collect(),
            theta_deg: vec![0.0, 10.0, 15.0, 30.0],
            variants: all_variants(),
        }
    }
}

/// Distance sweep for `finite`. Fibre lengths use `db_per_km`; entries in
/// `loss_db` are evaluated as fixed losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteConfig {
    pub distances_km: Vec<f64>,
    pub loss_db: Vec<f64>,
    pub db_per_km: f64,
    pub block_sizes: Vec<f64>,
    /// Search the key fraction; otherwise use `frac_key`.
    pub optimize_fraction: bool,
    pub frac_key: f64,
    pub z: f64,
    pub eps_pe: f64,
    pub eps_smooth: f64,
}

impl Default for FiniteConfig {
    fn default() -> Self {
        let fs = FiniteSizeConfig::default();
        Self {
            distances_km: (0..=16).map(|k| 5.0 * k as f64).collect(),
            loss_db: vec![],
            db_per_km: 0.2,
            block_sizes: vec![1e6, 1e7, 1e8],
            optimize_fraction: true,
            frac_key: fs.frac_key,
            z: fs.z,
            eps_pe: fs.eps_pe,
            eps_smooth: fs.eps_smooth,
        }
    }
}

impl FiniteConfig {
    pub fn size_config(&self, n_total: f64) -> Result<FiniteSizeConfig, CliError> {
        let cfg = FiniteSizeConfig {
            n_total,
            frac_key: self.frac_key,
            eps_pe: self.eps_pe,
            z: self.z,
            eps_smooth: self.eps_smooth,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("finite: {e}")))?;
        Ok(cfg)
    }
}

/// Simulate, estimate, realign and rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub m: usize,
    pub frames: usize,
    /// Block size used for the finite-size rates of each frame.
    pub n_total: f64,
    pub write_frames: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { m: 1_000_000, frames: 1, n_total: 1e8, write_frames: true }
    }
}

/// Known inputs for `estimate`; the modulation and detector come from `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub z: f64,
    pub eta_ref: Option<f64>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { z: 6.5, eta_ref: None }
    }
}

impl EstimateConfig {
    pub fn inputs(&self, p: &PhysicalParams) -> EstimationInputs {
        EstimationInputs { v_a: p.v_a, alpha: p.alpha, eta_d: p.eta_d, eta_ref: self.eta_ref, z: self.z }
    }
}
