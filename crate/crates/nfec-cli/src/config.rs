//! Configuration file handling and CLI-override merging.
//!
//! The JSON config mirrors `SystemParams` field names at the top level
//! (snake_case) and adds optional per-command sweep sections. Every field is
//! optional; missing values fall back to the built-in defaults, and flags on
//! the command line take precedence over file values.

use serde::Deserialize;

use nfec::params::{FfMgfUpper, MgfMode, ProbMode};
use nfec::toa::PulseShape;
use nfec::SystemParams;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default)]
pub struct AppConfig {
    #[serde(flatten)]
    pub params: SystemParams,
    pub fig2: Fig2Config,
    pub fig3: Fig3Config,
    pub fig4: Fig4Config,
    pub fig5: Fig5Config,
    pub crlb: CrlbConfig,
    pub validate: ValidateConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Fig2Config {
    pub sigma_grid: Vec<f64>,
    pub samples: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            sigma_grid: (1..=20).map(|s| s as f64).collect(),
            samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Fig3Config {
    pub d_max_grid: Vec<f64>,
    pub thetas: Vec<f64>,
    pub samples: u64,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self {
            d_max_grid: vec![100.0, 200.0, 300.0, 400.0, 500.0],
            thetas: vec![1e-3, 1e-2, 1e-1],
            samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Fig4Config {
    pub d_f_grid: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub samples: u64,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Self {
            d_f_grid: vec![30.0, 40.0, 55.0, 70.0, 90.0],
            sigmas: vec![1.0, 5.0, 10.0],
            samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Fig5Config {
    pub sigma_grid: Vec<f64>,
    pub thetas: Vec<f64>,
    pub samples: u64,
}

impl Default for Fig5Config {
    fn default() -> Self {
        Self {
            sigma_grid: (0..=20).map(|s| s as f64).collect(),
            thetas: vec![1e-3, 1e-2, 1e-1],
            samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct CrlbConfig {
    pub gamma_grid: Vec<f64>,
    pub bandwidth_hz: f64,
    pub shape: PulseShape,
    pub distance_m: f64,
    /// Sampling rate; zero means "4x the bandwidth".
    pub sample_rate_hz: f64,
    pub trials: usize,
}

impl Default for CrlbConfig {
    fn default() -> Self {
        Self {
            gamma_grid: vec![10.0, 100.0, 1000.0],
            bandwidth_hz: 100e6,
            shape: PulseShape::RectSpectrum,
            distance_m: 30.0,
            sample_rate_hz: 0.0,
            trials: 2_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    pub samples: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { samples: 1_000_000 }
    }
}

/// Analytic paths need σ_d > 0; zero sweep points substitute this value.
pub const SIGMA_ZERO_SUBSTITUTE: f64 = 1e-6;

/// Loads the config file (or defaults when absent) and applies the mode
/// flags. `paper_literal` switches both conventions and the far-field
/// integration limit to the printed ones; `extended_ff_limit` forces the
/// extended limit back on.
pub fn load_config(
    path: Option<&std::path::Path>,
    paper_literal: bool,
    extended_ff_limit: bool,
) -> Result<AppConfig, String> {
    let mut cfg: AppConfig = match path {
        None => AppConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| format!("cannot parse config {}: {e}", p.display()))?
        }
    };
    if paper_literal {
        cfg.params.prob_mode = ProbMode::PaperLiteral;
        cfg.params.mgf_mode = MgfMode::PaperLiteral;
        cfg.params.ff_mgf_upper = FfMgfUpper::DMax;
    }
    if extended_ff_limit {
        cfg.params.ff_mgf_upper = FfMgfUpper::Extended;
    }
    let pairing_ok = matches!(
        (cfg.params.prob_mode, cfg.params.mgf_mode),
        (ProbMode::GeometricPrior, MgfMode::Normalized)
            | (ProbMode::PaperLiteral, MgfMode::PaperLiteral)
    );
    if !pairing_ok {
        return Err(format!(
            "inconsistent mode pairing in config: prob_mode {:?} with mgf_mode {:?}",
            cfg.params.prob_mode, cfg.params.mgf_mode
        ));
    }
    cfg.params = cfg
        .params
        .validate()
        .map_err(|e| format!("invalid parameters: {e}"))?;
    Ok(cfg)
}

/// Rounds a requested sample count up to a multiple of 100 so it splits into
/// the 100 deterministic batches.
pub fn normalize_samples(n: u64) -> u64 {
    n.max(1).div_ceil(100) * 100
}
