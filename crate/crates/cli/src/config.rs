use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ssm_core::ingest::DEFAULT_SMOOTHING_WINDOW;
use ssm_core::sarimax::SarimaxSpec;
use ssm_core::ssm::{BiasMode, SsmOptions, DEFAULT_HORIZON};

pub const CONFIG_ENV: &str = "SSM_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub smoothing_window: usize,
    pub sarimax: SarimaxSpec,
    /// Candidate orders for AIC selection; empty keeps `sarimax` fixed.
    pub order_grid: Vec<SarimaxSpec>,
    pub horizon: usize,
    pub bias_mode: BiasMode,
    /// Built-in filter ids ("1", "2", "3") or paths to filter JSON files.
    pub filters: Vec<String>,
    /// Seed for simulated test series.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            sarimax: SarimaxSpec::pipeline_default(),
            order_grid: Vec::new(),
            horizon: DEFAULT_HORIZON,
            bias_mode: BiasMode::Multiplicative,
            filters: vec!["1".into(), "2".into(), "3".into()],
            seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("config {}", path.display()))
    }

    /// `--config` if given, else `$SSM_CONFIG`, else the defaults.
    pub fn resolve(flag: Option<&Path>) -> Result<Self> {
        let path = flag
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        match path {
            Some(p) => Self::from_file(&p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            bail!("smoothing_window must be a positive odd number, got {}", self.smoothing_window);
        }
        if self.horizon == 0 {
            bail!("horizon must be positive");
        }
        self.sarimax.validate()?;
        for spec in &self.order_grid {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn ssm_options(&self) -> SsmOptions {
        SsmOptions {
            spec: self.sarimax,
            order_grid: self.order_grid.clone(),
            horizon: self.horizon,
            smoothing_window: self.smoothing_window,
            bias_mode: self.bias_mode,
        }
    }
}
