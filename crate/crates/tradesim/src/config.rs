//! Run configuration (TOML).
//!
//! ```toml
//! market = "stock"              # or "prediction"
//! assets = ["AAPL", "MSFT"]     # tickers or questions; defaults described below
//! start = "2025-08-18"
//! end = "2025-10-24"
//! mode = "replay"               # or "live"
//! store = "store"               # snapshot directory
//! log_dir = "runs"
//!
//! initial_capital = 1000.0      # default 1000 stock, 500 prediction
//! memory_horizon = 10
//! rebalance_interval = 1
//! risk_free_rate = 0.000158730  # per step; default 0.04/252 stock, 0 prediction
//! renormalize_band = 0.02
//! flat_threshold = 0.01
//! max_response_retries = 2
//! news_per_tag = 3
//! lookback_days = 10
//! discover_limit = 10
//! max_concurrency = 2           # default: number of models
//!
//! [fetch]
//! max_retries = 4
//! base_backoff_ms = 500
//! jitter_ms = [100, 600]
//! timeout_secs = 20
//!
//! [[models]]
//! id = "openai/gpt-4.1"
//!
//! [[models]]
//! id = "baseline/equal-weight"
//! ```
//!
//! An empty stock universe means the fifteen default tickers; an empty
//! prediction universe means every question in the store catalog. Relative
//! paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tradesim_core::agent::client::{ModelClientConfig, SamplingStyle};
use tradesim_core::agent::prompt::PromptOptions;
use tradesim_core::domain::{DomainError, MarketKind, MarketSpec};
use tradesim_core::environment::SessionConfig;
use tradesim_core::ingest::{FetchPolicy, DEFAULT_FLAT_THRESHOLD, DEFAULT_LOOKBACK_DAYS};
use tradesim_core::store::SnapshotStore;
use tradesim_core::RENORMALIZE_BAND;

/// Annual risk-free rate spread over 252 trading days.
pub const DEFAULT_STOCK_RISK_FREE: f64 = 0.04 / 252.0;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    /// `vendor/model`, a bare model name, or `baseline/<name>`.
    pub id: String,
    #[serde(default)]
    pub style: Option<SamplingStyle>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    /// Override of the provider endpoint base URL.
    #[serde(default)]
    pub base_url: Option<String>,
}

impl ModelEntry {
    pub fn client_config(&self) -> ModelClientConfig {
        let mut cfg = match self.style {
            Some(SamplingStyle::Standard) => ModelClientConfig::standard(self.id.clone()),
            Some(SamplingStyle::StructuredReasoning) => {
                ModelClientConfig::structured_reasoning(self.id.clone())
            }
            None => ModelClientConfig::for_model(self.id.clone()),
        };
        if cfg.style == SamplingStyle::Standard {
            if let Some(t) = self.temperature {
                cfg.temperature = Some(t);
            }
            if let Some(m) = self.max_tokens {
                cfg.max_tokens = Some(m);
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketKind,
    #[serde(default)]
    pub assets: Vec<String>,
    pub start: NaiveDate,
    pub end: NaiveDate,
    #[serde(default)]
    pub mode: RunMode,
    pub store: PathBuf,
    #[serde(default = "default_log_dir")]
    pub log_dir: PathBuf,
    #[serde(default)]
    pub initial_capital: Option<f64>,
    #[serde(default = "default_memory_horizon")]
    pub memory_horizon: usize,
    #[serde(default = "default_interval")]
    pub rebalance_interval: usize,
    #[serde(default)]
    pub risk_free_rate: Option<f64>,
    #[serde(default = "default_band")]
    pub renormalize_band: f64,
    #[serde(default = "default_flat")]
    pub flat_threshold: f64,
    #[serde(default = "default_retries")]
    pub max_response_retries: u32,
    #[serde(default = "default_news")]
    pub news_per_tag: usize,
    #[serde(default = "default_lookback")]
    pub lookback_days: u64,
    #[serde(default = "default_discover")]
    pub discover_limit: usize,
    #[serde(default)]
    pub max_concurrency: Option<usize>,
    #[serde(default)]
    pub fetch: FetchPolicy,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
}

fn default_log_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_memory_horizon() -> usize {
    tradesim_core::agent::memory::DEFAULT_MEMORY_HORIZON
}
fn default_interval() -> usize {
    1
}
fn default_band() -> f64 {
    RENORMALIZE_BAND
}
fn default_flat() -> f64 {
    DEFAULT_FLAT_THRESHOLD
}
fn default_retries() -> u32 {
    2
}
fn default_news() -> usize {
    PromptOptions::default().news_per_tag
}
fn default_lookback() -> u64 {
    DEFAULT_LOOKBACK_DAYS
}
fn default_discover() -> usize {
    10
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.store = base.join(&cfg.store);
        cfg.log_dir = base.join(&cfg.log_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.end < self.start {
            return invalid("date range is empty (end before start)");
        }
        if self.store.as_os_str().is_empty() {
            return invalid("`store` is required");
        }
        if let Some(c) = self.initial_capital {
            if !(c.is_finite() && c > 0.0) {
                return invalid("initial_capital must be positive");
            }
        }
        if self.rebalance_interval == 0 {
            return invalid("rebalance_interval must be at least 1");
        }
        if !(self.renormalize_band.is_finite() && self.renormalize_band >= 0.0) {
            return invalid("renormalize_band must be non-negative");
        }
        if self.fetch.max_retries == 0 {
            return invalid("fetch.max_retries must be at least 1");
        }
        if self.max_concurrency == Some(0) {
            return invalid("max_concurrency must be at least 1");
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if !seen.insert(m.id.as_str()) {
                return Err(ConfigError::Invalid(format!("model `{}` listed twice", m.id)));
            }
        }
        Ok(())
    }

    pub fn risk_free(&self) -> f64 {
        self.risk_free_rate.unwrap_or(match self.market {
            MarketKind::Stock => DEFAULT_STOCK_RISK_FREE,
            MarketKind::Prediction => 0.0,
        })
    }

    /// Market universe; prediction markets fall back to the store catalog.
    pub fn spec(&self, store: Option<&SnapshotStore>) -> Result<MarketSpec, ConfigError> {
        match self.market {
            MarketKind::Stock if self.assets.is_empty() => Ok(MarketSpec::default_stock(self.risk_free())),
            MarketKind::Stock => Ok(MarketSpec::stock(self.assets.iter().cloned(), self.risk_free())?),
            MarketKind::Prediction => {
                let questions: Vec<String> = if self.assets.is_empty() {
                    store
                        .map(|s| s.catalog().map(|e| e.question.clone()).collect())
                        .unwrap_or_default()
                } else {
                    self.assets.clone()
                };
                if questions.is_empty() {
                    return Err(ConfigError::Invalid(
                        "no prediction questions configured and the catalog is empty".into(),
                    ));
                }
                Ok(MarketSpec::prediction(questions)?)
            }
        }
    }

    pub fn session_config(&self) -> SessionConfig {
        let mut c = SessionConfig::for_market(self.market);
        if let Some(cap) = self.initial_capital {
            c.initial_capital = cap;
        }
        c.memory_horizon = self.memory_horizon;
        c.max_response_retries = self.max_response_retries;
        c.rebalance_interval = self.rebalance_interval;
        c.lookback_days = self.lookback_days;
        c.renormalize_band = self.renormalize_band;
        c.prompt = PromptOptions {
            news_per_tag: self.news_per_tag,
        };
        c
    }

    pub fn concurrency(&self) -> usize {
        self.max_concurrency.unwrap_or(self.models.len()).max(1)
    }
}
