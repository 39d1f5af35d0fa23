//! Session logs: a versioned header line followed by one [`SessionRecord`] per
//! line. Logs are append-only and contain no wall-clock data, so two runs over
//! the same inputs produce identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tradesim_core::domain::{AssetId, Holdings, MarketSpec, PriceVector};
use tradesim_core::environment::{SessionConfig, SessionRecord};

pub const LOG_FORMAT: &str = "tradesim-session";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt log {path} at line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Session settings that affect the records, echoed into the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedSettings {
    pub memory_horizon: usize,
    pub max_response_retries: u32,
    pub rebalance_interval: usize,
    pub lookback_days: u64,
    pub renormalize_band: f64,
    pub news_per_tag: usize,
}

impl From<&SessionConfig> for LoggedSettings {
    fn from(c: &SessionConfig) -> Self {
        Self {
            memory_horizon: c.memory_horizon,
            max_response_retries: c.max_response_retries,
            rebalance_interval: c.rebalance_interval,
            lookback_days: c.lookback_days,
            renormalize_band: c.renormalize_band,
            news_per_tag: c.prompt.news_per_tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub spec: MarketSpec,
    pub initial_capital: f64,
    pub start_date: NaiveDate,
    /// Prices at the start date.
    pub initial_prices: BTreeMap<AssetId, f64>,
    pub initial_holdings: BTreeMap<AssetId, f64>,
    pub settings: LoggedSettings,
}

impl LogHeader {
    pub fn new(
        model: &str,
        spec: &MarketSpec,
        config: &SessionConfig,
        start_date: NaiveDate,
        initial_prices: &PriceVector,
        initial_holdings: &Holdings,
    ) -> Self {
        Self {
            format: LOG_FORMAT.to_string(),
            version: LOG_VERSION,
            model: model.to_string(),
            spec: spec.clone(),
            initial_capital: config.initial_capital,
            start_date,
            initial_prices: initial_prices.as_map().clone(),
            initial_holdings: initial_holdings.as_map().clone(),
            settings: config.into(),
        }
    }
}

/// A parsed log.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub path: PathBuf,
    pub header: LogHeader,
    pub records: Vec<SessionRecord>,
}

impl SessionLog {
    /// Reads a complete log. A trailing partial line is an error here; see
    /// [`repair_tail`] for recovery before resuming.
    pub fn read(path: &Path) -> Result<Self, LogError> {
        let text = fs::read_to_string(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        parse_log(path, &text)
    }

    /// Value series `v_0 … v_n`.
    pub fn values(&self) -> Vec<f64> {
        std::iter::once(self.header.initial_capital)
            .chain(self.records.iter().map(|r| r.value))
            .collect()
    }

    /// Holdings `q_0 … q_n` and prices `p_0 … p_n`, index-aligned.
    pub fn histories(&self) -> Result<(Vec<Holdings>, Vec<PriceVector>), LogError> {
        let spec = &self.header.spec;
        let bad = |line: usize, e: &dyn std::fmt::Display| LogError::CorruptLog {
            path: self.path.clone(),
            line,
            message: e.to_string(),
        };
        let mut hs = vec![Holdings::new(spec, self.header.initial_holdings.clone()).map_err(|e| bad(1, &e))?];
        let mut ps = vec![PriceVector::new(spec, self.header.start_date, self.header.initial_prices.clone())
            .map_err(|e| bad(1, &e))?];
        for (i, r) in self.records.iter().enumerate() {
            hs.push(Holdings::new(spec, r.holdings.clone()).map_err(|e| bad(i + 2, &e))?);
            ps.push(PriceVector::new(spec, r.date, r.prices.clone()).map_err(|e| bad(i + 2, &e))?);
        }
        Ok((hs, ps))
    }

    /// Cash share of portfolio value after each step, starting with `1.0` at `t = 0`.
    pub fn cash_ratios(&self) -> Vec<f64> {
        let cash = self.header.spec.cash().clone();
        let mut out = vec![ratio(&self.header.initial_holdings, &self.header.initial_prices, &cash)];
        out.extend(self.records.iter().map(|r| ratio(&r.holdings, &r.prices, &cash)));
        out
    }
}

fn ratio(h: &BTreeMap<AssetId, f64>, p: &BTreeMap<AssetId, f64>, cash: &AssetId) -> f64 {
    let total: f64 = h.iter().map(|(a, q)| q * p.get(a).copied().unwrap_or(0.0)).sum();
    if total > 0.0 {
        h.get(cash).copied().unwrap_or(0.0) / total
    } else {
        1.0
    }
}

fn parse_log(path: &Path, text: &str) -> Result<SessionLog, LogError> {
    let corrupt = |line: usize, message: String| LogError::CorruptLog {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.split_terminator('\n').enumerate();
    let (_, first) = lines.next().ok_or_else(|| corrupt(1, "empty log".into()))?;
    let header: LogHeader =
        serde_json::from_str(first).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
    if header.format != LOG_FORMAT {
        return Err(corrupt(1, format!("unknown format `{}`", header.format)));
    }
    if header.version != LOG_VERSION {
        return Err(corrupt(1, format!("unsupported version {}", header.version)));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let rec: SessionRecord =
            serde_json::from_str(line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        if rec.step != records.len() {
            return Err(corrupt(i + 1, format!("expected step {}, found {}", records.len(), rec.step)));
        }
        records.push(rec);
    }
    if !text.ends_with('\n') {
        return Err(corrupt(text.lines().count(), "unterminated final line".into()));
    }
    Ok(SessionLog {
        path: path.to_path_buf(),
        header,
        records,
    })
}

/// Drops an unterminated final line left by an interrupted write. Complete
/// lines are never touched. Returns whether anything was removed.
pub fn repair_tail(path: &Path) -> Result<bool, LogError> {
    let io = |source| LogError::Io {
        path: path.to_path_buf(),
        source,
    };
    let text = fs::read_to_string(path).map_err(io)?;
    if text.is_empty() || text.ends_with('\n') {
        return Ok(false);
    }
    let keep = text.rfind('\n').map_or(0, |i| i + 1);
    let file = OpenOptions::new().write(true).open(path).map_err(io)?;
    file.set_len(keep as u64).map_err(io)?;
    Ok(true)
}

/// Append-only writer; each record is flushed as soon as it is written.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    /// Creates a new log; fails if the file exists.
    pub fn create(path: &Path, header: &LogHeader) -> Result<Self, LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().write(true).create_new(true).open(path).map_err(io)?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.write_line(header)?;
        Ok(w)
    }

    /// Opens an existing log for appending.
    pub fn append(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new().append(true).open(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn write_record(&mut self, record: &SessionRecord) -> Result<(), LogError> {
        self.write_line(record)
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> Result<(), LogError> {
        let line = serde_json::to_string(value).expect("log lines serialize");
        let io = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        self.out.write_all(line.as_bytes()).map_err(io)?;
        self.out.write_all(b"\n").map_err(io)?;
        self.out.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_repair_only_drops_partial_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        fs::write(&p, "a\nb\npart").unwrap();
        assert!(repair_tail(&p).unwrap());
        assert_eq!(fs::read_to_string(&p).unwrap(), "a\nb\n");
        assert!(!repair_tail(&p).unwrap());
    }

    #[test]
    fn empty_log_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        fs::write(&p, "").unwrap();
        assert!(matches!(SessionLog::read(&p), Err(LogError::CorruptLog { line: 1, .. })));
    }
}
