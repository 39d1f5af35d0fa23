//! Reports over session logs: the metrics table, plot-ready series and the
//! rolling-k delta table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use tradesim_core::domain::MarketKind;
use tradesim_core::metrics::{MetricsError, MetricsReport};
use tradesim_core::rolling::{rolling_k_delta, RollingError};

use crate::log::{LogError, SessionLog};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{model}: {source}")]
    Metrics { model: String, source: MetricsError },
    #[error("{model}: {source}")]
    Rolling { model: String, source: RollingError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: String,
    pub market: MarketKind,
    pub steps: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Rows ordered by market then model.
    pub fn from_logs(logs: &[SessionLog]) -> Result<Self, ReportError> {
        let mut rows = Vec::new();
        for log in logs {
            let values = log.values();
            let metrics = MetricsReport::from_values(&values, log.header.spec.risk_free_rate())
                .map_err(|source| ReportError::Metrics {
                    model: log.header.model.clone(),
                    source,
                })?;
            rows.push(ReportRow {
                model: log.header.model.clone(),
                market: log.header.spec.kind(),
                steps: log.records.len(),
                metrics,
            });
        }
        rows.sort_by(|a, b| a.market.cmp(&b.market).then_with(|| a.model.cmp(&b.model)));
        Ok(Self { rows })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Fixed-width table; returns are in percent.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:<10}  {:>5}  {:>9}  {:>8}  {:>8}  {:>7}  {:>8}",
            "model", "market", "steps", "CR%", "SR", "MDD%", "WR%", "sigma%"
        );
        let opt = |v: Option<f64>, scale: f64, prec: usize| match v {
            Some(x) => format!("{:.*}", prec, x * scale),
            None => "n/a".to_string(),
        };
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<width$}  {:<10}  {:>5}  {:>9.2}  {:>8}  {:>8.2}  {:>7.2}  {:>8}",
                r.model,
                r.market.to_string(),
                r.steps,
                m.cumulative_return * 100.0,
                opt(m.sharpe_ratio, 1.0, 4),
                m.max_drawdown * 100.0,
                m.win_rate * 100.0,
                opt(m.volatility, 100.0, 4),
            );
        }
        out
    }
}

/// `model,market,step,date,value,cumulative_return,cash_ratio` rows for plotting.
pub fn series_csv(logs: &[SessionLog]) -> String {
    let mut ordered: Vec<&SessionLog> = logs.iter().collect();
    ordered.sort_by(|a, b| {
        a.header.spec.kind().cmp(&b.header.spec.kind()).then_with(|| a.header.model.cmp(&b.header.model))
    });
    let mut out = String::from("model,market,step,date,value,cumulative_return,cash_ratio\n");
    for log in ordered {
        let values = log.values();
        let ratios = log.cash_ratios();
        let dates = std::iter::once(log.header.start_date).chain(log.records.iter().map(|r| r.date));
        let v0 = values[0];
        for (step, ((date, v), c)) in dates.zip(&values).zip(&ratios).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{step},{date},{v},{},{c}",
                csv_field(&log.header.model),
                log.header.spec.kind(),
                (v - v0) / v0
            );
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Linear-interpolated percentile of sorted data, `p ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    match sorted.len() {
        0 => None,
        1 => Some(sorted[0]),
        n => {
            let rank = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub model: String,
    pub market: MarketKind,
    /// `Δ_k` per requested `k`; `None` when `k` is too large for the log.
    pub deltas: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaBand {
    pub market: MarketKind,
    pub k: usize,
    pub models: usize,
    pub mean: Option<f64>,
    pub p25: Option<f64>,
    pub p75: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaTable {
    pub ks: Vec<usize>,
    pub rows: Vec<DeltaRow>,
    pub bands: Vec<DeltaBand>,
}

impl DeltaTable {
    /// `Δ_k` for every log and `k`. Infeasible lags are left empty unless
    /// `strict`, in which case they are an error.
    pub fn from_logs(logs: &[SessionLog], ks: &[usize], strict: bool) -> Result<Self, ReportError> {
        let mut rows = Vec::new();
        for log in logs {
            let (hs, ps) = log.histories()?;
            let mut deltas = Vec::new();
            for &k in ks {
                match rolling_k_delta(&hs, &ps, k) {
                    Ok(d) => deltas.push(Some(d.delta)),
                    Err(RollingError::LagTooLarge { .. }) if !strict => deltas.push(None),
                    Err(source) => {
                        return Err(ReportError::Rolling {
                            model: log.header.model.clone(),
                            source,
                        })
                    }
                }
            }
            rows.push(DeltaRow {
                model: log.header.model.clone(),
                market: log.header.spec.kind(),
                deltas,
            });
        }
        rows.sort_by(|a, b| a.market.cmp(&b.market).then_with(|| a.model.cmp(&b.model)));

        let mut by_market: BTreeMap<MarketKind, Vec<&DeltaRow>> = BTreeMap::new();
        for r in &rows {
            by_market.entry(r.market).or_default().push(r);
        }
        let mut bands = Vec::new();
        for (market, group) in by_market {
            for (i, &k) in ks.iter().enumerate() {
                let mut vals: Vec<f64> = group.iter().filter_map(|r| r.deltas[i]).collect();
                vals.sort_by(f64::total_cmp);
                let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
                bands.push(DeltaBand {
                    market,
                    k,
                    models: vals.len(),
                    mean,
                    p25: percentile(&vals, 0.25),
                    p75: percentile(&vals, 0.75),
                });
            }
        }
        Ok(Self {
            ks: ks.to_vec(),
            rows,
            bands,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    /// Deltas in percentage points.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(12);
        let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.3}", x * 100.0));
        let mut out = String::new();
        let _ = write!(out, "{:<width$}  {:<10}", "model", "market");
        for k in &self.ks {
            let _ = write!(out, "  {:>9}", format!("k={k}"));
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<width$}  {:<10}", r.model, r.market.to_string());
            for d in &r.deltas {
                let _ = write!(out, "  {:>9}", cell(*d));
            }
            out.push('\n');
        }
        let markets: Vec<MarketKind> = {
            let mut m: Vec<_> = self.bands.iter().map(|b| b.market).collect();
            m.dedup();
            m
        };
        for market in markets {
            let bands: Vec<&DeltaBand> = self.bands.iter().filter(|b| b.market == market).collect();
            for (label, pick) in [
                ("mean", (|b: &DeltaBand| b.mean) as fn(&DeltaBand) -> Option<f64>),
                ("p25", |b: &DeltaBand| b.p25),
                ("p75", |b: &DeltaBand| b.p75),
            ] {
                let _ = write!(out, "{:<width$}  {:<10}", format!("[{label}]"), market.to_string());
                for b in &bands {
                    let _ = write!(out, "  {:>9}", cell(pick(b)));
                }
                out.push('\n');
            }
        }
        out
    }
}
