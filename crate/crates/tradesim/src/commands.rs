//! `fetch`, `run`, `report` and `delta`.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, bail, Context};
use chrono::{DateTime, Days, NaiveDate, Utc};
use tradesim_core::agent::client::{route_model, LlmAgent};
use tradesim_core::agent::{AllCashAgent, Agent, EqualWeightAgent, HoldAgent};
use tradesim_core::domain::{MarketKind, MarketSpec};
use tradesim_core::environment::{price_vector_at, Session, SessionConfig};
use tradesim_core::ingest::{stock_news_query, DateWindow};
use tradesim_core::store::{Snapshot, SnapshotStore, StoreError};

use crate::config::{ModelEntry, RunConfig};
use crate::fetch::Fetcher;
use crate::http::Http;
use crate::log::{repair_tail, LogHeader, LogWriter, LoggedSettings, SessionLog};
use crate::providers::HttpChatClient;
use crate::report::{series_csv, DeltaTable, Report};
use crate::snapshot::{file_stem, load_store, save_store};

pub const BASELINE_EQUAL_WEIGHT: &str = "baseline/equal-weight";
pub const BASELINE_HOLD: &str = "baseline/hold";
pub const BASELINE_ALL_CASH: &str = "baseline/all-cash";

/// News is requested in windows of this many days.
const NEWS_CHUNK_DAYS: u64 = 7;

pub type BoxedAgent = Box<dyn Agent + Send>;

/// Baseline agent for a `baseline/...` id.
pub fn baseline_agent(id: &str) -> Option<BoxedAgent> {
    match id {
        BASELINE_EQUAL_WEIGHT => Some(Box::new(EqualWeightAgent)),
        BASELINE_HOLD => Some(Box::new(HoldAgent)),
        BASELINE_ALL_CASH => Some(Box::new(AllCashAgent)),
        _ => None,
    }
}

/// Baselines by id, vendor models over `http` with keys from the environment.
pub fn default_agent(entry: &ModelEntry, http: Arc<dyn Http>) -> anyhow::Result<BoxedAgent> {
    if let Some(agent) = baseline_agent(&entry.id) {
        return Ok(agent);
    }
    if entry.id.starts_with("baseline/") {
        bail!("unknown baseline `{}`", entry.id);
    }
    let (provider, _) = route_model(&entry.id);
    let client = HttpChatClient::from_env(http, provider, entry.base_url.as_deref()).map_err(|e| anyhow!(e))?;
    Ok(Box::new(LlmAgent::new(client, entry.client_config())))
}

/// Log file of one model: `<log_dir>/<market>-<model>.jsonl`.
pub fn log_path(cfg: &RunConfig, model: &str) -> PathBuf {
    cfg.log_dir.join(format!("{}-{}.jsonl", cfg.market, file_stem(model)))
}

#[derive(Debug, Default)]
pub struct FetchSummary {
    pub points_added: usize,
    pub files_changed: usize,
    pub conflicts: Vec<StoreError>,
    /// `(what, error)` per failed request.
    pub failures: Vec<(String, String)>,
}

impl FetchSummary {
    pub fn is_complete(&self) -> bool {
        self.conflicts.is_empty() && self.failures.is_empty()
    }
}

fn news_chunks(window: DateWindow) -> Vec<DateWindow> {
    let mut out = Vec::new();
    let mut start = window.start;
    while start <= window.end {
        let end = (start + Days::new(NEWS_CHUNK_DAYS - 1)).min(window.end);
        out.push(DateWindow { start, end });
        start = end + Days::new(1);
    }
    out
}

/// Fetches prices, markets and news for the configured range into the store.
/// Failed requests are reported and everything else is kept.
pub fn cmd_fetch(cfg: &RunConfig, fetcher: &Fetcher, now: DateTime<Utc>) -> anyhow::Result<FetchSummary> {
    let mut store = load_store(&cfg.store)?;
    let mut summary = FetchSummary::default();
    let mut snapshots = Vec::new();
    let price_window = DateWindow {
        start: cfg.start - Days::new(cfg.lookback_days),
        end: cfg.end,
    };
    let mut news_queries: Vec<(String, String)> = Vec::new();

    match cfg.market {
        MarketKind::Stock => {
            let spec = cfg.spec(None)?;
            for asset in spec.risky_assets() {
                match fetcher.equity_prices(asset.as_str(), price_window) {
                    Ok(points) => snapshots.push(Snapshot::Prices {
                        asset: asset.clone(),
                        points,
                    }),
                    Err(e) => summary.failures.push((format!("prices {asset}"), e.to_string())),
                }
                news_queries.push((stock_news_query(asset.as_str()), asset.as_str().to_string()));
            }
        }
        MarketKind::Prediction if cfg.assets.is_empty() => {
            match fetcher.discover_markets(cfg.discover_limit, cfg.flat_threshold, price_window) {
                Ok(found) => {
                    for m in found {
                        news_queries.push((m.entry.question.clone(), m.entry.question.clone()));
                        snapshots.push(Snapshot::Prices {
                            asset: m.entry.yes_asset.clone(),
                            points: m.yes,
                        });
                        snapshots.push(Snapshot::Prices {
                            asset: m.entry.no_asset.clone(),
                            points: m.no,
                        });
                        snapshots.push(Snapshot::Market(m.entry));
                    }
                }
                Err(e) => summary.failures.push(("market discovery".into(), e.to_string())),
            }
        }
        MarketKind::Prediction => {
            for question in &cfg.assets {
                news_queries.push((question.clone(), question.clone()));
                let Some(entry) = store.market(question).cloned() else {
                    summary
                        .failures
                        .push((format!("market {question}"), "not in the catalog; run discovery first".into()));
                    continue;
                };
                for (asset, token) in [(&entry.yes_asset, &entry.yes_token), (&entry.no_asset, &entry.no_token)] {
                    match fetcher.prediction_prices(token, price_window) {
                        Ok(points) => snapshots.push(Snapshot::Prices {
                            asset: asset.clone(),
                            points,
                        }),
                        Err(e) => summary.failures.push((format!("prices {asset}"), e.to_string())),
                    }
                }
            }
        }
    }

    let news_span = DateWindow {
        start: cfg.start - Days::new(tradesim_core::ingest::NEWS_WINDOW_DAYS),
        end: cfg.end - Days::new(1),
    };
    for (query, tag) in &news_queries {
        for chunk in news_chunks(news_span) {
            match fetcher.news(query, tag, chunk, None, now) {
                Ok(items) => snapshots.push(Snapshot::News(items)),
                Err(e) => summary
                    .failures
                    .push((format!("news {tag} {}..{}", chunk.start, chunk.end), e.to_string())),
            }
        }
    }

    for snap in snapshots {
        match store.record(snap) {
            Ok(n) => summary.points_added += n,
            Err(e) => summary.conflicts.push(e),
        }
    }
    summary.files_changed = save_store(&cfg.store, &store)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Continue existing logs instead of refusing to overwrite them.
    pub resume: bool,
}

#[derive(Debug)]
pub struct SessionSummary {
    pub model: String,
    pub log: PathBuf,
    pub result: anyhow::Result<SessionResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub steps: usize,
    /// Steps already present in the log before this run.
    pub resumed_from: usize,
    pub final_value: f64,
    pub cumulative_return: f64,
}

/// Trading dates of the configured range.
pub fn trading_dates(cfg: &RunConfig, spec: &MarketSpec, store: &SnapshotStore) -> anyhow::Result<Vec<NaiveDate>> {
    let dates = store.trading_dates(
        spec.risky_assets(),
        DateWindow {
            start: cfg.start,
            end: cfg.end,
        },
    );
    if dates.len() < 2 {
        bail!(
            "store {} has {} trading date(s) in {}..{}; at least 2 are needed",
            cfg.store.display(),
            dates.len(),
            cfg.start,
            cfg.end
        );
    }
    Ok(dates)
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    model: &str,
    path: &Path,
    agent: &mut dyn Agent,
    spec: &MarketSpec,
    config: &SessionConfig,
    store: &SnapshotStore,
    dates: &[NaiveDate],
    opts: RunOptions,
) -> anyhow::Result<SessionResult> {
    let (mut session, mut writer) = if path.exists() {
        if !opts.resume {
            bail!("log {} exists; pass --resume to continue it", path.display());
        }
        repair_tail(path)?;
        let log = SessionLog::read(path)?;
        let h = &log.header;
        if h.model != model
            || &h.spec != spec
            || h.start_date != dates[0]
            || h.settings != LoggedSettings::from(config)
            || h.initial_capital != config.initial_capital
        {
            bail!("log {} was written with a different configuration", path.display());
        }
        if log.records.len() >= dates.len() {
            bail!("log {} is longer than the configured date range", path.display());
        }
        if let Some(i) = log.records.iter().position(|r| r.date != dates[r.step + 1]) {
            bail!("log {} record {i} is off the trading calendar", path.display());
        }
        let session = Session::resume(spec.clone(), config.clone(), dates[0], log.records)?;
        (session, LogWriter::append(path)?)
    } else {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let session = Session::start(spec.clone(), config.clone(), dates[0])?;
        let (p0, _) = price_vector_at(spec, store, dates[0])?;
        let header = LogHeader::new(model, spec, config, dates[0], &p0, session.state().holdings());
        (session, LogWriter::create(path, &header)?)
    };

    let resumed_from = session.records().len();
    for &d in &dates[resumed_from + 1..] {
        let rec = session.step(agent, store, d)?;
        writer.write_record(rec)?;
    }
    session.finish();
    let state = session.state();
    Ok(SessionResult {
        steps: session.records().len(),
        resumed_from,
        final_value: *state.value_series().last().expect("value series is nonempty"),
        cumulative_return: state.cumulative_return(),
    })
}

/// Runs one session per configured model over the store. Sessions run on up
/// to `cfg.concurrency()` threads; one failing session does not stop the rest.
pub fn cmd_run<F>(cfg: &RunConfig, opts: RunOptions, make_agent: F) -> anyhow::Result<Vec<SessionSummary>>
where
    F: Fn(&ModelEntry) -> anyhow::Result<BoxedAgent> + Sync,
{
    if cfg.models.is_empty() {
        bail!("no models configured");
    }
    let store = load_store(&cfg.store)?;
    let spec = cfg.spec(Some(&store))?;
    let config = cfg.session_config();
    let dates = trading_dates(cfg, &spec, &store)?;

    let next = Mutex::new(0usize);
    let results: Vec<Mutex<Option<SessionSummary>>> = cfg.models.iter().map(|_| Mutex::new(None)).collect();
    let workers = cfg.concurrency().min(cfg.models.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("queue lock");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(entry) = cfg.models.get(i) else { break };
                let log = log_path(cfg, &entry.id);
                let result = make_agent(entry).and_then(|mut agent| {
                    run_one(&entry.id, &log, agent.as_mut(), &spec, &config, &store, &dates, opts)
                });
                *results[i].lock().expect("result lock") = Some(SessionSummary {
                    model: entry.id.clone(),
                    log,
                    result,
                });
            });
        }
    });
    Ok(results
        .into_iter()
        .map(|m| m.into_inner().expect("result lock").expect("every model ran"))
        .collect())
}

/// Output files written by [`cmd_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub json: PathBuf,
    pub series: PathBuf,
}

pub fn read_logs(paths: &[PathBuf]) -> anyhow::Result<Vec<SessionLog>> {
    if paths.is_empty() {
        bail!("no logs given");
    }
    paths.iter().map(|p| Ok(SessionLog::read(p)?)).collect()
}

/// Metrics for each log. With `out`, writes `metrics.txt`, `metrics.json`
/// and `series.csv` there.
pub fn cmd_report(logs: &[PathBuf], out: Option<&Path>) -> anyhow::Result<(Report, Option<ReportFiles>)> {
    let logs = read_logs(logs)?;
    let report = Report::from_logs(&logs)?;
    let files = match out {
        None => None,
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let files = ReportFiles {
                table: dir.join("metrics.txt"),
                json: dir.join("metrics.json"),
                series: dir.join("series.csv"),
            };
            for (path, text) in [
                (&files.table, report.to_table()),
                (&files.json, report.to_json()),
                (&files.series, series_csv(&logs)),
            ] {
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            Some(files)
        }
    };
    Ok((report, files))
}

/// Rolling-k deltas for each log. Lags too large for a log are an error
/// unless `lenient`.
pub fn cmd_delta(logs: &[PathBuf], ks: &[usize], lenient: bool) -> anyhow::Result<DeltaTable> {
    if ks.is_empty() {
        bail!("no lags given");
    }
    let logs = read_logs(logs)?;
    Ok(DeltaTable::from_logs(&logs, ks, !lenient)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn news_chunks_cover_the_span() {
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let chunks = news_chunks(DateWindow {
            start: d("2025-10-01"),
            end: d("2025-10-16"),
        });
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[0].end, d("2025-10-07"));
        assert_eq!(chunks[1].start, d("2025-10-08"));
        assert_eq!(chunks[2], DateWindow { start: d("2025-10-15"), end: d("2025-10-16") });
    }

    #[test]
    fn baselines_resolve() {
        assert!(baseline_agent(BASELINE_EQUAL_WEIGHT).is_some());
        assert!(baseline_agent(BASELINE_HOLD).is_some());
        assert!(baseline_agent("baseline/other").is_none());
        let entry = ModelEntry {
            id: "baseline/other".into(),
            style: None,
            temperature: None,
            max_tokens: None,
            base_url: None,
        };
        let http: Arc<dyn Http> = Arc::new(crate::http::testing::CannedHttp::default());
        assert!(default_agent(&entry, http).is_err());
    }
}
