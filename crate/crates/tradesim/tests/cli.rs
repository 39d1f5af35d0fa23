use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use chrono::{NaiveDate, TimeZone, Utc};
use tradesim::commands::{cmd_delta, cmd_fetch, cmd_report, cmd_run, log_path, BoxedAgent, RunOptions};
use tradesim::config::{ModelEntry, RunConfig};
use tradesim::fetch::Fetcher;
use tradesim::http::{Headers, Http, HttpError, HttpResponse};
use tradesim::log::{LogError, SessionLog};
use tradesim::snapshot::load_store;
use tradesim_core::agent::client::ClientError;
use tradesim_core::agent::{EqualWeightAgent, Reply, ScriptedAgent};
use tradesim_core::ingest::FetchPolicy;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn config(name: &str, log_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&fixture(name).join("config.toml")).unwrap();
    cfg.log_dir = log_dir.to_path_buf();
    cfg
}

fn entry(id: &str) -> ModelEntry {
    ModelEntry {
        id: id.into(),
        style: None,
        temperature: None,
        max_tokens: None,
        base_url: None,
    }
}

/// Reply depends on the whole prompt, so a resumed run only matches a full
/// run when memory and history are restored exactly.
fn prompt_echo_agent() -> BoxedAgent {
    Box::new(ScriptedAgent::new(|input| {
        let h = input.prompt.bytes().fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
        let w = (h % 1000) as f64 / 1000.0;
        if h % 7 == 0 {
            return Err(ClientError::Timeout);
        }
        Ok(Reply::Text(format!(
            r#"{{"reasoning": "r", "allocations": {{"AAPL": {w}, "CASH": {}}}}}"#,
            1.0 - w
        )))
    }))
}

fn agents(e: &ModelEntry) -> anyhow::Result<BoxedAgent> {
    match e.id.as_str() {
        "baseline/equal-weight" => Ok(Box::new(EqualWeightAgent)),
        "scripted/echo" => Ok(prompt_echo_agent()),
        other => anyhow::bail!("no agent for {other}"),
    }
}

fn run_ok(cfg: &RunConfig, opts: RunOptions) -> Vec<PathBuf> {
    cmd_run(cfg, opts, agents)
        .unwrap()
        .into_iter()
        .map(|s| {
            s.result.unwrap();
            s.log
        })
        .collect()
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let full_dir = tempfile::tempdir().unwrap();
    let mut cfg = config("stock50", full_dir.path());
    cfg.models = vec![entry("baseline/equal-weight"), entry("scripted/echo")];
    let full = run_ok(&cfg, RunOptions::default());

    let cut_dir = tempfile::tempdir().unwrap();
    cfg.log_dir = cut_dir.path().to_path_buf();
    for path in &full {
        let text = fs::read_to_string(path).unwrap();
        let mut keep: String = text.lines().take(21).map(|l| format!("{l}\n")).collect();
        keep.push_str(&text.lines().nth(21).unwrap()[..40]);
        fs::write(cut_dir.path().join(path.file_name().unwrap()), keep).unwrap();
    }

    let err = cmd_run(&cfg, RunOptions::default(), agents).unwrap();
    assert!(err.iter().all(|s| s.result.is_err()), "existing logs are not overwritten");

    let runs = cmd_run(&cfg, RunOptions { resume: true }, agents).unwrap();
    for (s, original) in runs.iter().zip(&full) {
        let r = s.result.as_ref().unwrap();
        assert_eq!(r.resumed_from, 20);
        assert_eq!(r.steps, 50);
        assert_eq!(fs::read(&s.log).unwrap(), fs::read(original).unwrap(), "{}", s.model);
    }
}

#[test]
fn resume_rejects_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("stock5", dir.path());
    run_ok(&cfg, RunOptions::default());
    let mut other = cfg.clone();
    other.memory_horizon = 3;
    let runs = cmd_run(&other, RunOptions { resume: true }, agents).unwrap();
    let msg = format!("{:#}", runs[0].result.as_ref().unwrap_err());
    assert!(msg.contains("different configuration"), "{msg}");
}

#[test]
fn one_failing_session_does_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("stock5", dir.path());
    cfg.models = vec![entry("nobody/unknown"), entry("baseline/equal-weight")];
    cfg.max_concurrency = Some(2);
    let runs = cmd_run(&cfg, RunOptions::default(), agents).unwrap();
    assert!(runs[0].result.is_err());
    assert_eq!(runs[1].result.as_ref().unwrap().steps, 4);
    assert!(!log_path(&cfg, "nobody/unknown").exists());
}

#[test]
fn report_is_stable_and_rejects_bad_logs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("stock50", dir.path());
    cfg.models = vec![entry("baseline/equal-weight"), entry("scripted/echo")];
    let logs = run_ok(&cfg, RunOptions::default());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    cmd_report(&logs, Some(&out_a)).unwrap();
    cmd_report(&logs, Some(&out_b)).unwrap();
    for f in ["metrics.json", "metrics.txt", "series.csv"] {
        assert_eq!(fs::read(out_a.join(f)).unwrap(), fs::read(out_b.join(f)).unwrap());
    }

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert!(cmd_report(&[empty], None).is_err());

    let corrupt = dir.path().join("corrupt.jsonl");
    let text = fs::read_to_string(&logs[0]).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "{\"step\": \"five\"}";
    fs::write(&corrupt, lines.join("\n") + "\n").unwrap();
    let err = cmd_report(&[corrupt], None).unwrap_err();
    assert!(matches!(err.downcast_ref::<LogError>(), Some(LogError::CorruptLog { line: 6, .. })), "{err:#}");
}

#[test]
fn delta_reports_infeasible_lags() {
    let dir = tempfile::tempdir().unwrap();
    let logs = run_ok(&config("stock5", dir.path()), RunOptions::default());
    assert!(cmd_delta(&logs, &[1, 2], false).is_err());
    let table = cmd_delta(&logs, &[0, 1, 2], true).unwrap();
    assert_eq!(table.rows[0].deltas[0], Some(0.0));
    assert!(table.rows[0].deltas[1].is_some());
    assert_eq!(table.rows[0].deltas[2], None);
    assert_eq!(table.bands.len(), 3);
}

#[test]
fn equal_weight_log_records_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let logs = run_ok(&config("stock5", dir.path()), RunOptions::default());
    let log = SessionLog::read(&logs[0]).unwrap();
    assert_eq!(log.records[0].step_return, 0.0);
    // NVDA has no bar on 2025-10-22
    assert_eq!(log.records[1].stale.len(), 1);
    assert_eq!(log.records[1].stale[0].as_str(), "NVDA");
    for r in &log.records {
        assert!((r.pre_trade_value - r.value).abs() < 1e-9);
        assert!(r.prompt_sha256.as_ref().is_some_and(|h| h.len() == 64));
    }
}

struct FakeWeb {
    requests: Mutex<Vec<String>>,
}

const CHART: &str = r#"{"chart":{"result":[{"meta":{"gmtoffset":-14400},
"timestamp":[1760966000,1761052400,1761138800,1761225200,1761311600],
"indicators":{"quote":[{"close":[100.0,101.0,102.0,103.0,104.0],"volume":[1,2,3,4,5]}],
"adjclose":[{"adjclose":[100.0,101.0,102.0,103.0,104.0]}]}}]}}"#;

const RSS: &str = r#"<?xml version="1.0"?><rss><channel>
<item><title>Apple ships thing - Wire</title><link>https://e.com/apple?utm_source=x</link>
<pubDate>Tue, 21 Oct 2025 14:00:00 GMT</pubDate><description>text</description><source>Wire</source></item>
</channel></rss>"#;

impl Http for FakeWeb {
    fn get(&self, url: &str, _: Headers<'_>) -> Result<HttpResponse, HttpError> {
        self.requests.lock().unwrap().push(url.to_string());
        let (status, body) = if url.contains("/chart/MSFT") {
            (404, "not found")
        } else if url.contains("/chart/") {
            (200, CHART)
        } else if url.contains("news.google.com") {
            (200, RSS)
        } else {
            (500, "")
        };
        Ok(HttpResponse {
            status,
            body: body.into(),
        })
    }

    fn post_json(&self, _: &str, _: Headers<'_>, _: &str) -> Result<HttpResponse, HttpError> {
        Err(HttpError::Transport("unused".into()))
    }
}

#[test]
fn fetch_keeps_partial_progress_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(&format!(
        r#"
market = "stock"
assets = ["AAPL", "MSFT"]
start = "2025-10-20"
end = "2025-10-24"
store = "{}"
"#,
        dir.path().join("store").display()
    ))
    .unwrap();
    let web = std::sync::Arc::new(FakeWeb {
        requests: Mutex::new(Vec::new()),
    });
    let fetcher = Fetcher::new(Box::new(web.clone()), FetchPolicy::default()).with_sleep(|_| {});
    let now = Utc.with_ymd_and_hms(2025, 10, 25, 0, 0, 0).unwrap();

    let first = cmd_fetch(&cfg, &fetcher, now).unwrap();
    assert_eq!(first.failures.len(), 1, "{:?}", first.failures);
    assert!(first.failures[0].0.contains("MSFT"));
    assert!(!first.is_complete());
    let store = load_store(&cfg.store).unwrap();
    let d = |s: &str| s.parse::<NaiveDate>().unwrap();
    let aapl = store.series("AAPL");
    assert_eq!(aapl.len(), 5);
    assert_eq!(aapl[0].date, d("2025-10-20"));
    assert!(store.series("MSFT").is_empty());
    let news = store.news_for("AAPL");
    assert_eq!(news.len(), 1);
    assert_eq!(news[0].title, "Apple ships thing");
    assert_eq!(news[0].url, "https://e.com/apple");

    let second = cmd_fetch(&cfg, &fetcher, now).unwrap();
    assert_eq!(second.points_added, 0);
    assert_eq!(second.files_changed, 0);
    assert!(web.requests.lock().unwrap().iter().any(|u| u.contains("after%3A2025-10-17")));
}

#[test]
fn binary_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = fs::read_to_string(fixture("stock5/config.toml"))
        .unwrap()
        .replace("store = \"store\"", &format!("store = \"{}\"", fixture("stock5/store").display()));
    let cfg_path = dir.path().join("config.toml");
    fs::File::create(&cfg_path).unwrap().write_all(cfg_text.as_bytes()).unwrap();

    let bin = env!("CARGO_BIN_EXE_tradesim");
    let run = Command::new(bin).args(["run", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let logs: Vec<PathBuf> = fs::read_dir(dir.path().join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(logs.len(), 1);
    let log = &logs[0];

    let again = Command::new(bin).args(["run", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(!again.status.success());

    let report = Command::new(bin).arg("report").arg(log).output().unwrap();
    assert!(report.status.success());
    let golden = fs::read_to_string(fixture("stock5/golden/metrics.txt")).unwrap();
    assert_eq!(String::from_utf8(report.stdout).unwrap(), golden);

    let delta = Command::new(bin).args(["delta", "-k", "0,1"]).arg(log).output().unwrap();
    assert!(delta.status.success(), "{}", String::from_utf8_lossy(&delta.stderr));
    assert!(String::from_utf8(delta.stdout).unwrap().contains("k=1"));
}
