//! Regenerates the committed fixtures under `fixtures/`.
//!
//! ```text
//! cargo run -p tradesim --example make_fixtures
//! ```
//!
//! Series come from a seeded ChaCha stream, so reruns reproduce the same bytes.
//! Goldens (prompts and the baseline report) are rendered by the library and
//! then checked independently by the acceptance tests.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradesim::commands::{cmd_report, cmd_run, BoxedAgent, RunOptions};
use tradesim::config::RunConfig;
use tradesim::snapshot::save_store;
use tradesim_core::agent::EqualWeightAgent;
use tradesim_core::domain::{AssetId, MarketSpec, NewsItem, PricePoint, DEFAULT_STOCK_UNIVERSE};
use tradesim_core::environment::Session;
use tradesim_core::store::{CatalogEntry, Snapshot, SnapshotStore};

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn weekdays(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days()
        .take_while(|x| *x <= to)
        .filter(|x| !matches!(x.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

fn all_days(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days().take_while(|x| *x <= to).collect()
}

fn round(x: f64, places: i32) -> f64 {
    let m = 10f64.powi(places);
    (x * m).round() / m
}

fn noon_utc(date: NaiveDate, minute: u32) -> i64 {
    date.and_hms_opt(12 + minute / 60, minute % 60, 0).unwrap().and_utc().timestamp()
}

fn news(rng: &mut ChaCha8Rng, tag: &str, label: &str, days: &[NaiveDate]) -> Vec<NewsItem> {
    const SOURCES: [&str; 4] = ["Wire Daily", "Market Ledger", "The Tape", "Street Notes"];
    const ANGLES: [&str; 6] = [
        "outlook revised after analyst meeting",
        "volume picks up ahead of key data",
        "traders weigh fresh guidance",
        "positioning shifts as sentiment cools",
        "rally extends on upbeat commentary",
        "slips as investors book gains",
    ];
    let mut out = Vec::new();
    for (i, day) in days.iter().enumerate() {
        if rng.random::<f64>() < 0.45 {
            let angle = ANGLES[rng.random_range(0..ANGLES.len())];
            let source = SOURCES[rng.random_range(0..SOURCES.len())];
            out.push(NewsItem {
                title: format!("{label} {angle}"),
                snippet: format!("{label}: {angle}. Coverage notes that participants are watching the next session closely."),
                source: source.to_string(),
                url: format!("https://news.example.com/{}/{}-{i}", day, tag.len() + i),
                published_at: noon_utc(*day, rng.random_range(0..600)),
                tag: tag.to_string(),
            });
        }
    }
    out
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn fresh(dir: &Path) {
    if dir.exists() {
        fs::remove_dir_all(dir).unwrap();
    }
    fs::create_dir_all(dir).unwrap();
}

fn gbm(rng: &mut ChaCha8Rng, start: f64, n: usize, vol: f64) -> Vec<f64> {
    let mut p = start;
    (0..n)
        .map(|_| {
            let z: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
            p *= (0.0004 + vol * z).exp();
            round(p, 2)
        })
        .collect()
}

fn stock50(root: &Path) {
    let dir = root.join("stock50");
    fresh(&dir);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let days = weekdays(d("2025-08-01"), d("2025-10-24"));
    let news_days = all_days(d("2025-08-10"), d("2025-10-23"));
    let mut store = SnapshotStore::new();
    for ticker in DEFAULT_STOCK_UNIVERSE {
        let start = rng.random_range(40.0..600.0);
        let vol = rng.random_range(0.008..0.025);
        let path = gbm(&mut rng, start, days.len(), vol);
        let points = days.iter().zip(path).map(|(d, p)| PricePoint::new(*d, p)).collect();
        store
            .record(Snapshot::Prices {
                asset: AssetId::new(ticker).unwrap(),
                points,
            })
            .unwrap();
        let label = tradesim_core::ingest::company_name(ticker).unwrap_or(ticker);
        store.record(Snapshot::News(news(&mut rng, ticker, label, &news_days))).unwrap();
    }
    save_store(&dir.join("store"), &store).unwrap();
    write(
        &dir.join("config.toml"),
        r#"market = "stock"
start = "2025-08-15"
end = "2025-10-24"
store = "store"
log_dir = "runs"

[[models]]
id = "baseline/equal-weight"

[[models]]
id = "scripted/mixed"
"#,
    );
}

fn stock5(root: &Path) {
    let dir = root.join("stock5");
    fresh(&dir);
    // NVDA has no bar on 2025-10-22; it carries forward.
    let table: [(&str, [Option<f64>; 5]); 3] = [
        ("AAPL", [Some(250.0), Some(255.0), Some(252.45), Some(260.0), Some(262.6)]),
        ("MSFT", [Some(510.0), Some(505.0), Some(515.1), Some(520.25), Some(518.0)]),
        ("NVDA", [Some(180.0), Some(183.6), None, Some(178.2), Some(186.11)]),
    ];
    let dates = weekdays(d("2025-10-20"), d("2025-10-24"));
    let mut store = SnapshotStore::new();
    for (ticker, row) in table {
        let points = dates
            .iter()
            .zip(row)
            .filter_map(|(d, p)| p.map(|p| PricePoint::new(*d, p)))
            .collect();
        store
            .record(Snapshot::Prices {
                asset: AssetId::new(ticker).unwrap(),
                points,
            })
            .unwrap();
    }
    save_store(&dir.join("store"), &store).unwrap();
    write(
        &dir.join("config.toml"),
        r#"market = "stock"
assets = ["AAPL", "MSFT", "NVDA"]
start = "2025-10-20"
end = "2025-10-24"
store = "store"
log_dir = "runs"

[[models]]
id = "baseline/equal-weight"
"#,
    );
}

const QUESTIONS: [(&str, &str, &str); 3] = [
    ("Will the Fed cut rates in October 2025?", "economy", "fed-decision-in-october-2025"),
    ("Will Bitcoin close above $120k on October 31?", "crypto", "bitcoin-above-120k-on-october-31"),
    ("Will the government shutdown end by October 25?", "politics", "government-shutdown-ends-by-october-25"),
];

fn prediction(root: &Path) {
    let dir = root.join("prediction");
    fresh(&dir);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let days = all_days(d("2025-09-28"), d("2025-10-21"));
    let news_days = all_days(d("2025-10-05"), d("2025-10-20"));
    let mut store = SnapshotStore::new();
    for (i, (question, category, slug)) in QUESTIONS.iter().enumerate() {
        let spec = MarketSpec::prediction([*question]).unwrap();
        let pair = &spec.pairs()[0];
        let mut yes: f64 = rng.random_range(0.2..0.8);
        let mut yes_pts = Vec::new();
        let mut no_pts = Vec::new();
        for day in &days {
            yes = (yes + rng.random_range(-0.06..0.06)).clamp(0.03, 0.97);
            let spread = rng.random_range(0.0..0.02);
            yes_pts.push(PricePoint::new(*day, round(yes, 3)));
            no_pts.push(PricePoint::new(*day, round(1.0 - yes + spread, 3)));
        }
        store.record(Snapshot::Prices { asset: pair.yes.clone(), points: yes_pts }).unwrap();
        store.record(Snapshot::Prices { asset: pair.no.clone(), points: no_pts }).unwrap();
        store
            .record(Snapshot::Market(CatalogEntry {
                question: question.to_string(),
                category: category.to_string(),
                slug: slug.to_string(),
                url: format!("{}{slug}", tradesim_core::ingest::MARKET_URL_PREFIX),
                yes_asset: pair.yes.clone(),
                no_asset: pair.no.clone(),
                yes_token: format!("{}", 7_100_000 + 2 * i),
                no_token: format!("{}", 7_100_001 + 2 * i),
            }))
            .unwrap();
        store.record(Snapshot::News(news(&mut rng, question, category, &news_days))).unwrap();
    }
    save_store(&dir.join("store"), &store).unwrap();
    write(
        &dir.join("config.toml"),
        r#"market = "prediction"
start = "2025-10-08"
end = "2025-10-21"
store = "store"
log_dir = "runs"

[[models]]
id = "baseline/equal-weight"
"#,
    );
}

fn rolling(root: &Path) {
    let dir = root.join("rolling");
    fresh(&dir);
    let table: [(&str, [f64; 6]); 2] = [
        ("AAA", [10.0, 10.5, 9.8, 10.2, 11.0, 10.6]),
        ("BBB", [20.0, 19.0, 19.5, 21.0, 20.4, 22.0]),
    ];
    let dates = weekdays(d("2025-10-13"), d("2025-10-20"));
    let mut store = SnapshotStore::new();
    for (ticker, row) in table {
        let points = dates.iter().zip(row).map(|(d, p)| PricePoint::new(*d, p)).collect();
        store
            .record(Snapshot::Prices {
                asset: AssetId::new(ticker).unwrap(),
                points,
            })
            .unwrap();
    }
    save_store(&dir.join("store"), &store).unwrap();
    write(
        &dir.join("config.toml"),
        r#"market = "stock"
assets = ["AAA", "BBB"]
start = "2025-10-13"
end = "2025-10-20"
store = "store"
log_dir = "runs"
risk_free_rate = 0.0

[[models]]
id = "scripted/rotation"
"#,
    );
}

fn equal_weight(_: &tradesim::config::ModelEntry) -> anyhow::Result<BoxedAgent> {
    Ok(Box::new(EqualWeightAgent))
}

/// Prompt at the last date of `config` after an equal-weight run up to it.
fn golden_prompt(config: &Path, out: &Path) {
    let cfg = RunConfig::load(config).unwrap();
    let store = tradesim::snapshot::load_store(&cfg.store).unwrap();
    let spec = cfg.spec(Some(&store)).unwrap();
    let dates = tradesim::commands::trading_dates(&cfg, &spec, &store).unwrap();
    let mut session = Session::start(spec, cfg.session_config(), dates[0]).unwrap();
    for &date in &dates[1..] {
        session.step(&mut EqualWeightAgent, &store, date).unwrap();
    }
    write(out, &session.decision_prompt(&store).unwrap());
}

fn golden_report(root: &Path) {
    let cfg_path = root.join("stock5/config.toml");
    let mut cfg = RunConfig::load(&cfg_path).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    cfg.log_dir = tmp.path().to_path_buf();
    let runs = cmd_run(&cfg, RunOptions::default(), equal_weight).unwrap();
    let log = runs[0].log.clone();
    runs.into_iter().for_each(|r| {
        r.result.unwrap();
    });
    cmd_report(&[log], Some(&root.join("stock5/golden"))).unwrap();
}

fn main() {
    let root: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    stock50(&root);
    stock5(&root);
    prediction(&root);
    rolling(&root);
    let golden = root.join("golden");
    fresh(&golden);
    golden_prompt(&root.join("stock50/config.toml"), &golden.join("stock-2025-10-24.txt"));
    golden_prompt(&root.join("prediction/config.toml"), &golden.join("prediction-2025-10-21.txt"));
    golden_report(&root);
    println!("fixtures written to {}", root.display());
}
