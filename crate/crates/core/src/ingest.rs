//! Normalization rules for ingested market data and news: quote scaling,
//! leakage-safe date windows, timestamp parsing, market filtering and the
//! retry schedule. The HTTP side lives in the `tradesim` crate.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{DateTime, Days, NaiveDate, NaiveDateTime, NaiveTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::NewsItem;

/// Calendar days of price history shown before the decision date.
pub const DEFAULT_LOOKBACK_DAYS: u64 = 10;
/// Calendar days of news before the decision date.
pub const NEWS_WINDOW_DAYS: u64 = 3;
/// Minimum max−min probability range for a prediction market to be kept.
pub const DEFAULT_FLAT_THRESHOLD: f64 = 0.01;
pub const SNIPPET_MAX_CHARS: usize = 500;
pub const MARKET_URL_PREFIX: &str = "https://polymarket.com/event/";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("quote {0} is neither a probability in (0, 1] nor cents in (1, 100]")]
    Normalization(f64),
}

/// Converts an exchange quote to a probability. Values in `(0, 1]` are already
/// probabilities, values in `(1, 100]` are cents.
pub fn normalize_quote(raw: f64) -> Result<f64, IngestError> {
    if raw > 0.0 && raw <= 1.0 {
        Ok(raw)
    } else if raw > 1.0 && raw <= 100.0 {
        Ok(raw / 100.0)
    } else {
        Err(IngestError::Normalization(raw))
    }
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    /// Half-open `[start, end + 1)` bounds as UNIX seconds, the convention of
    /// daily-bar providers.
    pub fn unix_bounds(&self) -> (i64, i64) {
        let start = self.start.and_time(NaiveTime::MIN).and_utc().timestamp();
        let end = (self.end + Days::new(1))
            .and_time(NaiveTime::MIN)
            .and_utc()
            .timestamp();
        (start, end)
    }
}

/// `[t − days, t − 1]`: history strictly before the decision date.
pub fn lookback_window(t: NaiveDate, days: u64) -> DateWindow {
    DateWindow {
        start: t - Days::new(days),
        end: t - Days::new(1),
    }
}

/// `[t − 3, t − 1]`.
pub fn news_window(t: NaiveDate) -> DateWindow {
    lookback_window(t, NEWS_WINDOW_DAYS)
}

fn relative_unit_seconds(unit: &str) -> Option<i64> {
    let unit = unit.trim_end_matches('s');
    Some(match unit {
        "sec" | "second" => 1,
        "min" | "minute" | "mn" => 60,
        "hour" | "hr" | "h" => 3_600,
        "day" | "d" => 86_400,
        "week" | "wk" | "w" => 7 * 86_400,
        "month" | "mo" => 30 * 86_400,
        "year" | "yr" | "y" => 365 * 86_400,
        _ => return None,
    })
}

fn parse_relative(text: &str, now: DateTime<Utc>) -> Option<DateTime<Utc>> {
    match text {
        "just now" | "now" => return Some(now),
        "yesterday" => return Some(now - TimeDelta::days(1)),
        _ => {}
    }
    let rest = text.strip_suffix(" ago")?;
    let mut parts = rest.split_whitespace();
    let amount = parts.next()?;
    let unit = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    let n: i64 = match amount {
        "a" | "an" | "one" => 1,
        other => other.parse().ok()?,
    };
    let secs = relative_unit_seconds(unit)?;
    Some(now - TimeDelta::seconds(n.checked_mul(secs)?))
}

fn midnight(date: NaiveDate) -> DateTime<Utc> {
    date.and_time(NaiveTime::MIN).and_utc()
}

/// Parses a news timestamp to UNIX seconds. Accepts relative phrases
/// ("3 hours ago", "yesterday") resolved against `now`, and absolute forms
/// ("Oct 12, 2025", ISO dates, RFC 3339, RFC 2822). Returns `None` when the
/// text is not a recognizable time.
pub fn parse_news_time(text: &str, now: DateTime<Utc>) -> Option<i64> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let lower = text.to_lowercase();
    if let Some(dt) = parse_relative(&lower, now) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = DateTime::parse_from_rfc2822(text) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp());
    }
    for fmt in ["%b %d, %Y", "%B %d, %Y", "%d %b %Y", "%d %B %Y", "%Y-%m-%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(text, fmt) {
            return Some(midnight(d).timestamp());
        }
    }
    None
}

/// A news result as scraped, before timestamp normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNewsItem {
    pub title: String,
    pub snippet: String,
    pub source: String,
    pub link: String,
    pub time_text: String,
}

/// Collapses whitespace and truncates to [`SNIPPET_MAX_CHARS`] characters.
pub fn clean_snippet(text: &str) -> String {
    let mut out = String::new();
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    match out.char_indices().nth(SNIPPET_MAX_CHARS) {
        Some((idx, _)) => out[..idx].to_string(),
        None => out,
    }
}

/// Turns raw results into [`NewsItem`]s tagged with `tag`: items with an
/// unparseable timestamp or a date outside `window` are dropped, the rest are
/// ranked by [`rank_news`].
pub fn normalize_news(
    raw: Vec<RawNewsItem>,
    tag: &str,
    now: DateTime<Utc>,
    window: DateWindow,
    target: Option<NaiveDate>,
) -> Vec<NewsItem> {
    let mut items: Vec<NewsItem> = raw
        .into_iter()
        .filter_map(|r| {
            let published_at = parse_news_time(&r.time_text, now)?;
            let item = NewsItem {
                title: clean_snippet(&r.title),
                snippet: clean_snippet(&r.snippet),
                source: r.source,
                url: r.link,
                published_at,
                tag: tag.to_string(),
            };
            window.contains(item.published_date()?).then_some(item)
        })
        .collect();
    rank_news(&mut items, target);
    items
}

/// Orders news by closeness to the target date (or by recency without one).
/// Ties break on title then URL so the order is total.
pub fn rank_news(items: &mut [NewsItem], target: Option<NaiveDate>) {
    match target {
        Some(t) => {
            let anchor = midnight(t).timestamp();
            items.sort_by(|a, b| {
                (a.published_at - anchor)
                    .unsigned_abs()
                    .cmp(&(b.published_at - anchor).unsigned_abs())
                    .then_with(|| b.published_at.cmp(&a.published_at))
                    .then_with(|| a.title.cmp(&b.title))
                    .then_with(|| a.url.cmp(&b.url))
            });
        }
        None => items.sort_by(|a, b| {
            b.published_at
                .cmp(&a.published_at)
                .then_with(|| a.title.cmp(&b.title))
                .then_with(|| a.url.cmp(&b.url))
        }),
    }
}

/// Company names used in equity news queries.
pub fn company_name(ticker: &str) -> Option<&'static str> {
    Some(match ticker {
        "AAPL" => "Apple",
        "MSFT" => "Microsoft",
        "NVDA" => "NVIDIA",
        "META" => "Meta Platforms",
        "JPM" => "JPMorgan Chase",
        "V" => "Visa",
        "XOM" => "Exxon Mobil",
        "CAT" => "Caterpillar",
        "TSLA" => "Tesla",
        "PG" => "Procter & Gamble",
        "KO" => "Coca-Cola",
        "AMZN" => "Amazon",
        "WMT" => "Walmart",
        "JNJ" => "Johnson & Johnson",
        "UNH" => "UnitedHealth Group",
        _ => return None,
    })
}

/// `"<TICKER> stock news OR <Company Name>"`; falls back to the ticker when the
/// company is unknown.
pub fn stock_news_query(ticker: &str) -> String {
    let company = company_name(ticker).unwrap_or(ticker);
    alloc::format!("{ticker} stock news OR {company}")
}

/// One prediction market as returned by a discovery endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketListing {
    pub question: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub slug: String,
    #[serde(default)]
    pub event_slug: Option<String>,
    pub outcomes: Vec<String>,
    pub token_ids: Vec<String>,
    #[serde(default)]
    pub url: Option<String>,
}

impl MarketListing {
    fn dedup_key(&self) -> &str {
        self.event_slug.as_deref().unwrap_or(&self.slug)
    }

    /// The listing URL, constructed from the event slug (or market slug) when absent.
    pub fn resolved_url(&self) -> Option<String> {
        if let Some(url) = self.url.as_ref().filter(|u| !u.is_empty()) {
            return Some(url.clone());
        }
        let slug = self.dedup_key();
        (!slug.is_empty()).then(|| alloc::format!("{MARKET_URL_PREFIX}{slug}"))
    }
}

/// Keeps the first listing per event slug.
pub fn dedup_by_event_slug(listings: Vec<MarketListing>) -> Vec<MarketListing> {
    let mut seen = BTreeSet::new();
    listings
        .into_iter()
        .filter(|l| seen.insert(l.dedup_key().to_string()))
        .collect()
}

/// True when the series is empty or its price range is below `threshold`.
pub fn is_near_flat(prices: &[f64], threshold: f64) -> bool {
    let Some(first) = prices.first() else {
        return true;
    };
    let (lo, hi) = prices
        .iter()
        .fold((*first, *first), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    hi - lo < threshold
}

/// Retry and politeness settings for outbound fetches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchPolicy {
    pub max_retries: u32,
    pub base_backoff_ms: u64,
    /// Uniform extra delay range in milliseconds, inclusive.
    pub jitter_ms: (u64, u64),
    pub timeout_secs: u64,
    pub user_agent: String,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            max_retries: 4,
            base_backoff_ms: 500,
            jitter_ms: (100, 600),
            timeout_secs: 20,
            user_agent: String::from(
                "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/124.0 Safari/537.36",
            ),
        }
    }
}

impl FetchPolicy {
    /// Delay before attempt `attempt` (1-based) in milliseconds:
    /// `base · 2^(attempt−1)` plus a jitter drawn from `unit ∈ [0, 1)`.
    pub fn delay_ms(&self, attempt: u32, unit: f64) -> u64 {
        let exp = self
            .base_backoff_ms
            .saturating_mul(1u64 << attempt.saturating_sub(1).min(32));
        let (lo, hi) = self.jitter_ms;
        let span = hi.saturating_sub(lo) as f64;
        let jitter = lo + libm::floor(unit.clamp(0.0, 1.0) * span) as u64;
        exp.saturating_add(jitter.min(hi.max(lo)))
    }

    pub fn attempts(&self) -> u32 {
        self.max_retries.max(1)
    }
}
