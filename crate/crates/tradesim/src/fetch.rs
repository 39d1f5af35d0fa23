//! Live data fetchers: daily equity bars, prediction-market discovery and
//! quote history, and news search results. Response parsing is separated from
//! transport so it can be tested on canned payloads.

use std::collections::BTreeMap;
use std::time::Duration;

use chrono::{DateTime, Days, NaiveDate, Utc};
use serde_json::Value;
use tradesim_core::domain::{AssetId, NewsItem, PricePoint, NO_SUFFIX, YES_SUFFIX};
use tradesim_core::ingest::{
    dedup_by_event_slug, is_near_flat, lookback_window, normalize_news, normalize_quote, DateWindow,
    FetchPolicy, IngestError, MarketListing, RawNewsItem,
};
use tradesim_core::store::CatalogEntry;
use url::Url;

use crate::http::{with_retry, Http, HttpError};

pub const YAHOO_CHART_BASE: &str = "https://query1.finance.yahoo.com/v8/finance/chart/";
pub const GAMMA_MARKETS_URL: &str = "https://gamma-api.polymarket.com/markets";
pub const CLOB_HISTORY_URL: &str = "https://clob.polymarket.com/prices-history";
pub const GOOGLE_NEWS_RSS: &str = "https://news.google.com/rss/search";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FetchError {
    #[error("provider error: {0}")]
    Provider(#[from] HttpError),
    #[error("unexpected provider payload: {0}")]
    Parse(String),
    #[error("provider returned no rows for {0}")]
    EmptySeries(String),
    #[error(transparent)]
    Normalization(#[from] IngestError),
}

fn parse_err(e: impl std::fmt::Display) -> FetchError {
    FetchError::Parse(e.to_string())
}

pub fn yahoo_chart_url(ticker: &str, window: DateWindow) -> String {
    let (p1, p2) = window.unix_bounds();
    let mut url = Url::parse(YAHOO_CHART_BASE).expect("static url");
    url.path_segments_mut().expect("base url").pop_if_empty().push(ticker);
    url.query_pairs_mut()
        .append_pair("period1", &p1.to_string())
        .append_pair("period2", &p2.to_string())
        .append_pair("interval", "1d")
        .append_pair("events", "history")
        .append_pair("includeAdjustedClose", "true");
    url.into()
}

/// Daily bars from a chart payload: adjusted close, or the plain close when the
/// adjusted value is missing. Dates are exchange-local.
pub fn parse_yahoo_chart(body: &str, window: DateWindow) -> Result<Vec<PricePoint>, FetchError> {
    let v: Value = serde_json::from_str(body).map_err(parse_err)?;
    let result = &v["chart"]["result"][0];
    if result.is_null() {
        let msg = v["chart"]["error"]["description"].as_str().unwrap_or("missing result");
        return Err(FetchError::Parse(msg.to_string()));
    }
    let offset = result["meta"]["gmtoffset"].as_i64().unwrap_or(0);
    let empty = Vec::new();
    let stamps = result["timestamp"].as_array().unwrap_or(&empty);
    let quote = &result["indicators"]["quote"][0];
    let adj = &result["indicators"]["adjclose"][0]["adjclose"];
    let mut by_date = BTreeMap::new();
    for (i, ts) in stamps.iter().enumerate() {
        let Some(ts) = ts.as_i64() else { continue };
        let price = adj[i].as_f64().or_else(|| quote["close"][i].as_f64());
        let Some(price) = price.filter(|p| p.is_finite() && *p > 0.0) else {
            continue;
        };
        let Some(date) = DateTime::from_timestamp(ts + offset, 0).map(|d| d.date_naive()) else {
            continue;
        };
        if !window.contains(date) {
            continue;
        }
        by_date.insert(
            date,
            PricePoint {
                date,
                price,
                volume: quote["volume"][i].as_f64(),
            },
        );
    }
    Ok(by_date.into_values().collect())
}

fn json_string_list(v: &Value) -> Vec<String> {
    match v {
        Value::Array(items) => items.iter().filter_map(|s| s.as_str().map(str::to_string)).collect(),
        Value::String(s) => serde_json::from_str::<Vec<String>>(s).unwrap_or_default(),
        _ => Vec::new(),
    }
}

/// Listings from a market-discovery payload; non-binary markets are skipped.
pub fn parse_gamma_markets(body: &str) -> Result<Vec<MarketListing>, FetchError> {
    let v: Value = serde_json::from_str(body).map_err(parse_err)?;
    let items = v.as_array().ok_or_else(|| FetchError::Parse("expected a JSON array".into()))?;
    let mut out = Vec::new();
    for m in items {
        let Some(question) = m["question"].as_str().filter(|q| !q.is_empty()) else {
            continue;
        };
        let outcomes = json_string_list(&m["outcomes"]);
        let token_ids = json_string_list(&m["clobTokenIds"]);
        let binary = outcomes.len() == 2
            && outcomes[0].eq_ignore_ascii_case("yes")
            && outcomes[1].eq_ignore_ascii_case("no")
            && token_ids.len() == 2;
        if !binary {
            continue;
        }
        let event_slug = m["events"][0]["slug"].as_str().map(str::to_string);
        let category = m["category"]
            .as_str()
            .or_else(|| m["events"][0]["category"].as_str())
            .unwrap_or_default();
        out.push(MarketListing {
            question: question.to_string(),
            category: category.to_string(),
            slug: m["slug"].as_str().unwrap_or_default().to_string(),
            event_slug,
            outcomes,
            token_ids,
            url: m["url"].as_str().map(str::to_string),
        });
    }
    Ok(out)
}

pub fn gamma_markets_url(limit: usize) -> String {
    let mut url = Url::parse(GAMMA_MARKETS_URL).expect("static url");
    url.query_pairs_mut()
        .append_pair("active", "true")
        .append_pair("closed", "false")
        .append_pair("order", "volume")
        .append_pair("ascending", "false")
        .append_pair("limit", &limit.to_string());
    url.into()
}

pub fn clob_history_url(token: &str, window: DateWindow) -> String {
    let (start, end) = window.unix_bounds();
    let mut url = Url::parse(CLOB_HISTORY_URL).expect("static url");
    url.query_pairs_mut()
        .append_pair("market", token)
        .append_pair("startTs", &start.to_string())
        .append_pair("endTs", &end.to_string())
        .append_pair("fidelity", "60");
    url.into()
}

/// Daily probabilities: the last quote of each UTC day, normalized.
pub fn parse_clob_history(body: &str, window: DateWindow) -> Result<Vec<PricePoint>, FetchError> {
    let v: Value = serde_json::from_str(body).map_err(parse_err)?;
    let history = v["history"]
        .as_array()
        .ok_or_else(|| FetchError::Parse("missing `history`".into()))?;
    let mut last: BTreeMap<NaiveDate, (i64, f64)> = BTreeMap::new();
    for h in history {
        let (Some(t), Some(p)) = (h["t"].as_i64(), h["p"].as_f64()) else {
            continue;
        };
        let Some(date) = DateTime::from_timestamp(t, 0).map(|d| d.date_naive()) else {
            continue;
        };
        if !window.contains(date) {
            continue;
        }
        let p = normalize_quote(p)?;
        match last.get(&date) {
            Some((seen, _)) if *seen > t => {}
            _ => {
                last.insert(date, (t, p));
            }
        }
    }
    Ok(last.into_iter().map(|(d, (_, p))| PricePoint::new(d, p)).collect())
}

pub fn google_news_url(query: &str, window: DateWindow) -> String {
    // `before:` is exclusive
    let q = format!(
        "{query} after:{} before:{}",
        window.start,
        window.end + Days::new(1)
    );
    let mut url = Url::parse(GOOGLE_NEWS_RSS).expect("static url");
    url.query_pairs_mut()
        .append_pair("q", &q)
        .append_pair("hl", "en-US")
        .append_pair("gl", "US")
        .append_pair("ceid", "US:en");
    url.into()
}

/// Unwraps redirect links (`…/url?q=<target>`) and drops tracking parameters.
pub fn clean_link(raw: &str) -> String {
    let Ok(mut url) = Url::parse(raw.trim()) else {
        return raw.trim().to_string();
    };
    if url.path() == "/url" {
        if let Some((_, target)) = url.query_pairs().find(|(k, _)| k == "q" || k == "url") {
            if let Ok(inner) = Url::parse(&target) {
                url = inner;
            }
        }
    }
    let kept: Vec<(String, String)> = url
        .query_pairs()
        .filter(|(k, _)| !k.starts_with("utm_") && k != "oc")
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    if kept.is_empty() {
        url.set_query(None);
    } else {
        url.query_pairs_mut().clear().extend_pairs(kept);
    }
    url.set_fragment(None);
    url.into()
}

/// Removes markup and decodes the common entities left in feed descriptions.
pub fn strip_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_tag = false;
    for c in text.chars() {
        match c {
            '<' => {
                in_tag = true;
                out.push(' ');
            }
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.replace("&nbsp;", " ")
        .replace("&amp;", "&")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
}

/// Items of an RSS 2.0 feed.
pub fn parse_rss(xml: &str) -> Result<Vec<RawNewsItem>, FetchError> {
    let doc = roxmltree::Document::parse(xml).map_err(parse_err)?;
    let text_of = |node: roxmltree::Node, name: &str| -> String {
        node.children()
            .find(|c| c.has_tag_name(name))
            .and_then(|c| c.text())
            .unwrap_or_default()
            .trim()
            .to_string()
    };
    let mut out = Vec::new();
    for item in doc.descendants().filter(|n| n.has_tag_name("item")) {
        let source = text_of(item, "source");
        let mut title = text_of(item, "title");
        if !source.is_empty() {
            if let Some(stripped) = title.strip_suffix(&format!(" - {source}")) {
                title = stripped.to_string();
            }
        }
        out.push(RawNewsItem {
            title,
            snippet: strip_html(&text_of(item, "description")),
            source,
            link: clean_link(&text_of(item, "link")),
            time_text: text_of(item, "pubDate"),
        });
    }
    Ok(out)
}

type SleepFn = Box<dyn Fn(Duration) + Send + Sync>;

/// Fetchers over an [`Http`] transport with the configured retry policy.
pub struct Fetcher {
    http: Box<dyn Http>,
    policy: FetchPolicy,
    sleep: SleepFn,
}

impl Fetcher {
    pub fn new(http: Box<dyn Http>, policy: FetchPolicy) -> Self {
        Self {
            http,
            policy,
            sleep: Box::new(std::thread::sleep),
        }
    }

    /// Replaces the sleep function (tests use a no-op).
    pub fn with_sleep(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    fn get(&self, url: &str) -> Result<String, FetchError> {
        let ua = [("user-agent", self.policy.user_agent.clone())];
        Ok(with_retry(&self.policy, &mut rand::rng(), |d| (self.sleep)(d), || {
            self.http.get(url, &ua)
        })?)
    }

    /// Daily bars for `ticker` within `window`.
    pub fn equity_prices(&self, ticker: &str, window: DateWindow) -> Result<Vec<PricePoint>, FetchError> {
        let body = self.get(&yahoo_chart_url(ticker, window))?;
        let bars = parse_yahoo_chart(&body, window)?;
        if bars.is_empty() {
            return Err(FetchError::EmptySeries(ticker.to_string()));
        }
        Ok(bars)
    }

    /// Bars over `[end − lookback, end − 1]`.
    pub fn equity_prices_before(
        &self,
        ticker: &str,
        end: NaiveDate,
        lookback_days: u64,
    ) -> Result<Vec<PricePoint>, FetchError> {
        self.equity_prices(ticker, lookback_window(end, lookback_days))
    }

    /// Daily probabilities of one outcome token within `window`.
    pub fn prediction_prices(&self, token: &str, window: DateWindow) -> Result<Vec<PricePoint>, FetchError> {
        let body = self.get(&clob_history_url(token, window))?;
        let points = parse_clob_history(&body, window)?;
        if points.is_empty() {
            return Err(FetchError::EmptySeries(token.to_string()));
        }
        Ok(points)
    }

    /// Active binary markets with usable history: deduplicated by event slug,
    /// near-flat series dropped, at most `limit` kept.
    pub fn discover_markets(
        &self,
        limit: usize,
        flat_threshold: f64,
        window: DateWindow,
    ) -> Result<Vec<DiscoveredMarket>, FetchError> {
        let body = self.get(&gamma_markets_url(limit.saturating_mul(4).max(limit)))?;
        let listings = dedup_by_event_slug(parse_gamma_markets(&body)?);
        let mut out = Vec::new();
        for listing in listings {
            if out.len() >= limit {
                break;
            }
            let Ok(yes) = self.prediction_prices(&listing.token_ids[0], window) else {
                continue;
            };
            let prices: Vec<f64> = yes.iter().map(|p| p.price).collect();
            if is_near_flat(&prices, flat_threshold) {
                continue;
            }
            let Ok(no) = self.prediction_prices(&listing.token_ids[1], window) else {
                continue;
            };
            out.push(DiscoveredMarket::new(listing, yes, no)?);
        }
        Ok(out)
    }

    /// News for one query, bound to `tag` and limited to `window`.
    pub fn news(
        &self,
        query: &str,
        tag: &str,
        window: DateWindow,
        target: Option<NaiveDate>,
        now: DateTime<Utc>,
    ) -> Result<Vec<NewsItem>, FetchError> {
        let body = self.get(&google_news_url(query, window))?;
        Ok(normalize_news(parse_rss(&body)?, tag, now, window, target))
    }
}

/// A discovered market with both outcome histories.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveredMarket {
    pub entry: CatalogEntry,
    pub yes: Vec<PricePoint>,
    pub no: Vec<PricePoint>,
}

impl DiscoveredMarket {
    fn new(listing: MarketListing, yes: Vec<PricePoint>, no: Vec<PricePoint>) -> Result<Self, FetchError> {
        let asset = |suffix: &str| {
            AssetId::new(format!("{}{suffix}", listing.question)).map_err(parse_err)
        };
        let entry = CatalogEntry {
            url: listing.resolved_url().unwrap_or_default(),
            yes_asset: asset(YES_SUFFIX)?,
            no_asset: asset(NO_SUFFIX)?,
            yes_token: listing.token_ids[0].clone(),
            no_token: listing.token_ids[1].clone(),
            question: listing.question,
            category: listing.category,
            slug: listing.slug,
        };
        Ok(Self { entry, yes, no })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::testing::CannedHttp;
    use crate::http::HttpResponse;

    fn w(a: &str, b: &str) -> DateWindow {
        DateWindow {
            start: a.parse().unwrap(),
            end: b.parse().unwrap(),
        }
    }

    fn fetcher(responses: Vec<Result<HttpResponse, HttpError>>) -> Fetcher {
        Fetcher::new(Box::new(CannedHttp::with(responses)), FetchPolicy::default()).with_sleep(|_| {})
    }

    const CHART: &str = r#"{"chart":{"result":[{"meta":{"gmtoffset":-14400},
        "timestamp":[1760967000,1761053400,1761139800],
        "indicators":{"quote":[{"close":[262.24,262.77,258.45],"volume":[1,2,3]}],
        "adjclose":[{"adjclose":[262.0,null,258.0]}]}}],"error":null}}"#;

    #[test]
    fn chart_bars_use_adjusted_close_with_fallback() {
        let bars = parse_yahoo_chart(CHART, w("2025-10-14", "2025-10-23")).unwrap();
        let got: Vec<(String, f64)> = bars.iter().map(|b| (b.date.to_string(), b.price)).collect();
        assert_eq!(
            got,
            vec![
                ("2025-10-20".to_string(), 262.0),
                ("2025-10-21".to_string(), 262.77),
                ("2025-10-22".to_string(), 258.0)
            ]
        );
        assert_eq!(bars[1].volume, Some(2.0));
    }

    #[test]
    fn lookback_excludes_decision_day() {
        let url = yahoo_chart_url("AAPL", lookback_window("2025-10-24".parse().unwrap(), 10));
        // [2025-10-14, 2025-10-24) as UNIX seconds
        assert!(url.contains("period1=1760400000"));
        assert!(url.contains("period2=1761264000"));
        assert!(url.starts_with("https://query1.finance.yahoo.com/v8/finance/chart/AAPL?"));
    }

    #[test]
    fn empty_chart_is_empty_series() {
        let body = r#"{"chart":{"result":[{"meta":{},"timestamp":[],"indicators":{"quote":[{}]}}]}}"#;
        let f = fetcher(vec![CannedHttp::ok(body)]);
        assert!(matches!(
            f.equity_prices("AAPL", w("2025-10-14", "2025-10-23")),
            Err(FetchError::EmptySeries(_))
        ));
    }

    #[test]
    fn clob_history_normalizes_and_keeps_last_of_day() {
        let body = r#"{"history":[{"t":1761004800,"p":40},{"t":1761040000,"p":0.42},{"t":1761091200,"p":0.5}]}"#;
        let pts = parse_clob_history(body, w("2025-10-21", "2025-10-22")).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].price, 0.42);
        assert_eq!(pts[1].price, 0.5);
        let bad = r#"{"history":[{"t":1761004800,"p":150}]}"#;
        assert!(matches!(
            parse_clob_history(bad, w("2025-10-21", "2025-10-22")),
            Err(FetchError::Normalization(_))
        ));
    }

    #[test]
    fn gamma_listing_parse_and_url_construction() {
        let body = r#"[
          {"question":"Fed rate hike in 2025?","slug":"fed-hike","outcomes":"[\"Yes\", \"No\"]",
           "clobTokenIds":"[\"11\", \"12\"]","events":[{"slug":"fed-2025"}]},
          {"question":"Fed cut in 2025?","slug":"fed-cut","outcomes":"[\"Yes\", \"No\"]",
           "clobTokenIds":"[\"21\", \"22\"]","events":[{"slug":"fed-2025"}]},
          {"question":"Who wins?","outcomes":"[\"A\", \"B\", \"C\"]","clobTokenIds":"[\"1\",\"2\",\"3\"]"}
        ]"#;
        let listings = parse_gamma_markets(body).unwrap();
        assert_eq!(listings.len(), 2);
        let kept = dedup_by_event_slug(listings);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].resolved_url().unwrap(), "https://polymarket.com/event/fed-2025");
    }

    #[test]
    fn discovery_drops_flat_markets() {
        let listing = r#"[
          {"question":"Flat?","slug":"flat","outcomes":["Yes","No"],"clobTokenIds":["1","2"]},
          {"question":"Moving?","slug":"moving","outcomes":["Yes","No"],"clobTokenIds":["3","4"]}
        ]"#;
        let flat = r#"{"history":[{"t":1761004800,"p":0.500},{"t":1761091200,"p":0.501}]}"#;
        let moving_yes = r#"{"history":[{"t":1761004800,"p":0.40},{"t":1761091200,"p":0.55}]}"#;
        let moving_no = r#"{"history":[{"t":1761004800,"p":0.60},{"t":1761091200,"p":0.45}]}"#;
        let f = fetcher(vec![
            CannedHttp::ok(listing),
            CannedHttp::ok(flat),
            CannedHttp::ok(moving_yes),
            CannedHttp::ok(moving_no),
        ]);
        let found = f.discover_markets(5, 0.01, w("2025-10-21", "2025-10-22")).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].entry.question, "Moving?");
        assert_eq!(found[0].entry.yes_asset.as_str(), "Moving?_Yes");
        assert_eq!(found[0].entry.url, "https://polymarket.com/event/moving");
        assert_eq!(found[0].no[1].price, 0.45);
    }

    #[test]
    fn redirect_links_are_unwrapped() {
        assert_eq!(
            clean_link("https://www.google.com/url?q=https://example.com/a?id=1%26utm_source=x&sa=U"),
            "https://example.com/a?id=1"
        );
        assert_eq!(clean_link("https://example.com/b?utm_medium=rss#frag"), "https://example.com/b");
        assert_eq!(clean_link("not a url"), "not a url");
    }

    #[test]
    fn rss_items_are_normalized() {
        let xml = r#"<?xml version="1.0"?><rss version="2.0"><channel>
          <item><title>Apple hits record - Reuters</title><link>https://example.com/a</link>
            <pubDate>Thu, 23 Oct 2025 14:00:00 GMT</pubDate>
            <description>&lt;a href="x"&gt;Apple hits record&lt;/a&gt;&amp;nbsp;&lt;font&gt;Reuters&lt;/font&gt;</description>
            <source url="https://reuters.com">Reuters</source></item>
          <item><title>Undated</title><link>https://example.com/b</link><pubDate>sometime</pubDate></item>
          <item><title>Same day</title><link>https://example.com/c</link>
            <pubDate>Fri, 24 Oct 2025 09:00:00 GMT</pubDate></item>
        </channel></rss>"#;
        let raw = parse_rss(xml).unwrap();
        assert_eq!(raw.len(), 3);
        assert_eq!(raw[0].title, "Apple hits record");
        assert_eq!(raw[0].source, "Reuters");
        let now = DateTime::parse_from_rfc3339("2025-10-24T12:00:00Z").unwrap().with_timezone(&Utc);
        let t: NaiveDate = "2025-10-24".parse().unwrap();
        let items = normalize_news(raw, "AAPL", now, tradesim_core::ingest::news_window(t), Some(t));
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].snippet, "Apple hits record Reuters");
        assert_eq!(items[0].tag, "AAPL");
    }

    #[test]
    fn news_query_url() {
        let url = google_news_url("AAPL stock news OR Apple", w("2025-10-21", "2025-10-23"));
        let parsed = Url::parse(&url).unwrap();
        let q = parsed.query_pairs().find(|(k, _)| k == "q").unwrap().1.into_owned();
        assert_eq!(q, "AAPL stock news OR Apple after:2025-10-21 before:2025-10-24");
    }
}
