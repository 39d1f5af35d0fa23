//! In-memory snapshot store: the recorded price series, news and market
//! catalog that make sessions replayable.
//!
//! Writes are upserts keyed by `(asset, date)` for prices and `(tag, url)` for
//! news. Re-recording an identical value is a no-op; recording a different
//! value under an existing key is rejected, so once recorded a series replays
//! identically.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{AssetId, NewsItem, PricePoint};
use crate::environment::{FeedError, MarketFeed};
use crate::ingest::DateWindow;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("conflicting price for `{asset}` on {date}: stored {stored}, incoming {incoming}")]
    ConflictingPrice {
        asset: AssetId,
        date: NaiveDate,
        stored: f64,
        incoming: f64,
    },
    #[error("conflicting news item `{url}` under tag `{tag}`")]
    ConflictingNews { tag: String, url: String },
    #[error("conflicting catalog entry for question `{0}`")]
    ConflictingMarket(String),
    #[error("price for `{asset}` on {date} must be finite and positive")]
    InvalidPrice { asset: AssetId, date: NaiveDate },
}

/// Catalog record of one prediction question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub question: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub slug: String,
    #[serde(default)]
    pub url: String,
    pub yes_asset: AssetId,
    pub no_asset: AssetId,
    #[serde(default)]
    pub yes_token: String,
    #[serde(default)]
    pub no_token: String,
}

/// One batch of fetched data.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Prices { asset: AssetId, points: Vec<PricePoint> },
    News(Vec<NewsItem>),
    Market(CatalogEntry),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotStore {
    prices: BTreeMap<AssetId, BTreeMap<NaiveDate, PricePoint>>,
    news: BTreeMap<String, BTreeMap<String, NewsItem>>,
    catalog: BTreeMap<String, CatalogEntry>,
}

impl SnapshotStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a batch and returns how many new entries were added.
    /// The store is left untouched when the batch conflicts.
    pub fn record(&mut self, snapshot: Snapshot) -> Result<usize, StoreError> {
        match snapshot {
            Snapshot::Prices { asset, points } => self.record_prices(asset, points),
            Snapshot::News(items) => self.record_news(items),
            Snapshot::Market(entry) => self.record_market(entry),
        }
    }

    fn record_prices(&mut self, asset: AssetId, points: Vec<PricePoint>) -> Result<usize, StoreError> {
        let existing = self.prices.get(&asset);
        let mut fresh: BTreeMap<NaiveDate, PricePoint> = BTreeMap::new();
        for p in points {
            if !(p.price.is_finite() && p.price > 0.0) {
                return Err(StoreError::InvalidPrice {
                    asset,
                    date: p.date,
                });
            }
            let prior = existing
                .and_then(|s| s.get(&p.date))
                .or_else(|| fresh.get(&p.date));
            match prior {
                Some(stored) if stored == &p => {}
                Some(stored) => {
                    return Err(StoreError::ConflictingPrice {
                        asset,
                        date: p.date,
                        stored: stored.price,
                        incoming: p.price,
                    })
                }
                None => {
                    fresh.insert(p.date, p);
                }
            }
        }
        let added = fresh.len();
        self.prices.entry(asset).or_default().extend(fresh);
        Ok(added)
    }

    fn record_news(&mut self, items: Vec<NewsItem>) -> Result<usize, StoreError> {
        let mut fresh: Vec<NewsItem> = Vec::new();
        for item in items {
            let prior = self
                .news
                .get(&item.tag)
                .and_then(|m| m.get(&item.url))
                .or_else(|| fresh.iter().find(|f| f.tag == item.tag && f.url == item.url));
            match prior {
                Some(stored) if stored == &item => {}
                Some(_) => {
                    return Err(StoreError::ConflictingNews {
                        tag: item.tag,
                        url: item.url,
                    })
                }
                None => fresh.push(item),
            }
        }
        let added = fresh.len();
        for item in fresh {
            self.news
                .entry(item.tag.clone())
                .or_default()
                .insert(item.url.clone(), item);
        }
        Ok(added)
    }

    fn record_market(&mut self, entry: CatalogEntry) -> Result<usize, StoreError> {
        match self.catalog.get(&entry.question) {
            Some(stored) if stored == &entry => Ok(0),
            Some(_) => Err(StoreError::ConflictingMarket(entry.question)),
            None => {
                self.catalog.insert(entry.question.clone(), entry);
                Ok(1)
            }
        }
    }

    /// Full series of one asset, ascending by date.
    pub fn series(&self, asset: &str) -> Vec<PricePoint> {
        self.prices
            .get(asset)
            .map(|s| s.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn assets(&self) -> impl Iterator<Item = &AssetId> {
        self.prices.keys()
    }

    pub fn news_tags(&self) -> impl Iterator<Item = &String> {
        self.news.keys()
    }

    /// All news under a tag, ordered by URL.
    pub fn news_for(&self, tag: &str) -> Vec<NewsItem> {
        self.news
            .get(tag)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default()
    }

    pub fn catalog(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.catalog.values()
    }

    pub fn market(&self, question: &str) -> Option<&CatalogEntry> {
        self.catalog.get(question)
    }

    /// Sorted union of the dates on which any of `assets` has a price.
    pub fn trading_dates<'a, I>(&self, assets: I, window: DateWindow) -> Vec<NaiveDate>
    where
        I: IntoIterator<Item = &'a AssetId>,
    {
        let mut dates = alloc::collections::BTreeSet::new();
        for asset in assets {
            if let Some(series) = self.prices.get(asset) {
                dates.extend(series.range(window.start..=window.end).map(|(d, _)| *d));
            }
        }
        dates.into_iter().collect()
    }
}

impl MarketFeed for SnapshotStore {
    fn price_on_or_before(
        &self,
        asset: &AssetId,
        date: NaiveDate,
    ) -> Result<Option<PricePoint>, FeedError> {
        Ok(self
            .prices
            .get(asset)
            .and_then(|s| s.range(..=date).next_back())
            .map(|(_, p)| *p))
    }

    fn price_history(
        &self,
        asset: &AssetId,
        window: DateWindow,
    ) -> Result<Vec<PricePoint>, FeedError> {
        Ok(self
            .prices
            .get(asset)
            .map(|s| s.range(window.start..=window.end).map(|(_, p)| *p).collect())
            .unwrap_or_default())
    }

    fn news(&self, tag: &str, window: DateWindow) -> Result<Vec<NewsItem>, FeedError> {
        Ok(self
            .news
            .get(tag)
            .map(|m| {
                m.values()
                    .filter(|n| n.published_date().is_some_and(|d| window.contains(d)))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }
}
