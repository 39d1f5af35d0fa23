//! Shared domain types.
//!
//! Every vector type (prices, holdings, allocations) is keyed by [`AssetId`] and
//! always carries exactly the asset set of the [`MarketSpec`] it was built for.
//! Cash is an ordinary asset with a fixed unit price.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Reserved identifier of the cash asset.
pub const CASH: &str = "CASH";

/// Suffix of the YES outcome asset of a prediction question.
pub const YES_SUFFIX: &str = "_Yes";
/// Suffix of the NO outcome asset of a prediction question.
pub const NO_SUFFIX: &str = "_No";

/// Default equity universe, in prompt order.
pub const DEFAULT_STOCK_UNIVERSE: [&str; 15] = [
    "AAPL", "MSFT", "NVDA", "JPM", "V", "JNJ", "UNH", "PG", "KO", "XOM", "CAT", "WMT", "META",
    "TSLA", "AMZN",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("asset identifier must not be empty")]
    EmptyAssetId,
    #[error("duplicate asset `{0}` in market spec")]
    DuplicateAsset(AssetId),
    #[error("market spec has no tradable assets")]
    EmptyUniverse,
    #[error("asset `{0}` is not part of the market spec")]
    UnknownAsset(AssetId),
    #[error("asset `{0}` is missing")]
    MissingAsset(AssetId),
    #[error("price for `{asset}` must be finite and strictly positive, got {price}")]
    NonPositivePrice { asset: AssetId, price: f64 },
    #[error("prediction outcome `{asset}` price {price} is outside (0, 1]")]
    ProbabilityOutOfRange { asset: AssetId, price: f64 },
    #[error("cash price must be exactly 1.0, got {0}")]
    CashPrice(f64),
    #[error("holding of `{asset}` must be finite and non-negative, got {units}")]
    NegativeHolding { asset: AssetId, units: f64 },
}

/// Identifier of one tradable asset: an equity ticker, a prediction outcome
/// (`"<question>_Yes"` / `"<question>_No"`) or [`CASH`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AssetId(String);

impl AssetId {
    pub fn new(symbol: impl Into<String>) -> Result<Self, DomainError> {
        let symbol = symbol.into();
        if symbol.is_empty() {
            return Err(DomainError::EmptyAssetId);
        }
        Ok(Self(symbol))
    }

    pub fn cash() -> Self {
        Self(CASH.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_cash(&self) -> bool {
        self.0 == CASH
    }
}

impl TryFrom<String> for AssetId {
    type Error = DomainError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AssetId> for String {
    fn from(value: AssetId) -> Self {
        value.0
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl core::borrow::Borrow<str> for AssetId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketKind {
    Stock,
    Prediction,
}

impl MarketKind {
    /// Calendar used for trading dates: US-Eastern for equities, UTC for prediction markets.
    pub fn zone(self) -> TimeZoneTag {
        match self {
            MarketKind::Stock => TimeZoneTag::UsEastern,
            MarketKind::Prediction => TimeZoneTag::Utc,
        }
    }
}

impl fmt::Display for MarketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarketKind::Stock => "stock",
            MarketKind::Prediction => "prediction",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeZoneTag {
    #[serde(rename = "US/Eastern")]
    UsEastern,
    #[serde(rename = "UTC")]
    Utc,
}

impl TimeZoneTag {
    pub fn label(self) -> &'static str {
        match self {
            TimeZoneTag::UsEastern => "US Eastern Time",
            TimeZoneTag::Utc => "UTC",
        }
    }
}

/// YES/NO outcome assets of one binary prediction question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomePair {
    pub question: String,
    pub yes: AssetId,
    pub no: AssetId,
}

/// Static description of one tradable universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    kind: MarketKind,
    assets: Vec<AssetId>,
    cash: AssetId,
    pairs: Vec<OutcomePair>,
    risk_free_rate: f64,
}

impl MarketSpec {
    /// Equity universe: the given tickers followed by [`CASH`].
    pub fn stock<I, S>(tickers: I, risk_free_rate: f64) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut assets = Vec::new();
        for t in tickers {
            push_unique(&mut assets, AssetId::new(t)?)?;
        }
        if assets.is_empty() {
            return Err(DomainError::EmptyUniverse);
        }
        push_unique(&mut assets, AssetId::cash())?;
        Ok(Self {
            kind: MarketKind::Stock,
            assets,
            cash: AssetId::cash(),
            pairs: Vec::new(),
            risk_free_rate,
        })
    }

    /// The fifteen-equity default universe plus cash.
    pub fn default_stock(risk_free_rate: f64) -> Self {
        Self::stock(DEFAULT_STOCK_UNIVERSE, risk_free_rate).expect("static universe is valid")
    }

    /// Prediction universe: `<question>_Yes`, `<question>_No` per question, then [`CASH`].
    /// The risk-free rate is fixed at zero.
    pub fn prediction<I, S>(questions: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut assets = Vec::new();
        let mut pairs = Vec::new();
        for q in questions {
            let question: String = q.into();
            if question.is_empty() {
                return Err(DomainError::EmptyAssetId);
            }
            let yes = AssetId::new(alloc::format!("{question}{YES_SUFFIX}"))?;
            let no = AssetId::new(alloc::format!("{question}{NO_SUFFIX}"))?;
            push_unique(&mut assets, yes.clone())?;
            push_unique(&mut assets, no.clone())?;
            pairs.push(OutcomePair { question, yes, no });
        }
        if assets.is_empty() {
            return Err(DomainError::EmptyUniverse);
        }
        push_unique(&mut assets, AssetId::cash())?;
        Ok(Self {
            kind: MarketKind::Prediction,
            assets,
            cash: AssetId::cash(),
            pairs,
            risk_free_rate: 0.0,
        })
    }

    pub fn kind(&self) -> MarketKind {
        self.kind
    }

    /// All assets in prompt order; cash is last.
    pub fn assets(&self) -> &[AssetId] {
        &self.assets
    }

    /// Non-cash assets in prompt order.
    pub fn risky_assets(&self) -> impl Iterator<Item = &AssetId> {
        self.assets.iter().filter(|a| !a.is_cash())
    }

    pub fn cash(&self) -> &AssetId {
        &self.cash
    }

    pub fn pairs(&self) -> &[OutcomePair] {
        &self.pairs
    }

    /// Per-step risk-free rate.
    pub fn risk_free_rate(&self) -> f64 {
        self.risk_free_rate
    }

    pub fn contains(&self, asset: &str) -> bool {
        self.assets.iter().any(|a| a.as_str() == asset)
    }

    pub fn asset(&self, symbol: &str) -> Option<&AssetId> {
        self.assets.iter().find(|a| a.as_str() == symbol)
    }

    pub fn pair_of(&self, asset: &AssetId) -> Option<&OutcomePair> {
        self.pairs.iter().find(|p| &p.yes == asset || &p.no == asset)
    }

    /// Tags used to bind news to this universe: tickers for equities, question
    /// text for prediction markets.
    pub fn news_tags(&self) -> Vec<String> {
        match self.kind {
            MarketKind::Stock => self.risky_assets().map(|a| a.as_str().to_string()).collect(),
            MarketKind::Prediction => self.pairs.iter().map(|p| p.question.clone()).collect(),
        }
    }

    fn check_keys<V>(&self, map: &BTreeMap<AssetId, V>) -> Result<(), DomainError> {
        for key in map.keys() {
            if !self.contains(key.as_str()) {
                return Err(DomainError::UnknownAsset(key.clone()));
            }
        }
        for asset in &self.assets {
            if !map.contains_key(asset) {
                return Err(DomainError::MissingAsset(asset.clone()));
            }
        }
        Ok(())
    }
}

fn push_unique(assets: &mut Vec<AssetId>, id: AssetId) -> Result<(), DomainError> {
    if assets.contains(&id) {
        return Err(DomainError::DuplicateAsset(id));
    }
    assets.push(id);
    Ok(())
}

/// One dated observation of a price series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
}

impl PricePoint {
    pub fn new(date: NaiveDate, price: f64) -> Self {
        Self {
            date,
            price,
            volume: None,
        }
    }
}

/// Observable prices of every asset of a universe at one date.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceVector {
    date: NaiveDate,
    zone: TimeZoneTag,
    prices: BTreeMap<AssetId, f64>,
}

impl PriceVector {
    pub fn new(
        spec: &MarketSpec,
        date: NaiveDate,
        prices: BTreeMap<AssetId, f64>,
    ) -> Result<Self, DomainError> {
        spec.check_keys(&prices)?;
        for (asset, &price) in &prices {
            if asset.is_cash() {
                if price != 1.0 {
                    return Err(DomainError::CashPrice(price));
                }
                continue;
            }
            if !price.is_finite() || price <= 0.0 {
                return Err(DomainError::NonPositivePrice {
                    asset: asset.clone(),
                    price,
                });
            }
            if spec.kind() == MarketKind::Prediction && price > 1.0 {
                return Err(DomainError::ProbabilityOutOfRange {
                    asset: asset.clone(),
                    price,
                });
            }
        }
        Ok(Self {
            date,
            zone: spec.kind().zone(),
            prices,
        })
    }

    /// Builds a price vector from risky-asset prices; cash is filled in at 1.0.
    pub fn with_cash<I>(spec: &MarketSpec, date: NaiveDate, risky: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = (AssetId, f64)>,
    {
        let mut prices: BTreeMap<AssetId, f64> = risky.into_iter().collect();
        prices.insert(spec.cash().clone(), 1.0);
        Self::new(spec, date, prices)
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn zone(&self) -> TimeZoneTag {
        self.zone
    }

    pub fn get(&self, asset: &str) -> Option<f64> {
        self.prices.get(asset).copied()
    }

    pub fn as_map(&self) -> &BTreeMap<AssetId, f64> {
        &self.prices
    }
}

/// Units held per asset. Long-only.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Holdings {
    units: BTreeMap<AssetId, f64>,
}

impl Holdings {
    pub fn new(spec: &MarketSpec, units: BTreeMap<AssetId, f64>) -> Result<Self, DomainError> {
        spec.check_keys(&units)?;
        for (asset, &u) in &units {
            if !u.is_finite() || u < 0.0 {
                return Err(DomainError::NegativeHolding {
                    asset: asset.clone(),
                    units: u,
                });
            }
        }
        Ok(Self { units })
    }

    /// All capital in cash.
    pub fn cash_only(spec: &MarketSpec, amount: f64) -> Result<Self, DomainError> {
        let units = spec
            .assets()
            .iter()
            .map(|a| (a.clone(), if a.is_cash() { amount } else { 0.0 }))
            .collect();
        Self::new(spec, units)
    }

    pub fn get(&self, asset: &str) -> Option<f64> {
        self.units.get(asset).copied()
    }

    pub fn as_map(&self) -> &BTreeMap<AssetId, f64> {
        &self.units
    }

    pub(crate) fn from_map_unchecked(units: BTreeMap<AssetId, f64>) -> Self {
        Self { units }
    }
}

/// Target fraction of portfolio value per asset. Only obtainable through
/// [`crate::accounting::validate_allocation`], so every instance is on the
/// simplex and respects the one-side-per-question rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AllocationVector {
    weights: BTreeMap<AssetId, f64>,
}

impl AllocationVector {
    pub(crate) fn from_validated(weights: BTreeMap<AssetId, f64>) -> Self {
        Self { weights }
    }

    pub fn get(&self, asset: &str) -> Option<f64> {
        self.weights.get(asset).copied()
    }

    pub fn as_map(&self) -> &BTreeMap<AssetId, f64> {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// A normalized news article bound to a ticker or a prediction question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsItem {
    pub title: String,
    pub snippet: String,
    pub source: String,
    pub url: String,
    /// UNIX seconds.
    pub published_at: i64,
    pub tag: String,
}

impl NewsItem {
    /// Publication date in UTC.
    pub fn published_date(&self) -> Option<NaiveDate> {
        chrono::DateTime::from_timestamp(self.published_at, 0).map(|dt| dt.date_naive())
    }
}

/// What the agent sees at one step: positions, prices and context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub step: usize,
    pub date: NaiveDate,
    pub positions: Holdings,
    pub prices: PriceVector,
    /// Assets whose current price was carried forward from an earlier date.
    pub stale: Vec<AssetId>,
    /// Short per-asset price history, ascending by date.
    pub history: BTreeMap<AssetId, Vec<PricePoint>>,
    pub news: Vec<NewsItem>,
    pub portfolio_value: f64,
}

/// Signed unit change per asset: positive buys, negative sells, zero holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TradeDelta {
    deltas: BTreeMap<AssetId, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeSide {
    Buy,
    Sell,
    Hold,
}

impl TradeDelta {
    pub(crate) fn from_map(deltas: BTreeMap<AssetId, f64>) -> Self {
        Self { deltas }
    }

    pub fn get(&self, asset: &str) -> Option<f64> {
        self.deltas.get(asset).copied()
    }

    pub fn side(&self, asset: &str) -> Option<TradeSide> {
        self.get(asset).map(|d| {
            if d > 0.0 {
                TradeSide::Buy
            } else if d < 0.0 {
                TradeSide::Sell
            } else {
                TradeSide::Hold
            }
        })
    }

    pub fn is_hold(&self) -> bool {
        self.deltas.values().all(|&d| d == 0.0)
    }

    pub fn as_map(&self) -> &BTreeMap<AssetId, f64> {
        &self.deltas
    }
}
