//! Feature extraction `õ_t = h(o_t)`: per-asset day-over-day changes, short
//! return/volatility summaries, and news grouped by tag.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::domain::{AssetId, NewsItem, Observation};

/// Day-over-day change: absolute and percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Change {
    pub absolute: f64,
    pub percent: f64,
}

impl Change {
    pub fn between(previous: f64, current: f64) -> Self {
        let absolute = current - previous;
        Self {
            absolute,
            percent: absolute / previous * 100.0,
        }
    }
}

/// `"Change: +3.94 (+1.52%)"` or `"Change: N/A"`.
pub fn format_change(change: Option<Change>) -> String {
    match change {
        Some(c) => alloc::format!("Change: {:+.2} ({:+.2}%)", c.absolute, c.percent),
        None => String::from("Change: N/A"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryLine {
    pub date: NaiveDate,
    pub price: f64,
    /// Change against the previous point; `None` for the oldest.
    pub change: Option<Change>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetFeatures {
    pub current_price: f64,
    pub stale: bool,
    /// Ascending by date.
    pub history: Vec<HistoryLine>,
    pub mean_return: Option<f64>,
    pub return_volatility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureBundle {
    pub assets: BTreeMap<AssetId, AssetFeatures>,
    pub news: BTreeMap<String, Vec<NewsItem>>,
}

pub fn extract_features(obs: &Observation) -> FeatureBundle {
    let mut assets = BTreeMap::new();
    for (asset, &current_price) in obs.prices.as_map() {
        if asset.is_cash() {
            continue;
        }
        let points = obs.history.get(asset).map(Vec::as_slice).unwrap_or(&[]);
        let history: Vec<HistoryLine> = points
            .iter()
            .enumerate()
            .map(|(i, p)| HistoryLine {
                date: p.date,
                price: p.price,
                change: i
                    .checked_sub(1)
                    .map(|j| Change::between(points[j].price, p.price)),
            })
            .collect();
        let returns: Vec<f64> = points
            .windows(2)
            .map(|w| (w[1].price - w[0].price) / w[0].price)
            .collect();
        let mean_return =
            (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64);
        let return_volatility = (returns.len() >= 2).then(|| {
            let m = mean_return.unwrap_or(0.0);
            let ss: f64 = returns.iter().map(|r| (r - m) * (r - m)).sum();
            libm::sqrt(ss / (returns.len() - 1) as f64)
        });
        assets.insert(
            asset.clone(),
            AssetFeatures {
                current_price,
                stale: obs.stale.contains(asset),
                history,
                mean_return,
                return_volatility,
            },
        );
    }

    let mut news: BTreeMap<String, Vec<NewsItem>> = BTreeMap::new();
    for item in &obs.news {
        news.entry(item.tag.clone()).or_default().push(item.clone());
    }
    FeatureBundle { assets, news }
}
