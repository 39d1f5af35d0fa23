//! Portfolio arithmetic: valuation, revalue-and-rebalance, trade deltas,
//! allocation validation and prediction-market net exposure.
//!
//! Rebalancing follows the allocation-to-holdings map
//!
//! ```text
//! v⁻ = qᵀ p'      q' = v⁻ · a / p'  (element-wise)      v' = q'ᵀ p' = v⁻
//! ```
//!
//! with no transaction costs or slippage.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::domain::{
    AllocationVector, AssetId, DomainError, Holdings, MarketKind, MarketSpec, PriceVector,
    TradeDelta,
};

/// Maximum `|Σw − 1|` that is repaired by renormalization.
pub const RENORMALIZE_BAND: f64 = 0.02;

/// Sums closer to one than this are left untouched, which keeps validation idempotent.
const EXACT_SUM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AccountingError {
    #[error("asset sets differ: `{0}` is not present on both sides")]
    KeyMismatch(AssetId),
    #[error("portfolio has zero value but the target allocates to `{0}`")]
    ZeroValuePortfolio(AssetId),
    #[error("weight for `{asset}` is negative ({weight})")]
    NegativeWeight { asset: AssetId, weight: f64 },
    #[error("weight for `{asset}` is not a finite number")]
    NonFiniteWeight { asset: AssetId },
    #[error("weights sum to {sum}, outside 1 ± {band}")]
    SumOutOfBand { sum: f64, band: f64 },
    #[error("both sides of question `{question}` have nonzero weight")]
    BothSidesSet { question: String },
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("net exposure is only defined for prediction markets")]
    WrongMarketKind,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Outcome of one revalue-and-rebalance step.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceResult {
    /// Value of the old holdings at the new prices.
    pub pre_trade_value: f64,
    pub new_holdings: Holdings,
    pub trades: TradeDelta,
}

fn same_keys<A, B>(
    left: &BTreeMap<AssetId, A>,
    right: &BTreeMap<AssetId, B>,
) -> Result<(), AccountingError> {
    if let Some(k) = left.keys().find(|k| !right.contains_key(*k)) {
        return Err(AccountingError::KeyMismatch(k.clone()));
    }
    if let Some(k) = right.keys().find(|k| !left.contains_key(*k)) {
        return Err(AccountingError::KeyMismatch(k.clone()));
    }
    Ok(())
}

/// `Σ qᵢ pᵢ`.
pub fn portfolio_value(holdings: &Holdings, prices: &PriceVector) -> Result<f64, AccountingError> {
    same_keys(holdings.as_map(), prices.as_map())?;
    Ok(holdings
        .as_map()
        .iter()
        .map(|(asset, q)| q * prices.as_map()[asset])
        .sum())
}

pub fn rebalance(
    holdings: &Holdings,
    new_prices: &PriceVector,
    target: &AllocationVector,
) -> Result<RebalanceResult, AccountingError> {
    same_keys(target.as_map(), new_prices.as_map())?;
    let pre_trade_value = portfolio_value(holdings, new_prices)?;

    if pre_trade_value <= 0.0 {
        if let Some((asset, _)) = target
            .as_map()
            .iter()
            .find(|(a, &w)| !a.is_cash() && w > 0.0)
        {
            return Err(AccountingError::ZeroValuePortfolio(asset.clone()));
        }
    }

    let units: BTreeMap<AssetId, f64> = target
        .as_map()
        .iter()
        .map(|(asset, &w)| {
            let p = new_prices.as_map()[asset];
            (asset.clone(), pre_trade_value * w / p)
        })
        .collect();
    let new_holdings = Holdings::from_map_unchecked(units);
    let trades = trade_delta(holdings, &new_holdings)?;
    Ok(RebalanceResult {
        pre_trade_value,
        new_holdings,
        trades,
    })
}

/// `new − old`, componentwise.
pub fn trade_delta(old: &Holdings, new: &Holdings) -> Result<TradeDelta, AccountingError> {
    same_keys(old.as_map(), new.as_map())?;
    Ok(TradeDelta::from_map(
        new.as_map()
            .iter()
            .map(|(asset, q)| (asset.clone(), q - old.as_map()[asset]))
            .collect(),
    ))
}

/// Validates a raw model allocation with the default renormalization band.
pub fn validate_allocation(
    raw: &BTreeMap<String, f64>,
    spec: &MarketSpec,
) -> Result<AllocationVector, AccountingError> {
    validate_allocation_with(raw, spec, RENORMALIZE_BAND)
}

/// Validates a raw allocation: unknown keys and negative weights are errors,
/// missing assets count as zero, at most one side per prediction question may be
/// nonzero, and sums within `1 ± band` are rescaled to exactly one.
pub fn validate_allocation_with(
    raw: &BTreeMap<String, f64>,
    spec: &MarketSpec,
    band: f64,
) -> Result<AllocationVector, AccountingError> {
    for key in raw.keys() {
        if !spec.contains(key) {
            return Err(AccountingError::UnknownAsset(key.clone()));
        }
    }

    let mut weights = BTreeMap::new();
    for asset in spec.assets() {
        let w = raw.get(asset.as_str()).copied().unwrap_or(0.0);
        if !w.is_finite() {
            return Err(AccountingError::NonFiniteWeight {
                asset: asset.clone(),
            });
        }
        if w < 0.0 {
            return Err(AccountingError::NegativeWeight {
                asset: asset.clone(),
                weight: w,
            });
        }
        // normalizes -0.0
        weights.insert(asset.clone(), w + 0.0);
    }

    for pair in spec.pairs() {
        if weights[&pair.yes] > 0.0 && weights[&pair.no] > 0.0 {
            return Err(AccountingError::BothSidesSet {
                question: pair.question.clone(),
            });
        }
    }

    let sum: f64 = weights.values().sum();
    // inclusive band, with slack for representation error at the edges
    if !((sum - 1.0).abs() <= band + EXACT_SUM_EPS) {
        return Err(AccountingError::SumOutOfBand { sum, band });
    }
    if (sum - 1.0).abs() > EXACT_SUM_EPS {
        for w in weights.values_mut() {
            *w /= sum;
        }
    }
    Ok(AllocationVector::from_validated(weights))
}

/// Net exposure per question: `a_YES − a_NO`.
pub fn net_exposure(
    alloc: &AllocationVector,
    spec: &MarketSpec,
) -> Result<BTreeMap<String, f64>, AccountingError> {
    if spec.kind() != MarketKind::Prediction {
        return Err(AccountingError::WrongMarketKind);
    }
    spec.pairs()
        .iter()
        .map(|pair| {
            let yes = alloc
                .get(pair.yes.as_str())
                .ok_or_else(|| AccountingError::KeyMismatch(pair.yes.clone()))?;
            let no = alloc
                .get(pair.no.as_str())
                .ok_or_else(|| AccountingError::KeyMismatch(pair.no.clone()))?;
            Ok((pair.question.clone(), yes - no))
        })
        .collect()
}

/// Current weights `qᵢ pᵢ / v` of a portfolio; all-cash when the value is zero.
pub fn current_weights(
    spec: &MarketSpec,
    holdings: &Holdings,
    prices: &PriceVector,
) -> Result<AllocationVector, AccountingError> {
    let value = portfolio_value(holdings, prices)?;
    let weights = if value > 0.0 {
        holdings
            .as_map()
            .iter()
            .map(|(a, q)| (a.clone(), q * prices.as_map()[a] / value))
            .collect()
    } else {
        spec.assets()
            .iter()
            .map(|a| (a.clone(), if a.is_cash() { 1.0 } else { 0.0 }))
            .collect()
    };
    Ok(AllocationVector::from_validated(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use chrono::NaiveDate;

    fn id(s: &str) -> AssetId {
        AssetId::new(s).unwrap()
    }

    fn d() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 10, 24).unwrap()
    }

    fn nvda_spec() -> MarketSpec {
        MarketSpec::stock(["NVDA"], 0.0).unwrap()
    }

    fn holdings(spec: &MarketSpec, pairs: &[(&str, f64)]) -> Holdings {
        let mut units: BTreeMap<AssetId, f64> =
            spec.assets().iter().map(|a| (a.clone(), 0.0)).collect();
        for (a, u) in pairs {
            units.insert(id(a), *u);
        }
        Holdings::new(spec, units).unwrap()
    }

    fn prices(spec: &MarketSpec, pairs: &[(&str, f64)]) -> PriceVector {
        PriceVector::with_cash(spec, d(), pairs.iter().map(|(a, p)| (id(a), *p))).unwrap()
    }

    fn raw(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(a, w)| (a.to_string(), *w)).collect()
    }

    #[test]
    fn value_examples() {
        let cash = MarketSpec::stock(["NVDA"], 0.0).unwrap();
        let q = holdings(&cash, &[("CASH", 100.0)]);
        assert_eq!(portfolio_value(&q, &prices(&cash, &[("NVDA", 3.0)])).unwrap(), 100.0);

        let q = holdings(&cash, &[("NVDA", 10.0), ("CASH", 5.0)]);
        assert_eq!(portfolio_value(&q, &prices(&cash, &[("NVDA", 2.0)])).unwrap(), 25.0);

        let q = holdings(&cash, &[]);
        assert_eq!(portfolio_value(&q, &prices(&cash, &[("NVDA", 2.0)])).unwrap(), 0.0);
    }

    #[test]
    fn value_rejects_mismatched_universe() {
        let a = nvda_spec();
        let b = MarketSpec::stock(["AAPL"], 0.0).unwrap();
        let q = holdings(&a, &[("CASH", 1.0)]);
        let p = prices(&b, &[("AAPL", 1.0)]);
        assert!(matches!(
            portfolio_value(&q, &p),
            Err(AccountingError::KeyMismatch(_))
        ));
    }

    #[test]
    fn rebalance_examples() {
        let spec = nvda_spec();
        // all-cash fixed point
        let q = holdings(&spec, &[("CASH", 10.0)]);
        let a = validate_allocation(&raw(&[("CASH", 1.0)]), &spec).unwrap();
        let r = rebalance(&q, &prices(&spec, &[("NVDA", 1.0)]), &a).unwrap();
        assert_eq!(r.pre_trade_value, 10.0);
        assert_eq!(r.new_holdings, q);
        assert!(r.trades.is_hold());

        // half/half at 2.5: v⁻ = 10*2.5 + 5 = 30, NVDA = 15/2.5 = 6, CASH = 15
        let q = holdings(&spec, &[("NVDA", 10.0), ("CASH", 5.0)]);
        let p = prices(&spec, &[("NVDA", 2.5)]);
        let a = validate_allocation(&raw(&[("NVDA", 0.5), ("CASH", 0.5)]), &spec).unwrap();
        let r = rebalance(&q, &p, &a).unwrap();
        assert_eq!(r.pre_trade_value, 30.0);
        assert_eq!(r.new_holdings.get("NVDA"), Some(6.0));
        assert_eq!(r.new_holdings.get("CASH"), Some(15.0));
        assert_eq!(r.trades.get("NVDA"), Some(-4.0));
        assert_eq!(r.trades.get("CASH"), Some(10.0));

        // full de-risk
        let a = validate_allocation(&raw(&[("CASH", 1.0)]), &spec).unwrap();
        let r = rebalance(&q, &p, &a).unwrap();
        assert_eq!(r.new_holdings.get("NVDA"), Some(0.0));
        assert_eq!(r.new_holdings.get("CASH"), Some(30.0));
    }

    #[test]
    fn rebalance_with_no_capital() {
        let spec = nvda_spec();
        let q = holdings(&spec, &[]);
        let p = prices(&spec, &[("NVDA", 2.0)]);
        let risky = validate_allocation(&raw(&[("NVDA", 1.0)]), &spec).unwrap();
        assert_eq!(
            rebalance(&q, &p, &risky),
            Err(AccountingError::ZeroValuePortfolio(id("NVDA")))
        );
        let cash = validate_allocation(&raw(&[("CASH", 1.0)]), &spec).unwrap();
        let r = rebalance(&q, &p, &cash).unwrap();
        assert_eq!(r.new_holdings.get("CASH"), Some(0.0));
    }

    #[test]
    fn trade_delta_examples() {
        let spec = nvda_spec();
        let a = holdings(&spec, &[("NVDA", 10.0), ("CASH", 5.0)]);
        assert!(trade_delta(&a, &a).unwrap().is_hold());
        let b = holdings(&spec, &[("NVDA", 6.0), ("CASH", 15.0)]);
        let delta = trade_delta(&a, &b).unwrap();
        assert_eq!(delta.get("NVDA"), Some(-4.0));
        assert_eq!(delta.side("NVDA"), Some(crate::domain::TradeSide::Sell));
        assert_eq!(delta.get("CASH"), Some(10.0));
        assert_eq!(delta.side("CASH"), Some(crate::domain::TradeSide::Buy));
    }

    #[test]
    fn validation_examples() {
        let spec = MarketSpec::stock(["AAPL"], 0.0).unwrap();
        let a = validate_allocation(&raw(&[("CASH", 1.0)]), &spec).unwrap();
        assert_eq!(a.get("CASH"), Some(1.0));
        assert_eq!(a.get("AAPL"), Some(0.0));

        // oracle: w / Σw with Σw = 0.998
        let a = validate_allocation(&raw(&[("AAPL", 0.5), ("CASH", 0.498)]), &spec).unwrap();
        assert!((a.get("AAPL").unwrap() - 0.5 / 0.998).abs() < 1e-15);
        assert!((a.get("CASH").unwrap() - 0.498 / 0.998).abs() < 1e-15);
        assert!((a.sum() - 1.0).abs() < 1e-12);

        let pm = MarketSpec::prediction(["Q"]).unwrap();
        assert_eq!(
            validate_allocation(&raw(&[("Q_Yes", 0.3), ("Q_No", 0.2), ("CASH", 0.5)]), &pm),
            Err(AccountingError::BothSidesSet {
                question: "Q".to_string()
            })
        );
    }

    #[test]
    fn validation_errors() {
        let spec = MarketSpec::stock(["AAPL"], 0.0).unwrap();
        assert!(matches!(
            validate_allocation(&raw(&[("AAPL", -0.1), ("CASH", 1.1)]), &spec),
            Err(AccountingError::NegativeWeight { .. })
        ));
        assert!(matches!(
            validate_allocation(&raw(&[("AAPL", 0.5), ("CASH", 0.45)]), &spec),
            Err(AccountingError::SumOutOfBand { .. })
        ));
        assert_eq!(
            validate_allocation(&raw(&[("MSFT", 0.5), ("CASH", 0.5)]), &spec),
            Err(AccountingError::UnknownAsset("MSFT".to_string()))
        );
        assert!(matches!(
            validate_allocation(&raw(&[("AAPL", f64::NAN), ("CASH", 1.0)]), &spec),
            Err(AccountingError::NonFiniteWeight { .. })
        ));
        assert!(matches!(
            validate_allocation(&raw(&[]), &spec),
            Err(AccountingError::SumOutOfBand { .. })
        ));
    }

    #[test]
    fn band_edges() {
        let spec = MarketSpec::stock(["AAPL"], 0.0).unwrap();
        assert!(validate_allocation(&raw(&[("AAPL", 0.5), ("CASH", 0.52)]), &spec).is_ok());
        assert!(validate_allocation(&raw(&[("AAPL", 0.5), ("CASH", 0.48)]), &spec).is_ok());
        assert!(validate_allocation(&raw(&[("AAPL", 0.5), ("CASH", 0.53)]), &spec).is_err());
        assert!(validate_allocation_with(&raw(&[("AAPL", 0.5), ("CASH", 0.53)]), &spec, 0.05).is_ok());
    }

    #[test]
    fn net_exposure_examples() {
        let pm = MarketSpec::prediction(["A", "B", "C"]).unwrap();
        let a = validate_allocation(
            &raw(&[("A_Yes", 0.3), ("B_No", 0.25), ("CASH", 0.45)]),
            &pm,
        )
        .unwrap();
        let e = net_exposure(&a, &pm).unwrap();
        assert_eq!(e["A"], 0.3);
        assert_eq!(e["B"], -0.25);
        assert_eq!(e["C"], 0.0);

        let stock = nvda_spec();
        let a = validate_allocation(&raw(&[("CASH", 1.0)]), &stock).unwrap();
        assert_eq!(net_exposure(&a, &stock), Err(AccountingError::WrongMarketKind));
    }

    #[test]
    fn current_weights_of_mixed_book() {
        let spec = nvda_spec();
        let q = holdings(&spec, &[("NVDA", 6.0), ("CASH", 15.0)]);
        let p = prices(&spec, &[("NVDA", 2.5)]);
        let w = current_weights(&spec, &q, &p).unwrap();
        assert_eq!(w.get("NVDA"), Some(0.5));
        assert_eq!(w.get("CASH"), Some(0.5));
    }
}
