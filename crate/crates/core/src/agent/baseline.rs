//! Scripted agents: baselines and test doubles.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use super::client::ClientError;
use super::response::render_response;
use super::{Agent, DecisionInput, Reply};
use crate::accounting::{current_weights, validate_allocation, AccountingError};
use crate::domain::{AllocationVector, Holdings, MarketKind, MarketSpec, PriceVector};

/// `1/N` over every asset including cash. For prediction markets only the YES
/// side of each question is used (both sides at once is not a legal action), so
/// the weight is `1/(k+1)` over the YES assets and cash.
pub fn baseline_equal_weight(spec: &MarketSpec) -> AllocationVector {
    let slots: alloc::vec::Vec<&str> = match spec.kind() {
        MarketKind::Stock => spec.assets().iter().map(|a| a.as_str()).collect(),
        MarketKind::Prediction => spec
            .pairs()
            .iter()
            .map(|p| p.yes.as_str())
            .chain(core::iter::once(spec.cash().as_str()))
            .collect(),
    };
    let w = 1.0 / slots.len() as f64;
    let raw: BTreeMap<String, f64> = slots.into_iter().map(|a| (a.to_string(), w)).collect();
    validate_allocation(&raw, spec).expect("equal weights lie on the simplex")
}

/// Current portfolio weights `qᵢ pᵢ / v`.
pub fn baseline_hold(
    spec: &MarketSpec,
    holdings: &Holdings,
    prices: &PriceVector,
) -> Result<AllocationVector, AccountingError> {
    current_weights(spec, holdings, prices)
}

pub fn baseline_all_cash(spec: &MarketSpec) -> AllocationVector {
    let mut raw = BTreeMap::new();
    raw.insert(spec.cash().to_string(), 1.0);
    validate_allocation(&raw, spec).expect("all-cash is valid")
}

/// Replies with the equal-weight allocation in the response wire format.
#[derive(Debug, Clone, Copy, Default)]
pub struct EqualWeightAgent;

impl Agent for EqualWeightAgent {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Reply, ClientError> {
        let alloc = baseline_equal_weight(input.spec);
        Ok(Reply::Text(render_response("equal-weight baseline", input.spec, &alloc)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AllCashAgent;

impl Agent for AllCashAgent {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Reply, ClientError> {
        let alloc = baseline_all_cash(input.spec);
        Ok(Reply::Text(render_response("all-cash baseline", input.spec, &alloc)))
    }
}

/// Never trades.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoldAgent;

impl Agent for HoldAgent {
    fn decide(&mut self, _input: &DecisionInput<'_>) -> Result<Reply, ClientError> {
        Ok(Reply::Hold)
    }
}

type ScriptFn = dyn FnMut(&DecisionInput<'_>) -> Result<Reply, ClientError> + Send;

/// Agent driven by a closure.
pub struct ScriptedAgent {
    script: Box<ScriptFn>,
}

impl ScriptedAgent {
    pub fn new<F>(script: F) -> Self
    where
        F: FnMut(&DecisionInput<'_>) -> Result<Reply, ClientError> + Send + 'static,
    {
        Self {
            script: Box::new(script),
        }
    }

    /// Returns the same text on every call.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_| Ok(Reply::Text(text.clone())))
    }
}

impl Agent for ScriptedAgent {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Reply, ClientError> {
        (self.script)(input)
    }
}

impl core::fmt::Debug for ScriptedAgent {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ScriptedAgent").finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AssetId;

    #[test]
    fn equal_weight_over_sixteen() {
        let spec = MarketSpec::default_stock(0.0);
        let a = baseline_equal_weight(&spec);
        assert!(a.as_map().values().all(|&w| w == 0.0625));
    }

    #[test]
    fn equal_weight_prediction_uses_one_side() {
        let spec = MarketSpec::prediction(["A", "B", "C"]).unwrap();
        let a = baseline_equal_weight(&spec);
        assert_eq!(a.get("A_Yes"), Some(0.25));
        assert_eq!(a.get("A_No"), Some(0.0));
        assert_eq!(a.get("CASH"), Some(0.25));
    }

    #[test]
    fn hold_weights() {
        let spec = MarketSpec::stock(["NVDA"], 0.0).unwrap();
        let mut units = BTreeMap::new();
        units.insert(AssetId::new("NVDA").unwrap(), 6.0);
        units.insert(AssetId::cash(), 15.0);
        let q = Holdings::new(&spec, units).unwrap();
        let p = PriceVector::with_cash(
            &spec,
            "2025-10-24".parse().unwrap(),
            [(AssetId::new("NVDA").unwrap(), 2.5)],
        )
        .unwrap();
        let w = baseline_hold(&spec, &q, &p).unwrap();
        assert_eq!(w.get("NVDA"), Some(0.5));
        assert_eq!(w.get("CASH"), Some(0.5));
    }

    #[test]
    fn all_cash() {
        let spec = MarketSpec::default_stock(0.0);
        let a = baseline_all_cash(&spec);
        assert_eq!(a.get("CASH"), Some(1.0));
        assert_eq!(a.sum(), 1.0);
    }
}
