//! Parsing of the allocation wire schema:
//!
//! ```json
//! {"reasoning": "<string>", "allocations": {"<asset>": <number>, ...}}
//! ```
//!
//! Extraction is lenient (the object may be wrapped in prose or code fences);
//! validation is strict.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt::Write;

use serde_json::Value;

use crate::accounting::{validate_allocation_with, AccountingError, RENORMALIZE_BAND};
use crate::domain::{AllocationVector, MarketSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("no JSON object found in response")]
    NoObjectFound,
    #[error("response object does not match the schema: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Allocation(#[from] AccountingError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    /// Reasoning text exactly as returned.
    pub reasoning: String,
    pub allocation: AllocationVector,
}

/// Finds the response object: the outermost `{ … }` span when it parses,
/// otherwise the first object starting at any `{` that parses.
fn extract_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    let first = raw.find('{')?;
    let last = raw.rfind('}')?;
    if last > first {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&raw[first..=last]) {
            return Some(map);
        }
    }
    let mut fallback = None;
    for (idx, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[idx..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            if map.contains_key("allocations") {
                return Some(map);
            }
            fallback.get_or_insert(map);
        }
    }
    fallback
}

pub fn parse_allocation_response(raw: &str, spec: &MarketSpec) -> Result<ParsedResponse, ProtocolError> {
    parse_allocation_response_with(raw, spec, RENORMALIZE_BAND)
}

pub fn parse_allocation_response_with(
    raw: &str,
    spec: &MarketSpec,
    band: f64,
) -> Result<ParsedResponse, ProtocolError> {
    let object = extract_object(raw).ok_or(ProtocolError::NoObjectFound)?;
    let reasoning = match object.get("reasoning") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(ProtocolError::SchemaMismatch("`reasoning` must be a string".into())),
        None => return Err(ProtocolError::SchemaMismatch("missing `reasoning`".into())),
    };
    let allocations = match object.get("allocations") {
        Some(Value::Object(map)) => map,
        Some(_) => {
            return Err(ProtocolError::SchemaMismatch(
                "`allocations` must be an object".into(),
            ))
        }
        None => return Err(ProtocolError::SchemaMismatch("missing `allocations`".into())),
    };
    let mut weights = BTreeMap::new();
    for (asset, value) in allocations {
        let w = value.as_f64().ok_or_else(|| {
            ProtocolError::SchemaMismatch(alloc::format!("weight for `{asset}` is not a number"))
        })?;
        weights.insert(asset.clone(), w);
    }
    let allocation = validate_allocation_with(&weights, spec, band)?;
    Ok(ParsedResponse {
        reasoning,
        allocation,
    })
}

/// Renders a response in the wire schema, assets in universe order.
pub fn render_response(reasoning: &str, spec: &MarketSpec, allocation: &AllocationVector) -> String {
    let mut out = String::from("{\"reasoning\": ");
    out.push_str(&serde_json::to_string(reasoning).unwrap_or_else(|_| "\"\"".to_string()));
    out.push_str(", \"allocations\": {");
    let mut first = true;
    for asset in spec.assets() {
        let Some(w) = allocation.get(asset.as_str()) else {
            continue;
        };
        if !first {
            out.push_str(", ");
        }
        first = false;
        let key = serde_json::to_string(asset.as_str()).unwrap_or_default();
        let _ = write!(out, "{key}: {w:?}");
    }
    out.push_str("}}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_SAMPLE: &str = r#"{
 "reasoning": "Brief explanation about why this allocation improves return rate",
 "allocations": {
   "AAPL": 0.25,
   "MSFT": 0.20,
   "NVDA": 0.15,
   "CASH": 0.40
 }
}"#;

    #[test]
    fn parses_schema_sample() {
        let spec = MarketSpec::default_stock(0.0);
        let parsed = parse_allocation_response(TABLE_SAMPLE, &spec).unwrap();
        assert_eq!(parsed.allocation.get("AAPL"), Some(0.25));
        assert_eq!(parsed.allocation.get("MSFT"), Some(0.20));
        assert_eq!(parsed.allocation.get("NVDA"), Some(0.15));
        assert_eq!(parsed.allocation.get("CASH"), Some(0.40));
        assert_eq!(parsed.allocation.get("TSLA"), Some(0.0));
    }

    #[test]
    fn prose_without_braces() {
        let spec = MarketSpec::default_stock(0.0);
        assert_eq!(
            parse_allocation_response("I would buy more Apple.", &spec),
            Err(ProtocolError::NoObjectFound)
        );
    }

    #[test]
    fn slightly_off_sum_is_renormalized() {
        let spec = MarketSpec::stock(["AAPL"], 0.0).unwrap();
        let raw = r#"{"reasoning": "x", "allocations": {"AAPL": 0.504, "CASH": 0.5}}"#;
        let parsed = parse_allocation_response(raw, &spec).unwrap();
        assert!((parsed.allocation.get("AAPL").unwrap() - 0.504 / 1.004).abs() < 1e-15);
        assert!((parsed.allocation.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prose_with_stray_braces_before_object() {
        let spec = MarketSpec::stock(["AAPL"], 0.0).unwrap();
        let raw = "Using {my model}: {\"reasoning\": \"r\", \"allocations\": {\"CASH\": 1.0}} done";
        let parsed = parse_allocation_response(raw, &spec).unwrap();
        assert_eq!(parsed.allocation.get("CASH"), Some(1.0));
        assert_eq!(parsed.reasoning, "r");
    }

    #[test]
    fn render_then_parse() {
        let spec = MarketSpec::prediction(["Q?"]).unwrap();
        let parsed =
            parse_allocation_response(r#"{"reasoning":"a \"b\"","allocations":{"Q?_No":0.3,"CASH":0.7}}"#, &spec)
                .unwrap();
        let text = render_response(&parsed.reasoning, &spec, &parsed.allocation);
        let again = parse_allocation_response(&text, &spec).unwrap();
        assert_eq!(again, parsed);
    }
}
