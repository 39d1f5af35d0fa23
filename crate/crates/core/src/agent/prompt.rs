//! Prompt rendering. The context block mirrors the observation (market
//! analysis, recent news, account info); the decision prompt wraps it with a
//! dated header, the task instructions, the asset list and the response schema.
//!
//! Both builders are pure: identical inputs give byte-identical text.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use chrono::NaiveDate;

use super::features::{extract_features, format_change, AssetFeatures, FeatureBundle};
use super::memory::MemoryWindow;
use crate::domain::{AllocationVector, MarketKind, MarketSpec, NewsItem, Observation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptOptions {
    /// Most recent news items shown per ticker or question.
    pub news_per_tag: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self { news_per_tag: 3 }
    }
}

/// Context block with default options.
pub fn build_context_prompt(spec: &MarketSpec, obs: &Observation, memory: &MemoryWindow) -> String {
    build_context_prompt_with(spec, obs, memory, &PromptOptions::default())
}

pub fn build_context_prompt_with(
    spec: &MarketSpec,
    obs: &Observation,
    memory: &MemoryWindow,
    options: &PromptOptions,
) -> String {
    let features = extract_features(obs);
    let mut out = String::new();
    out.push_str("MARKET ANALYSIS:\n");
    match spec.kind() {
        MarketKind::Stock => write_stock_analysis(&mut out, spec, &features),
        MarketKind::Prediction => write_prediction_analysis(&mut out, spec, &features),
    }
    out.push_str("\nRECENT NEWS:\n");
    write_news(&mut out, spec, &features, options);
    out.push_str("\nACCOUNT INFO:\n");
    write_account(&mut out, spec, memory);
    out
}

fn write_stock_analysis(out: &mut String, spec: &MarketSpec, features: &FeatureBundle) {
    for asset in spec.risky_assets() {
        let Some(f) = features.assets.get(asset) else {
            continue;
        };
        let _ = writeln!(out, "{asset}: Current price is ${:.2}", f.current_price);
        for line in f.history.iter().rev() {
            let _ = writeln!(
                out,
                "  - {}: close price ${:.2} ({})",
                line.date,
                line.price,
                format_change(line.change)
            );
        }
    }
}

fn write_outcome_history(out: &mut String, side: &str, f: Option<&AssetFeatures>) {
    let _ = writeln!(out, "  - Betting {side} History:");
    for line in f.map(|f| f.history.as_slice()).unwrap_or(&[]).iter().rev() {
        let _ = writeln!(
            out,
            "  - {}: {:.4} ({})",
            line.date,
            line.price,
            format_change(line.change)
        );
    }
}

fn write_prediction_analysis(out: &mut String, spec: &MarketSpec, features: &FeatureBundle) {
    for pair in spec.pairs() {
        let yes = features.assets.get(&pair.yes);
        let no = features.assets.get(&pair.no);
        let _ = writeln!(out, "Question: {}", pair.question);
        if let Some(f) = yes {
            let _ = writeln!(out, "  - Betting YES current price: {:.3}", f.current_price);
        }
        if let Some(f) = no {
            let _ = writeln!(out, "  - Betting NO current price: {:.3}", f.current_price);
        }
        write_outcome_history(out, "YES", yes);
        write_outcome_history(out, "NO", no);
    }
}

fn news_date(item: &NewsItem) -> String {
    item.published_date()
        .map(|d| d.to_string())
        .unwrap_or_default()
}

fn write_news(out: &mut String, spec: &MarketSpec, features: &FeatureBundle, options: &PromptOptions) {
    for tag in spec.news_tags() {
        let Some(items) = features.news.get(&tag) else {
            continue;
        };
        if items.is_empty() || options.news_per_tag == 0 {
            continue;
        }
        let _ = writeln!(out, "• {tag}:");
        for item in items.iter().take(options.news_per_tag) {
            let _ = writeln!(out, "  - {} ({})", item.title, news_date(item));
            if !item.snippet.is_empty() {
                let _ = writeln!(out, "    {}...", item.snippet);
            }
        }
    }
}

/// Python-dict style rendering of the nonzero weights, in universe order:
/// `{'AAPL': '0.08', 'CASH': '0.06'}`.
pub fn format_allocation(spec: &MarketSpec, allocation: &AllocationVector) -> String {
    let parts: Vec<String> = spec
        .assets()
        .iter()
        .filter_map(|a| {
            let w = allocation.get(a.as_str())?;
            (w > 0.0).then(|| alloc::format!("'{a}': '{w:.2}'"))
        })
        .collect();
    alloc::format!("{{{}}}", parts.join(", "))
}

fn write_account(out: &mut String, spec: &MarketSpec, memory: &MemoryWindow) {
    let header_indent = match spec.kind() {
        MarketKind::Stock => "  ",
        MarketKind::Prediction => "",
    };
    let _ = writeln!(
        out,
        "{header_indent}Recent Historical Allocations under this account:"
    );
    for entry in memory.entries() {
        let _ = writeln!(
            out,
            "    - Asset Allocation at {}: {} (Accumulated return rate: {:.1}%)",
            entry.date,
            format_allocation(spec, &entry.allocation),
            entry.cumulative_return * 100.0
        );
    }
}

const STOCK_INSTRUCTIONS: &str = "\
PORTFOLIO MANAGEMENT OBJECTIVE:
- Improve total returns by selecting allocations with higher expected return per unit of risk.
- Aim to outperform a reasonable baseline (e.g., equal-weight of AVAILABLE ASSETS) over the next 1–3 months.
- Use CASH tactically for capital protection in unfavorable markets.
EVALUATION CRITERIA:
- Prefer allocations that increase expected excess return and improve risk-adjusted return.
- Maintain sector and factor diversification.
- Be mindful of turnover and liquidity.
PORTFOLIO PRINCIPLES:
- Diversify across sectors and market caps.
- Consider market momentum and fundamentals.
- Balance growth and value opportunities.
- Maintain appropriate position sizes.
- Total allocation must equal 1.0.
- CASH is a valid asset.
";

const STOCK_RULES: &str = "\
RULES:
1. Return ONLY the JSON object.
2. Allocations must sum to 1.0.
3. CASH allocation should reflect market conditions.
4. Use double quotes for strings.
5. No trailing commas.
6. No extra text outside the JSON.
Your objective is to maximize return while considering previous allocations and performance history.
";

const PREDICTION_INSTRUCTIONS: &str = "\
PORTFOLIO MANAGEMENT OBJECTIVE:
- For each market, YES and NO are two assets. Allocate to only one at a time. CASH is also valid.
- YES and NO prices represent public-implied probabilities.
DECISION LOGIC:
- Derive market probability p_mkt from price.
- Go LONG {question}_YES if p > p_mkt + costs.
- Go LONG {question}_NO if p < p_mkt - costs.

PORTFOLIO PRINCIPLES:
- Diversify across markets.
- No simultaneous YES and NO allocations.
";

const PREDICTION_RULES: &str = "\
RULES:
1. Return ONLY the JSON object.
2. Allocations must sum to 1.0.
3. Only one side (YES or NO) per question may be non-zero.
4. Use double quotes; no trailing commas.
Your objective is to maximize portfolio return using past allocations and performance history.
";

fn quoted(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_else(|_| alloc::format!("\"{s}\""))
}

/// Example entries for the schema block, drawn from the universe itself.
fn example_allocations(spec: &MarketSpec) -> Vec<(String, &'static str)> {
    let mut rows = Vec::new();
    match spec.kind() {
        MarketKind::Stock => {
            for (asset, w) in spec.risky_assets().zip(["0.25", "0.20", "0.15"]) {
                rows.push((asset.to_string(), w));
            }
            let cash = match rows.len() {
                3 => "0.40",
                2 => "0.55",
                _ => "0.75",
            };
            rows.push((spec.cash().to_string(), cash));
        }
        MarketKind::Prediction => {
            let pairs = spec.pairs();
            if let Some(p) = pairs.first() {
                rows.push((p.yes.to_string(), "0.25"));
            }
            if let Some(p) = pairs.get(1) {
                rows.push((p.no.to_string(), "0.15"));
            }
            let cash = if rows.len() == 2 { "0.60" } else { "0.75" };
            rows.push((spec.cash().to_string(), cash));
        }
    }
    rows
}

fn write_schema(out: &mut String, spec: &MarketSpec) {
    let reasoning = match spec.kind() {
        MarketKind::Stock => "Brief explanation about why this allocation improves return rate",
        MarketKind::Prediction => "Brief explanation of the allocation",
    };
    out.push_str("CRITICAL: Return ONLY valid JSON. No extra text.\n");
    out.push_str("REQUIRED JSON FORMAT:\n{\n");
    let _ = writeln!(out, " \"reasoning\": \"{reasoning}\",");
    out.push_str(" \"allocations\": {\n");
    let rows = example_allocations(spec);
    for (i, (asset, w)) in rows.iter().enumerate() {
        let comma = if i + 1 < rows.len() { "," } else { "" };
        let _ = writeln!(out, "   {}: {w}{comma}", quoted(asset));
    }
    out.push_str(" }\n}\n");
}

/// Full model input for one decision.
pub fn build_decision_prompt(context: &str, spec: &MarketSpec, date: NaiveDate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Today is {date} ({}).", spec.kind().zone().label());
    match spec.kind() {
        MarketKind::Stock => out.push_str(
            "You are a professional portfolio manager. Analyze the market data and generate a complete portfolio allocation.\n",
        ),
        MarketKind::Prediction => out.push_str(
            "You are a professional prediction-market portfolio manager. Analyze the market data and generate a complete portfolio allocation.\n",
        ),
    }
    out.push_str(context);
    if !context.ends_with('\n') {
        out.push('\n');
    }
    let assets: Vec<&str> = spec.assets().iter().map(|a| a.as_str()).collect();
    match spec.kind() {
        MarketKind::Stock => {
            out.push_str(STOCK_INSTRUCTIONS);
            let _ = writeln!(out, "\nAVAILABLE ASSETS: {}\n", assets.join(", "));
            write_schema(&mut out, spec);
            out.push_str(STOCK_RULES);
        }
        MarketKind::Prediction => {
            out.push('\n');
            out.push_str(PREDICTION_INSTRUCTIONS);
            let _ = writeln!(out, "\nAVAILABLE ASSETS: {}\n", assets.join(", "));
            write_schema(&mut out, spec);
            out.push('\n');
            out.push_str(PREDICTION_RULES);
        }
    }
    out
}
