//! Session state machine.
//!
//! An episode runs over trading dates `d_0 < d_1 < … < d_n`. The session starts
//! all in cash at `d_0`. At each decision date `d_i` the agent sees an
//! observation built from data up to `d_i`; the chosen allocation executes at
//! the prices of `d_{i+1}`. `n` dates after the first give `n` records and a
//! value series `v_0 … v_n`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accounting::{
    current_weights, portfolio_value, rebalance, trade_delta, AccountingError, RENORMALIZE_BAND,
};
use crate::agent::memory::{MemoryEntry, MemoryWindow, DEFAULT_MEMORY_HORIZON};
use crate::agent::prompt::{build_context_prompt_with, build_decision_prompt, PromptOptions};
use crate::agent::response::parse_allocation_response_with;
use crate::agent::{Agent, DecisionInput, Reply};
use crate::domain::{
    AllocationVector, AssetId, DomainError, Holdings, MarketKind, MarketSpec, NewsItem,
    Observation, PricePoint, PriceVector,
};
use crate::ingest::{lookback_window, news_window, rank_news, DateWindow, DEFAULT_LOOKBACK_DAYS};

/// Sum tolerance accepted when restoring a logged allocation.
const RESTORE_SUM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeedError {
    #[error("data source unavailable: {0}")]
    Unavailable(String),
}

/// Read access to recorded or live market data.
pub trait MarketFeed {
    /// Latest price of `asset` dated on or before `date`.
    fn price_on_or_before(
        &self,
        asset: &AssetId,
        date: NaiveDate,
    ) -> Result<Option<PricePoint>, FeedError>;

    /// Prices within `window`, ascending by date.
    fn price_history(&self, asset: &AssetId, window: DateWindow)
        -> Result<Vec<PricePoint>, FeedError>;

    /// News bound to `tag` published within `window` (UTC dates).
    fn news(&self, tag: &str, window: DateWindow) -> Result<Vec<NewsItem>, FeedError>;
}

impl<F: MarketFeed + ?Sized> MarketFeed for &F {
    fn price_on_or_before(
        &self,
        asset: &AssetId,
        date: NaiveDate,
    ) -> Result<Option<PricePoint>, FeedError> {
        (**self).price_on_or_before(asset, date)
    }

    fn price_history(
        &self,
        asset: &AssetId,
        window: DateWindow,
    ) -> Result<Vec<PricePoint>, FeedError> {
        (**self).price_history(asset, window)
    }

    fn news(&self, tag: &str, window: DateWindow) -> Result<Vec<NewsItem>, FeedError> {
        (**self).news(tag, window)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Accounting(#[from] AccountingError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("no price for `{asset}` on or before {date}")]
    NoPriceEverSeen { asset: AssetId, date: NaiveDate },
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error("session is no longer running")]
    SessionEnded,
    #[error("an episode needs at least one date")]
    EmptyDates,
    #[error("dates must be strictly increasing: {next} follows {prev}")]
    DatesNotIncreasing { prev: NaiveDate, next: NaiveDate },
    #[error("cannot restore session: {0}")]
    Restore(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub initial_capital: f64,
    pub memory_horizon: usize,
    /// Extra attempts after an unusable response.
    pub max_response_retries: u32,
    /// Decide every `rebalance_interval` steps; hold in between.
    pub rebalance_interval: usize,
    pub lookback_days: u64,
    pub renormalize_band: f64,
    pub prompt: PromptOptions,
}

impl SessionConfig {
    /// Defaults with the conventional starting capital for the market kind.
    pub fn for_market(kind: MarketKind) -> Self {
        let initial_capital = match kind {
            MarketKind::Stock => 1000.0,
            MarketKind::Prediction => 500.0,
        };
        Self {
            initial_capital,
            ..Self::default()
        }
    }
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            initial_capital: 1000.0,
            memory_horizon: DEFAULT_MEMORY_HORIZON,
            max_response_retries: 2,
            rebalance_interval: 1,
            lookback_days: DEFAULT_LOOKBACK_DAYS,
            renormalize_band: RENORMALIZE_BAND,
            prompt: PromptOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Running,
    Ended,
    Halted,
}

/// Compact record of what the agent was shown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationDigest {
    pub prices: BTreeMap<AssetId, f64>,
    pub stale: Vec<AssetId>,
    pub news_count: usize,
    pub holdings: BTreeMap<AssetId, f64>,
}

impl ObservationDigest {
    pub fn of(obs: &Observation) -> Self {
        Self {
            prices: obs.prices.as_map().clone(),
            stale: obs.stale.clone(),
            news_count: obs.news.len(),
            holdings: obs.positions.as_map().clone(),
        }
    }
}

/// What to do at the next prices.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Rebalance(AllocationVector),
    /// Keep holdings unchanged.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    /// A response was parsed and its allocation executed.
    Parsed,
    /// The agent asked to hold.
    Hold,
    /// Not a decision step under the rebalance interval.
    ScheduledHold,
    /// Every attempt failed; the previous allocation was re-applied.
    Fallback,
}

/// One line of the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub step: usize,
    pub decision_date: NaiveDate,
    /// Execution date.
    pub date: NaiveDate,
    pub observation: ObservationDigest,
    pub prompt_sha256: Option<String>,
    pub responses: Vec<String>,
    pub errors: Vec<String>,
    pub outcome: StepOutcome,
    pub reasoning: Option<String>,
    /// Target weights executed (realized weights for holds).
    pub allocation: BTreeMap<AssetId, f64>,
    pub trades: BTreeMap<AssetId, f64>,
    pub holdings: BTreeMap<AssetId, f64>,
    pub prices: BTreeMap<AssetId, f64>,
    pub stale: Vec<AssetId>,
    pub pre_trade_value: f64,
    pub value: f64,
    pub step_return: f64,
    pub cumulative_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    spec: MarketSpec,
    step: usize,
    date: NaiveDate,
    holdings: Holdings,
    value_series: Vec<f64>,
    allocation_history: Vec<MemoryEntry>,
    status: SessionStatus,
}

impl SessionState {
    pub fn new(
        spec: MarketSpec,
        start: NaiveDate,
        initial_capital: f64,
    ) -> Result<Self, EnvError> {
        let holdings = Holdings::cash_only(&spec, initial_capital)?;
        Ok(Self {
            spec,
            step: 0,
            date: start,
            holdings,
            value_series: alloc::vec![initial_capital],
            allocation_history: Vec::new(),
            status: SessionStatus::Running,
        })
    }

    pub fn spec(&self) -> &MarketSpec {
        &self.spec
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Current decision date.
    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn holdings(&self) -> &Holdings {
        &self.holdings
    }

    pub fn value_series(&self) -> &[f64] {
        &self.value_series
    }

    pub fn allocation_history(&self) -> &[MemoryEntry] {
        &self.allocation_history
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn initial_capital(&self) -> f64 {
        self.value_series[0]
    }

    pub fn cumulative_return(&self) -> f64 {
        let v0 = self.initial_capital();
        if v0 > 0.0 {
            (self.value_series[self.step] - v0) / v0
        } else {
            0.0
        }
    }
}

/// Prices of every asset at `date`, carrying forward the last known price.
/// Returns the vector and the assets whose price was carried forward.
pub fn price_vector_at<F: MarketFeed + ?Sized>(
    spec: &MarketSpec,
    feed: &F,
    date: NaiveDate,
) -> Result<(PriceVector, Vec<AssetId>), EnvError> {
    let mut risky = Vec::new();
    let mut stale = Vec::new();
    for asset in spec.risky_assets() {
        let point = feed
            .price_on_or_before(asset, date)?
            .ok_or_else(|| EnvError::NoPriceEverSeen {
                asset: asset.clone(),
                date,
            })?;
        if point.date != date {
            stale.push(asset.clone());
        }
        risky.push((asset.clone(), point.price));
    }
    Ok((PriceVector::with_cash(spec, date, risky)?, stale))
}

/// Assembles the observation for the state's current date.
pub fn build_observation<F: MarketFeed + ?Sized>(
    state: &SessionState,
    feed: &F,
    lookback_days: u64,
) -> Result<Observation, EnvError> {
    let spec = &state.spec;
    let date = state.date;
    let (prices, stale) = price_vector_at(spec, feed, date)?;

    let window = lookback_window(date, lookback_days);
    let mut history = BTreeMap::new();
    for asset in spec.risky_assets() {
        history.insert(asset.clone(), feed.price_history(asset, window)?);
    }

    let nw = news_window(date);
    let mut news = Vec::new();
    for tag in spec.news_tags() {
        let mut items = feed.news(&tag, nw)?;
        rank_news(&mut items, None);
        news.extend(items);
    }

    let portfolio_value = portfolio_value(&state.holdings, &prices)?;
    Ok(Observation {
        step: state.step,
        date,
        positions: state.holdings.clone(),
        prices,
        stale,
        history,
        news,
        portfolio_value,
    })
}

/// Result of executing one action.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub allocation: AllocationVector,
    pub pre_trade_value: f64,
    pub value: f64,
    pub step_return: f64,
    pub trades: BTreeMap<AssetId, f64>,
}

/// Revalues at `next_prices`, rebalances (or holds) and advances one step.
pub fn apply_action(
    state: &mut SessionState,
    action: &Action,
    next_prices: &PriceVector,
) -> Result<Execution, EnvError> {
    if state.status != SessionStatus::Running {
        return Err(EnvError::SessionEnded);
    }
    let decision_date = state.date;
    let (allocation, pre_trade_value, holdings, trades) = match action {
        Action::Rebalance(target) => {
            let r = rebalance(&state.holdings, next_prices, target)?;
            (target.clone(), r.pre_trade_value, r.new_holdings, r.trades)
        }
        Action::Hold => {
            let v = portfolio_value(&state.holdings, next_prices)?;
            let w = current_weights(&state.spec, &state.holdings, next_prices)?;
            let trades = trade_delta(&state.holdings, &state.holdings)?;
            (w, v, state.holdings.clone(), trades)
        }
    };
    // v_{t+1} = v⁻_{t+1}
    let value = pre_trade_value;
    let prev = state.value_series[state.step];
    let step_return = if prev > 0.0 { (value - prev) / prev } else { 0.0 };

    state.holdings = holdings;
    state.value_series.push(value);
    state.step += 1;
    state.date = next_prices.date();
    let cumulative_return = state.cumulative_return();
    state.allocation_history.push(MemoryEntry {
        date: decision_date,
        allocation: allocation.clone(),
        cumulative_return,
        digest: ObservationDigest {
            prices: BTreeMap::new(),
            stale: Vec::new(),
            news_count: 0,
            holdings: BTreeMap::new(),
        },
    });
    Ok(Execution {
        allocation,
        pre_trade_value,
        value,
        step_return,
        trades: trades.as_map().clone(),
    })
}

fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn all_cash(spec: &MarketSpec) -> AllocationVector {
    AllocationVector::from_validated(
        spec.assets()
            .iter()
            .map(|a| (a.clone(), if a.is_cash() { 1.0 } else { 0.0 }))
            .collect(),
    )
}

/// Rebuilds an allocation from a log, checking the invariants
/// [`crate::accounting::validate_allocation`] guarantees.
pub fn restore_allocation(
    spec: &MarketSpec,
    weights: &BTreeMap<AssetId, f64>,
) -> Result<AllocationVector, EnvError> {
    for key in weights.keys() {
        if !spec.contains(key.as_str()) {
            return Err(EnvError::Restore(alloc::format!("unknown asset `{key}`")));
        }
    }
    let mut out = BTreeMap::new();
    for asset in spec.assets() {
        let w = *weights
            .get(asset)
            .ok_or_else(|| EnvError::Restore(alloc::format!("missing weight for `{asset}`")))?;
        if !w.is_finite() || w < 0.0 {
            return Err(EnvError::Restore(alloc::format!("invalid weight for `{asset}`")));
        }
        out.insert(asset.clone(), w);
    }
    let sum: f64 = out.values().sum();
    if (sum - 1.0).abs() > RESTORE_SUM_EPS {
        return Err(EnvError::Restore(alloc::format!("weights sum to {sum}")));
    }
    for pair in spec.pairs() {
        if out[&pair.yes] > 0.0 && out[&pair.no] > 0.0 {
            return Err(EnvError::Restore(alloc::format!(
                "both sides of `{}` are set",
                pair.question
            )));
        }
    }
    Ok(AllocationVector::from_validated(out))
}

/// A running session: state, memory, fallback target and the records so far.
#[derive(Debug, Clone)]
pub struct Session {
    state: SessionState,
    config: SessionConfig,
    memory: MemoryWindow,
    last_target: Option<AllocationVector>,
    records: Vec<SessionRecord>,
}

impl Session {
    pub fn start(spec: MarketSpec, config: SessionConfig, start: NaiveDate) -> Result<Self, EnvError> {
        let state = SessionState::new(spec, start, config.initial_capital)?;
        let memory = MemoryWindow::new(config.memory_horizon);
        Ok(Self {
            state,
            config,
            memory,
            last_target: None,
            records: Vec::new(),
        })
    }

    /// Rebuilds a session from the records of an interrupted run.
    pub fn resume(
        spec: MarketSpec,
        config: SessionConfig,
        start: NaiveDate,
        records: Vec<SessionRecord>,
    ) -> Result<Self, EnvError> {
        let mut session = Self::start(spec, config, start)?;
        let mut expected_date = start;
        for (i, rec) in records.iter().enumerate() {
            if rec.step != i {
                return Err(EnvError::Restore(alloc::format!(
                    "record {i} carries step {}",
                    rec.step
                )));
            }
            if rec.decision_date != expected_date || rec.date <= rec.decision_date {
                return Err(EnvError::Restore(alloc::format!(
                    "record {i} breaks the date chain"
                )));
            }
            expected_date = rec.date;
            let spec = &session.state.spec;
            let allocation = restore_allocation(spec, &rec.allocation)?;
            let holdings = Holdings::new(spec, rec.holdings.clone())
                .map_err(|e| EnvError::Restore(e.to_string()))?;
            if rec.outcome == StepOutcome::Parsed {
                session.last_target = Some(allocation.clone());
            }
            let entry = MemoryEntry {
                date: rec.decision_date,
                allocation,
                cumulative_return: rec.cumulative_return,
                digest: rec.observation.clone(),
            };
            let st = &mut session.state;
            st.holdings = holdings;
            st.value_series.push(rec.value);
            st.step += 1;
            st.date = rec.date;
            st.allocation_history.push(entry.clone());
            session.memory.push(entry);
        }
        session.records = records;
        Ok(session)
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn memory(&self) -> &MemoryWindow {
        &self.memory
    }

    pub fn records(&self) -> &[SessionRecord] {
        &self.records
    }

    pub fn into_parts(self) -> (SessionState, Vec<SessionRecord>) {
        (self.state, self.records)
    }

    /// Marks the session as finished; further steps fail.
    pub fn finish(&mut self) {
        if self.state.status == SessionStatus::Running {
            self.state.status = SessionStatus::Ended;
        }
    }

    /// The decision prompt for the current date, as the agent would see it.
    pub fn decision_prompt<F: MarketFeed + ?Sized>(&self, feed: &F) -> Result<String, EnvError> {
        let obs = build_observation(&self.state, feed, self.config.lookback_days)?;
        Ok(self.prompt_for(&obs))
    }

    fn prompt_for(&self, obs: &Observation) -> String {
        let spec = &self.state.spec;
        let context = build_context_prompt_with(spec, obs, &self.memory, &self.config.prompt);
        build_decision_prompt(&context, spec, self.state.date)
    }

    /// Decides at the current date and executes at `next_date`.
    pub fn step<A, F>(&mut self, agent: &mut A, feed: &F, next_date: NaiveDate) -> Result<&SessionRecord, EnvError>
    where
        A: Agent + ?Sized,
        F: MarketFeed + ?Sized,
    {
        if self.state.status != SessionStatus::Running {
            return Err(EnvError::SessionEnded);
        }
        if next_date <= self.state.date {
            return Err(EnvError::DatesNotIncreasing {
                prev: self.state.date,
                next: next_date,
            });
        }
        match self.step_inner(agent, feed, next_date) {
            Ok(()) => Ok(self.records.last().expect("record just pushed")),
            Err(e) => {
                self.state.status = SessionStatus::Halted;
                Err(e)
            }
        }
    }

    fn step_inner<A, F>(&mut self, agent: &mut A, feed: &F, next_date: NaiveDate) -> Result<(), EnvError>
    where
        A: Agent + ?Sized,
        F: MarketFeed + ?Sized,
    {
        let spec = self.state.spec.clone();
        let obs = build_observation(&self.state, feed, self.config.lookback_days)?;
        let digest = ObservationDigest::of(&obs);
        let decision_date = self.state.date;

        let mut responses = Vec::new();
        let mut errors = Vec::new();
        let mut reasoning = None;
        let mut prompt_sha256 = None;

        let interval = self.config.rebalance_interval.max(1);
        let (outcome, action) = if !self.state.step.is_multiple_of(interval) {
            (StepOutcome::ScheduledHold, Action::Hold)
        } else {
            let prompt = self.prompt_for(&obs);
            prompt_sha256 = Some(sha256_hex(&prompt));
            let input = DecisionInput {
                spec: &spec,
                observation: &obs,
                memory: &self.memory,
                prompt: &prompt,
            };
            let mut decided = None;
            for _ in 0..=self.config.max_response_retries {
                match agent.decide(&input) {
                    Ok(Reply::Hold) => {
                        decided = Some((StepOutcome::Hold, Action::Hold));
                        break;
                    }
                    Ok(Reply::Text(raw)) => {
                        let parsed =
                            parse_allocation_response_with(&raw, &spec, self.config.renormalize_band);
                        responses.push(raw);
                        match parsed {
                            Ok(p) => {
                                reasoning = Some(p.reasoning);
                                decided = Some((StepOutcome::Parsed, Action::Rebalance(p.allocation)));
                                break;
                            }
                            Err(e) => errors.push(e.to_string()),
                        }
                    }
                    Err(e) => errors.push(e.to_string()),
                }
            }
            decided.unwrap_or_else(|| {
                let target = self.last_target.clone().unwrap_or_else(|| all_cash(&spec));
                (StepOutcome::Fallback, Action::Rebalance(target))
            })
        };

        let (next_prices, stale) = price_vector_at(&spec, feed, next_date)?;
        let exec = apply_action(&mut self.state, &action, &next_prices)?;
        if outcome == StepOutcome::Parsed {
            self.last_target = Some(exec.allocation.clone());
        }
        if let Some(entry) = self.state.allocation_history.last_mut() {
            entry.digest = digest.clone();
            self.memory.push(entry.clone());
        }

        let record = SessionRecord {
            step: self.state.step - 1,
            decision_date,
            date: next_date,
            observation: digest,
            prompt_sha256,
            responses,
            errors,
            outcome,
            reasoning,
            allocation: exec.allocation.as_map().clone(),
            trades: exec.trades,
            holdings: self.state.holdings.as_map().clone(),
            prices: next_prices.as_map().clone(),
            stale,
            pre_trade_value: exec.pre_trade_value,
            value: exec.value,
            step_return: exec.step_return,
            cumulative_return: self.state.cumulative_return(),
        };
        self.records.push(record);
        Ok(())
    }
}

/// Checks that `dates` is nonempty and strictly increasing.
pub fn check_dates(dates: &[NaiveDate]) -> Result<(), EnvError> {
    if dates.is_empty() {
        return Err(EnvError::EmptyDates);
    }
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(EnvError::DatesNotIncreasing {
                prev: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}

/// Runs a full episode over `dates`.
pub fn run_episode<A, F>(
    spec: &MarketSpec,
    agent: &mut A,
    feed: &F,
    dates: &[NaiveDate],
    config: &SessionConfig,
) -> Result<(SessionState, Vec<SessionRecord>), EnvError>
where
    A: Agent + ?Sized,
    F: MarketFeed + ?Sized,
{
    check_dates(dates)?;
    let mut session = Session::start(spec.clone(), config.clone(), dates[0])?;
    for &d in &dates[1..] {
        session.step(agent, feed, d)?;
    }
    session.finish();
    Ok(session.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::baseline::{EqualWeightAgent, HoldAgent, ScriptedAgent};
    use crate::store::{Snapshot, SnapshotStore};
    use alloc::vec;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn id(s: &str) -> AssetId {
        AssetId::new(s).unwrap()
    }

    fn store(series: &[(&str, &[(&str, f64)])]) -> SnapshotStore {
        let mut st = SnapshotStore::new();
        for (asset, pts) in series {
            st.record(Snapshot::Prices {
                asset: id(asset),
                points: pts.iter().map(|(dt, p)| PricePoint::new(d(dt), *p)).collect(),
            })
            .unwrap();
        }
        st
    }

    fn cash_text() -> &'static str {
        r#"{"reasoning": "stay safe", "allocations": {"CASH": 1.0}}"#
    }

    #[test]
    fn carry_forward_is_flagged() {
        let spec = MarketSpec::stock(["A", "B"], 0.0).unwrap();
        let st = store(&[
            ("A", &[("2025-10-20", 10.0), ("2025-10-21", 11.0)]),
            ("B", &[("2025-10-20", 5.0)]),
        ]);
        let (p, stale) = price_vector_at(&spec, &st, d("2025-10-21")).unwrap();
        assert_eq!(p.get("A"), Some(11.0));
        assert_eq!(p.get("B"), Some(5.0));
        assert_eq!(stale, vec![id("B")]);
        assert!(matches!(
            price_vector_at(&spec, &st, d("2025-10-19")),
            Err(EnvError::NoPriceEverSeen { .. })
        ));
    }

    #[test]
    fn all_cash_is_flat() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let st = store(&[("A", &[("2025-10-20", 10.0), ("2025-10-21", 12.0), ("2025-10-22", 9.0)])]);
        let dates = [d("2025-10-20"), d("2025-10-21"), d("2025-10-22")];
        let mut agent = ScriptedAgent::fixed(cash_text());
        let (state, records) =
            run_episode(&spec, &mut agent, &st, &dates, &SessionConfig::default()).unwrap();
        assert_eq!(state.value_series(), &[1000.0, 1000.0, 1000.0]);
        assert_eq!(records.len(), 2);
        assert_eq!(state.status(), SessionStatus::Ended);
        assert!(records.iter().all(|r| r.outcome == StepOutcome::Parsed));
    }

    #[test]
    fn single_asset_gain() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let st = store(&[("A", &[("2025-10-20", 10.0), ("2025-10-21", 10.0), ("2025-10-22", 11.0)])]);
        let dates = [d("2025-10-20"), d("2025-10-21"), d("2025-10-22")];
        let mut agent = ScriptedAgent::fixed(r#"{"reasoning": "", "allocations": {"A": 1.0}}"#);
        let (state, records) =
            run_episode(&spec, &mut agent, &st, &dates, &SessionConfig::default()).unwrap();
        let v = state.value_series();
        assert_eq!(v[1], 1000.0);
        assert!((v[2] - 1100.0).abs() < 1e-9);
        assert_eq!(records[0].step_return, 0.0);
        assert!((records[1].step_return - 0.1).abs() < 1e-12);
    }

    #[test]
    fn malformed_every_day_stays_cash() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let st = store(&[("A", &[("2025-10-20", 10.0), ("2025-10-21", 12.0), ("2025-10-22", 9.0)])]);
        let dates = [d("2025-10-20"), d("2025-10-21"), d("2025-10-22")];
        let mut calls = 0usize;
        let mut agent = ScriptedAgent::new(move |_| {
            calls += 1;
            Ok(Reply::Text(alloc::format!("I cannot decide ({calls})")))
        });
        let (state, records) =
            run_episode(&spec, &mut agent, &st, &dates, &SessionConfig::default()).unwrap();
        assert_eq!(state.value_series(), &[1000.0, 1000.0, 1000.0]);
        for r in &records {
            assert_eq!(r.outcome, StepOutcome::Fallback);
            assert_eq!(r.responses.len(), 3);
            assert_eq!(r.errors.len(), 3);
            assert_eq!(r.allocation[&id("CASH")], 1.0);
        }
    }

    #[test]
    fn fallback_reuses_last_parsed_target() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let st = store(&[(
            "A",
            &[("2025-10-20", 10.0), ("2025-10-21", 10.0), ("2025-10-22", 20.0), ("2025-10-23", 20.0)],
        )]);
        let dates = [d("2025-10-20"), d("2025-10-21"), d("2025-10-22"), d("2025-10-23")];
        let mut n = 0;
        let mut agent = ScriptedAgent::new(move |_| {
            n += 1;
            if n == 1 {
                Ok(Reply::Text(r#"{"reasoning": "", "allocations": {"A": 0.5, "CASH": 0.5}}"#.into()))
            } else {
                Ok(Reply::Text("garbage".into()))
            }
        });
        let (state, records) =
            run_episode(&spec, &mut agent, &st, &dates, &SessionConfig::default()).unwrap();
        assert_eq!(records[1].outcome, StepOutcome::Fallback);
        assert_eq!(records[1].allocation[&id("A")], 0.5);
        // 500 in A doubles to 1000, plus 500 cash; then re-expressed at 50/50
        assert_eq!(state.value_series()[2], 1500.0);
        assert_eq!(records[1].holdings[&id("A")], 37.5);
    }

    #[test]
    fn hold_leaves_holdings_untouched() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let st = store(&[("A", &[("2025-10-20", 10.0), ("2025-10-21", 12.0)])]);
        let dates = [d("2025-10-20"), d("2025-10-21")];
        let (_, records) =
            run_episode(&spec, &mut HoldAgent, &st, &dates, &SessionConfig::default()).unwrap();
        assert_eq!(records[0].outcome, StepOutcome::Hold);
        assert!(records[0].trades.values().all(|&t| t == 0.0));
    }

    #[test]
    fn weights_of_current_book_trade_nothing() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let mut state = SessionState::new(spec.clone(), d("2025-10-20"), 100.0).unwrap();
        let p = PriceVector::with_cash(&spec, d("2025-10-21"), [(id("A"), 4.0)]).unwrap();
        let target = current_weights(&spec, state.holdings(), &p).unwrap();
        let exec = apply_action(&mut state, &Action::Rebalance(target), &p).unwrap();
        assert!(exec.trades.values().all(|&t| t == 0.0));
    }

    #[test]
    fn equal_weight_against_hand_oracle() {
        let spec = MarketSpec::stock(["A", "B"], 0.0).unwrap();
        let st = store(&[
            ("A", &[("2025-10-20", 10.0), ("2025-10-21", 10.0), ("2025-10-22", 12.0)]),
            ("B", &[("2025-10-20", 5.0), ("2025-10-21", 5.0), ("2025-10-22", 4.0)]),
        ]);
        let dates = [d("2025-10-20"), d("2025-10-21"), d("2025-10-22")];
        let (state, _) =
            run_episode(&spec, &mut EqualWeightAgent, &st, &dates, &SessionConfig::default())
                .unwrap();
        // step 1: 1000 → thirds at (10, 5). step 2: A +20%, B −20%, cash flat → 1000.
        let v = state.value_series();
        assert!((v[2] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let st = store(&[(
            "A",
            &[("2025-10-20", 10.0), ("2025-10-21", 11.0), ("2025-10-22", 9.0), ("2025-10-23", 12.0)],
        )]);
        let dates = [d("2025-10-20"), d("2025-10-21"), d("2025-10-22"), d("2025-10-23")];
        let cfg = SessionConfig::default();
        let (_, full) = run_episode(&spec, &mut EqualWeightAgent, &st, &dates, &cfg).unwrap();

        let mut s = Session::start(spec.clone(), cfg.clone(), dates[0]).unwrap();
        s.step(&mut EqualWeightAgent, &st, dates[1]).unwrap();
        let head = s.records().to_vec();
        let mut resumed = Session::resume(spec, cfg, dates[0], head).unwrap();
        for &dt in &dates[2..] {
            resumed.step(&mut EqualWeightAgent, &st, dt).unwrap();
        }
        assert_eq!(resumed.records(), full.as_slice());
    }

    #[test]
    fn rebalance_interval_schedules_holds() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let st = store(&[(
            "A",
            &[("2025-10-20", 10.0), ("2025-10-21", 11.0), ("2025-10-22", 9.0), ("2025-10-23", 12.0)],
        )]);
        let dates = [d("2025-10-20"), d("2025-10-21"), d("2025-10-22"), d("2025-10-23")];
        let cfg = SessionConfig {
            rebalance_interval: 2,
            ..SessionConfig::default()
        };
        let (_, records) = run_episode(&spec, &mut EqualWeightAgent, &st, &dates, &cfg).unwrap();
        let outcomes: Vec<_> = records.iter().map(|r| r.outcome).collect();
        assert_eq!(
            outcomes,
            vec![StepOutcome::Parsed, StepOutcome::ScheduledHold, StepOutcome::Parsed]
        );
        assert!(records[1].prompt_sha256.is_none());
    }

    #[test]
    fn dates_must_increase() {
        assert_eq!(check_dates(&[]), Err(EnvError::EmptyDates));
        assert!(matches!(
            check_dates(&[d("2025-10-21"), d("2025-10-21")]),
            Err(EnvError::DatesNotIncreasing { .. })
        ));
    }

    #[test]
    fn news_window_reaches_observation() {
        let spec = MarketSpec::stock(["A"], 0.0).unwrap();
        let mut st = store(&[("A", &[("2025-10-24", 10.0)])]);
        let mk = |url: &str, ts: i64| NewsItem {
            title: url.into(),
            snippet: String::new(),
            source: String::new(),
            url: url.into(),
            published_at: ts,
            tag: "A".into(),
        };
        st.record(Snapshot::News(vec![
            mk("in-21", 1_761_004_800),  // 2025-10-21
            mk("in-23", 1_761_177_600),  // 2025-10-23
            mk("same-day", 1_761_264_000), // 2025-10-24
            mk("old-20", 1_760_918_400), // 2025-10-20
        ]))
        .unwrap();
        let state = SessionState::new(spec, d("2025-10-24"), 1000.0).unwrap();
        let obs = build_observation(&state, &st, DEFAULT_LOOKBACK_DAYS).unwrap();
        let urls: Vec<_> = obs.news.iter().map(|n| n.url.as_str()).collect();
        assert_eq!(urls, vec!["in-23", "in-21"]);
    }
}
