//! Allocation-based portfolio environment and agent-evaluation primitives.
//!
//! This crate is `no_std` (with `alloc`) and contains everything that is pure
//! computation:
//! - [`domain`]: assets, market universes, price/holding/allocation vectors
//! - [`accounting`]: valuation, revalue-and-rebalance, trade deltas, allocation validation
//! - [`environment`]: the per-session state machine, observation assembly and the episode loop
//! - [`agent`]: feature extraction, memory window, prompt rendering, response parsing,
//!   model routing and scripted baselines
//! - [`metrics`] and [`rolling`]: trading metrics and lagged-position analysis
//! - [`store`] and [`ingest`]: the replayable snapshot store and data normalization rules
//!
//! IO (HTTP fetchers, model clients, file formats, CLI) lives in the `tradesim` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod accounting;
pub mod agent;
pub mod domain;
pub mod environment;
pub mod ingest;
pub mod metrics;
pub mod rolling;
pub mod store;

pub use accounting::{
    net_exposure, portfolio_value, rebalance, trade_delta, validate_allocation,
    validate_allocation_with, AccountingError, RebalanceResult, RENORMALIZE_BAND,
};
pub use domain::{
    AllocationVector, AssetId, DomainError, Holdings, MarketKind, MarketSpec, NewsItem,
    Observation, OutcomePair, PricePoint, PriceVector, TimeZoneTag, TradeDelta, CASH,
};
pub use environment::{
    build_observation, run_episode, Action, EnvError, FeedError, MarketFeed, Session,
    SessionConfig, SessionRecord, SessionState, SessionStatus, StepOutcome,
};
pub use metrics::{MetricsError, MetricsReport, ReturnSeries};
pub use rolling::{rolling_k_delta, RollingError};
