//! Std companion to `tradesim-core`: snapshot files, session logs, network
//! fetchers, model clients, reports and the command implementations.

pub mod commands;
pub mod config;
pub mod fetch;
pub mod http;
pub mod log;
pub mod providers;
pub mod report;
pub mod snapshot;

pub use tradesim_core as core;
