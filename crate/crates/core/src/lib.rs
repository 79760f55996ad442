//! Latency- and token-aware routing between inference-time scaling
//! strategies, with a simulated generation world to train and evaluate on.

pub mod config;
pub mod cost;
pub mod error;
pub mod harness;
pub mod jsonl;
pub mod model;
pub mod probe;
pub mod router;
pub mod simworld;
pub mod strategy;
