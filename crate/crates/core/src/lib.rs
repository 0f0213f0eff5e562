//! Long-term action anticipation toolkit.
//!
//! Reward engineering for structured reasoning traces, verb-noun
//! co-occurrence correction, group-relative policy optimization of a small
//! tabular policy, and the edit-distance and mAP evaluation protocols.
//!
//! Each capability has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run -p lta --example synthetic_task
//! cargo run -p lta --example semantic_correction
//! cargo run -p lta --example parse_trace
//! cargo run -p lta --example reward_breakdown
//! cargo run -p lta --example grpo_gradient
//! cargo run -p lta --release --example train_synthetic
//! cargo run -p lta --example ego4d_eval
//! cargo run -p lta --example map_eval
//! ```
//!
//! The `lta` binary wraps the same functionality for batch use.

pub mod cli;
pub mod cooccurrence;
pub mod error;
pub mod grpo;
pub mod metrics;
pub mod policy;
pub mod rewards;
pub mod rng;
pub mod structured;
pub mod synth;
pub mod trainer;
pub mod vocab;

pub use error::{Error, Result};
pub use vocab::{Action, ActionPair, ActionSequence, AnnotationRecord, Vocabulary};
