//! Streaming k-representative query engine.
//!
//! Maintains per-topic ranked indexes over a sliding window of referenced
//! text elements and answers ad-hoc queries for a small set of elements that
//! maximizes combined semantic + influence coverage with respect to a
//! topic-preference vector.
//!
//! The crate is organized around the data path:
//!
//! * [`types`] / [`io`] — domain types, validation, and the line-oriented
//!   ingestion formats (element stream, topic model, dictionary).
//! * [`window`] — the sliding window, the active set, and the
//!   reverse-reference index.
//! * [`scoring`] — word weights, semantic and influence scores, and the
//!   incremental per-candidate coverage state.
//! * [`ranked_lists`] — per-topic ordered indexes keyed by single-element
//!   score, plus the multi-list traversal cursor used by all index-backed
//!   query processors.
//! * [`engines`] — the two threshold-based approximate processors (`mtts`,
//!   `mttd`).
//! * [`baselines`] — lazy greedy, sieve-streaming, plain top-k, and an
//!   exhaustive optimum for quality/efficiency comparison.
//! * [`harness`] — stream replay, synthetic workload generation, and the
//!   benchmark driver behind the CLI.

pub mod baselines;
pub mod engines;
pub mod harness;
pub mod io;
pub mod ranked_lists;
pub mod scoring;
pub mod types;
pub mod window;

pub use engines::{Engine, Query, QueryResult};
pub use scoring::{CoverageState, ScoreCtx};
pub use types::{Element, ElementId, QueryVector, ScoringConfig, TopicId, TopicModel, WordId};
pub use window::{ActiveStore, Snapshot, UpdateReport};
