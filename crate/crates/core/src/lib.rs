//! Core building blocks for the f3 pipeline: corpus handling, the versioned
//! prompt catalog, consistency filtering, label parsing, and report scoring.
//!
//! Everything in this crate is deterministic and offline; network access and
//! stage orchestration live in the companion `f3-gateway` and `f3-pipeline`
//! crates.

pub mod corpus;
pub mod detect;
pub mod evaluate;
pub mod exec;
pub mod hashing;
pub mod jsonl;
pub mod prompt;
pub mod purify;
