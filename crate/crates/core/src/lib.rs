//! Text-to-SQL engine combining sample-aware demonstration retrieval with an
//! iterative, execution-feedback revision chain.
//!
//! The pipeline for one question:
//!
//! 1. [`question::simplify_question`] rewrites the question through the
//!    language model to normalize phrasing.
//! 2. [`skeleton::extract_skeleton`] masks schema-related tokens in both the
//!    original and the simplified question, yielding intent skeletons.
//! 3. [`repository::retrieve`] finds the nearest (skeleton, SQL) items in a
//!    repository built over a training set and assembles them into a few-shot
//!    demonstration block.
//! 4. [`chain::run_chain`] generates an initial SQL query, executes it, and
//!    keeps revising it with fine-grained feedback (engine errors, a natural
//!    language self-explanation, and related database contents) until two
//!    consecutive executions agree or the iteration cap is hit.
//!
//! [`eval`] scores predictions with execution accuracy over Spider-format
//! benchmarks, and [`gateway`] abstracts the language model behind live,
//! mock, and record/replay backends so the whole pipeline is testable
//! offline.

pub mod chain;
pub mod config;
pub mod content;
pub mod embed;
pub mod eval;
pub mod executor;
pub mod gateway;
pub mod prompts;
pub mod question;
pub mod repository;
pub mod schema;
pub mod skeleton;
pub mod spider;
pub mod sql_analysis;

pub use sqlrev_sqlite::Value;
