//! Edit propagation analysis and edit recommendation.
//!
//! Given a project snapshot, the edits made so far in a session and an
//! optional prompt, the engine predicts which files and lines need to change
//! next (keep / insert / replace per line) and proposes ranked edit contents.
//! Accepted edits feed back as new prior edits.
//!
//! Module map:
//!
//! - [`model`]: edits, hunks, labels, snapshots, unified-diff parsing, segmentation
//! - [`relevance`]: file propagation scoring and prior-edit relevance
//! - [`locator`]: sliding-window per-line edit-type prediction
//! - [`generator`]: hunk regions and ranked candidate generation
//! - [`session`]: interactive session orchestration and persistence
//! - [`miner`]: commit filtering and dataset construction
//! - [`eval`]: metrics, generation evaluation and prior-selection ablation

pub mod eval;
pub mod generator;
pub mod locator;
pub mod miner;
pub mod model;
pub mod relevance;
pub mod session;
pub mod tokenize;
pub mod wire;

pub use model::{Edit, EditType, Hunk, ModelError, ProjectSnapshot, Prompt, Segment};
pub use relevance::ScoringConfig;
