//! Edits, hunks, line labels and project snapshots, plus the unified-diff
//! parser and file segmentation every other module builds on.

mod apply;
mod diff;
mod labels;
mod segment;
mod types;

pub use apply::{apply_edit, apply_hunks};
pub use diff::{check_no_overlap, parse_unified_diff, render_unified_diff, FileDiff, SkipReason};
pub use labels::{line_labels_from_hunk, merge_file_labels};
pub use segment::{split_segments, MIN_SEGMENT_TOKENS};
pub use types::{normalize_path, split_lines, ContextualEdit, Edit, EditType, Hunk, ProjectSnapshot, Prompt, Segment};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed diff at line {line_no}: {reason}")]
    MalformedDiff { line_no: usize, reason: String },
    #[error("invalid anchor {anchor} in {path}")]
    InvalidAnchor { path: String, anchor: i64 },
    #[error("stale edit at {path}:{anchor}: {reason}")]
    StaleEdit { path: String, anchor: usize, reason: String },
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("invalid path {0:?}")]
    InvalidPath(String),
}
