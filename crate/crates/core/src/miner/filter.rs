use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Hunk, ProjectSnapshot, SkipReason};

/// A commit with its diff and the project as it was just before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_id: String,
    pub message: String,
    pub hunks: Vec<Hunk>,
    /// Files in the diff that carry no usable hunks (renames, binaries).
    #[serde(default)]
    pub skipped: Vec<(String, SkipReason)>,
    pub snapshot_before: ProjectSnapshot,
}

impl CommitRecord {
    pub fn files_touched(&self) -> BTreeSet<String> {
        self.hunks
            .iter()
            .map(|h| h.file_path.clone())
            .chain(self.skipped.iter().map(|(p, _)| p.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_hunks: usize,
    /// Every hunk must change strictly fewer lines than this on both sides.
    pub max_hunk_lines: usize,
    /// The message must have strictly more word tokens than this.
    pub min_message_words: usize,
    pub min_ascii_ratio: f64,
    pub denied_extensions: Vec<String>,
    pub generated_markers: Vec<String>,
    /// Lines at the top of each file searched for generation markers.
    pub marker_scan_lines: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_hunks: 3,
            max_hunk_lines: 15,
            min_message_words: 5,
            min_ascii_ratio: 0.9,
            denied_extensions: [".bak", ".log", ".pyc"].map(String::from).to_vec(),
            generated_markers: ["Code generated", "DO NOT EDIT", "@generated", "auto-generated", "autogenerated"]
                .map(String::from)
                .to_vec(),
            marker_scan_lines: 20,
        }
    }
}

impl FilterConfig {
    pub fn is_denied(&self, path: &str) -> bool {
        self.denied_extensions.iter().any(|x| path.ends_with(x.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    MinHunks,
    HunkSize,
    ShortMessage,
    NonEnglish,
    NonSourceFile,
    GeneratedFile,
}

/// Whether a commit is kept, and every rule it broke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub commit_id: String,
    pub kept: bool,
    pub reasons: Vec<FilterRule>,
}

/// Words are whitespace-separated tokens with at least one letter or digit.
pub fn message_words(message: &str) -> Vec<&str> {
    message
        .split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .collect()
}

/// At least `min_ratio` of the characters are ASCII and some word is
/// alphabetic.
pub fn looks_english(message: &str, min_ratio: f64) -> bool {
    let total = message.chars().filter(|c| !c.is_whitespace()).count();
    if total == 0 {
        return false;
    }
    let ascii = message.chars().filter(|c| !c.is_whitespace() && c.is_ascii()).count();
    let alpha_word = message_words(message).iter().any(|w| w.chars().any(|c| c.is_ascii_alphabetic()));
    ascii as f64 / total as f64 >= min_ratio && alpha_word
}

fn is_generated(c: &CommitRecord, path: &str, cfg: &FilterConfig) -> bool {
    let head = c
        .snapshot_before
        .file(path)
        .map(|l| &l[..l.len().min(cfg.marker_scan_lines)])
        .unwrap_or(&[]);
    let added = c.hunks.iter().filter(|h| h.file_path == path).flat_map(|h| &h.after_lines);
    head.iter()
        .chain(added)
        .any(|l| cfg.generated_markers.iter().any(|m| l.contains(m.as_str())))
}

pub fn filter_commit(c: &CommitRecord, cfg: &FilterConfig) -> FilterDecision {
    let mut reasons = Vec::new();
    if c.hunks.len() < cfg.min_hunks {
        reasons.push(FilterRule::MinHunks);
    }
    if c.hunks.iter().any(|h| h.changed_lines() >= cfg.max_hunk_lines) {
        reasons.push(FilterRule::HunkSize);
    }
    if message_words(&c.message).len() <= cfg.min_message_words {
        reasons.push(FilterRule::ShortMessage);
    }
    if !looks_english(&c.message, cfg.min_ascii_ratio) {
        reasons.push(FilterRule::NonEnglish);
    }
    let touched = c.files_touched();
    if touched.iter().any(|p| cfg.is_denied(p)) {
        reasons.push(FilterRule::NonSourceFile);
    }
    if touched.iter().any(|p| is_generated(c, p, cfg)) {
        reasons.push(FilterRule::GeneratedFile);
    }
    FilterDecision {
        commit_id: c.commit_id.clone(),
        kept: reasons.is_empty(),
        reasons,
    }
}
