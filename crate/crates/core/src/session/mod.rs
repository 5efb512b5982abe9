//! Interactive editing sessions: record edits, recommend locations and edit
//! candidates, take feedback.
//!
//! A session is a sequence of accepted edits over an initial snapshot. Its
//! revision counts accepted edits, and every report is tied to the revision
//! it was computed at. Sessions persist as an append-only event log; loading
//! a log replays it.

mod engine;
mod store;

pub use engine::{region_target, Engine, EngineConfig};
pub use store::{replay_log, SessionEvent, SessionStore, LOG_VERSION};

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{group_regions, EditCandidate, GenerateError, HunkRegion};
use crate::locator::{LinePrediction, LocatorError};
use crate::model::{apply_edit, normalize_path, ContextualEdit, Edit, EditType, ModelError, ProjectSnapshot, Prompt};
use crate::relevance::{locate_files, rank_order};
use crate::wire::BackendError;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session has no edits yet")]
    NoEdits,
    #[error("region reference {got} is from revision {ref_revision}, session is at revision {current}")]
    RevisionMismatch { got: String, ref_revision: u64, current: u64 },
    #[error("unknown region {0}")]
    UnknownRegion(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Locator(#[from] LocatorError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("session log: {0}")]
    Log(String),
}

/// An accepted edit and where its new content currently sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedEdit {
    /// The edit as it was applied, with context from the file at that time.
    pub edit: ContextualEdit,
    /// Current first line of the edit's new content.
    pub start: usize,
}

impl AppliedEdit {
    /// The edit re-anchored at its current position.
    pub fn current(&self) -> ContextualEdit {
        let mut c = self.edit.clone();
        c.edit.anchor_line = self.start.max(1);
        c
    }

    fn covered(&self) -> impl Iterator<Item = usize> {
        self.start..self.start + self.edit.edit.after_code.len()
    }
}

/// Identifies a region independently of report numbering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionKey {
    pub file_path: String,
    pub edit_type: EditType,
    pub start_line: usize,
    pub len: usize,
}

impl RegionKey {
    pub fn of(r: &HunkRegion) -> Self {
        RegionKey {
            file_path: r.file_path.clone(),
            edit_type: r.edit_type,
            start_line: r.start_line,
            len: r.target_lines.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub region_ref: String,
    pub region: HunkRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    /// Propagation score; absent for the file the triggering edit was made in.
    pub score: Option<f64>,
    /// Insert and replace predictions only.
    pub lines: Vec<LinePrediction>,
    pub regions: Vec<RegionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationReport {
    pub v: u32,
    pub session_id: String,
    pub revision: u64,
    pub files: Vec<FileReport>,
}

impl LocationReport {
    pub fn region(&self, region_ref: &str) -> Option<&HunkRegion> {
        self.files
            .iter()
            .flat_map(|f| &f.regions)
            .find(|r| r.region_ref == region_ref)
            .map(|r| &r.region)
    }
}

/// What the user did with a recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Feedback {
    /// The region was rewritten with `content`.
    Accepted { content: Vec<String> },
    Ignored,
}

/// Splits `"<revision>.<n>"`.
pub fn parse_region_ref(r: &str) -> Result<(u64, usize), SessionError> {
    let (rev, n) = r.split_once('.').ok_or_else(|| SessionError::UnknownRegion(r.to_owned()))?;
    match (rev.parse(), n.parse()) {
        (Ok(rev), Ok(n)) => Ok((rev, n)),
        _ => Err(SessionError::UnknownRegion(r.to_owned())),
    }
}

/// Session state without any locking; [`SessionStore`] adds concurrency and
/// persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSession {
    pub session_id: String,
    pub initial: ProjectSnapshot,
    pub snapshot: ProjectSnapshot,
    pub applied: Vec<AppliedEdit>,
    pub prompt: Prompt,
    pub revision: u64,
    /// Regions the user dismissed at the current revision.
    pub ignored: BTreeSet<RegionKey>,
}

impl EditSession {
    pub fn new(session_id: impl Into<String>, snapshot: ProjectSnapshot, prompt: Prompt) -> Self {
        EditSession {
            session_id: session_id.into(),
            initial: snapshot.clone(),
            snapshot,
            applied: Vec::new(),
            prompt,
            revision: 0,
            ignored: BTreeSet::new(),
        }
    }

    /// Applies an accepted edit to the snapshot. Stale edits are rejected
    /// and leave the session untouched.
    pub fn record_edit(&mut self, mut edit: Edit, prompt: Option<Prompt>, context_lines: usize) -> Result<u64, SessionError> {
        edit.file_path = normalize_path(&edit.file_path)?;
        edit.validate()?;
        let before = self.snapshot.file(&edit.file_path).map(<[String]>::to_vec).unwrap_or_default();
        let after = apply_edit(&before, &edit)?;

        let boundary = edit.anchor_line + edit.before_code.len();
        let delta = edit.line_delta();
        for a in self.applied.iter_mut().filter(|a| a.edit.edit.file_path == edit.file_path) {
            if a.start >= boundary {
                a.start = (a.start as isize + delta).max(1) as usize;
            }
        }
        let start = edit.anchor_line;
        self.applied.push(AppliedEdit {
            edit: ContextualEdit::from_file(edit.clone(), &before, context_lines),
            start,
        });
        self.snapshot.files.insert(edit.file_path.clone(), after);
        if let Some(p) = prompt {
            self.prompt = p;
        }
        self.revision += 1;
        self.ignored.clear();
        Ok(self.revision)
    }

    pub fn ignore(&mut self, key: RegionKey) {
        self.ignored.insert(key);
    }

    /// Prior edits in acceptance order, anchored where they now sit.
    pub fn priors(&self) -> Vec<ContextualEdit> {
        self.applied.iter().map(AppliedEdit::current).collect()
    }

    /// The snapshot obtained by applying the first `revision` edits to the
    /// initial snapshot.
    pub fn snapshot_at(&self, revision: u64) -> Result<ProjectSnapshot, SessionError> {
        let mut snap = self.initial.clone();
        for a in self.applied.iter().take(revision as usize) {
            let e = &a.edit.edit;
            let before = snap.file(&e.file_path).map(<[String]>::to_vec).unwrap_or_default();
            snap.files.insert(e.file_path.clone(), apply_edit(&before, e)?);
        }
        Ok(snap)
    }

    /// Files and lines likely to need the next edit. The latest edit triggers
    /// file location; its own file is always included.
    pub fn recommend_locations(&self, engine: &Engine) -> Result<LocationReport, SessionError> {
        let trigger = self.applied.last().ok_or(SessionError::NoEdits)?.current();
        let cfg = &engine.config;
        let prompt = Some(&self.prompt).filter(|p| !p.is_empty());
        let mut ranked = locate_files(&trigger.edit, &self.snapshot, &cfg.scoring, &engine.scoring, prompt)?;
        ranked.sort_by(rank_order);

        let mut files: Vec<(String, Option<f64>)> = vec![(trigger.edit.file_path.clone(), None)];
        files.extend(ranked.into_iter().map(|r| (r.path, Some(r.score))));

        let priors = self.priors();
        let mut next_ref = 0usize;
        let mut out = Vec::with_capacity(files.len());
        for (path, score) in files {
            let lines = self.snapshot.file(&path).unwrap_or(&[]);
            let covered: HashSet<usize> = self
                .applied
                .iter()
                .filter(|a| a.edit.edit.file_path == path)
                .flat_map(AppliedEdit::covered)
                .collect();
            let mut report = FileReport {
                path: path.clone(),
                score,
                lines: Vec::new(),
                regions: Vec::new(),
                error: None,
            };
            match engine.label_lines(&path, lines, &self.prompt, &priors) {
                Ok(preds) => {
                    let preds: Vec<LinePrediction> = preds
                        .into_iter()
                        .filter(|p| p.label != EditType::Keep && !covered.contains(&p.line))
                        .collect();
                    let regions = group_regions(&path, lines, &preds, cfg.generator.context_lines);
                    let mut dropped: HashSet<usize> = HashSet::new();
                    for region in regions {
                        // numbered before filtering, so ignoring one region
                        // does not renumber the others
                        let n = next_ref;
                        next_ref += 1;
                        if self.ignored.contains(&RegionKey::of(&region)) {
                            dropped.extend(region.start_line..=region.end_line());
                            continue;
                        }
                        report.regions.push(RegionEntry {
                            region_ref: format!("{}.{n}", self.revision),
                            region,
                        });
                    }
                    report.lines = preds.into_iter().filter(|p| !dropped.contains(&p.line)).collect();
                }
                // one failing file does not sink the report
                Err(e) => report.error = Some(e.to_string()),
            }
            out.push(report);
        }
        Ok(LocationReport {
            v: REPORT_VERSION,
            session_id: self.session_id.clone(),
            revision: self.revision,
            files: out,
        })
    }

    /// Resolves a region reference against `report`, which must be current.
    pub fn resolve<'r>(&self, report: &'r LocationReport, region_ref: &str) -> Result<&'r HunkRegion, SessionError> {
        let (rev, _) = parse_region_ref(region_ref)?;
        if rev != self.revision || report.revision != self.revision {
            return Err(SessionError::RevisionMismatch {
                got: region_ref.to_owned(),
                ref_revision: rev,
                current: self.revision,
            });
        }
        report.region(region_ref).ok_or_else(|| SessionError::UnknownRegion(region_ref.to_owned()))
    }

    /// Up to `k` ranked contents for a reported region.
    pub fn recommend_edits(&self, engine: &Engine, region: &HunkRegion, k: usize) -> Result<Vec<EditCandidate>, SessionError> {
        let lines = self.snapshot.file(&region.file_path).unwrap_or(&[]);
        let target = region_target(region, lines);
        let priors = engine.select_priors(&self.priors(), &target)?;
        Ok(engine.candidates(region, &self.prompt, &priors, k)?)
    }
}
