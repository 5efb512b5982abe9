//! Dataset construction from commit histories.
//!
//! Commits are filtered for multi-hunk, small, described, hand-written
//! changes; every kept commit yields one sample per hunk per task, with the
//! other hunks of the commit as prior edits. Splits are assigned per commit
//! from a hash of its id, so all samples of a commit share a split.

mod filter;
pub mod git;

pub use filter::{filter_commit, looks_english, message_words, CommitRecord, FilterConfig, FilterDecision, FilterRule};

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{parse_unified_diff, split_lines, FileDiff, Hunk, ModelError, ProjectSnapshot};

pub const SAMPLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("git: {0}")]
    Git(String),
    #[error("commit {commit}: {source}")]
    Diff { commit: String, source: ModelError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> MinerError {
    MinerError::Io {
        path: path.to_owned(),
        reason: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    FileLoc,
    LineLoc,
    Gen,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::FileLoc, Task::LineLoc, Task::Gen];

    pub fn name(self) -> &'static str {
        match self {
            Task::FileLoc => "file_loc",
            Task::LineLoc => "line_loc",
            Task::Gen => "gen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

fn hash64(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    let d = h.finalize();
    u64::from_be_bytes([d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7]])
}

/// 70 / 10 / 20 by a hash of the commit id.
pub fn split_of(commit_id: &str) -> Split {
    match hash64(&[commit_id]) % 100 {
        0..70 => Split::Train,
        70..80 => Split::Valid,
        _ => Split::Test,
    }
}

/// One training/evaluation example: predict `target` given the other hunks
/// of the commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub v: u32,
    pub task: Task,
    pub commit_id: String,
    pub split: Split,
    pub target_index: usize,
    pub target: Hunk,
    pub priors: Vec<Hunk>,
    pub prompt: String,
    /// Untouched files offered as distractors (file location only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negatives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub filter: FilterConfig,
    /// Negative files drawn per file-location sample.
    pub negatives: usize,
    pub seed: u64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            filter: FilterConfig::default(),
            negatives: 10,
            seed: 42,
        }
    }
}

/// Samples of one task from one (kept) commit.
pub fn build_samples(c: &CommitRecord, task: Task, cfg: &MinerConfig) -> Vec<Sample> {
    let touched = c.files_touched();
    let pool: Vec<&str> = c
        .snapshot_before
        .paths()
        .filter(|p| !touched.contains(*p) && !cfg.filter.is_denied(p))
        .collect();
    let split = split_of(&c.commit_id);
    (0..c.hunks.len())
        .map(|i| {
            let negatives = if task == Task::FileLoc {
                let seed = hash64(&[&cfg.seed.to_string(), &c.commit_id, &i.to_string()]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked: Vec<String> = pool
                    .choose_multiple(&mut rng, cfg.negatives.min(pool.len()))
                    .map(|p| p.to_string())
                    .collect();
                picked.sort();
                picked
            } else {
                Vec::new()
            };
            Sample {
                v: SAMPLE_VERSION,
                task,
                commit_id: c.commit_id.clone(),
                split,
                target_index: i,
                target: c.hunks[i].clone(),
                priors: c
                    .hunks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, h)| h.clone())
                    .collect(),
                prompt: c.message.clone(),
                negatives,
            }
        })
        .collect()
}

/// Everything produced by one mining run.
#[derive(Debug, Clone, Default)]
pub struct MinedDataset {
    pub decisions: Vec<FilterDecision>,
    pub samples: BTreeMap<Task, Vec<Sample>>,
    /// Pre-commit snapshots of kept commits.
    pub snapshots: BTreeMap<String, ProjectSnapshot>,
}

/// Filters `records` (in history order) and builds samples for `tasks`.
pub fn mine_records(records: &[CommitRecord], tasks: &[Task], cfg: &MinerConfig) -> MinedDataset {
    let decisions: Vec<FilterDecision> = records.par_iter().map(|c| filter_commit(c, &cfg.filter)).collect();
    let mut out = MinedDataset::default();
    for t in tasks {
        out.samples.insert(*t, Vec::new());
    }
    for (c, d) in records.iter().zip(&decisions) {
        if !d.kept {
            continue;
        }
        for t in tasks {
            out.samples.entry(*t).or_default().extend(build_samples(c, *t, cfg));
        }
        out.snapshots.insert(c.commit_id.clone(), restrict_snapshot(c, cfg));
    }
    out.decisions = decisions;
    out
}

/// The part of the pre-commit snapshot any sample of the commit refers to.
fn restrict_snapshot(c: &CommitRecord, cfg: &MinerConfig) -> ProjectSnapshot {
    let mut keep = c.files_touched();
    for s in build_samples(c, Task::FileLoc, cfg) {
        keep.extend(s.negatives);
    }
    let mut snap = ProjectSnapshot::new(c.snapshot_before.root.clone());
    for (p, lines) in &c.snapshot_before.files {
        if keep.contains(p) {
            snap.files.insert(p.clone(), lines.clone());
        }
    }
    snap
}

/// Reads every commit of a git repository (oldest first).
pub fn read_git_history(repo: &Path, rev: &str) -> Result<Vec<CommitRecord>, MinerError> {
    let shas = git::list_commits(repo, rev)?;
    shas.par_iter().map(|s| git::read_commit(repo, s)).collect()
}

/// A commit stored as one JSON file: id, message, unified diff and the
/// pre-commit contents of the files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitFile {
    pub commit_id: String,
    pub message: String,
    pub diff: String,
    #[serde(default)]
    pub files: BTreeMap<String, String>,
}

impl CommitFile {
    pub fn into_record(self) -> Result<CommitRecord, MinerError> {
        let diffs = parse_unified_diff(&self.diff).map_err(|e| MinerError::Diff {
            commit: self.commit_id.clone(),
            source: e,
        })?;
        let mut snap = ProjectSnapshot::new("");
        for (p, text) in &self.files {
            snap.insert_file(p, split_lines(text))?;
        }
        let mut hunks = Vec::new();
        let mut skipped = Vec::new();
        for d in diffs {
            match d {
                FileDiff::Patched { hunks: h, .. } => hunks.extend(h),
                FileDiff::Skipped { path, reason } => skipped.push((path, reason)),
            }
        }
        Ok(CommitRecord {
            commit_id: self.commit_id,
            message: self.message,
            hunks,
            skipped,
            snapshot_before: snap,
        })
    }
}

/// Reads `*.json` commit files from a directory, ordered by file name.
pub fn read_commit_dir(dir: &Path) -> Result<Vec<CommitRecord>, MinerError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let cf: CommitFile = serde_json::from_str(&text).map_err(|e| io_err(p, e))?;
            cf.into_record()
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), MinerError> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, MinerError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| {
            let l = l.map_err(|e| io_err(path, e))?;
            serde_json::from_str(&l).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Writes `decisions.jsonl`, one `<task>.jsonl` per task and
/// `snapshots/<commit>.json`.
pub fn write_dataset(out: &Path, data: &MinedDataset) -> Result<(), MinerError> {
    let snaps = out.join("snapshots");
    fs::create_dir_all(&snaps).map_err(|e| io_err(&snaps, e))?;
    write_jsonl(&out.join("decisions.jsonl"), &data.decisions)?;
    for (task, samples) in &data.samples {
        write_jsonl(&out.join(format!("{}.jsonl", task.name())), samples)?;
    }
    for (id, snap) in &data.snapshots {
        let p = snaps.join(format!("{id}.json"));
        let text = serde_json::to_string(snap).map_err(|e| io_err(&p, e))?;
        fs::write(&p, text).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

/// A mined dataset read back from disk.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: BTreeMap<Task, Vec<Sample>>,
    pub snapshots: BTreeMap<String, ProjectSnapshot>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self, MinerError> {
        let mut ds = Dataset::default();
        for t in Task::ALL {
            let p = dir.join(format!("{}.jsonl", t.name()));
            if p.exists() {
                ds.samples.insert(t, read_jsonl(&p)?);
            }
        }
        let snaps = dir.join("snapshots");
        if snaps.is_dir() {
            for e in fs::read_dir(&snaps).map_err(|e| io_err(&snaps, e))? {
                let p = e.map_err(|e| io_err(&snaps, e))?.path();
                let Some(id) = p.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else { continue };
                let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
                ds.snapshots.insert(id, serde_json::from_str(&text).map_err(|e| io_err(&p, e))?);
            }
        }
        Ok(ds)
    }

    pub fn from_mined(m: &MinedDataset) -> Self {
        Dataset {
            samples: m.samples.clone(),
            snapshots: m.snapshots.clone(),
        }
    }

    pub fn samples(&self, task: Task) -> &[Sample] {
        self.samples.get(&task).map(Vec::as_slice).unwrap_or(&[])
    }
}
