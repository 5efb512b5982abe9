//! The two-file Go "matcher" change: six hunks over benchmark.go and
//! testing.go, plus an unrelated file used as a distractor.

use std::path::PathBuf;

use editprop::miner::{CommitRecord, Dataset, MinedDataset, Sample, Split, Task, SAMPLE_VERSION};
use editprop::model::{parse_unified_diff, split_lines, FileDiff};
use editprop::{Hunk, ProjectSnapshot};

pub const BENCH: &str = "src/testing/benchmark.go";
pub const TESTING: &str = "src/testing/testing.go";
pub const COLOR: &str = "src/image/color/color.go";

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/go_matcher")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(dir().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Pre-change project: both testing files and the distractor.
pub fn snapshot() -> ProjectSnapshot {
    ProjectSnapshot::from_texts(
        "go",
        [
            (BENCH, read("before/benchmark.go").as_str()),
            (TESTING, read("before/testing.go").as_str()),
            (COLOR, read("extra/color.go").as_str()),
        ],
    )
    .unwrap()
}

pub fn after(path: &str) -> Vec<String> {
    let name = path.rsplit('/').next().unwrap();
    split_lines(&read(&format!("after/{name}")))
}

pub fn diff_text() -> String {
    read("commit.diff")
}

/// H1..H6 in diff order.
pub fn hunks() -> Vec<Hunk> {
    parse_unified_diff(&diff_text())
        .unwrap()
        .into_iter()
        .flat_map(|f| match f {
            FileDiff::Patched { hunks, .. } => hunks,
            FileDiff::Skipped { .. } => Vec::new(),
        })
        .collect()
}

pub const MESSAGE: &str = "testing: route test and benchmark names through a shared matcher";

pub fn commit() -> CommitRecord {
    CommitRecord {
        commit_id: "go-matcher".into(),
        message: MESSAGE.into(),
        hunks: hunks(),
        skipped: Vec::new(),
        snapshot_before: snapshot(),
    }
}

/// Every hunk as a generation/line-location sample with the other five as
/// priors, all in one split.
pub fn dataset() -> Dataset {
    let c = commit();
    let mut mined = MinedDataset::default();
    for task in Task::ALL {
        let samples: Vec<Sample> = (0..c.hunks.len())
            .map(|i| Sample {
                v: SAMPLE_VERSION,
                task,
                commit_id: c.commit_id.clone(),
                split: Split::Test,
                target_index: i,
                target: c.hunks[i].clone(),
                priors: c.hunks.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, h)| h.clone()).collect(),
                prompt: c.message.clone(),
                negatives: if task == Task::FileLoc { vec![COLOR.into()] } else { Vec::new() },
            })
            .collect();
        mined.samples.insert(task, samples);
    }
    mined.snapshots.insert(c.commit_id.clone(), c.snapshot_before.clone());
    Dataset::from_mined(&mined)
}

/// The hunks as edits applied one after another in diff order: each anchor
/// moves by the line delta of the earlier hunks of the same file.
pub fn sequential_edits(hunks: &[Hunk]) -> Vec<editprop::Edit> {
    let mut shift: std::collections::HashMap<&str, isize> = Default::default();
    hunks
        .iter()
        .map(|h| {
            let mut e = h.to_edit().unwrap();
            let d = shift.entry(h.file_path.as_str()).or_insert(0);
            e.anchor_line = (e.anchor_line as isize + *d) as usize;
            *d += h.after_lines.len() as isize - h.before_lines.len() as isize;
            e
        })
        .collect()
}
