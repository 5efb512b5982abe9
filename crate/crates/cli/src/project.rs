//! Inputs read from disk: project trees, unified diffs and configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use editprop::model::{parse_unified_diff, split_lines, FileDiff};
use editprop::session::EngineConfig;
use editprop::{Edit, ProjectSnapshot};
use serde::de::DeserializeOwned;
use walkdir::WalkDir;

/// Files larger than this are treated as generated or binary and skipped.
const MAX_FILE_BYTES: u64 = 2 << 20;

/// Reads every UTF-8 text file under `dir` (hidden entries excluded) into a
/// snapshot keyed by the path relative to `dir`.
pub fn load_project(dir: &Path) -> Result<ProjectSnapshot> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut snap = ProjectSnapshot::new(dir.display().to_string());
    let walker = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker {
        let entry = entry.with_context(|| format!("walking {}", dir.display()))?;
        if !entry.file_type().is_file() || entry.metadata().map_or(true, |m| m.len() > MAX_FILE_BYTES) {
            continue;
        }
        let bytes = fs::read(entry.path()).with_context(|| format!("reading {}", entry.path().display()))?;
        let Ok(text) = String::from_utf8(bytes) else { continue };
        if text.contains('\0') {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        snap.insert_file(&rel.to_string_lossy(), split_lines(&text))?;
    }
    Ok(snap)
}

/// Turns a unified diff against `snap` into edits that can be applied one
/// after another: hunk line numbers refer to the original files, so each
/// anchor is shifted by the line delta of the earlier hunks in its file.
pub fn diff_to_edits(diff: &str) -> Result<Vec<Edit>> {
    let mut shift: BTreeMap<String, isize> = BTreeMap::new();
    let mut edits = Vec::new();
    for d in parse_unified_diff(diff)? {
        let FileDiff::Patched { hunks, .. } = d else { continue };
        for h in hunks {
            let mut e = h.to_edit()?;
            let delta = shift.entry(e.file_path.clone()).or_insert(0);
            e.anchor_line = (e.anchor_line as isize + *delta).max(1) as usize;
            *delta += e.line_delta();
            edits.push(e);
        }
    }
    Ok(edits)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// The default configuration, or the one in `path` (missing fields take
/// their defaults).
pub fn engine_config(path: Option<&Path>) -> Result<EngineConfig> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => EngineConfig::default(),
    };
    cfg.validate().map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use editprop::model::apply_edit;

    #[test]
    fn later_hunks_shift_by_earlier_deltas() {
        let diff = "--- a/f.txt\n+++ b/f.txt\n@@ -1,0 +2,2 @@\n+x\n+y\n@@ -3 +5 @@\n-c\n+C\n";
        let edits = diff_to_edits(diff).unwrap();
        assert_eq!(edits.len(), 2);
        let mut lines: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        for e in &edits {
            lines = apply_edit(&lines, e).unwrap();
        }
        assert_eq!(lines, ["a", "x", "y", "b", "C"]);
    }

    #[test]
    fn project_skips_hidden_and_binary_files() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path();
        fs::create_dir_all(d.join("src")).unwrap();
        fs::create_dir_all(d.join(".git")).unwrap();
        fs::write(d.join("src/main.rs"), "fn main() {}\n").unwrap();
        fs::write(d.join(".git/config"), "x").unwrap();
        fs::write(d.join("blob.bin"), [0u8, 159, 146, 150]).unwrap();
        let snap = load_project(d).unwrap();
        assert_eq!(snap.paths().collect::<Vec<_>>(), ["src/main.rs"]);
        assert!(load_project(&d.join("src/main.rs")).is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("c.json");
        fs::write(&p, r#"{"scoring": {"th_pri": 0.25}}"#).unwrap();
        let cfg = engine_config(Some(&p)).unwrap();
        assert_eq!(cfg.scoring.th_pri, 0.25);
        assert_eq!(cfg.locator, EngineConfig::default().locator);
        fs::write(&p, r#"{"scoring": {"th_pri": -1}}"#).unwrap();
        assert!(engine_config(Some(&p)).is_err());
    }
}
