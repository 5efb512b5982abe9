//! Reads commits out of a local git repository through the `git` CLI.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use super::{CommitRecord, MinerError};
use crate::model::{parse_unified_diff, split_lines, FileDiff, ProjectSnapshot};

/// Directory name only, so output does not depend on where the repo lives.
fn repo_name(repo: &Path) -> String {
    repo.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_default()
}

fn git(repo: &Path, args: &[&str]) -> Result<Vec<u8>, MinerError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["-c", "core.quotepath=false"])
        .args(args)
        .output()
        .map_err(|e| MinerError::Git(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        return Err(MinerError::Git(format!(
            "git {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(out.stdout)
}

fn git_text(repo: &Path, args: &[&str]) -> Result<String, MinerError> {
    String::from_utf8(git(repo, args)?).map_err(|e| MinerError::Git(format!("non-utf8 git output: {e}")))
}

/// Non-merge commits reachable from `rev`, oldest first.
pub fn list_commits(repo: &Path, rev: &str) -> Result<Vec<String>, MinerError> {
    Ok(git_text(repo, &["rev-list", "--reverse", "--topo-order", "--no-merges", rev])?
        .lines()
        .map(str::to_owned)
        .collect())
}

/// Text files of a tree; binary or non-UTF-8 blobs are left out.
pub fn tree_snapshot(repo: &Path, tree_ish: &str) -> Result<ProjectSnapshot, MinerError> {
    let mut snap = ProjectSnapshot::new(repo_name(repo));
    let listing = git(repo, &["ls-tree", "-r", "-z", "--name-only", tree_ish])?;
    let paths: Vec<String> = listing
        .split(|b| *b == 0)
        .filter(|p| !p.is_empty())
        .filter_map(|p| String::from_utf8(p.to_vec()).ok())
        .collect();
    if paths.is_empty() {
        return Ok(snap);
    }
    let mut child = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["cat-file", "--batch"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| MinerError::Git(format!("cannot run git cat-file: {e}")))?;
    let mut stdin = child.stdin.take().ok_or_else(|| MinerError::Git("no stdin".into()))?;
    let stdout = child.stdout.take().ok_or_else(|| MinerError::Git("no stdout".into()))?;
    let requests: String = paths.iter().map(|p| format!("{tree_ish}:{p}\n")).collect();
    // feed from another thread so a full stdout pipe cannot deadlock us
    let feeder = std::thread::spawn(move || stdin.write_all(requests.as_bytes()));
    let mut reader = BufReader::new(stdout);
    for path in &paths {
        let mut header = String::new();
        reader.read_line(&mut header).map_err(|e| MinerError::Git(e.to_string()))?;
        let mut parts = header.split_whitespace();
        let (_, kind, size) = (parts.next(), parts.next(), parts.next());
        let Some(size) = size.and_then(|s| s.parse::<usize>().ok()) else {
            continue; // "missing" entries, e.g. submodules
        };
        let mut body = vec![0u8; size + 1];
        reader.read_exact(&mut body).map_err(|e| MinerError::Git(e.to_string()))?;
        body.pop();
        if kind != Some("blob") || body.contains(&0) {
            continue;
        }
        if let Ok(text) = String::from_utf8(body) {
            snap.insert_file(path, split_lines(&text))?;
        }
    }
    feeder
        .join()
        .map_err(|_| MinerError::Git("cat-file feeder panicked".into()))?
        .map_err(|e| MinerError::Git(e.to_string()))?;
    child.wait().map_err(|e| MinerError::Git(e.to_string()))?;
    Ok(snap)
}

/// One commit: message, zero-context diff against its first parent, and
/// the parent's tree.
pub fn read_commit(repo: &Path, sha: &str) -> Result<CommitRecord, MinerError> {
    let message = git_text(repo, &["show", "-s", "--format=%B", sha])?.trim_end().to_owned();
    let diff = String::from_utf8_lossy(&git(repo, &["show", "--format=", "--no-color", "-U0", "-M", "--first-parent", sha])?)
        .into_owned();
    let files = parse_unified_diff(&diff).map_err(|e| MinerError::Diff {
        commit: sha.to_owned(),
        source: e,
    })?;
    let parents = git_text(repo, &["rev-list", "--parents", "-n", "1", sha])?;
    let snapshot_before = if parents.split_whitespace().count() > 1 {
        tree_snapshot(repo, &format!("{sha}^"))?
    } else {
        ProjectSnapshot::new(repo_name(repo))
    };
    let mut hunks = Vec::new();
    let mut skipped = Vec::new();
    for f in files {
        match f {
            FileDiff::Patched { hunks: h, .. } => hunks.extend(h),
            FileDiff::Skipped { path, reason } => skipped.push((path, reason)),
        }
    }
    Ok(CommitRecord {
        commit_id: sha.to_owned(),
        message,
        hunks,
        skipped,
        snapshot_before,
    })
}
