//! Unified diff (GNU/git flavor) parsing and rendering.
//!
//! Each maximal run of changed lines inside an `@@` region becomes one
//! [`Hunk`]; context lines are dropped and the hunk's line numbers are
//! recomputed from the region header. With zero-context diffs (`-U0`, what
//! the miner requests) this is exactly one hunk per `@@` region.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::types::{normalize_path, Hunk};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Rename,
    Binary,
}

/// One file entry of a parsed diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FileDiff {
    Patched { path: String, hunks: Vec<Hunk> },
    Skipped { path: String, reason: SkipReason },
}

impl FileDiff {
    pub fn path(&self) -> &str {
        match self {
            FileDiff::Patched { path, .. } | FileDiff::Skipped { path, .. } => path,
        }
    }
}

#[derive(Default)]
struct FileBlock {
    git_source: Option<String>,
    git_target: Option<String>,
    old_path: Option<String>,
    new_path: Option<String>,
    skipped: Option<SkipReason>,
    hunks: Vec<Hunk>,
    saw_header: bool,
}

impl FileBlock {
    fn path(&self) -> Option<String> {
        self.new_path
            .clone()
            .or_else(|| self.old_path.clone())
            .or_else(|| self.git_target.clone())
            .or_else(|| self.git_source.clone())
    }

    fn is_empty(&self) -> bool {
        !self.saw_header && self.git_source.is_none() && self.skipped.is_none()
    }
}

fn strip_prefix_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == "/dev/null" {
        return None;
    }
    let p = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(p.to_owned())
}

fn parse_range(s: &str, line_no: usize) -> Result<(usize, usize), ModelError> {
    let bad = |what: &str| ModelError::MalformedDiff {
        line_no,
        reason: format!("bad range {what:?}"),
    };
    let (start, count) = match s.split_once(',') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    };
    let start: usize = start.parse().map_err(|_| bad(s))?;
    let count: usize = match count {
        Some(c) => c.parse().map_err(|_| bad(s))?,
        None => 1,
    };
    Ok((start, count))
}

fn parse_hunk_header(line: &str, line_no: usize) -> Result<(usize, usize, usize, usize), ModelError> {
    let malformed = |reason: &str| ModelError::MalformedDiff {
        line_no,
        reason: reason.to_owned(),
    };
    let rest = line.strip_prefix("@@ ").ok_or_else(|| malformed("expected @@ header"))?;
    let end = rest.find(" @@").ok_or_else(|| malformed("unterminated @@ header"))?;
    let mut parts = rest[..end].split_whitespace();
    let old = parts
        .next()
        .and_then(|p| p.strip_prefix('-'))
        .ok_or_else(|| malformed("missing old range"))?;
    let new = parts
        .next()
        .and_then(|p| p.strip_prefix('+'))
        .ok_or_else(|| malformed("missing new range"))?;
    if parts.next().is_some() {
        return Err(malformed("combined diffs are not supported"));
    }
    let (os, oc) = parse_range(old, line_no)?;
    let (ns, nc) = parse_range(new, line_no)?;
    Ok((os, oc, ns, nc))
}

struct Group {
    before_start: usize,
    after_start: usize,
    before: Vec<String>,
    after: Vec<String>,
}

impl Group {
    fn into_hunk(self, path: &str) -> Hunk {
        Hunk {
            file_path: path.to_owned(),
            before_start: if self.before.is_empty() { self.before_start - 1 } else { self.before_start },
            before_lines: self.before,
            after_start: if self.after.is_empty() { self.after_start - 1 } else { self.after_start },
            after_lines: self.after,
        }
    }
}

/// Parses unified diff text into per-file hunk lists.
///
/// Renames and binary files come back as [`FileDiff::Skipped`]. Header/count
/// inconsistencies and overlapping hunks are [`ModelError::MalformedDiff`].
pub fn parse_unified_diff(diff_text: &str) -> Result<Vec<FileDiff>, ModelError> {
    let lines: Vec<&str> = diff_text.lines().collect();
    let mut out = Vec::new();
    let mut block = FileBlock::default();
    let mut i = 0;

    while i < lines.len() {
        let line = lines[i];
        let line_no = i + 1;

        if let Some(rest) = line.strip_prefix("diff --git ") {
            flush(&mut block, &mut out, line_no)?;
            if let Some((a, b)) = rest.split_once(" b/") {
                block.git_source = strip_prefix_path(a);
                block.git_target = strip_prefix_path(&format!("b/{b}"));
            }
            block.saw_header = true;
            i += 1;
            continue;
        }
        if line.starts_with("rename from ") || line.starts_with("rename to ") || line.starts_with("copy from ") {
            block.skipped = Some(SkipReason::Rename);
            i += 1;
            continue;
        }
        if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
            block.skipped = Some(SkipReason::Binary);
            i += 1;
            continue;
        }
        if let Some(rest) = line.strip_prefix("--- ") {
            if block.saw_header && (block.old_path.is_some() || block.new_path.is_some() || !block.hunks.is_empty()) {
                flush(&mut block, &mut out, line_no)?;
            }
            block.saw_header = true;
            block.old_path = strip_prefix_path(rest);
            i += 1;
            let next = lines.get(i).copied().unwrap_or("");
            let Some(rest) = next.strip_prefix("+++ ") else {
                return Err(ModelError::MalformedDiff {
                    line_no: i + 1,
                    reason: "--- header without +++".into(),
                });
            };
            block.new_path = strip_prefix_path(rest);
            i += 1;
            continue;
        }
        if line.starts_with("@@ ") {
            let path = block.path().ok_or_else(|| ModelError::MalformedDiff {
                line_no,
                reason: "hunk before any file header".into(),
            })?;
            let (os, oc, ns, nc) = parse_hunk_header(line, line_no)?;
            i += 1;
            i = parse_hunk_body(&lines, i, &path, (os, oc, ns, nc), &mut block.hunks)?;
            continue;
        }
        // index/mode/similarity lines and stray text between files
        i += 1;
    }
    flush(&mut block, &mut out, lines.len())?;
    Ok(out)
}

fn parse_hunk_body(
    lines: &[&str],
    mut i: usize,
    path: &str,
    (os, oc, ns, nc): (usize, usize, usize, usize),
    hunks: &mut Vec<Hunk>,
) -> Result<usize, ModelError> {
    let header_line = i;
    // Numbering of the next old/new line to be consumed. A zero count means
    // the start names the line before the (empty) range.
    let mut old_pos = if oc == 0 { os + 1 } else { os };
    let mut new_pos = if nc == 0 { ns + 1 } else { ns };
    let (mut old_left, mut new_left) = (oc, nc);
    let mut group: Option<Group> = None;

    while old_left > 0 || new_left > 0 {
        let Some(&raw) = lines.get(i) else {
            return Err(ModelError::MalformedDiff {
                line_no: header_line,
                reason: format!("hunk truncated: {old_left} old and {new_left} new lines missing"),
            });
        };
        let line_no = i + 1;
        let (tag, body) = match raw.chars().next() {
            Some(c @ (' ' | '-' | '+' | '\\')) => (c, &raw[1..]),
            None => (' ', ""),
            Some(_) => {
                return Err(ModelError::MalformedDiff {
                    line_no,
                    reason: "unexpected line inside hunk".into(),
                })
            }
        };
        match tag {
            ' ' => {
                if old_left == 0 || new_left == 0 {
                    return Err(ModelError::MalformedDiff {
                        line_no,
                        reason: "context line exceeds hunk counts".into(),
                    });
                }
                if let Some(g) = group.take() {
                    hunks.push(g.into_hunk(path));
                }
                old_left -= 1;
                new_left -= 1;
                old_pos += 1;
                new_pos += 1;
            }
            '-' => {
                if old_left == 0 {
                    return Err(ModelError::MalformedDiff {
                        line_no,
                        reason: "removed line exceeds hunk count".into(),
                    });
                }
                let g = group.get_or_insert_with(|| Group {
                    before_start: old_pos,
                    after_start: new_pos,
                    before: vec![],
                    after: vec![],
                });
                g.before.push(body.to_owned());
                old_left -= 1;
                old_pos += 1;
            }
            '+' => {
                if new_left == 0 {
                    return Err(ModelError::MalformedDiff {
                        line_no,
                        reason: "added line exceeds hunk count".into(),
                    });
                }
                let g = group.get_or_insert_with(|| Group {
                    before_start: old_pos,
                    after_start: new_pos,
                    before: vec![],
                    after: vec![],
                });
                g.after.push(body.to_owned());
                new_left -= 1;
                new_pos += 1;
            }
            _ => {} // "\ No newline at end of file"
        }
        i += 1;
    }
    if let Some(g) = group.take() {
        hunks.push(g.into_hunk(path));
    }
    while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
        i += 1;
    }
    Ok(i)
}

fn flush(block: &mut FileBlock, out: &mut Vec<FileDiff>, line_no: usize) -> Result<(), ModelError> {
    let b = std::mem::take(block);
    if b.is_empty() {
        return Ok(());
    }
    let Some(raw) = b.path() else {
        return Ok(());
    };
    let path = normalize_path(&raw).map_err(|_| ModelError::MalformedDiff {
        line_no,
        reason: format!("invalid path {raw:?}"),
    })?;
    if let Some(reason) = b.skipped {
        out.push(FileDiff::Skipped { path, reason });
        return Ok(());
    }
    let mut hunks = b.hunks;
    for h in &mut hunks {
        h.file_path = path.clone();
    }
    check_no_overlap(&hunks).map_err(|reason| ModelError::MalformedDiff { line_no, reason })?;
    out.push(FileDiff::Patched { path, hunks });
    Ok(())
}

/// Rejects hunk sets whose before-ranges intersect, or where an insertion
/// lands strictly inside another hunk's replaced lines.
pub fn check_no_overlap(hunks: &[Hunk]) -> Result<(), String> {
    for (i, a) in hunks.iter().enumerate() {
        for b in &hunks[i + 1..] {
            if a.file_path != b.file_path {
                continue;
            }
            let clash = match (a.before_range(), b.before_range()) {
                (Some((a0, a1)), Some((b0, b1))) => a0 <= b1 && b0 <= a1,
                (None, Some((b0, b1))) => b0 <= a.before_start && a.before_start < b1,
                (Some((a0, a1)), None) => a0 <= b.before_start && b.before_start < a1,
                (None, None) => a.before_start == b.before_start,
            };
            if clash {
                return Err(format!(
                    "overlapping hunks in {} at before-lines {} and {}",
                    a.file_path, a.before_start, b.before_start
                ));
            }
        }
    }
    Ok(())
}

/// Renders hunks as a zero-context unified diff, one file section per entry.
pub fn render_unified_diff(files: &[(String, Vec<Hunk>)]) -> String {
    let mut out = String::new();
    for (path, hunks) in files {
        let _ = writeln!(out, "diff --git a/{path} b/{path}");
        let _ = writeln!(out, "--- a/{path}");
        let _ = writeln!(out, "+++ b/{path}");
        for h in hunks {
            let _ = writeln!(
                out,
                "@@ -{},{} +{},{} @@",
                h.before_start,
                h.before_lines.len(),
                h.after_start,
                h.after_lines.len()
            );
            for l in &h.before_lines {
                let _ = writeln!(out, "-{l}");
            }
            for l in &h.after_lines {
                let _ = writeln!(out, "+{l}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only_hunks(d: &[FileDiff]) -> Vec<Hunk> {
        d.iter()
            .flat_map(|f| match f {
                FileDiff::Patched { hunks, .. } => hunks.clone(),
                FileDiff::Skipped { .. } => vec![],
            })
            .collect()
    }

    #[test]
    fn replace_two_with_three() {
        let diff = "--- a/x.go\n+++ b/x.go\n@@ -3,2 +3,3 @@\n-a\n-b\n+c\n+d\n+e\n";
        let h = only_hunks(&parse_unified_diff(diff).unwrap());
        assert_eq!(h.len(), 1);
        assert_eq!((h[0].before_start, h[0].before_lines.len()), (3, 2));
        assert_eq!((h[0].after_start, h[0].after_lines.len()), (3, 3));
    }

    #[test]
    fn pure_insert_header() {
        let diff = "--- a/x.go\n+++ b/x.go\n@@ -10,0 +11,1 @@\n+new\n";
        let h = only_hunks(&parse_unified_diff(diff).unwrap());
        assert_eq!(h[0].before_lines.len(), 0);
        assert_eq!(h[0].before_start, 10);
        assert_eq!(h[0].after_start, 11);
    }

    #[test]
    fn context_is_dropped_and_groups_split() {
        let diff = "\
--- a/f.txt
+++ b/f.txt
@@ -1,6 +1,6 @@
 one
-two
+TWO
 three
 four
-five
+FIVE
 six
";
        let h = only_hunks(&parse_unified_diff(diff).unwrap());
        assert_eq!(h.len(), 2);
        assert_eq!((h[0].before_start, h[0].after_start), (2, 2));
        assert_eq!((h[1].before_start, h[1].after_start), (5, 5));
        assert_eq!(h[1].before_lines, vec!["five"]);
    }

    #[test]
    fn count_mismatch_is_malformed() {
        let diff = "--- a/x\n+++ b/x\n@@ -1,2 +1,1 @@\n-a\n+b\n";
        assert!(matches!(
            parse_unified_diff(diff),
            Err(ModelError::MalformedDiff { .. })
        ));
        let garbage = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n*a\n";
        assert!(parse_unified_diff(garbage).is_err());
        let bad_header = "--- a/x\n+++ b/x\n@@ -x +1 @@\n";
        assert!(parse_unified_diff(bad_header).is_err());
    }

    #[test]
    fn overlapping_hunks_rejected() {
        let diff = "--- a/x\n+++ b/x\n@@ -2,2 +2,1 @@\n-a\n-b\n+c\n@@ -3,1 +3,1 @@\n-b\n+d\n";
        assert!(matches!(
            parse_unified_diff(diff),
            Err(ModelError::MalformedDiff { .. })
        ));
    }

    #[test]
    fn renames_and_binaries_skipped() {
        let diff = "\
diff --git a/old.go b/new.go
similarity index 100%
rename from old.go
rename to new.go
diff --git a/img.png b/img.png
index 1..2 100644
Binary files a/img.png and b/img.png differ
diff --git a/src/a.go b/src/a.go
--- a/src/a.go
+++ b/src/a.go
@@ -1 +1 @@
-x
+y
";
        let d = parse_unified_diff(diff).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(
            d[0],
            FileDiff::Skipped {
                path: "new.go".into(),
                reason: SkipReason::Rename
            }
        );
        assert!(matches!(d[1], FileDiff::Skipped { reason: SkipReason::Binary, .. }));
        assert_eq!(d[2].path(), "src/a.go");
    }

    #[test]
    fn new_and_deleted_files() {
        let diff = "\
diff --git a/n.txt b/n.txt
new file mode 100644
--- /dev/null
+++ b/n.txt
@@ -0,0 +1,2 @@
+a
+b
diff --git a/d.txt b/d.txt
deleted file mode 100644
--- a/d.txt
+++ /dev/null
@@ -1 +0,0 @@
-gone
\\ No newline at end of file
";
        let d = parse_unified_diff(diff).unwrap();
        let h = only_hunks(&d);
        assert_eq!(h[0].file_path, "n.txt");
        assert_eq!((h[0].before_start, h[0].after_start), (0, 1));
        assert_eq!(h[1].file_path, "d.txt");
        assert_eq!((h[1].before_start, h[1].after_start), (1, 0));
    }

    #[test]
    fn render_then_parse_is_identity() {
        let hunks = vec![
            Hunk {
                file_path: "a/b.go".into(),
                before_start: 2,
                before_lines: vec!["x".into(), "".into()],
                after_start: 2,
                after_lines: vec!["y".into()],
            },
            Hunk {
                file_path: "a/b.go".into(),
                before_start: 9,
                before_lines: vec![],
                after_start: 9,
                after_lines: vec!["+plus".into(), "-minus".into()],
            },
        ];
        let text = render_unified_diff(&[("a/b.go".into(), hunks.clone())]);
        assert_eq!(only_hunks(&parse_unified_diff(&text).unwrap()), hunks);
    }
}
