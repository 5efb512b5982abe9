use super::types::{Edit, EditType, Hunk};
use super::ModelError;

/// Applies one edit to a file, returning the post-edit lines.
///
/// A `Replace` must find its `before_code` verbatim at the anchor; otherwise
/// the snapshot has drifted and the result is [`ModelError::StaleEdit`].
pub fn apply_edit(file_lines: &[String], e: &Edit) -> Result<Vec<String>, ModelError> {
    e.validate()?;
    let n = file_lines.len();
    let stale = |reason: String| ModelError::StaleEdit {
        path: e.file_path.clone(),
        anchor: e.anchor_line,
        reason,
    };
    match e.edit_type {
        EditType::Insert => {
            if e.anchor_line > n + 1 {
                return Err(stale(format!("insert anchor beyond end of {n}-line file")));
            }
            let at = e.anchor_line - 1;
            let mut out = Vec::with_capacity(n + e.after_code.len());
            out.extend_from_slice(&file_lines[..at]);
            out.extend(e.after_code.iter().cloned());
            out.extend_from_slice(&file_lines[at..]);
            Ok(out)
        }
        EditType::Replace => {
            let start = e.anchor_line - 1;
            let end = start + e.before_code.len();
            if end > n {
                return Err(stale(format!("replaced range ends past line {n}")));
            }
            if file_lines[start..end] != e.before_code[..] {
                return Err(stale("before_code does not match file content".into()));
            }
            let mut out = Vec::with_capacity(n + e.after_code.len() - e.before_code.len().min(n));
            out.extend_from_slice(&file_lines[..start]);
            out.extend(e.after_code.iter().cloned());
            out.extend_from_slice(&file_lines[end..]);
            Ok(out)
        }
        EditType::Keep => unreachable!("validate rejects keep"),
    }
}

/// Applies all hunks of one file that share before-file numbering (one
/// commit), bottom-up so earlier anchors stay valid.
pub fn apply_hunks(file_lines: &[String], hunks: &[Hunk]) -> Result<Vec<String>, ModelError> {
    let mut edits = hunks.iter().map(Hunk::to_edit).collect::<Result<Vec<_>, _>>()?;
    edits.sort_by_key(|e| std::cmp::Reverse((e.anchor_line, e.edit_type == EditType::Replace)));
    let mut cur = file_lines.to_vec();
    for e in &edits {
        cur = apply_edit(&cur, e)?;
    }
    Ok(cur)
}
