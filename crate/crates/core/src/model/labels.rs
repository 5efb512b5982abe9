use super::diff::check_no_overlap;
use super::types::{EditType, Hunk};
use super::ModelError;

/// Per-line labels a single hunk induces on its before-file.
///
/// Replaced lines are labeled `Replace`; a pure insertion yields one `Insert`
/// on the line after which the content goes (0 for the file head).
pub fn line_labels_from_hunk(h: &Hunk) -> Result<Vec<(usize, EditType)>, ModelError> {
    if h.before_lines.is_empty() && h.after_lines.is_empty() {
        return Err(ModelError::InvalidEdit("hunk with no changes".into()));
    }
    if h.is_pure_insert() {
        return Ok(vec![(h.before_start, EditType::Insert)]);
    }
    if h.before_start == 0 {
        return Err(ModelError::InvalidAnchor {
            path: h.file_path.clone(),
            anchor: h.before_start as i64 - 1,
        });
    }
    Ok((0..h.before_lines.len())
        .map(|k| (h.before_start + k, EditType::Replace))
        .collect())
}

/// Labels for every before-line of a file given the hunks touching it.
///
/// Index 0 is the synthetic head line (only ever `Keep` or `Insert`); index
/// `i` is line `i`. Lines no hunk touches are `Keep`. When an insertion lands
/// on a line another hunk replaces, `Replace` wins.
pub fn merge_file_labels(line_count: usize, hunks: &[Hunk]) -> Result<Vec<EditType>, ModelError> {
    check_no_overlap(hunks).map_err(|reason| ModelError::MalformedDiff { line_no: 0, reason })?;
    let mut labels = vec![EditType::Keep; line_count + 1];
    for h in hunks {
        for (line, ty) in line_labels_from_hunk(h)? {
            let slot = labels.get_mut(line).ok_or_else(|| ModelError::InvalidAnchor {
                path: h.file_path.clone(),
                anchor: line as i64,
            })?;
            *slot = match (*slot, ty) {
                (EditType::Replace, _) | (_, EditType::Replace) => EditType::Replace,
                (_, t) => t,
            };
        }
    }
    Ok(labels)
}
