use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Per-line edit operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EditType {
    #[serde(rename = "<K>")]
    Keep,
    #[serde(rename = "<I>")]
    Insert,
    #[serde(rename = "<R>")]
    Replace,
}

impl EditType {
    pub const ALL: [EditType; 3] = [EditType::Keep, EditType::Insert, EditType::Replace];

    /// The serialized tag, also used verbatim in model inputs.
    pub fn tag(self) -> &'static str {
        match self {
            EditType::Keep => "<K>",
            EditType::Insert => "<I>",
            EditType::Replace => "<R>",
        }
    }

    /// Position in class-probability vectors: keep, insert, replace.
    pub fn index(self) -> usize {
        match self {
            EditType::Keep => 0,
            EditType::Insert => 1,
            EditType::Replace => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<EditType> {
        EditType::ALL.get(i).copied()
    }
}

impl fmt::Display for EditType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EditType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "<K>" => Ok(EditType::Keep),
            "<I>" => Ok(EditType::Insert),
            "<R>" => Ok(EditType::Replace),
            other => Err(ModelError::InvalidEdit(format!("unknown edit type tag {other:?}"))),
        }
    }
}

/// One atomic code change: the code before and after, anchored in a file.
///
/// For `Replace`, `anchor_line` is the first replaced line. For `Insert` it is
/// the line the first inserted line will occupy, so the content goes after
/// line `anchor_line - 1` (0 meaning the head of the file).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edit {
    pub file_path: String,
    pub anchor_line: usize,
    pub edit_type: EditType,
    pub before_code: Vec<String>,
    pub after_code: Vec<String>,
}

impl Edit {
    pub fn insert(file_path: impl Into<String>, anchor_line: usize, after: Vec<String>) -> Result<Self, ModelError> {
        let e = Edit {
            file_path: file_path.into(),
            anchor_line,
            edit_type: EditType::Insert,
            before_code: Vec::new(),
            after_code: after,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn replace(
        file_path: impl Into<String>,
        anchor_line: usize,
        before: Vec<String>,
        after: Vec<String>,
    ) -> Result<Self, ModelError> {
        let e = Edit {
            file_path: file_path.into(),
            anchor_line,
            edit_type: EditType::Replace,
            before_code: before,
            after_code: after,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.anchor_line < 1 {
            return Err(ModelError::InvalidAnchor {
                path: self.file_path.clone(),
                anchor: self.anchor_line as i64,
            });
        }
        match self.edit_type {
            EditType::Insert if !self.before_code.is_empty() => {
                Err(ModelError::InvalidEdit("insert edit carries before_code".into()))
            }
            EditType::Insert if self.after_code.is_empty() => {
                Err(ModelError::InvalidEdit("insert edit has no content".into()))
            }
            EditType::Replace if self.before_code.is_empty() => {
                Err(ModelError::InvalidEdit("replace edit has empty before_code".into()))
            }
            EditType::Keep => Err(ModelError::InvalidEdit("keep is not an edit".into())),
            _ => Ok(()),
        }
    }

    /// Code that stands for this edit when scoring: the code before the edit,
    /// or the inserted code for a pure insertion.
    pub fn target_code(&self) -> &[String] {
        if self.before_code.is_empty() {
            &self.after_code
        } else {
            &self.before_code
        }
    }

    /// Line after which an insertion lands, or the first replaced line.
    pub fn label_line(&self) -> usize {
        match self.edit_type {
            EditType::Insert => self.anchor_line - 1,
            _ => self.anchor_line,
        }
    }

    /// Net change in file length after applying.
    pub fn line_delta(&self) -> isize {
        self.after_code.len() as isize - self.before_code.len() as isize
    }
}

/// An edit together with the unchanged lines around it in the file it was
/// made in. Pattern transfer aligns these contexts to adapt the edit to a new
/// location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextualEdit {
    pub edit: Edit,
    pub context_before: Vec<String>,
    pub context_after: Vec<String>,
}

impl ContextualEdit {
    /// Captures up to `c` lines on each side from the before-file.
    pub fn from_file(edit: Edit, file_lines: &[String], c: usize) -> Self {
        let first = edit.anchor_line.saturating_sub(1).min(file_lines.len());
        let lo = first.saturating_sub(c);
        let after_from = (first + edit.before_code.len()).min(file_lines.len());
        let hi = (after_from + c).min(file_lines.len());
        ContextualEdit {
            context_before: file_lines[lo..first].to_vec(),
            context_after: file_lines[after_from..hi].to_vec(),
            edit,
        }
    }

    /// Edit with no known surroundings.
    pub fn bare(edit: Edit) -> Self {
        ContextualEdit {
            edit,
            context_before: Vec::new(),
            context_after: Vec::new(),
        }
    }
}

/// A contiguous diff region in one file, with diff-header numbering: for a
/// pure insertion `before_start` is the line after which content is added,
/// and for a pure deletion `after_start` is the line after which content was
/// removed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hunk {
    pub file_path: String,
    pub before_start: usize,
    pub before_lines: Vec<String>,
    pub after_start: usize,
    pub after_lines: Vec<String>,
}

impl Hunk {
    pub fn is_pure_insert(&self) -> bool {
        self.before_lines.is_empty()
    }

    pub fn is_pure_delete(&self) -> bool {
        self.after_lines.is_empty()
    }

    pub fn edit_type(&self) -> EditType {
        if self.is_pure_insert() {
            EditType::Insert
        } else {
            EditType::Replace
        }
    }

    /// Largest side of the change, in lines.
    pub fn changed_lines(&self) -> usize {
        self.before_lines.len().max(self.after_lines.len())
    }

    /// Lines of the before-file covered by this hunk, as `first..=last`;
    /// `None` for a pure insertion.
    pub fn before_range(&self) -> Option<(usize, usize)> {
        if self.before_lines.is_empty() {
            None
        } else {
            Some((self.before_start, self.before_start + self.before_lines.len() - 1))
        }
    }

    pub fn to_edit(&self) -> Result<Edit, ModelError> {
        if self.before_lines.is_empty() && self.after_lines.is_empty() {
            return Err(ModelError::InvalidEdit("hunk with no changes".into()));
        }
        if self.is_pure_insert() {
            Edit::insert(self.file_path.clone(), self.before_start + 1, self.after_lines.clone())
        } else {
            Edit::replace(
                self.file_path.clone(),
                self.before_start,
                self.before_lines.clone(),
                self.after_lines.clone(),
            )
        }
    }
}

/// A run of whole lines of a file bounded by a token budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub file_path: String,
    pub start_line: usize,
    pub lines: Vec<String>,
    pub token_count: usize,
}

/// Free-text description accompanying an edit; may be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prompt(pub String);

impl Prompt {
    pub fn new(text: impl Into<String>) -> Self {
        Prompt(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.trim().is_empty()
    }
}

/// Files of a project at one point in time, keyed by normalized relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSnapshot {
    pub root: String,
    pub files: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub languages: BTreeMap<String, String>,
}

impl ProjectSnapshot {
    pub fn new(root: impl Into<String>) -> Self {
        ProjectSnapshot {
            root: root.into(),
            ..Default::default()
        }
    }

    /// Adds or replaces a file; the path is normalized first.
    pub fn insert_file(&mut self, path: &str, lines: Vec<String>) -> Result<String, ModelError> {
        let norm = normalize_path(path)?;
        if let Some(lang) = language_of(&norm) {
            self.languages.insert(norm.clone(), lang.to_owned());
        }
        self.files.insert(norm.clone(), lines);
        Ok(norm)
    }

    /// Builds a snapshot from `(path, text)` pairs.
    pub fn from_texts<'a, I>(root: &str, files: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut snap = ProjectSnapshot::new(root);
        for (path, text) in files {
            snap.insert_file(path, split_lines(text))?;
        }
        Ok(snap)
    }

    pub fn file(&self, path: &str) -> Option<&[String]> {
        self.files.get(path).map(Vec::as_slice)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

/// Splits text into lines without their terminators.
pub fn split_lines(text: &str) -> Vec<String> {
    text.lines().map(str::to_owned).collect()
}

/// Normalizes a relative path: forward slashes, no `.`/`..` components, no
/// leading slash.
pub fn normalize_path(path: &str) -> Result<String, ModelError> {
    let unified = path.replace('\\', "/");
    let mut parts: Vec<&str> = Vec::new();
    for part in unified.split('/') {
        match part {
            "" | "." => {}
            ".." => {
                if parts.pop().is_none() {
                    return Err(ModelError::InvalidPath(path.to_owned()));
                }
            }
            p => parts.push(p),
        }
    }
    if parts.is_empty() {
        return Err(ModelError::InvalidPath(path.to_owned()));
    }
    Ok(parts.join("/"))
}

fn language_of(path: &str) -> Option<&'static str> {
    let ext = path.rsplit_once('.')?.1;
    Some(match ext {
        "go" => "go",
        "rs" => "rust",
        "py" => "python",
        "js" | "jsx" | "mjs" => "javascript",
        "ts" | "tsx" => "typescript",
        "java" => "java",
        "c" | "h" => "c",
        "cc" | "cpp" | "hpp" => "cpp",
        _ => return None,
    })
}
