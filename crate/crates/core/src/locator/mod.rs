//! Per-line edit-type prediction over sliding code windows.
//!
//! Each file is cut into overlapping windows; every window is serialized with
//! the prompt and the selected prior edits and handed to a [`LineLabeler`].
//! Overlapping predictions are merged by confidence.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::model::{EditType, Prompt};
use crate::relevance::RankedPrior;
use crate::tokenize::{is_identifier, jaccard, token_set, tokenize};
use crate::wire::{BackendError, WireClient};

pub const CODE_WINDOW: &str = "<code-window>";
pub const MASK: &str = "<MASK>";
pub const PROMPT: &str = "<prompt>";
pub const PRIOR_EDITS: &str = "<prior-edits>";
pub const TO: &str = "<to>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocatorError {
    #[error("window {path}:{start_line} needs {needed} tokens, budget is {budget}")]
    WindowTooLarge {
        path: String,
        start_line: usize,
        needed: usize,
        budget: usize,
    },
    #[error("invalid locator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocatorConfig {
    pub window_size: usize,
    pub stride: usize,
    /// Token budget of one serialized window input.
    pub max_input_tokens: usize,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        LocatorConfig {
            window_size: 40,
            stride: 20,
            max_input_tokens: 512,
        }
    }
}

impl LocatorConfig {
    pub fn validate(&self) -> Result<(), LocatorError> {
        if self.window_size == 0 || self.stride == 0 || self.stride > self.window_size {
            return Err(LocatorError::InvalidConfig(format!(
                "need 0 < stride <= window_size, got stride {} window {}",
                self.stride, self.window_size
            )));
        }
        if self.max_input_tokens < 2 {
            return Err(LocatorError::InvalidConfig("max_input_tokens must be at least 2".into()));
        }
        Ok(())
    }
}

/// A run of consecutive lines of one file; `start_line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeWindow {
    pub file_path: String,
    pub start_line: usize,
    pub lines: Vec<String>,
}

impl CodeWindow {
    pub fn end_line(&self) -> usize {
        self.start_line + self.lines.len() - 1
    }
}

/// Windows of `size` lines every `stride` lines; the last window ends at the
/// end of the file, so each line is covered at least once.
pub fn make_windows(path: &str, lines: &[String], size: usize, stride: usize) -> Vec<CodeWindow> {
    let mut out = Vec::new();
    if lines.is_empty() || size == 0 || stride == 0 {
        return out;
    }
    let mut start = 0usize;
    loop {
        let end = (start + size).min(lines.len());
        out.push(CodeWindow {
            file_path: path.to_owned(),
            start_line: start + 1,
            lines: lines[start..end].to_vec(),
        });
        if end == lines.len() {
            break;
        }
        start += stride;
    }
    out
}

/// A serialized window plus what went into it. `priors` are the priors that
/// survived truncation, most relevant first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocatorInput {
    pub window: CodeWindow,
    pub prompt: Prompt,
    pub priors: Vec<RankedPrior>,
    pub tokens: Vec<String>,
}

pub(crate) fn prior_tokens(p: &RankedPrior) -> Vec<String> {
    let e = &p.prior.edit;
    let mut t = vec![PRIOR_EDITS.to_owned(), e.edit_type.tag().to_owned()];
    t.extend(e.before_code.iter().flat_map(|l| tokenize(l)).map(str::to_owned));
    t.push(TO.to_owned());
    t.extend(e.after_code.iter().flat_map(|l| tokenize(l)).map(str::to_owned));
    t
}

/// Appends the prompt and as many priors as fit after an already built
/// window section. Priors arrive most relevant first; the least relevant are
/// dropped first, then the prompt is cut. Returns the kept priors.
pub(crate) fn append_context(
    tokens: &mut Vec<String>,
    prompt: &Prompt,
    priors: &[RankedPrior],
    budget: usize,
    always_prompt_tag: bool,
) -> Vec<RankedPrior> {
    let prompt_toks: Vec<String> = tokenize(prompt.as_str()).into_iter().map(str::to_owned).collect();
    let with_tag = always_prompt_tag || !prompt_toks.is_empty();
    let tag_cost = usize::from(with_tag);
    let mut free = budget.saturating_sub(tokens.len() + tag_cost);

    let prior_toks: Vec<Vec<String>> = priors.iter().map(prior_tokens).collect();
    // keep the longest relevance-ordered prefix of priors that fits
    let mut kept = 0;
    let mut prior_cost = 0;
    for p in &prior_toks {
        if prior_cost + p.len() > free {
            break;
        }
        prior_cost += p.len();
        kept += 1;
    }
    free -= prior_cost;

    if with_tag {
        tokens.push(PROMPT.to_owned());
        tokens.extend(prompt_toks.into_iter().take(free));
    }
    for p in &prior_toks[..kept] {
        tokens.extend(p.iter().cloned());
    }
    priors[..kept].to_vec()
}

/// Serializes one window: `<code-window>`, then `<MASK>` plus the tokens of
/// each line, then `<prompt>` and its tokens, then one
/// `<prior-edits> <tag> before <to> after` group per prior.
pub fn serialize_locator_input(
    window: &CodeWindow,
    prompt: &Prompt,
    priors: &[RankedPrior],
    budget: usize,
) -> Result<LocatorInput, LocatorError> {
    let mut tokens = vec![CODE_WINDOW.to_owned()];
    for line in &window.lines {
        tokens.push(MASK.to_owned());
        tokens.extend(tokenize(line).into_iter().map(str::to_owned));
    }
    if tokens.len() + 1 > budget {
        return Err(LocatorError::WindowTooLarge {
            path: window.file_path.clone(),
            start_line: window.start_line,
            needed: tokens.len() + 1,
            budget,
        });
    }
    let kept = append_context(&mut tokens, prompt, priors, budget, true);
    Ok(LocatorInput {
        window: window.clone(),
        prompt: prompt.clone(),
        priors: kept,
        tokens,
    })
}

/// Label for one line with class probabilities `[keep, insert, replace]`.
/// An `Insert` label on line `n` means new content goes after line `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePrediction {
    pub line: usize,
    pub label: EditType,
    pub confidence: [f64; 3],
}

impl LinePrediction {
    pub fn top_confidence(&self) -> f64 {
        self.confidence[self.label.index()]
    }
}

/// Labels every line of a serialized window.
pub trait LineLabeler: Send + Sync {
    fn label(&self, input: &LocatorInput) -> Result<Vec<LinePrediction>, BackendError>;

    /// Whether calls must not overlap.
    fn single_flight(&self) -> bool {
        false
    }
}

/// Similarity rules standing in for a learned labeler. A line is labeled
/// `Replace` when it resembles a line some `Replace` prior rewrote, and
/// `Insert` when its surroundings resemble the place some `Insert` prior
/// inserted at. Adding priors can only raise the similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicLabeler {
    pub theta_replace: f64,
    pub theta_insert: f64,
}

impl Default for HeuristicLabeler {
    fn default() -> Self {
        HeuristicLabeler {
            theta_replace: 0.5,
            theta_insert: 0.6,
        }
    }
}

type TokSet = std::collections::BTreeSet<String>;

fn has_identifier(s: &TokSet) -> bool {
    s.iter().any(|t| is_identifier(t))
}

/// Jaccard, but only counted when the two share at least one identifier, so
/// that lines of pure punctuation never match.
fn anchored_jaccard(a: &TokSet, b: &TokSet) -> f64 {
    if a.intersection(b).any(|t| is_identifier(t)) {
        jaccard(a, b)
    } else {
        0.0
    }
}

impl HeuristicLabeler {
    /// `(sigma_replace, sigma_insert)` of every window line.
    pub fn similarities(&self, input: &LocatorInput) -> Vec<(f64, f64)> {
        let mut replace_lines: Vec<TokSet> = Vec::new();
        let mut insert_ctx: Vec<(TokSet, TokSet)> = Vec::new();
        for p in &input.priors {
            let e = &p.prior.edit;
            match e.edit_type {
                EditType::Replace => {
                    replace_lines.extend(e.before_code.iter().map(|l| token_set(&[l])).filter(has_identifier))
                }
                EditType::Insert => {
                    let prev = p.prior.context_before.last().map(|l| token_set(&[l])).unwrap_or_default();
                    let mut pair = prev.clone();
                    if let Some(next) = p.prior.context_after.first() {
                        pair.extend(token_set(&[next]));
                    }
                    if has_identifier(&pair) {
                        insert_ctx.push((prev, pair));
                    }
                }
                EditType::Keep => {}
            }
        }
        let lines = &input.window.lines;
        let sets: Vec<TokSet> = lines.iter().map(|l| token_set(&[l])).collect();
        (0..lines.len())
            .map(|i| {
                let own = &sets[i];
                let sr = replace_lines.iter().map(|b| anchored_jaccard(own, b)).fold(0.0, f64::max);
                let mut pair = own.clone();
                if let Some(next) = sets.get(i + 1) {
                    pair.extend(next.iter().cloned());
                }
                let si = insert_ctx
                    .iter()
                    .map(|(prev, ctx)| anchored_jaccard(own, prev).max(anchored_jaccard(&pair, ctx)))
                    .fold(0.0, f64::max);
                (sr, si)
            })
            .collect()
    }

    pub fn classify(&self, sr: f64, si: f64) -> (EditType, [f64; 3]) {
        if sr >= self.theta_replace && sr >= si {
            let rest = (1.0 - sr) / 2.0;
            (EditType::Replace, [rest, rest, sr])
        } else if si >= self.theta_insert {
            let rest = (1.0 - si) / 2.0;
            (EditType::Insert, [rest, si, rest])
        } else {
            // both similarities are below the thresholds (< 2/3), so keep
            // stays the argmax
            let m = sr.max(si);
            (EditType::Keep, [1.0 - m, m / 2.0, m / 2.0])
        }
    }
}

impl LineLabeler for HeuristicLabeler {
    fn label(&self, input: &LocatorInput) -> Result<Vec<LinePrediction>, BackendError> {
        Ok(self
            .similarities(input)
            .into_iter()
            .enumerate()
            .map(|(i, (sr, si))| {
                let (label, confidence) = self.classify(sr, si);
                LinePrediction {
                    line: input.window.start_line + i,
                    label,
                    confidence,
                }
            })
            .collect())
    }
}

/// Labeler served over the wire protocol (`line_label` task). The backend
/// gets the serialized tokens and the line count and answers with one
/// `[keep, insert, replace]` probability triple per line.
pub struct ExternalLabeler {
    client: Arc<WireClient>,
    single_flight: bool,
}

impl ExternalLabeler {
    pub fn new(client: Arc<WireClient>, single_flight: bool) -> Self {
        ExternalLabeler { client, single_flight }
    }
}

pub(crate) fn parse_probs(v: &Value, lines: usize) -> Result<Vec<[f64; 3]>, BackendError> {
    let bad = |m: &str| BackendError::Unavailable(format!("malformed line_label response: {m}"));
    let rows = v.get("probs").and_then(Value::as_array).ok_or_else(|| bad("missing probs"))?;
    if rows.len() != lines {
        return Err(bad("wrong number of rows"));
    }
    rows.iter()
        .map(|r| {
            let r = r.as_array().filter(|r| r.len() == 3).ok_or_else(|| bad("row is not a triple"))?;
            let mut p = [0.0; 3];
            for (slot, x) in p.iter_mut().zip(r) {
                *slot = x.as_f64().filter(|x| (0.0..=1.0).contains(x)).ok_or_else(|| bad("probability out of range"))?;
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                return Err(bad("row does not sum to 1"));
            }
            Ok(p)
        })
        .collect()
}

fn argmax(p: &[f64; 3]) -> EditType {
    let mut best = 0;
    for i in 1..3 {
        if p[i] > p[best] {
            best = i;
        }
    }
    EditType::from_index(best).unwrap_or(EditType::Keep)
}

impl LineLabeler for ExternalLabeler {
    fn label(&self, input: &LocatorInput) -> Result<Vec<LinePrediction>, BackendError> {
        let mut payload = Map::new();
        payload.insert("tokens".into(), json!(input.tokens));
        payload.insert("lines".into(), json!(input.window.lines.len()));
        let v = self.client.call("line_label", payload)?;
        Ok(parse_probs(&v, input.window.lines.len())?
            .into_iter()
            .enumerate()
            .map(|(i, confidence)| LinePrediction {
                line: input.window.start_line + i,
                label: argmax(&confidence),
                confidence,
            })
            .collect())
    }

    fn single_flight(&self) -> bool {
        self.single_flight
    }
}

fn merge_rank(label: EditType) -> u8 {
    match label {
        EditType::Keep => 2,
        EditType::Replace => 1,
        EditType::Insert => 0,
    }
}

/// Order used when two windows disagree about a line: higher confidence
/// wins, ties go to keep, then replace.
fn merge_cmp(a: &LinePrediction, b: &LinePrediction) -> Ordering {
    a.top_confidence()
        .total_cmp(&b.top_confidence())
        .then(merge_rank(a.label).cmp(&merge_rank(b.label)))
        .then_with(|| {
            a.confidence
                .iter()
                .zip(&b.confidence)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// One prediction per line, independent of the order windows are visited.
pub fn merge_predictions(preds: impl IntoIterator<Item = LinePrediction>) -> Vec<LinePrediction> {
    let mut best: BTreeMap<usize, LinePrediction> = BTreeMap::new();
    for p in preds {
        match best.get(&p.line) {
            Some(cur) if merge_cmp(&p, cur) != Ordering::Greater => {}
            _ => {
                best.insert(p.line, p);
            }
        }
    }
    best.into_values().collect()
}

/// Chooses the priors shown with one window.
pub type PriorSource<'a> = dyn Fn(&CodeWindow) -> Result<Vec<RankedPrior>, BackendError> + Sync + 'a;

fn label_window(
    window: &CodeWindow,
    prompt: &Prompt,
    priors: &PriorSource<'_>,
    cfg: &LocatorConfig,
    labeler: &dyn LineLabeler,
) -> Result<Vec<LinePrediction>, LocatorError> {
    let chosen = priors(window)?;
    match serialize_locator_input(window, prompt, &chosen, cfg.max_input_tokens) {
        Ok(input) => {
            let preds = labeler.label(&input)?;
            if preds.len() != window.lines.len() {
                return Err(BackendError::Unavailable(format!(
                    "labeler returned {} predictions for {} lines",
                    preds.len(),
                    window.lines.len()
                ))
                .into());
            }
            Ok(preds)
        }
        // a window of long lines is split until each half fits
        Err(LocatorError::WindowTooLarge { .. }) if window.lines.len() > 1 => {
            let mid = window.lines.len() / 2;
            let left = CodeWindow {
                file_path: window.file_path.clone(),
                start_line: window.start_line,
                lines: window.lines[..mid].to_vec(),
            };
            let right = CodeWindow {
                file_path: window.file_path.clone(),
                start_line: window.start_line + mid,
                lines: window.lines[mid..].to_vec(),
            };
            let mut out = label_window(&left, prompt, priors, cfg, labeler)?;
            out.extend(label_window(&right, prompt, priors, cfg, labeler)?);
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// Labels every line of one file, showing the same priors to every window.
pub fn label_file(
    path: &str,
    lines: &[String],
    prompt: &Prompt,
    priors: &[RankedPrior],
    cfg: &LocatorConfig,
    labeler: &dyn LineLabeler,
) -> Result<Vec<LinePrediction>, LocatorError> {
    label_file_with(path, lines, prompt, cfg, labeler, &|_: &CodeWindow| Ok(priors.to_vec()))
}

/// Labels every line of one file, choosing priors per window.
pub fn label_file_with(
    path: &str,
    lines: &[String],
    prompt: &Prompt,
    cfg: &LocatorConfig,
    labeler: &dyn LineLabeler,
    priors: &PriorSource<'_>,
) -> Result<Vec<LinePrediction>, LocatorError> {
    cfg.validate()?;
    let windows = make_windows(path, lines, cfg.window_size, cfg.stride);
    let per_window: Vec<Vec<LinePrediction>> = if labeler.single_flight() {
        windows
            .iter()
            .map(|w| label_window(w, prompt, priors, cfg, labeler))
            .collect::<Result<_, _>>()?
    } else {
        windows
            .par_iter()
            .map(|w| label_window(w, prompt, priors, cfg, labeler))
            .collect::<Result<_, _>>()?
    };
    Ok(merge_predictions(per_window.into_iter().flatten()))
}
