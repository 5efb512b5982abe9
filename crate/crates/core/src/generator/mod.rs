//! Hunk regions and ranked edit candidates.
//!
//! Located lines are grouped into regions (runs of `Replace` lines, or a
//! single `Insert` line), each serialized with its context, the prompt and
//! the selected priors. A generator backend proposes contents; candidates are
//! deduplicated, stripped of no-ops and ranked by confidence.

mod transfer;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::locator::{append_context, LinePrediction, CODE_WINDOW};
use crate::model::{Edit, EditType, ModelError, Prompt};
use crate::relevance::RankedPrior;
use crate::tokenize::{jaccard, token_set, tokenize, tokenize_lines};
use crate::wire::{BackendError, WireClient};
use transfer::{apply_script, indent_of, reindent, rename_line, rename_map, substitution_script};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("region {path}:{line} needs {needed} tokens, budget is {budget}")]
    RegionTooLarge {
        path: String,
        line: usize,
        needed: usize,
        budget: usize,
    },
    #[error("no prior edits to learn from and the backend cannot generate unconditionally")]
    NoCandidate,
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Unchanged lines shown on each side of a region.
    pub context_lines: usize,
    pub max_input_tokens: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            context_lines: 3,
            max_input_tokens: 512,
        }
    }
}

/// A contiguous group of lines to edit. For `Replace`, `start_line` is the
/// first replaced line and `target_lines` the lines to replace. For `Insert`,
/// content goes after `start_line` (0 for the file head) and `target_lines`
/// holds that line, if any.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HunkRegion {
    pub file_path: String,
    pub edit_type: EditType,
    pub start_line: usize,
    pub target_lines: Vec<String>,
    pub context_before: Vec<String>,
    pub context_after: Vec<String>,
}

impl HunkRegion {
    /// Last line the region occupies (the insertion point for `Insert`).
    pub fn end_line(&self) -> usize {
        match self.edit_type {
            EditType::Replace => self.start_line + self.target_lines.len() - 1,
            _ => self.start_line,
        }
    }

    /// The edit that writes `content` into this region.
    pub fn to_edit(&self, content: Vec<String>) -> Result<Edit, ModelError> {
        match self.edit_type {
            EditType::Insert => Edit::insert(&self.file_path, self.start_line + 1, content),
            _ => Edit::replace(&self.file_path, self.start_line, self.target_lines.clone(), content),
        }
    }

    fn build(path: &str, lines: &[String], edit_type: EditType, first: usize, last: usize, lo: usize, hi: usize) -> Self {
        // first..=last are 1-based; lo/hi bound the usable context (1-based, inclusive)
        let (t_lo, t_hi) = match edit_type {
            EditType::Insert if first == 0 => (0, 0),
            _ => (first - 1, last),
        };
        let ctx_lo = lo.saturating_sub(1).min(t_lo);
        HunkRegion {
            file_path: path.to_owned(),
            edit_type,
            start_line: first,
            target_lines: lines[t_lo..t_hi].to_vec(),
            context_before: lines[ctx_lo..t_lo].to_vec(),
            context_after: lines[t_hi..hi.max(t_hi)].to_vec(),
        }
    }
}

/// Groups non-keep predictions of one file into regions, with up to `c`
/// context lines on each side, clipped at the file and at neighbouring
/// regions.
pub fn group_regions(path: &str, lines: &[String], preds: &[LinePrediction], c: usize) -> Vec<HunkRegion> {
    let mut labeled: Vec<(usize, EditType)> = preds
        .iter()
        .filter(|p| p.label != EditType::Keep && p.line <= lines.len())
        .filter(|p| p.label == EditType::Insert || p.line >= 1)
        .map(|p| (p.line, p.label))
        .collect();
    labeled.sort();
    labeled.dedup_by_key(|x| x.0);

    // (type, first, last) with 1-based inclusive lines; an insert occupies its line
    let mut spans: Vec<(EditType, usize, usize)> = Vec::new();
    for (line, t) in labeled {
        match spans.last_mut() {
            Some((EditType::Replace, _, last)) if t == EditType::Replace && *last + 1 == line => *last = line,
            _ => spans.push((t, line, line)),
        }
    }
    let n = lines.len();
    (0..spans.len())
        .map(|i| {
            let (t, first, last) = spans[i];
            let prev_end = if i == 0 { 0 } else { spans[i - 1].2 };
            let next_start = spans.get(i + 1).map_or(n + 1, |s| s.1);
            let lo = first.saturating_sub(c).max(prev_end + 1);
            let hi = (last + c).min(next_start - 1).min(n);
            HunkRegion::build(path, lines, t, first, last, lo, hi)
        })
        .collect()
}

/// A serialized region plus the priors that survived truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInput {
    pub region: HunkRegion,
    pub prompt: Prompt,
    pub priors: Vec<RankedPrior>,
    pub tokens: Vec<String>,
}

/// Serializes a region: `<code-window>`, then each context line as `<K>` and
/// each target line with the region's tag, followed by its tokens; then the
/// prompt (omitted when empty) and the priors. Priors are dropped least
/// relevant first, then the prompt is cut; the region itself never is.
pub fn serialize_generator_input(
    region: &HunkRegion,
    prompt: &Prompt,
    priors: &[RankedPrior],
    budget: usize,
) -> Result<GeneratorInput, GenerateError> {
    let mut tokens = vec![CODE_WINDOW.to_owned()];
    let mut push = |tag: &str, line: &str| {
        tokens.push(tag.to_owned());
        tokens.extend(tokenize(line).into_iter().map(str::to_owned));
    };
    for l in &region.context_before {
        push(EditType::Keep.tag(), l);
    }
    if region.target_lines.is_empty() {
        push(region.edit_type.tag(), "");
    }
    for l in &region.target_lines {
        push(region.edit_type.tag(), l);
    }
    for l in &region.context_after {
        push(EditType::Keep.tag(), l);
    }
    if tokens.len() > budget {
        return Err(GenerateError::RegionTooLarge {
            path: region.file_path.clone(),
            line: region.start_line,
            needed: tokens.len(),
            budget,
        });
    }
    let kept = append_context(&mut tokens, prompt, priors, budget, false);
    Ok(GeneratorInput {
        region: region.clone(),
        prompt: prompt.clone(),
        priors: kept,
        tokens,
    })
}

/// Backend output before ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCandidate {
    pub lines: Vec<String>,
    pub confidence: f64,
}

/// A ranked proposal for a region's new content; ranks start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditCandidate {
    pub rank: usize,
    pub content: Vec<String>,
    pub confidence: f64,
}

pub trait EditGenerator: Send + Sync {
    /// Up to `k` (possibly more, possibly duplicate) proposals.
    fn generate(&self, input: &GeneratorInput, k: usize) -> Result<Vec<RawCandidate>, BackendError>;

    /// Whether the backend can propose anything without prior edits.
    fn unconditional(&self) -> bool {
        false
    }

    fn single_flight(&self) -> bool {
        false
    }
}

/// Replays prior edits at the region. A `Replace` prior yields its whole
/// after-code with identifiers renamed by aligning its before-code to the
/// region, and its in-line token substitutions applied to the region. An
/// `Insert` prior yields its inserted lines renamed by aligning its
/// surroundings with the region's. Each proposal carries the relevance of
/// the prior it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternTransfer {
    /// Token-set similarity between a prior's before-code and the region at
    /// which the whole-block proposal is preferred over in-line substitution.
    pub block_similarity: f64,
}

impl Default for PatternTransfer {
    fn default() -> Self {
        PatternTransfer { block_similarity: 0.5 }
    }
}

fn tokens_of(lines: &[String]) -> Vec<&str> {
    lines.iter().flat_map(|l| tokenize(l)).collect()
}

impl PatternTransfer {
    /// Proposals from one prior, best guess first.
    pub fn transfer(&self, prior: &RankedPrior, region: &HunkRegion) -> Vec<Vec<String>> {
        let e = &prior.prior.edit;
        match (e.edit_type, region.edit_type) {
            (EditType::Replace, EditType::Replace) => {
                let target = &region.target_lines;
                let map = rename_map(&tokens_of(&e.before_code), &tokens_of(target));
                let renamed: Vec<String> = e.after_code.iter().map(|l| rename_line(l, &map)).collect();
                let from = e.before_code.first().map_or("", |l| indent_of(l));
                let to = target.first().map_or("", |l| indent_of(l));
                let block = reindent(&renamed, from, to);
                let local = apply_script(target, &substitution_script(&e.before_code, &e.after_code), &map);
                let sim = jaccard(&token_set(&e.before_code), &token_set(target));
                let mut out = Vec::new();
                if sim >= self.block_similarity {
                    out.push(block);
                    out.extend(local);
                } else {
                    out.extend(local);
                    out.push(block);
                }
                out
            }
            (EditType::Insert, EditType::Insert) => {
                let ctx = &prior.prior;
                let mut from: Vec<&str> = Vec::new();
                let mut to: Vec<&str> = Vec::new();
                let prior_anchor = ctx.context_before.last().map(String::as_str).unwrap_or("");
                let region_anchor = region.target_lines.first().map(String::as_str).unwrap_or("");
                from.extend(tokenize(prior_anchor));
                to.extend(tokenize(region_anchor));
                if let (Some(a), Some(b)) = (ctx.context_after.first(), region.context_after.first()) {
                    from.extend(tokenize(a));
                    to.extend(tokenize(b));
                }
                let map = rename_map(&from, &to);
                let renamed: Vec<String> = e.after_code.iter().map(|l| rename_line(l, &map)).collect();
                vec![reindent(&renamed, indent_of(prior_anchor), indent_of(region_anchor))]
            }
            _ => Vec::new(),
        }
    }
}

impl EditGenerator for PatternTransfer {
    fn generate(&self, input: &GeneratorInput, _k: usize) -> Result<Vec<RawCandidate>, BackendError> {
        Ok(input
            .priors
            .iter()
            .flat_map(|p| {
                self.transfer(p, &input.region).into_iter().map(|lines| RawCandidate {
                    lines,
                    confidence: p.relevance,
                })
            })
            .collect())
    }
}

/// Generator served over the wire protocol (`generate` task).
pub struct ExternalGenerator {
    client: Arc<WireClient>,
    single_flight: bool,
}

impl ExternalGenerator {
    pub fn new(client: Arc<WireClient>, single_flight: bool) -> Self {
        ExternalGenerator { client, single_flight }
    }
}

fn parse_candidates(v: &Value) -> Result<Vec<RawCandidate>, BackendError> {
    let bad = |m: &str| BackendError::Unavailable(format!("malformed generate response: {m}"));
    let arr = v.get("candidates").ok_or_else(|| bad("missing candidates"))?;
    let raw: Vec<RawCandidate> = serde_json::from_value(arr.clone()).map_err(|e| bad(&e.to_string()))?;
    if raw.iter().any(|c| !c.confidence.is_finite()) {
        return Err(bad("non-finite confidence"));
    }
    Ok(raw)
}

impl EditGenerator for ExternalGenerator {
    fn generate(&self, input: &GeneratorInput, k: usize) -> Result<Vec<RawCandidate>, BackendError> {
        let mut payload = Map::new();
        payload.insert("tokens".into(), json!(input.tokens));
        payload.insert("k".into(), json!(k));
        parse_candidates(&self.client.call("generate", payload)?)
    }

    // a learned model can always decode something
    fn unconditional(&self) -> bool {
        true
    }

    fn single_flight(&self) -> bool {
        self.single_flight
    }
}

/// Whether writing `content` into `region` would leave the file unchanged.
pub fn is_noop(region: &HunkRegion, content: &[String]) -> bool {
    match region.edit_type {
        EditType::Insert => content.iter().all(|l| l.trim().is_empty()),
        _ => tokenize_lines(content) == tokenize_lines(&region.target_lines),
    }
}

/// Ranked, deduplicated candidates for one region; at most `k`, fewer when
/// the backend has fewer distinct ideas.
pub fn generate_candidates(
    region: &HunkRegion,
    prompt: &Prompt,
    priors: &[RankedPrior],
    k: usize,
    cfg: &GeneratorConfig,
    generator: &dyn EditGenerator,
) -> Result<Vec<EditCandidate>, GenerateError> {
    if k == 0 {
        return Err(GenerateError::InvalidK);
    }
    if priors.is_empty() && !generator.unconditional() {
        return Err(GenerateError::NoCandidate);
    }
    let input = serialize_generator_input(region, prompt, priors, cfg.max_input_tokens)?;
    let mut raw = generator.generate(&input, k)?;
    // stable: equal confidences keep the backend's order
    raw.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in raw {
        if is_noop(region, &c.lines) || !seen.insert(tokenize_lines(&c.lines)) {
            continue;
        }
        out.push(EditCandidate {
            rank: out.len() + 1,
            content: c.lines,
            confidence: c.confidence,
        });
        if out.len() == k {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ContextualEdit;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn pred(line: usize, label: EditType) -> LinePrediction {
        LinePrediction {
            line,
            label,
            confidence: [0.0, 0.0, 0.0],
        }
    }

    fn rp(e: Edit, rel: f64) -> RankedPrior {
        RankedPrior {
            prior: ContextualEdit::bare(e),
            relevance: rel,
        }
    }

    fn lines(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("l{i}")).collect()
    }

    #[test]
    fn regions_group_runs_and_clip_context() {
        let f = lines(12);
        let preds = [
            pred(2, EditType::Replace),
            pred(3, EditType::Replace),
            pred(5, EditType::Insert),
            pred(6, EditType::Keep),
            pred(11, EditType::Replace),
        ];
        let r = group_regions("f", &f, &preds, 3);
        assert_eq!(r.len(), 3);
        assert_eq!((r[0].start_line, r[0].target_lines.clone()), (2, v(&["l2", "l3"])));
        assert_eq!(r[0].context_before, v(&["l1"]));
        assert_eq!(r[0].context_after, v(&["l4"]));
        assert_eq!((r[1].edit_type, r[1].target_lines.clone()), (EditType::Insert, v(&["l5"])));
        assert_eq!(r[1].context_before, v(&["l4"]));
        assert_eq!(r[1].context_after, v(&["l6", "l7", "l8"]));
        assert_eq!(r[2].context_before, v(&["l8", "l9", "l10"]));
        assert_eq!(r[2].context_after, v(&["l12"]));
    }

    #[test]
    fn head_insert_region() {
        let r = group_regions("f", &lines(2), &[pred(0, EditType::Insert)], 3);
        assert_eq!(r[0].start_line, 0);
        assert!(r[0].target_lines.is_empty() && r[0].context_before.is_empty());
        assert_eq!(r[0].context_after, v(&["l1", "l2"]));
        assert_eq!(r[0].to_edit(v(&["x"])).unwrap().anchor_line, 1);
    }

    #[test]
    fn empty_prompt_serializes_region_only() {
        let r = &group_regions("f", &v(&["a", "b c"]), &[pred(2, EditType::Replace)], 3)[0];
        let input = serialize_generator_input(r, &Prompt::default(), &[], 64).unwrap();
        assert_eq!(input.tokens, v(&["<code-window>", "<K>", "a", "<R>", "b", "c"]));
        assert!(matches!(
            serialize_generator_input(r, &Prompt::default(), &[], 5),
            Err(GenerateError::RegionTooLarge { needed: 6, .. })
        ));
    }

    #[test]
    fn no_priors_no_candidates() {
        let r = &group_regions("f", &lines(3), &[pred(2, EditType::Replace)], 3)[0];
        let err = generate_candidates(r, &Prompt::default(), &[], 1, &GeneratorConfig::default(), &PatternTransfer::default());
        assert_eq!(err.unwrap_err(), GenerateError::NoCandidate);
    }

    #[test]
    fn identical_before_yields_after_verbatim() {
        let f = v(&["x := f(a)", "y := f(a)"]);
        let r = &group_regions("f", &f, &[pred(2, EditType::Replace)], 3)[0];
        let prior = rp(Edit::replace("g", 1, v(&["y := f(a)"]), v(&["y := g(a)"])).unwrap(), 0.7);
        let c = generate_candidates(r, &Prompt::default(), &[prior], 5, &GeneratorConfig::default(), &PatternTransfer::default())
            .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].rank, c[0].content.clone(), c[0].confidence), (1, v(&["y := g(a)"]), 0.7));
    }

    #[test]
    fn noop_prior_is_filtered() {
        let f = v(&["x := f(a)"]);
        let r = &group_regions("f", &f, &[pred(1, EditType::Replace)], 3)[0];
        let prior = rp(Edit::replace("g", 1, v(&["z"]), v(&["z"])).unwrap(), 0.7);
        let c = generate_candidates(r, &Prompt::default(), &[prior], 5, &GeneratorConfig::default(), &PatternTransfer::default())
            .unwrap();
        assert!(c.iter().all(|c| c.content != f));
    }

    #[test]
    fn ranks_dense_and_capped() {
        let f = v(&["call(a, b)"]);
        let r = &group_regions("f", &f, &[pred(1, EditType::Replace)], 3)[0];
        let p1 = rp(Edit::replace("g", 1, v(&["call(a, b)"]), v(&["call(a, b, c)"])).unwrap(), 0.9);
        let p2 = rp(Edit::replace("g", 5, v(&["call(a, b)"]), v(&["call(a, b, c)"])).unwrap(), 0.8);
        let p3 = rp(Edit::replace("g", 9, v(&["call(a, b)"]), v(&["call2(a, b)"])).unwrap(), 0.6);
        let priors = [p1, p2, p3];
        let all = generate_candidates(r, &Prompt::default(), &priors, 10, &GeneratorConfig::default(), &PatternTransfer::default())
            .unwrap();
        assert_eq!(all.iter().map(|c| c.rank).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(all[1].content, v(&["call2(a, b)"]));
        let one = generate_candidates(r, &Prompt::default(), &priors, 1, &GeneratorConfig::default(), &PatternTransfer::default())
            .unwrap();
        assert_eq!(one, all[..1].to_vec());
    }

    #[test]
    fn insert_prior_renamed_through_context() {
        let prior = RankedPrior {
            prior: ContextualEdit {
                edit: Edit::insert("b.go", 4, v(&["\tmatch *matcher", ""])).unwrap(),
                context_before: v(&["", "type benchContext struct {"]),
                context_after: v(&["\tmaxLen int"]),
            },
            relevance: 0.6,
        };
        let f = v(&["type testContext struct {", "\tmu sync.Mutex", "}"]);
        let r = &group_regions("t.go", &f, &[pred(1, EditType::Insert)], 3)[0];
        let out = PatternTransfer::default().transfer(&prior, r);
        assert_eq!(out, vec![v(&["\tmatch *matcher", ""])]);
    }

    #[test]
    fn external_candidates_parsed() {
        let v = json!({"candidates": [{"lines": ["a"], "confidence": 0.5}]});
        assert_eq!(parse_candidates(&v).unwrap()[0].lines, vec!["a".to_string()]);
        assert!(parse_candidates(&json!({})).is_err());
    }
}
