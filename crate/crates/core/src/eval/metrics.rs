use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::EditType;
use crate::tokenize::tokenize_lines;

/// File-location precision and recall. An empty prediction has precision 1;
/// an empty ground truth is an error.
pub fn file_precision_recall(pred: &BTreeSet<String>, gt: &BTreeSet<String>) -> Result<(f64, f64), EvalError> {
    if gt.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let hit = pred.intersection(gt).count() as f64;
    let p = if pred.is_empty() { 1.0 } else { hit / pred.len() as f64 };
    Ok((p, hit / gt.len() as f64))
}

/// How a class missing from both prediction and ground truth enters the
/// macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentClass {
    /// Precision and recall of 1 for that class.
    #[default]
    Perfect,
    /// Left out of the average.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
}

/// Accuracy and macro precision/recall over keep/insert/replace. A class
/// that is predicted or expected but has an empty denominator scores 0.
pub fn line_metrics(pred: &[EditType], gt: &[EditType], absent: AbsentClass) -> Result<LineMetrics, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::CoverageMismatch {
            predicted: pred.len(),
            expected: gt.len(),
        });
    }
    if gt.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let mut tp = [0usize; 3];
    let mut fp = [0usize; 3];
    let mut fne = [0usize; 3];
    for (p, g) in pred.iter().zip(gt) {
        if p == g {
            tp[p.index()] += 1;
        } else {
            fp[p.index()] += 1;
            fne[g.index()] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut ps, mut rs, mut n) = (0.0, 0.0, 0usize);
    for c in 0..3 {
        if tp[c] + fp[c] + fne[c] == 0 {
            if absent == AbsentClass::Perfect {
                ps += 1.0;
                rs += 1.0;
                n += 1;
            }
            continue;
        }
        ps += ratio(tp[c], tp[c] + fp[c]);
        rs += ratio(tp[c], tp[c] + fne[c]);
        n += 1;
    }
    let correct: usize = tp.iter().sum();
    Ok(LineMetrics {
        accuracy: correct as f64 / gt.len() as f64,
        macro_precision: ps / n as f64,
        macro_recall: rs / n as f64,
    })
}

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in toks.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

/// Sentence-level BLEU-4 over token sequences on a 0-100 scale: uniform
/// weights, brevity penalty, and add-one smoothing for 2- to 4-gram
/// precisions. Empty candidates and candidates sharing no unigram with the
/// reference score 0.
pub fn bleu4(candidate: &[String], reference: &[String]) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let mut log_p = 0.0;
    for n in 1..=4 {
        let c = ngram_counts(candidate, n);
        let r = ngram_counts(reference, n);
        let total = candidate.len().saturating_sub(n - 1);
        let matched: usize = c.iter().map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0))).sum();
        let p = if n == 1 {
            if matched == 0 {
                return Ok(0.0);
            }
            matched as f64 / total as f64
        } else {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        };
        log_p += 0.25 * p.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(100.0 * bp * log_p.exp())
}

/// BLEU-4 of code lines under the shared tokenizer.
pub fn bleu4_lines(candidate: &[String], reference: &[String]) -> Result<f64, EvalError> {
    bleu4(&tokenize_lines(candidate), &tokenize_lines(reference))
}

/// Token-exact equality of code lines; whitespace and line breaks do not
/// matter.
pub fn exact_match(candidate: &[String], reference: &[String]) -> bool {
    tokenize_lines(candidate) == tokenize_lines(reference)
}
