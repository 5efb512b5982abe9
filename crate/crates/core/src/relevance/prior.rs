use serde::{Deserialize, Serialize};

use super::backend::ScoringBackends;
use super::config::ScoringConfig;
use crate::model::{ContextualEdit, Edit, EditType};
use crate::tokenize::tokenize_lines;
use crate::wire::BackendError;

/// A code location an upcoming edit targets, described by the code it
/// currently holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCode {
    pub file_path: String,
    pub anchor_line: usize,
    pub code: Vec<String>,
}

impl TargetCode {
    /// Uses the edit's own target code (before-code, or inserted code for a
    /// pure insertion).
    pub fn from_edit(e: &Edit) -> Self {
        TargetCode {
            file_path: e.file_path.clone(),
            anchor_line: e.anchor_line,
            code: e.target_code().to_vec(),
        }
    }
}

impl TargetCode {
    /// Describes a location in `lines` (a whole file) without knowing the
    /// edit that will land there: the replaced lines for `Replace`, or the
    /// line an insertion follows plus the next line for `Insert`.
    /// `line` is the first replaced line, or the line after which content is
    /// inserted (0 for the file head).
    pub fn at_location(path: &str, lines: &[String], edit_type: EditType, line: usize, len: usize) -> Self {
        let (anchor_line, code) = match edit_type {
            EditType::Insert => {
                let lo = line.saturating_sub(1).min(lines.len());
                let hi = (line + 1).min(lines.len());
                (line + 1, lines[lo..hi].to_vec())
            }
            _ => {
                let lo = line.saturating_sub(1).min(lines.len());
                let hi = (lo + len.max(1)).min(lines.len());
                (line.max(1), lines[lo..hi].to_vec())
            }
        };
        TargetCode {
            file_path: path.to_owned(),
            anchor_line,
            code,
        }
    }
}

/// A prior edit handed to the locator or generator, with its relevance to
/// the current target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrior {
    pub prior: ContextualEdit,
    pub relevance: f64,
}

/// Line-proximity similarity inside a window of `k_window` lines; 0 across
/// files.
pub fn loc_sim(prior: &Edit, target: &TargetCode, k_window: usize) -> f64 {
    if prior.file_path != target.file_path || k_window == 0 {
        return 0.0;
    }
    let d = prior.anchor_line.abs_diff(target.anchor_line);
    if d < k_window {
        1.0 - d as f64 / k_window as f64
    } else {
        0.0
    }
}

/// Maps (dep, sem, loc) features to a relevance in (0, 1).
pub trait Combiner: Send + Sync {
    fn combine(&self, features: [f64; 3]) -> f64;
}

/// `logistic(w · features + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticCombiner {
    pub weights: [f64; 3],
    pub bias: f64,
}

impl Default for LogisticCombiner {
    fn default() -> Self {
        LogisticCombiner {
            weights: [1.0, 1.0, 1.0],
            bias: -1.5,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Combiner for LogisticCombiner {
    fn combine(&self, f: [f64; 3]) -> f64 {
        let z = self.weights.iter().zip(f).map(|(w, x)| w * x).sum::<f64>() + self.bias;
        logistic(z)
    }
}

/// The three relevance features of one prior edit for one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceFeatures {
    pub dep: f64,
    pub sem: f64,
    pub loc: f64,
}

impl RelevanceFeatures {
    pub fn as_array(&self) -> [f64; 3] {
        [self.dep, self.sem, self.loc]
    }
}

pub fn relevance_features(
    prior: &Edit,
    target: &TargetCode,
    cfg: &ScoringConfig,
    backends: &ScoringBackends,
) -> Result<RelevanceFeatures, BackendError> {
    let p = prior.target_code();
    let t = &target.code;
    let dep = if tokenize_lines(p).is_empty() || tokenize_lines(t).is_empty() {
        0.0
    } else {
        backends.dependency.dep_pair(p, t)?.y_hat_2
    };
    let sem = backends.embedder.embed(p).cosine(&backends.embedder.embed(t));
    Ok(RelevanceFeatures {
        dep,
        sem,
        loc: loc_sim(prior, target, cfg.k_window),
    })
}

/// Relevance of a prior edit to the target location.
pub fn prior_relevance(
    prior: &Edit,
    target: &TargetCode,
    cfg: &ScoringConfig,
    combiner: &dyn Combiner,
    backends: &ScoringBackends,
) -> Result<f64, BackendError> {
    let f = relevance_features(prior, target, cfg, backends)?;
    Ok(combiner.combine(f.as_array()))
}

/// A prior edit chosen for a target, with its relevance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrior {
    /// Position in the session's prior list (acceptance order).
    pub index: usize,
    pub relevance: f64,
}

/// Priors (oldest first) whose relevance exceeds `th_pri`, most relevant first;
/// ties go to the more recent edit.
pub fn select_prior_edits(
    priors: &[Edit],
    target: &TargetCode,
    cfg: &ScoringConfig,
    combiner: &dyn Combiner,
    backends: &ScoringBackends,
) -> Result<Vec<ScoredPrior>, BackendError> {
    let mut scored = score_priors(priors, target, cfg, combiner, backends)?;
    scored.retain(|s| s.relevance > cfg.th_pri);
    Ok(scored)
}

/// Every prior with its relevance, in selection order but unthresholded.
pub fn score_priors(
    priors: &[Edit],
    target: &TargetCode,
    cfg: &ScoringConfig,
    combiner: &dyn Combiner,
    backends: &ScoringBackends,
) -> Result<Vec<ScoredPrior>, BackendError> {
    let mut scored = priors
        .iter()
        .enumerate()
        .map(|(index, p)| {
            Ok(ScoredPrior {
                index,
                relevance: prior_relevance(p, target, cfg, combiner, backends)?,
            })
        })
        .collect::<Result<Vec<_>, BackendError>>()?;
    scored.sort_by(|a, b| b.relevance.total_cmp(&a.relevance).then(b.index.cmp(&a.index)));
    Ok(scored)
}

/// Relevance scores normalized to a sampling distribution over prior edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceDistribution {
    pub weights: Vec<f64>,
}

/// `score / sum(scores)`; all-zero input gives the uniform distribution.
pub fn relevance_distribution(scores: &[f64]) -> RelevanceDistribution {
    let total: f64 = scores.iter().map(|s| s.max(0.0)).sum();
    let weights = if scores.is_empty() {
        Vec::new()
    } else if total > 0.0 {
        scores.iter().map(|s| s.max(0.0) / total).collect()
    } else {
        vec![1.0 / scores.len() as f64; scores.len()]
    };
    RelevanceDistribution { weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn at(path: &str, line: usize) -> TargetCode {
        TargetCode {
            file_path: path.into(),
            anchor_line: line,
            code: v(&["x"]),
        }
    }

    #[test]
    fn location_targets() {
        let file = v(&["a", "b", "c"]);
        let t = TargetCode::at_location("f", &file, EditType::Insert, 0, 0);
        assert_eq!((t.anchor_line, t.code), (1, v(&["a"])));
        let t = TargetCode::at_location("f", &file, EditType::Insert, 2, 0);
        assert_eq!((t.anchor_line, t.code), (3, v(&["b", "c"])));
        let t = TargetCode::at_location("f", &file, EditType::Replace, 2, 5);
        assert_eq!((t.anchor_line, t.code), (2, v(&["b", "c"])));
    }

    #[test]
    fn loc_sim_shape() {
        let p = Edit::replace("f", 20, v(&["a"]), v(&["b"])).unwrap();
        assert_eq!(loc_sim(&p, &at("f", 20), 10), 1.0);
        assert_eq!(loc_sim(&p, &at("f", 30), 10), 0.0);
        assert!((loc_sim(&p, &at("f", 17), 10) - 0.7).abs() < 1e-12);
        assert_eq!(loc_sim(&p, &at("g", 20), 10), 0.0);
    }

    #[test]
    fn default_combiner_values() {
        let c = LogisticCombiner::default();
        assert!((c.combine([0.0; 3]) - 0.182_425_523_806_356_2).abs() < 1e-12);
        assert!((c.combine([1.0; 3]) - 0.817_574_476_193_643_8).abs() < 1e-12);
    }

    #[test]
    fn normalization_examples() {
        let d = relevance_distribution(&[0.7, 0.3, 0.6]);
        for (w, e) in d.weights.iter().zip([0.4375, 0.1875, 0.375]) {
            assert!((w - e).abs() < 1e-12);
        }
        assert_eq!(relevance_distribution(&[1.0]).weights, vec![1.0]);
        assert_eq!(relevance_distribution(&[0.0, 0.0]).weights, vec![0.5, 0.5]);
        assert!(relevance_distribution(&[]).weights.is_empty());
    }

    #[test]
    fn selection_thresholds_and_recency_ties() {
        let b = ScoringBackends::lexical();
        let cfg = ScoringConfig::default();
        let c = LogisticCombiner::default();
        let target = TargetCode {
            file_path: "f".into(),
            anchor_line: 5,
            code: v(&["total = compute(a, b)"]),
        };
        assert!(select_prior_edits(&[], &target, &cfg, &c, &b).unwrap().is_empty());
        let same = Edit::replace("f", 5, v(&["total = compute(a, b)"]), v(&["y"])).unwrap();
        let far = Edit::replace("g", 90, v(&["zzz"]), v(&["q"])).unwrap();
        let sel = select_prior_edits(&[same.clone(), far, same], &target, &cfg, &c, &b).unwrap();
        assert_eq!(sel.iter().map(|s| s.index).collect::<Vec<_>>(), vec![2, 0]);
    }
}
