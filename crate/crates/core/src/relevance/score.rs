use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{DependencyBackend, Embedder, ScoringBackends, TermVector};
use super::config::ScoringConfig;
use crate::model::{split_segments, Edit, ProjectSnapshot, Prompt, Segment};
use crate::tokenize::tokenize_lines;
use crate::wire::BackendError;

fn has_tokens(lines: &[String]) -> bool {
    !tokenize_lines(lines).is_empty()
}

fn max_or_zero(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// Max over segments of the probability that the segment depends on the
/// edit's target code.
pub fn dep_file(
    e: &Edit,
    path: &str,
    lines: &[String],
    cfg: &ScoringConfig,
    backend: &dyn DependencyBackend,
) -> Result<f64, BackendError> {
    let segs = split_segments(path, lines, cfg.max_segment_tokens);
    dep_over_segments(e.target_code(), &segs, backend)
}

fn dep_over_segments(target: &[String], segs: &[Segment], backend: &dyn DependencyBackend) -> Result<f64, BackendError> {
    if !has_tokens(target) {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for s in segs.iter().filter(|s| s.token_count > 0) {
        best = best.max(backend.dep_pair(target, &s.lines)?.y_hat_2);
    }
    Ok(best)
}

/// Max cosine similarity between the edit's target code and any segment.
pub fn sem_file(e: &Edit, path: &str, lines: &[String], cfg: &ScoringConfig, embedder: &dyn Embedder) -> f64 {
    let segs = split_segments(path, lines, cfg.max_segment_tokens);
    let target = embedder.embed(e.target_code());
    sem_over_segments(&target, &segs, embedder)
}

fn sem_over_segments(target: &TermVector, segs: &[Segment], embedder: &dyn Embedder) -> f64 {
    if target.is_zero() {
        return 0.0;
    }
    max_or_zero(segs.iter().map(|s| target.cosine(&embedder.embed(&s.lines))))
}

/// `alpha1 * dep + alpha2 * sem + epsilon`, unclamped.
pub fn propagation_score(dep: f64, sem: f64, cfg: &ScoringConfig) -> f64 {
    cfg.alpha1 * dep + cfg.alpha2 * sem + cfg.epsilon
}

/// Component scores of one candidate file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileScore {
    pub dep: f64,
    pub sem: f64,
    /// Prompt-to-segment similarity; contributes only with a non-zero
    /// `prompt_weight`.
    pub prompt_sim: f64,
    pub score: f64,
}

/// Precomputed view of one triggering edit, reused across every candidate
/// file of a project scan.
pub struct FileScorer<'a> {
    cfg: &'a ScoringConfig,
    backends: &'a ScoringBackends,
    target: &'a [String],
    target_vec: TermVector,
    prompt_vec: Option<TermVector>,
}

impl<'a> FileScorer<'a> {
    pub fn new(e: &'a Edit, cfg: &'a ScoringConfig, backends: &'a ScoringBackends, prompt: Option<&Prompt>) -> Self {
        let target = e.target_code();
        let prompt_vec = prompt
            .filter(|p| !p.is_empty() && cfg.prompt_weight > 0.0)
            .map(|p| backends.embedder.embed(&[p.as_str().to_owned()]));
        FileScorer {
            cfg,
            backends,
            target,
            target_vec: backends.embedder.embed(target),
            prompt_vec,
        }
    }

    pub fn score(&self, path: &str, lines: &[String]) -> Result<FileScore, BackendError> {
        let segs = split_segments(path, lines, self.cfg.max_segment_tokens);
        let dep = dep_over_segments(self.target, &segs, self.backends.dependency.as_ref())?;
        let embedder = self.backends.embedder.as_ref();
        let seg_vecs: Vec<TermVector> = segs.iter().map(|s| embedder.embed(&s.lines)).collect();
        let sem = if self.target_vec.is_zero() {
            0.0
        } else {
            max_or_zero(seg_vecs.iter().map(|v| self.target_vec.cosine(v)))
        };
        let prompt_sim = match &self.prompt_vec {
            Some(p) => max_or_zero(seg_vecs.iter().map(|v| p.cosine(v))),
            None => 0.0,
        };
        let score = propagation_score(dep, sem, self.cfg) + self.cfg.prompt_weight * prompt_sim;
        Ok(FileScore {
            dep,
            sem,
            prompt_sim,
            score,
        })
    }
}

/// Full propagation score of one file for one edit.
pub fn file_propagation_score(
    e: &Edit,
    path: &str,
    lines: &[String],
    cfg: &ScoringConfig,
    backends: &ScoringBackends,
) -> Result<FileScore, BackendError> {
    FileScorer::new(e, cfg, backends, None).score(path, lines)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFile {
    pub path: String,
    pub score: f64,
    pub detail: FileScore,
}

/// Descending by score, ascending path on ties.
pub fn rank_order(a: &RankedFile, b: &RankedFile) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.path.cmp(&b.path))
}

/// Files other than the edited one whose propagation score exceeds `th_sub`,
/// best first.
pub fn locate_files(
    e: &Edit,
    project: &ProjectSnapshot,
    cfg: &ScoringConfig,
    backends: &ScoringBackends,
    prompt: Option<&Prompt>,
) -> Result<Vec<RankedFile>, BackendError> {
    let scorer = FileScorer::new(e, cfg, backends, prompt);
    let candidates: Vec<(&String, &Vec<String>)> = project.files.iter().filter(|(p, _)| **p != e.file_path).collect();
    let score_one = |(path, lines): &(&String, &Vec<String>)| -> Result<RankedFile, BackendError> {
        let detail = scorer.score(path, lines)?;
        Ok(RankedFile {
            path: (*path).clone(),
            score: detail.score,
            detail,
        })
    };
    let scored: Vec<RankedFile> = if backends.dependency.single_flight() {
        candidates.iter().map(score_one).collect::<Result<_, _>>()?
    } else {
        candidates.par_iter().map(score_one).collect::<Result<_, _>>()?
    };
    let mut kept: Vec<RankedFile> = scored.into_iter().filter(|r| r.score > cfg.th_sub).collect();
    kept.sort_by(rank_order);
    Ok(kept)
}
