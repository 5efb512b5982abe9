//! Metrics and dataset-level evaluation: file location precision/recall,
//! line labeling accuracy and macro precision/recall, generation exact-match
//! rate and BLEU-4 at several k, and the prior-selection ablation.

mod metrics;

pub use metrics::{bleu4, bleu4_lines, exact_match, file_precision_recall, line_metrics, AbsentClass, LineMetrics};

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generator::{group_regions, EditCandidate, GenerateError, HunkRegion};
use crate::locator::{label_file_with, CodeWindow, LinePrediction, LocatorError};
use crate::miner::{Dataset, Sample, Split, Task};
use crate::model::{line_labels_from_hunk, merge_file_labels, ContextualEdit, EditType, Hunk, ModelError, ProjectSnapshot, Prompt};
use crate::relevance::{locate_files, RankedPrior, TargetCode};
use crate::session::{region_target, Engine};
use crate::wire::BackendError;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("sample has no ground-truth positives")]
    EmptyGroundTruth,
    #[error("{predicted} predictions for {expected} labels")]
    CoverageMismatch { predicted: usize, expected: usize },
    #[error("reference has no tokens")]
    EmptyReference,
    #[error("snapshot for commit {0} is missing")]
    MissingSnapshot(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Locator(#[from] LocatorError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

/// Which prior edits a prediction gets to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorPolicy {
    /// Priors whose relevance exceeds the threshold.
    Selective,
    /// As many priors as `Selective` would pick, drawn uniformly at random.
    RandomMatched { seed: u64 },
    All,
    None,
}

impl PriorPolicy {
    pub fn name(&self) -> String {
        match self {
            PriorPolicy::Selective => "selective".into(),
            PriorPolicy::RandomMatched { seed } => format!("random(seed={seed})"),
            PriorPolicy::All => "all".into(),
            PriorPolicy::None => "none".into(),
        }
    }
}

fn seed_for(seed: u64, key: &str) -> u64 {
    let d = Sha256::digest(format!("{seed}\0{key}").as_bytes());
    u64::from_be_bytes([d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7]])
}

/// Applies `policy` to priors already ranked for one target; `key` makes the
/// random draw specific to the target while staying reproducible.
pub fn choose_priors(ranked: Vec<RankedPrior>, th_pri: f64, policy: PriorPolicy, key: &str) -> Vec<RankedPrior> {
    match policy {
        PriorPolicy::Selective => ranked.into_iter().filter(|p| p.relevance > th_pri).collect(),
        PriorPolicy::All => ranked,
        PriorPolicy::None => Vec::new(),
        PriorPolicy::RandomMatched { seed } => {
            let m = ranked.iter().filter(|p| p.relevance > th_pri).count();
            let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, key));
            let mut idx: Vec<usize> = (0..ranked.len()).collect::<Vec<_>>().choose_multiple(&mut rng, m).copied().collect();
            // keep the relevance order among the drawn priors
            idx.sort_unstable();
            idx.into_iter().map(|i| ranked[i].clone()).collect()
        }
    }
}

fn contextual_priors(priors: &[Hunk], snap: &ProjectSnapshot, c: usize) -> Result<Vec<ContextualEdit>, EvalError> {
    priors
        .iter()
        .map(|h| {
            let lines = snap.file(&h.file_path).unwrap_or(&[]);
            Ok(ContextualEdit::from_file(h.to_edit()?, lines, c))
        })
        .collect()
}

fn snapshot<'a>(ds: &'a Dataset, s: &Sample) -> Result<&'a ProjectSnapshot, EvalError> {
    ds.snapshots
        .get(&s.commit_id)
        .ok_or_else(|| EvalError::MissingSnapshot(s.commit_id.clone()))
}

fn in_split(samples: &[Sample], split: Option<Split>) -> Vec<&Sample> {
    samples.iter().filter(|s| split.is_none_or(|sp| s.split == sp)).collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileLocMetrics {
    pub precision: f64,
    pub recall: f64,
    pub samples: usize,
    /// Samples whose commit touches no other file.
    pub skipped: usize,
}

/// For each sample the target hunk triggers file location over the other
/// touched files plus the sample's negatives.
pub fn eval_file_location(ds: &Dataset, engine: &Engine, split: Option<Split>) -> Result<FileLocMetrics, EvalError> {
    let samples = in_split(ds.samples(Task::FileLoc), split);
    let per: Vec<Option<(f64, f64)>> = samples
        .par_iter()
        .map(|s| {
            let snap = snapshot(ds, s)?;
            let e = s.target.to_edit()?;
            let gt: BTreeSet<String> = s
                .priors
                .iter()
                .map(|h| h.file_path.clone())
                .filter(|p| *p != s.target.file_path && snap.file(p).is_some())
                .collect();
            if gt.is_empty() {
                return Ok(None);
            }
            let mut project = ProjectSnapshot::new(snap.root.clone());
            for p in gt.iter().chain(&s.negatives).chain([&s.target.file_path]) {
                if let Some(lines) = snap.file(p) {
                    project.files.insert(p.clone(), lines.to_vec());
                }
            }
            let prompt = Prompt::new(s.prompt.clone());
            let ranked = locate_files(&e, &project, &engine.config.scoring, &engine.scoring, Some(&prompt))?;
            let pred: BTreeSet<String> = ranked.into_iter().map(|r| r.path).collect();
            Ok(Some(file_precision_recall(&pred, &gt)?))
        })
        .collect::<Result<_, EvalError>>()?;
    let scored: Vec<(f64, f64)> = per.iter().flatten().copied().collect();
    Ok(FileLocMetrics {
        precision: mean(scored.iter().map(|x| x.0)),
        recall: mean(scored.iter().map(|x| x.1)),
        samples: scored.len(),
        skipped: per.len() - scored.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineLocMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// Predicted and expected labels of one line-location sample over every file
/// of its commit, leaving out lines the prior hunks cover.
pub fn line_sample_labels(
    ds: &Dataset,
    engine: &Engine,
    s: &Sample,
    policy: PriorPolicy,
) -> Result<(Vec<EditType>, Vec<EditType>), EvalError> {
    let snap = snapshot(ds, s)?;
    let c = engine.config.generator.context_lines;
    let priors = contextual_priors(&s.priors, snap, c)?;
    let files: BTreeSet<&str> = s
        .priors
        .iter()
        .chain([&s.target])
        .map(|h| h.file_path.as_str())
        .filter(|p| snap.file(p).is_some())
        .collect();
    let prompt = Prompt::new(s.prompt.clone());
    let (mut pred, mut gt) = (Vec::new(), Vec::new());
    for path in files {
        let lines = snap.file(path).unwrap_or(&[]);
        let target_hunks: Vec<Hunk> = [&s.target].into_iter().filter(|h| h.file_path == path).cloned().collect();
        let expected = merge_file_labels(lines.len(), &target_hunks)?;
        let mut excluded = BTreeSet::new();
        for h in s.priors.iter().filter(|h| h.file_path == path) {
            excluded.extend(line_labels_from_hunk(h)?.into_iter().map(|(l, _)| l));
        }
        let select = |w: &CodeWindow| -> Result<Vec<RankedPrior>, BackendError> {
            let target = TargetCode {
                file_path: w.file_path.clone(),
                anchor_line: w.start_line + w.lines.len() / 2,
                code: w.lines.clone(),
            };
            let ranked = engine.rank_priors(&priors, &target)?;
            let key = format!("{}:{}:{}:{}", s.commit_id, s.target_index, path, w.start_line);
            Ok(choose_priors(ranked, engine.config.scoring.th_pri, policy, &key))
        };
        let preds: Vec<LinePrediction> =
            label_file_with(path, lines, &prompt, &engine.config.locator, engine.labeler.as_ref(), &select)?;
        let mut by_line = vec![EditType::Keep; lines.len() + 1];
        for p in preds {
            if let Some(slot) = by_line.get_mut(p.line) {
                *slot = p.label;
            }
        }
        // the head slot only counts when an insertion is expected there
        let first = if expected[0] == EditType::Keep { 1 } else { 0 };
        for line in first..expected.len() {
            if !excluded.contains(&line) {
                pred.push(by_line[line]);
                gt.push(expected[line]);
            }
        }
    }
    Ok((pred, gt))
}

pub fn eval_line_location(
    ds: &Dataset,
    engine: &Engine,
    split: Option<Split>,
    policy: PriorPolicy,
    absent: AbsentClass,
) -> Result<LineLocMetrics, EvalError> {
    let samples = in_split(ds.samples(Task::LineLoc), split);
    let per: Vec<Option<LineMetrics>> = samples
        .par_iter()
        .map(|s| {
            let (pred, gt) = line_sample_labels(ds, engine, s, policy)?;
            if gt.is_empty() {
                return Ok(None);
            }
            Ok(Some(line_metrics(&pred, &gt, absent)?))
        })
        .collect::<Result<_, EvalError>>()?;
    let scored: Vec<LineMetrics> = per.iter().flatten().copied().collect();
    Ok(LineLocMetrics {
        accuracy: mean(scored.iter().map(|m| m.accuracy)),
        macro_precision: mean(scored.iter().map(|m| m.macro_precision)),
        macro_recall: mean(scored.iter().map(|m| m.macro_recall)),
        samples: scored.len(),
        skipped: per.len() - scored.len(),
    })
}

/// The region a hunk rewrites, with context from the pre-commit file.
pub fn region_of_hunk(h: &Hunk, lines: &[String], c: usize) -> Option<HunkRegion> {
    let preds: Vec<LinePrediction> = match h.before_range() {
        None => vec![LinePrediction {
            line: h.before_start,
            label: EditType::Insert,
            confidence: [0.0, 1.0, 0.0],
        }],
        Some((a, b)) => (a..=b)
            .map(|line| LinePrediction {
                line,
                label: EditType::Replace,
                confidence: [0.0, 0.0, 1.0],
            })
            .collect(),
    };
    group_regions(&h.file_path, lines, &preds, c).into_iter().next()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    /// Share of samples where some top-k candidate equals the ground truth.
    pub emr: f64,
    /// Mean over samples of the best BLEU-4 (0-100) among the top-k
    /// candidates.
    pub bleu4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetrics {
    pub per_k: Vec<KMetrics>,
    pub samples: usize,
    /// Samples whose region could not be rebuilt from the snapshot.
    pub skipped: usize,
    /// Mean number of priors shown per sample.
    pub mean_priors: f64,
}

/// Per-sample outcome: (exact within top-k, best BLEU within top-k) for each
/// k, and the number of priors used.
pub type SampleOutcome = (Vec<(bool, f64)>, usize);

pub fn generation_sample(
    ds: &Dataset,
    engine: &Engine,
    s: &Sample,
    ks: &[usize],
    policy: PriorPolicy,
) -> Result<Option<SampleOutcome>, EvalError> {
    let snap = snapshot(ds, s)?;
    let c = engine.config.generator.context_lines;
    let Some(lines) = snap.file(&s.target.file_path) else { return Ok(None) };
    let Some(region) = region_of_hunk(&s.target, lines, c) else { return Ok(None) };
    let priors = contextual_priors(&s.priors, snap, c)?;
    let ranked = engine.rank_priors(&priors, &region_target(&region, lines))?;
    let key = format!("{}:{}", s.commit_id, s.target_index);
    let chosen = choose_priors(ranked, engine.config.scoring.th_pri, policy, &key);
    let kmax = ks.iter().copied().max().unwrap_or(1).max(1);
    let prompt = Prompt::new(s.prompt.clone());
    let cands = match engine.candidates(&region, &prompt, &chosen, kmax) {
        Ok(c) => c,
        // nothing to learn from, or nothing fits: counts as a miss
        Err(GenerateError::NoCandidate | GenerateError::RegionTooLarge { .. }) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let truth = &s.target.after_lines;
    let outcome = ks
        .iter()
        .map(|&k| {
            let top = &cands[..k.min(cands.len())];
            let hit = top.iter().any(|c| exact_match(&c.content, truth));
            // a deletion has no tokens to score against: all or nothing
            let score = |c: &EditCandidate| match bleu4_lines(&c.content, truth) {
                Err(_) if exact_match(&c.content, truth) => 100.0,
                r => r.unwrap_or(0.0),
            };
            let best = top.iter().map(score).fold(0.0, f64::max);
            (hit, best)
        })
        .collect();
    Ok(Some((outcome, chosen.len())))
}

pub fn eval_generation(
    ds: &Dataset,
    engine: &Engine,
    split: Option<Split>,
    ks: &[usize],
    policy: PriorPolicy,
) -> Result<GenerationMetrics, EvalError> {
    let samples = in_split(ds.samples(Task::Gen), split);
    let per: Vec<Option<SampleOutcome>> = samples
        .par_iter()
        .map(|s| generation_sample(ds, engine, s, ks, policy))
        .collect::<Result<_, EvalError>>()?;
    let scored: Vec<&SampleOutcome> = per.iter().flatten().collect();
    let per_k = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| KMetrics {
            k,
            emr: mean(scored.iter().map(|(o, _)| if o[i].0 { 1.0 } else { 0.0 })),
            bleu4: mean(scored.iter().map(|(o, _)| o[i].1)),
        })
        .collect();
    Ok(GenerationMetrics {
        per_k,
        samples: scored.len(),
        skipped: per.len() - scored.len(),
        mean_priors: mean(scored.iter().map(|(_, n)| *n as f64)),
    })
}

/// Generation quality with relevance-selected priors against a random
/// selection of the same size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub selective: GenerationMetrics,
    pub random: GenerationMetrics,
    pub seed: u64,
}

impl AblationReport {
    /// Selective EMR is at least random EMR at every k.
    pub fn selective_wins(&self) -> bool {
        self.selective
            .per_k
            .iter()
            .zip(&self.random.per_k)
            .all(|(s, r)| s.emr >= r.emr)
    }
}

pub fn run_ablation(
    ds: &Dataset,
    engine: &Engine,
    split: Option<Split>,
    ks: &[usize],
    seed: u64,
) -> Result<AblationReport, EvalError> {
    Ok(AblationReport {
        selective: eval_generation(ds, engine, split, ks, PriorPolicy::Selective)?,
        random: eval_generation(ds, engine, split, ks, PriorPolicy::RandomMatched { seed })?,
        seed,
    })
}

/// Everything one evaluation run measured, tagged with the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub v: u32,
    pub config_hash: String,
    pub policy: String,
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_loc: Option<FileLocMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_loc: Option<LineLocMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationReport>,
}

impl MetricReport {
    pub fn new(engine: &Engine, policy: PriorPolicy, split: Option<Split>) -> Self {
        MetricReport {
            v: REPORT_VERSION,
            config_hash: engine.config.hash(),
            policy: policy.name(),
            split,
            file_loc: None,
            line_loc: None,
            generation: None,
            ablation: None,
        }
    }

    /// `task,metric,k,value` rows; `k` is empty where it does not apply.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,metric,k,value\n");
        let mut row = |task: &str, metric: &str, k: Option<usize>, v: f64| {
            let k = k.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{task},{metric},{k},{v}");
        };
        if let Some(f) = &self.file_loc {
            row("file_loc", "precision", None, f.precision);
            row("file_loc", "recall", None, f.recall);
        }
        if let Some(l) = &self.line_loc {
            row("line_loc", "accuracy", None, l.accuracy);
            row("line_loc", "macro_precision", None, l.macro_precision);
            row("line_loc", "macro_recall", None, l.macro_recall);
        }
        let mut gen = |task: &str, g: &GenerationMetrics| {
            for k in &g.per_k {
                row(task, "emr", Some(k.k), k.emr);
                row(task, "bleu4", Some(k.k), k.bleu4);
            }
        };
        if let Some(g) = &self.generation {
            gen("gen", g);
        }
        if let Some(a) = &self.ablation {
            gen("ablation_selective", &a.selective);
            gen("ablation_random", &a.random);
        }
        out
    }
}
