//! Subcommand implementations, kept apart from argument parsing so tests can
//! call them directly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use editprop::eval::{
    eval_file_location, eval_generation, eval_line_location, run_ablation, AbsentClass, MetricReport, PriorPolicy,
};
use editprop::generator::EditCandidate;
use editprop::miner::{mine_records, read_commit_dir, read_git_history, write_dataset, Dataset, MinerConfig, Split, Task};
use editprop::session::{replay_log, Engine, EngineConfig, LocationReport, SessionError, SessionStore};
use editprop::Prompt;
use serde::{Deserialize, Serialize};

use crate::project::{diff_to_edits, load_project, read_json};

/// Where commits come from.
#[derive(Debug, Clone)]
pub enum CommitSource {
    Git { repo: PathBuf, rev: String },
    Dir(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineSummary {
    pub v: u32,
    pub commits: usize,
    pub kept: usize,
    pub samples: BTreeMap<String, usize>,
}

pub fn parse_tasks(list: &str) -> Result<Vec<Task>> {
    let mut out = Vec::new();
    for t in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match t {
            "all" => out.extend(Task::ALL),
            _ => match Task::ALL.iter().find(|x| x.name() == t) {
                Some(x) => out.push(*x),
                None => bail!("unknown task {t:?} (expected all, file_loc, line_loc or gen)"),
            },
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        bail!("no task given");
    }
    Ok(out)
}

pub fn mine(source: &CommitSource, out: &Path, tasks: &[Task], cfg: &MinerConfig) -> Result<MineSummary> {
    let records = match source {
        CommitSource::Git { repo, rev } => read_git_history(repo, rev)?,
        CommitSource::Dir(dir) => read_commit_dir(dir)?,
    };
    let data = mine_records(&records, tasks, cfg);
    write_dataset(out, &data)?;
    tracing::info!(commits = records.len(), kept = data.snapshots.len(), out = %out.display(), "mined");
    Ok(MineSummary {
        v: 1,
        commits: records.len(),
        kept: data.decisions.iter().filter(|d| d.kept).count(),
        samples: data.samples.iter().map(|(t, s)| (t.name().to_owned(), s.len())).collect(),
    })
}

/// What `eval` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    FileLoc,
    LineLoc,
    Gen,
    Ablation,
    All,
}

impl std::str::FromStr for EvalTask {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "file_loc" => EvalTask::FileLoc,
            "line_loc" => EvalTask::LineLoc,
            "gen" => EvalTask::Gen,
            "ablation" => EvalTask::Ablation,
            "all" => EvalTask::All,
            _ => bail!("unknown task {s:?} (expected file_loc, line_loc, gen, ablation or all)"),
        })
    }
}

pub fn parse_policy(name: &str, seed: u64) -> Result<PriorPolicy> {
    Ok(match name {
        "selective" => PriorPolicy::Selective,
        "random" => PriorPolicy::RandomMatched { seed },
        "all" => PriorPolicy::All,
        "none" => PriorPolicy::None,
        _ => bail!("unknown prior policy {name:?} (expected selective, random, all or none)"),
    })
}

/// `None` means every split.
pub fn parse_split(name: &str) -> Result<Option<Split>> {
    Ok(match name {
        "all" => None,
        "train" => Some(Split::Train),
        "valid" => Some(Split::Valid),
        "test" => Some(Split::Test),
        _ => bail!("unknown split {name:?} (expected train, valid, test or all)"),
    })
}

pub fn parse_ks(list: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = list
        .split(',')
        .map(|k| k.trim().parse::<usize>().with_context(|| format!("bad k {k:?}")))
        .collect::<Result<_>>()?;
    if ks.is_empty() || ks.contains(&0) {
        bail!("k values must be positive");
    }
    Ok(ks)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub task: EvalTask,
    pub ks: Vec<usize>,
    pub policy: PriorPolicy,
    pub seed: u64,
    pub split: Option<Split>,
    pub absent: AbsentClass,
}

pub fn eval(dataset: &Path, config: EngineConfig, opts: &EvalOptions) -> Result<MetricReport> {
    let ds = Dataset::load(dataset)?;
    let engine = Engine::lexical(config);
    let mut report = MetricReport::new(&engine, opts.policy, opts.split);
    let t = opts.task;
    if matches!(t, EvalTask::FileLoc | EvalTask::All) {
        report.file_loc = Some(eval_file_location(&ds, &engine, opts.split)?);
    }
    if matches!(t, EvalTask::LineLoc | EvalTask::All) {
        report.line_loc = Some(eval_line_location(&ds, &engine, opts.split, opts.policy, opts.absent)?);
    }
    if matches!(t, EvalTask::Gen | EvalTask::All) {
        report.generation = Some(eval_generation(&ds, &engine, opts.split, &opts.ks, opts.policy)?);
    }
    if matches!(t, EvalTask::Ablation | EvalTask::All) {
        report.ablation = Some(run_ablation(&ds, &engine, opts.split, &opts.ks, opts.seed)?);
    }
    Ok(report)
}

pub fn replay(log: &Path, config: EngineConfig) -> Result<Vec<LocationReport>> {
    Ok(replay_log(&Engine::lexical(config), log)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCandidates {
    pub region_ref: String,
    pub candidates: Vec<EditCandidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub v: u32,
    pub locations: LocationReport,
    pub edits: Vec<RegionCandidates>,
}

/// Replays the edits of `diff` over the project in `dir` and recommends
/// follow-up locations and `k` candidates per region.
pub fn recommend(dir: &Path, diff: &Path, prompt: &str, k: usize, config: EngineConfig) -> Result<Recommendation> {
    let snapshot = load_project(dir)?;
    let text = fs::read_to_string(diff).with_context(|| format!("reading {}", diff.display()))?;
    let edits = diff_to_edits(&text)?;
    if edits.is_empty() {
        bail!("{} holds no edits", diff.display());
    }
    let store = SessionStore::in_memory(Engine::lexical(config));
    let id = store.create(snapshot, Prompt::new(prompt), Some("cli".into()))?;
    for e in edits {
        store.record_edit(&id, e, None)?;
    }
    let locations = store.recommend_locations(&id)?;
    let mut edits = Vec::new();
    for r in locations.files.iter().flat_map(|f| &f.regions) {
        let (candidates, error) = match store.recommend_edits(&id, &r.region_ref, k) {
            Ok(c) => (c, None),
            Err(e @ SessionError::Generate(_)) => (Vec::new(), Some(e.to_string())),
            Err(e) => return Err(e.into()),
        };
        edits.push(RegionCandidates {
            region_ref: r.region_ref.clone(),
            candidates,
            error,
        });
    }
    Ok(Recommendation { v: 1, locations, edits })
}

pub fn miner_config(path: Option<&Path>) -> Result<MinerConfig> {
    path.map_or_else(|| Ok(MinerConfig::default()), read_json)
}
