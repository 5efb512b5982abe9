use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::generator::{generate_candidates, EditCandidate, EditGenerator, GenerateError, GeneratorConfig, HunkRegion, PatternTransfer};
use crate::locator::{label_file_with, CodeWindow, HeuristicLabeler, LineLabeler, LinePrediction, LocatorConfig, LocatorError};
use crate::model::{ContextualEdit, Prompt};
use crate::relevance::{
    prior_relevance, Combiner, ConfigError, LogisticCombiner, RankedPrior, ScoringBackends, ScoringConfig, TargetCode,
};
use crate::wire::BackendError;

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub scoring: ScoringConfig,
    pub combiner: LogisticCombiner,
    pub locator: LocatorConfig,
    pub heuristic: HeuristicLabeler,
    pub generator: GeneratorConfig,
    pub transfer: PatternTransfer,
    /// When no prior clears the relevance threshold for a target, fall back
    /// to the most recent edit so that the location it produced still has
    /// something to learn from.
    pub trigger_fallback: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            scoring: ScoringConfig::default(),
            combiner: LogisticCombiner::default(),
            locator: LocatorConfig::default(),
            heuristic: HeuristicLabeler::default(),
            generator: GeneratorConfig::default(),
            transfer: PatternTransfer::default(),
            trigger_fallback: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scoring.validate()?;
        self.locator.validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.generator.max_input_tokens == 0 {
            return Err(ConfigError("generator.max_input_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON form; identifies a configuration in
    /// metric reports.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The configured backends plus the operations the session and evaluation
/// layers compose.
#[derive(Clone)]
pub struct Engine {
    pub config: EngineConfig,
    pub scoring: ScoringBackends,
    pub combiner: Arc<dyn Combiner>,
    pub labeler: Arc<dyn LineLabeler>,
    pub generator: Arc<dyn EditGenerator>,
}

impl Engine {
    /// Lexical scoring, heuristic labeling and pattern transfer: needs no
    /// model server.
    pub fn lexical(config: EngineConfig) -> Self {
        Engine {
            scoring: ScoringBackends::lexical(),
            combiner: Arc::new(config.combiner.clone()),
            labeler: Arc::new(config.heuristic.clone()),
            generator: Arc::new(config.transfer.clone()),
            config,
        }
    }

    /// Every prior with its relevance to `target`, most relevant first,
    /// recency breaking ties.
    pub fn rank_priors(&self, priors: &[ContextualEdit], target: &TargetCode) -> Result<Vec<RankedPrior>, BackendError> {
        let mut scored = priors
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let r = prior_relevance(&p.edit, target, &self.config.scoring, self.combiner.as_ref(), &self.scoring)?;
                Ok((i, r))
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.cmp(&a.0)));
        Ok(scored
            .into_iter()
            .map(|(i, relevance)| RankedPrior {
                prior: priors[i].clone(),
                relevance,
            })
            .collect())
    }

    /// Priors whose relevance exceeds the threshold. With the trigger
    /// fallback on and nothing selected, the last prior is used alone.
    pub fn select_priors(&self, priors: &[ContextualEdit], target: &TargetCode) -> Result<Vec<RankedPrior>, BackendError> {
        let ranked = self.rank_priors(priors, target)?;
        let th = self.config.scoring.th_pri;
        let mut chosen: Vec<RankedPrior> = ranked.iter().filter(|p| p.relevance > th).cloned().collect();
        if chosen.is_empty() && self.config.trigger_fallback {
            if let Some(last) = priors.last() {
                chosen.extend(ranked.into_iter().filter(|p| &p.prior == last).take(1));
            }
        }
        Ok(chosen)
    }

    /// Per-line labels for one file, with priors selected against each
    /// window.
    pub fn label_lines(
        &self,
        path: &str,
        lines: &[String],
        prompt: &Prompt,
        priors: &[ContextualEdit],
    ) -> Result<Vec<LinePrediction>, LocatorError> {
        let select = |w: &CodeWindow| {
            let target = TargetCode {
                file_path: w.file_path.clone(),
                anchor_line: w.start_line + w.lines.len() / 2,
                code: w.lines.clone(),
            };
            self.select_priors(priors, &target)
        };
        label_file_with(path, lines, prompt, &self.config.locator, self.labeler.as_ref(), &select)
    }

    pub fn candidates(
        &self,
        region: &HunkRegion,
        prompt: &Prompt,
        priors: &[RankedPrior],
        k: usize,
    ) -> Result<Vec<EditCandidate>, GenerateError> {
        generate_candidates(region, prompt, priors, k, &self.config.generator, self.generator.as_ref())
    }
}

/// The target describing a region before its new content is known.
pub fn region_target(region: &HunkRegion, file_lines: &[String]) -> TargetCode {
    TargetCode::at_location(
        &region.file_path,
        file_lines,
        region.edit_type,
        region.start_line,
        region.target_lines.len(),
    )
}
