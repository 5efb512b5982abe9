use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::MIN_SEGMENT_TOKENS;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

/// Coefficients and thresholds of file propagation scoring and prior-edit
/// selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    /// Weight of the dependency term.
    pub alpha1: f64,
    /// Weight of the semantic-similarity term.
    pub alpha2: f64,
    /// Intercept.
    pub epsilon: f64,
    /// Files scoring strictly above this are reported.
    pub th_sub: f64,
    /// Prior edits with relevance strictly above this are selected.
    pub th_pri: f64,
    /// Locality window in lines.
    pub k_window: usize,
    pub max_segment_tokens: usize,
    /// Weight of prompt-to-segment similarity. Zero disables the term.
    pub prompt_weight: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            alpha1: 0.6,
            alpha2: 0.4,
            epsilon: 0.0,
            th_sub: 0.3,
            th_pri: 0.5,
            k_window: 10,
            max_segment_tokens: 256,
            prompt_weight: 0.0,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError(m.to_owned()));
        if !(self.alpha1 > 0.0 && self.alpha1.is_finite()) || !(self.alpha2 > 0.0 && self.alpha2.is_finite()) {
            return fail("alpha1 and alpha2 must be positive");
        }
        if !self.epsilon.is_finite() {
            return fail("epsilon must be finite");
        }
        // th_sub = +inf is allowed: it disables file reporting.
        if self.th_sub.is_nan() || self.th_sub < 0.0 {
            return fail("th_sub must be >= 0");
        }
        if !(self.th_pri > 0.0 && self.th_pri < 1.0) {
            return fail("th_pri must lie in (0, 1)");
        }
        if self.k_window < 1 {
            return fail("k_window must be >= 1");
        }
        if self.max_segment_tokens < MIN_SEGMENT_TOKENS {
            return fail("max_segment_tokens must be >= 16");
        }
        if !(self.prompt_weight >= 0.0 && self.prompt_weight.is_finite()) {
            return fail("prompt_weight must be >= 0");
        }
        Ok(())
    }
}
