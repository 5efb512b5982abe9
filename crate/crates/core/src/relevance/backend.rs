use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::tokenize::{identifier_set, tokenize_lines};
use crate::wire::{unit_field, BackendError, WireClient};

/// Pairwise dependency estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencyScore {
    /// The former code depends on the latter.
    pub y_hat_1: f64,
    /// The latter code depends on the former.
    pub y_hat_2: f64,
}

/// Estimates directional dependency between two pieces of code.
///
/// Learned implementations are expected to have been trained with a
/// two-output sigmoid head under summed binary cross-entropy over both
/// directions, reading `<from> former <to> latter`.
pub trait DependencyBackend: Send + Sync {
    fn dep_pair(&self, former: &[String], latter: &[String]) -> Result<DependencyScore, BackendError>;

    /// Single-flight backends are never called concurrently.
    fn single_flight(&self) -> bool {
        false
    }
}

/// Directional identifier-overlap estimate: `y_hat_2` is the share of the
/// latter's identifiers that also occur in the former, `y_hat_1` the same with
/// roles swapped.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalDependency;

impl LexicalDependency {
    pub fn overlap(former: &[String], latter: &[String]) -> DependencyScore {
        let a = identifier_set(former);
        let b = identifier_set(latter);
        let inter = a.intersection(&b).count() as f64;
        let ratio = |denom: usize| if denom == 0 { 0.0 } else { inter / denom as f64 };
        DependencyScore {
            y_hat_1: ratio(a.len()),
            y_hat_2: ratio(b.len()),
        }
    }
}

impl DependencyBackend for LexicalDependency {
    fn dep_pair(&self, former: &[String], latter: &[String]) -> Result<DependencyScore, BackendError> {
        if tokenize_lines(former).is_empty() || tokenize_lines(latter).is_empty() {
            return Err(BackendError::InvalidInput("dep_pair needs two non-empty code pieces".into()));
        }
        Ok(LexicalDependency::overlap(former, latter))
    }
}

/// Dependency estimates served by an external process.
pub struct ExternalDependency {
    client: Arc<WireClient>,
    single_flight: bool,
}

impl ExternalDependency {
    pub fn new(client: Arc<WireClient>, single_flight: bool) -> Self {
        ExternalDependency { client, single_flight }
    }
}

impl DependencyBackend for ExternalDependency {
    fn dep_pair(&self, former: &[String], latter: &[String]) -> Result<DependencyScore, BackendError> {
        let mut req = Map::new();
        req.insert("former".into(), json!(tokenize_lines(former)));
        req.insert("latter".into(), json!(tokenize_lines(latter)));
        let resp = self.client.call("dep_pair", req)?;
        Ok(DependencyScore {
            y_hat_1: unit_field(&resp, "y1")?,
            y_hat_2: unit_field(&resp, "y2")?,
        })
    }

    fn single_flight(&self) -> bool {
        self.single_flight
    }
}

/// L2-normalized sparse term vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermVector(BTreeMap<String, f64>);

impl TermVector {
    pub fn from_counts(counts: BTreeMap<String, f64>) -> Self {
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return TermVector::default();
        }
        TermVector(counts.into_iter().map(|(k, v)| (k, v / norm)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Cosine similarity; a zero vector has similarity 0 with everything.
    pub fn cosine(&self, other: &TermVector) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() { (self, other) } else { (other, self) };
        let dot: f64 = small
            .0
            .iter()
            .filter_map(|(k, v)| large.0.get(k).map(|w| v * w))
            .sum();
        // an empty sum is -0.0; normalize it
        (dot + 0.0).clamp(-1.0, 1.0)
    }
}

/// Maps code (or prompt text) to a vector space for cosine similarity.
pub trait Embedder: Send + Sync {
    fn embed(&self, lines: &[String]) -> TermVector;
}

/// Term-frequency vectors over the shared tokenizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfEmbedder;

impl Embedder for TfEmbedder {
    fn embed(&self, lines: &[String]) -> TermVector {
        let mut counts = BTreeMap::new();
        for t in tokenize_lines(lines) {
            *counts.entry(t).or_insert(0.0) += 1.0;
        }
        TermVector::from_counts(counts)
    }
}

/// Scoring backends used by file localization and prior-edit relevance.
#[derive(Clone)]
pub struct ScoringBackends {
    pub dependency: Arc<dyn DependencyBackend>,
    pub embedder: Arc<dyn Embedder>,
}

impl ScoringBackends {
    pub fn lexical() -> Self {
        ScoringBackends {
            dependency: Arc::new(LexicalDependency),
            embedder: Arc::new(TfEmbedder),
        }
    }
}

impl Default for ScoringBackends {
    fn default() -> Self {
        ScoringBackends::lexical()
    }
}
