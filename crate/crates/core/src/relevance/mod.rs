//! Scoring: file propagation likelihood (dependency + semantic similarity),
//! line locality, prior-edit relevance and its normalized distribution.

mod backend;
mod config;
mod prior;
mod score;

pub use backend::{
    DependencyBackend, DependencyScore, Embedder, ExternalDependency, LexicalDependency, ScoringBackends, TermVector,
    TfEmbedder,
};
pub use config::{ConfigError, ScoringConfig};
pub use prior::{
    loc_sim, logistic, prior_relevance, relevance_distribution, relevance_features, score_priors, select_prior_edits,
    Combiner, LogisticCombiner, RankedPrior, RelevanceDistribution, RelevanceFeatures, ScoredPrior, TargetCode,
};
pub use score::{
    dep_file, file_propagation_score, locate_files, propagation_score, rank_order, sem_file, FileScore, FileScorer,
    RankedFile,
};
