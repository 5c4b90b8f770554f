//! Human-relative idea-space crowding.
//!
//! Estimates how crowded model-only outputs are relative to unaided human outputs for the same
//! creative task, and turns the excess into adoption-game quantities.
//!
//! * [`corpus`]: responses, sampling units, and corpus loading
//! * [`kernels`]: the five crowding kernels and text normalization
//! * [`embedding`]: embedding tables, file I/O and the remote encoder client
//! * [`estimators`]: matched-sample bootstrap, family aggregation, protocol comparison
//! * [`rarefaction`]: finite-sample stability curves and drift
//! * [`adoption`]: redundancy cost, critical benefit, expected population cost

pub mod adoption;
pub mod corpus;
pub mod embedding;
pub mod estimators;
pub mod kernels;
pub mod rarefaction;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use adoption::{
    critical_benefit, delta_from_rho, expected_cost, monte_carlo_expected_cost, parity_check,
    redundancy_cost, AdoptionError, AdoptionScenario, MonteCarloEstimate, ParityReport,
};
pub use corpus::{
    load_corpus, parse_corpus, partition_units, validate_corpus, Corpus, CorpusError, Response,
    SamplingUnit, Source, SourceKey, ValidationReport,
};
pub use embedding::{
    coverage_check, fetch_embeddings, fetch_embeddings_remote, load_embeddings, EmbeddingError,
    EmbeddingTable,
};
pub use estimators::{
    aggregate_family, bootstrap_condition, compare_protocols, pairwise_mean_crowding,
    spearman_rank, ConditionEstimate, EstimateError, EstimatorConfig, FamilyEstimate,
};
pub use kernels::{KernelError, KernelKind, KernelSpec, StopwordList, UnitVector};
pub use rarefaction::{rarefaction_curve, relative_drift, RarefactionCurve, RarefactionError};
pub use stats::Estimate;
