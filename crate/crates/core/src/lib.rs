//! Multivariate two-sample testing through AUC maximization (ts-AUC) for
//! posturographic data.
//!
//! The pipeline runs from raw center-of-pressure recordings
//! ([`ingest`]) through feature extraction ([`features`]) to the ts-AUC test
//! ([`tsauc`]), which searches random-forest hyperparameters ([`forest`]) for
//! the largest out-of-bag AUC and then applies a Mann-Whitney-Wilcoxon test
//! ([`rank_stats`]) to the winning model's OOB scores. An MMD kernel test
//! ([`mmd`]), univariate tests with family-wise corrections, and
//! population-reduction studies ([`experiments`]) serve as baselines.

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod mmd;
pub mod rank_stats;
pub mod rng;
pub mod synth;
pub mod tsauc;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector, FEATURE_NAMES};
pub use forest::{ForestModel, Hyperparams, OobScores};
pub use ingest::{read_recording, resample, RawRecording, Statokinesigram};
pub use rank_stats::{Alternative, Correction, CorrectionResult, GroupedScores};
pub use tsauc::{ImportanceReport, SearchSpace, TsAucResult};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
