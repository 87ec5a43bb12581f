//! Cross-validation and bootstrap estimators of a two-class classifier's
//! error rate and AUC.
//!
//! Every estimator family (CVN, CVK, CVKR, CVKM, leave-one-out bootstrap)
//! comes in a pooled and a partitioned variant; which pairs coincide
//! exactly, and which differ, is covered by the test suite. Alongside the
//! estimators sit exact rational identities for the bootstrap's out-of-bag
//! counts, an MSE decomposition for comparing estimates with true
//! conditional performance, and Monte-Carlo campaigns on multinormal data.

pub mod analysis;
pub mod combinatorics;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod resampling;
pub mod rng;
pub mod simlab;
pub mod trainers;

pub use domain::{
    empirical_auc, mw_kernel, zero_one_loss, Class, LabeledPoint, ScoringRule, StratifiedDataset, Trainer,
    TrainingSet,
};
pub use error::{Error, Result};
pub use estimators::{CoveragePolicy, EstimatorReport, EstimatorSpec, Metric, Variant, Version};
pub use resampling::{BootstrapReplicate, PartitionMap, RepeatedPartition, SamplingModel, StratifiedPartition};
pub use trainers::{LinearRule, TrainerSpec};
