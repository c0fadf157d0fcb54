//! Mixture proportion estimation and positive-unlabeled (PU) learning.
//!
//! Estimators work on classifier scores ([`mpe`]), learners train scoring
//! models from positive and unlabeled samples ([`learn`], [`tedn`]), and
//! [`synth`] produces tasks with known ground truth.

pub mod data;
pub mod ecdf;
pub mod error;
pub mod learn;
pub mod mpe;
pub mod synth;
pub mod tedn;

pub use data::{
    pvn_accuracy, pvn_error, split_pu, ExperimentRecord, FeatureVector, GroundTruth, Label, LabeledSet, PuDataset,
    PuSamples, RandomSeed, Samples, TrainHoldoutSplit,
};
pub use ecdf::{binomial_inversion, binomial_inversion_lower, TailCdf, ThresholdGrid};
pub use error::{Error, Result};
pub use learn::{Classifier, LogisticModel, MlpModel, Model, ModelSpec, TrainConfig};
pub use mpe::{bbe_estimate, naive_ratio_estimate, scott_estimate, BbeConfig, MixtureEstimate, ScottConfig};
pub use synth::{generate, generate_eval, TaskSpec};
pub use tedn::{tedn_train, TednConfig, TednOutcome, TednTrace};
