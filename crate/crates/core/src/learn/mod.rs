//! Classifiers and the procedures that train them on PU data.

mod model;
mod train;

pub use model::{
    sigmoid, Classifier, LogisticModel, MlpModel, Model, ModelKind, ModelRecord, ModelSpec, NamedArray,
    DEFAULT_HIDDEN, MODEL_RECORD_FORMAT, MODEL_RECORD_VERSION,
};
pub use train::{
    cross_entropy, cross_entropy_dlogit, cvir_train, loss_neg, loss_pos, pvu_train, pvu_warm_start,
    rank_and_discard, select_lowest, train_error, weighted_loss, ConvergenceMonitor, EpochStats, LossKind,
    LossWeighting, LossWeights, TrainConfig, TrainOutcome, Trainer, CONVERGENCE_TOL, CONVERGENCE_WINDOW,
    LOSS_EPS,
};
