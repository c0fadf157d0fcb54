//! Transform-Estimate-Discard: alternate mixture proportion estimation on a
//! hold-out split with loss-ranked discarding on the training split.

use serde::{Deserialize, Serialize};

use crate::data::{
    pvn_accuracy, split_pu, ExperimentRecord, LabeledSet, PuDataset, PuSamples, RandomSeed, DEFAULT_SPLIT_FRACTION,
    DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::learn::{rank_and_discard, train_error, Classifier, ConvergenceMonitor, LossWeights, TrainConfig, Trainer};
use crate::mpe::{bbe_estimate, BbeConfig, MixtureEstimate};

pub const DEFAULT_WARM_START_EPOCHS: usize = 20;
/// Epochs averaged into the final estimate.
pub const FINAL_WINDOW: usize = 10;
/// Consecutive epochs with every unlabeled sample discarded before the
/// trace is flagged as stalled.
pub const STALL_EPOCHS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TednConfig {
    pub warm_start_epochs: usize,
    pub bbe: BbeConfig,
    pub split_fraction: f64,
    /// Optimizer settings. `train.epochs` is not used; see `max_epochs`.
    pub train: TrainConfig,
    /// Cap on alternating epochs after the warm start.
    pub max_epochs: usize,
}

impl Default for TednConfig {
    fn default() -> Self {
        TednConfig {
            warm_start_epochs: DEFAULT_WARM_START_EPOCHS,
            bbe: BbeConfig::default(),
            split_fraction: DEFAULT_SPLIT_FRACTION,
            train: TrainConfig::default(),
            max_epochs: 100,
        }
    }
}

impl TednConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "split_fraction must lie in (0,1), got {}",
                self.split_fraction
            )));
        }
        self.bbe.validate()?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    WarmStart,
    Alternating,
}

/// State after one epoch of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TednEpoch {
    /// Zero-based, counted across both phases.
    pub epoch: usize,
    pub phase: Phase,
    /// Clamped hold-out estimate from the model as it stands after this epoch;
    /// it drives the discard of the following epoch.
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub train_error: f64,
    /// Number of training-split unlabeled samples used as negatives.
    pub retained: usize,
    pub pvn_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TednTrace {
    pub epochs: Vec<TednEpoch>,
    /// Set when every unlabeled sample was discarded for too long.
    pub stalled: bool,
}

impl TednTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn alternating(&self) -> impl Iterator<Item = &TednEpoch> + '_ {
        self.epochs.iter().filter(|e| e.phase == Phase::Alternating)
    }

    /// Estimate from the warm-started classifier alone, before any discarding.
    pub fn warm_start_estimate(&self) -> Option<f64> {
        self.epochs.iter().rfind(|e| e.phase == Phase::WarmStart).map(|e| e.alpha_hat)
    }

    /// One log row per epoch.
    pub fn records(&self, method: &str, seed: u64, alpha_true: Option<f64>) -> Vec<ExperimentRecord> {
        self.epochs
            .iter()
            .map(|e| {
                let mut r = ExperimentRecord::new(method, seed, e.epoch).with_alpha(e.alpha_hat, alpha_true);
                r.train_error = Some(e.train_error);
                r.pvn_accuracy = e.pvn_accuracy;
                r
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TednOutcome<M> {
    pub model: M,
    /// Mean over the last [`FINAL_WINDOW`] epochs; threshold fields come
    /// from the last epoch.
    pub estimate: MixtureEstimate,
    pub trace: TednTrace,
}

fn holdout_estimate<M: Classifier>(model: &M, holdout: &PuSamples, bbe: &BbeConfig) -> Result<MixtureEstimate> {
    let z_p = model.scores(holdout.positives());
    let z_u = model.scores(holdout.unlabeled());
    bbe_estimate(&z_p, &z_u, bbe)
}

fn eval_accuracy<M: Classifier>(model: &M, eval: Option<&LabeledSet>) -> Result<Option<f64>> {
    eval.map(|e| pvn_accuracy(&model.scores(e.samples()), e.labels(), DEFAULT_THRESHOLD))
        .transpose()
}

/// Runs the full procedure: split, warm start, then alternate estimate,
/// discard and one unweighted epoch until the training error settles or
/// `max_epochs` is reached.
///
/// Only `data` is used for learning. `eval`, when given, is scored after
/// every epoch to fill `pvn_accuracy` in the trace.
pub fn tedn_train<M: Classifier>(
    model: M,
    data: &PuSamples,
    config: &TednConfig,
    eval: Option<&LabeledSet>,
) -> Result<TednOutcome<M>> {
    config.validate()?;
    if data.positives().is_empty() || data.unlabeled().is_empty() {
        return Err(Error::invalid("(TED)^n needs positive and unlabeled samples"));
    }
    let split = split_pu(&PuDataset::new(data.clone(), None)?, config.split_fraction, config.train.seed)?;
    let train = split.train.samples();
    let hold = split.holdout.samples();
    let (x_p, x_u) = (train.positives(), train.unlabeled());
    let n_u = x_u.len();

    let mut trainer = Trainer::new(model, &config.train)?;
    let mut trace = TednTrace::default();
    let mut epoch = 0;

    for _ in 0..config.warm_start_epochs {
        trainer.sgd_epoch(x_p, x_u, LossWeights::UNWEIGHTED)?;
        let est = holdout_estimate(trainer.model(), hold, &config.bbe)?;
        trace.epochs.push(TednEpoch {
            epoch,
            phase: Phase::WarmStart,
            alpha_hat: est.alpha_clamped,
            c_hat: est.c_hat,
            train_error: train_error(trainer.model(), x_p, x_u, DEFAULT_THRESHOLD)?,
            retained: n_u,
            pvn_accuracy: eval_accuracy(trainer.model(), eval)?,
        });
        epoch += 1;
    }

    let mut est = holdout_estimate(trainer.model(), hold, &config.bbe)?;
    let mut monitor = ConvergenceMonitor::default();
    let mut at_one = 0;
    for _ in 0..config.max_epochs {
        // keep at least one unlabeled sample as a negative
        let alpha = est.alpha_clamped.min(1.0 - 1.0 / n_u as f64);
        at_one = if est.alpha_clamped >= 1.0 { at_one + 1 } else { 0 };
        if at_one > STALL_EPOCHS {
            trace.stalled = true;
        }
        let keep = rank_and_discard(trainer.model(), x_u, 1.0 - alpha)?;
        let negatives = x_u.select(&keep);
        trainer.sgd_epoch(x_p, &negatives, LossWeights::UNWEIGHTED)?;
        let err = train_error(trainer.model(), x_p, &negatives, DEFAULT_THRESHOLD)?;
        est = holdout_estimate(trainer.model(), hold, &config.bbe)?;
        trace.epochs.push(TednEpoch {
            epoch,
            phase: Phase::Alternating,
            alpha_hat: est.alpha_clamped,
            c_hat: est.c_hat,
            train_error: err,
            retained: keep.len(),
            pvn_accuracy: eval_accuracy(trainer.model(), eval)?,
        });
        epoch += 1;
        if monitor.push(err) && config.train.stop_on_convergence {
            break;
        }
    }

    let estimate = final_estimate(&trace, est);
    Ok(TednOutcome { model: trainer.into_model(), estimate, trace })
}

fn final_estimate(trace: &TednTrace, last: MixtureEstimate) -> MixtureEstimate {
    let tail: Vec<f64> = trace.alternating().map(|e| e.alpha_hat).collect();
    if tail.is_empty() {
        return last;
    }
    let window = &tail[tail.len().saturating_sub(FINAL_WINDOW)..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    MixtureEstimate { alpha_hat: mean, alpha_clamped: mean, ..last }
}

/// Scores a sequence of model snapshots against the hidden labels of `eval`.
///
/// `alpha_hats[i]`, when present, is the estimate that accompanied snapshot
/// `i`. One record per snapshot, numbered from zero.
pub fn evaluate_epochwise<M: Classifier>(
    snapshots: &[M],
    alpha_hats: &[Option<f64>],
    eval: &PuDataset,
    method: &str,
    seed: RandomSeed,
) -> Result<Vec<ExperimentRecord>> {
    if alpha_hats.len() != snapshots.len() {
        return Err(Error::invalid("one alpha entry is needed per snapshot"));
    }
    let labeled = LabeledSet::from_unlabeled(eval)?;
    snapshots
        .iter()
        .zip(alpha_hats)
        .enumerate()
        .map(|(epoch, (m, a))| {
            let mut r = ExperimentRecord::new(method, seed.0, epoch);
            if let Some(a) = a {
                r = r.with_alpha(*a, eval.alpha_true());
            }
            r.pvn_accuracy = Some(pvn_accuracy(&m.scores(labeled.samples()), labeled.labels(), DEFAULT_THRESHOLD)?);
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{GroundTruth, Label, Samples};
    use crate::learn::LogisticModel;

    fn pu_1d(pos: &[f64], unl: &[f64]) -> PuSamples {
        PuSamples::new(Samples::from_scalars(pos).unwrap(), Samples::from_scalars(unl).unwrap()).unwrap()
    }

    fn spread(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn trace_shape_and_phases() {
        let data = pu_1d(&spread(40, 1.0, 3.0), &spread(40, -3.0, -1.0));
        let cfg = TednConfig { warm_start_epochs: 3, max_epochs: 4, ..Default::default() };
        let cfg = TednConfig { train: TrainConfig { stop_on_convergence: false, ..cfg.train }, ..cfg };
        let out = tedn_train(LogisticModel::new(1, RandomSeed(3)).unwrap(), &data, &cfg, None).unwrap();
        assert_eq!(out.trace.len(), 7);
        assert!(out.trace.epochs[..3].iter().all(|e| e.phase == Phase::WarmStart && e.retained == 32));
        assert_eq!(out.trace.alternating().count(), 4);
        assert!(out.trace.epochs.iter().enumerate().all(|(i, e)| e.epoch == i));
        let mean: f64 = out.trace.alternating().map(|e| e.alpha_hat).sum::<f64>() / 4.0;
        assert!((out.estimate.alpha_hat - mean).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_trace() {
        let data = pu_1d(&spread(30, 0.0, 2.0), &spread(30, -2.0, 1.0));
        let cfg = TednConfig { warm_start_epochs: 2, max_epochs: 5, ..Default::default() };
        let run = || tedn_train(LogisticModel::new(1, RandomSeed(9)).unwrap(), &data, &cfg, None).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn always_retains_an_unlabeled_sample() {
        // unlabeled identical to positives: the estimate sits at 1
        let xs = spread(30, 0.0, 1.0);
        let data = pu_1d(&xs, &xs);
        let cfg = TednConfig { warm_start_epochs: 0, max_epochs: 30, ..Default::default() };
        let cfg = TednConfig { train: TrainConfig { stop_on_convergence: false, ..cfg.train }, ..cfg };
        let out = tedn_train(LogisticModel::new(1, RandomSeed(1)).unwrap(), &data, &cfg, None).unwrap();
        assert!(out.trace.alternating().all(|e| e.retained >= 1));
    }

    #[test]
    fn rejects_bad_config() {
        let data = pu_1d(&[1.0, 2.0], &[0.0, 0.5]);
        let cfg = TednConfig { split_fraction: 1.0, ..Default::default() };
        assert!(tedn_train(LogisticModel::new(1, RandomSeed(0)).unwrap(), &data, &cfg, None).is_err());
    }

    #[test]
    fn epochwise_needs_labels_and_counts_rows() {
        let samples = pu_1d(&[1.0], &[2.0, -2.0]);
        let perfect = LogisticModel::from_parts(vec![50.0], 0.0).unwrap();
        let truth = GroundTruth::new(vec![Label::Positive, Label::Negative], Some(0.5)).unwrap();
        let labeled = PuDataset::new(samples.clone(), Some(truth)).unwrap();
        let snaps = vec![perfect.clone(), perfect.clone(), perfect];
        let rows = evaluate_epochwise(&snaps, &[Some(0.5), None, Some(0.25)], &labeled, "x", RandomSeed(0)).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.pvn_accuracy == Some(1.0)));
        assert_eq!(rows[2].abs_err, Some(0.25));

        let bare = PuDataset::new(samples, None).unwrap();
        let err = evaluate_epochwise(&snaps, &[None; 3], &bare, "x", RandomSeed(0)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }
}
