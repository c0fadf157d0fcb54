use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{sigmoid, Classifier};
use crate::data::{predicts_positive, streams, Label, PuSamples, RandomSeed, Samples};
use crate::error::{Error, Result};

/// Scores are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const LOSS_EPS: f64 = 1e-7;
/// Number of epochs over which the training error must stay flat.
pub const CONVERGENCE_WINDOW: usize = 5;
pub const CONVERGENCE_TOL: f64 = 1e-4;

/// Clamped cross-entropy `ℓ(z, y)`.
pub fn cross_entropy(score: f64, label: Label) -> f64 {
    let z = score.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    match label {
        Label::Positive => -z.ln(),
        Label::Negative => -(1.0 - z).ln(),
    }
}

/// Derivative of [`cross_entropy`] with respect to the pre-sigmoid logit.
/// Zero where the clamp is active.
pub fn cross_entropy_dlogit(score: f64, label: Label) -> f64 {
    if score.is_nan() {
        return f64::NAN;
    }
    if !(LOSS_EPS..=1.0 - LOSS_EPS).contains(&score) {
        return 0.0;
    }
    match label {
        Label::Positive => score - 1.0,
        Label::Negative => score,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
}

fn mean_loss<M: Classifier>(model: &M, batch: &Samples, label: Label) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    let total: f64 = batch.rows().map(|x| cross_entropy(model.score(x), label)).sum();
    Ok(total / batch.len() as f64)
}

/// `L̂⁺(f; X)`: mean loss of labeling every sample positive.
pub fn loss_pos<M: Classifier>(model: &M, batch: &Samples) -> Result<f64> {
    mean_loss(model, batch, Label::Positive)
}

/// `L̂⁻(f; X)`: mean loss of labeling every sample negative.
pub fn loss_neg<M: Classifier>(model: &M, batch: &Samples) -> Result<f64> {
    mean_loss(model, batch, Label::Negative)
}

/// Multipliers on the positive and negative mean losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub pos: f64,
    pub neg: f64,
}

impl LossWeights {
    pub const UNWEIGHTED: LossWeights = LossWeights { pos: 1.0, neg: 1.0 };

    /// `(α, 1 - α)`.
    pub fn from_alpha(alpha: f64) -> Self {
        LossWeights { pos: alpha, neg: 1.0 - alpha }
    }
}

/// `w⁺·L̂⁺(f; pos) + w⁻·L̂⁻(f; neg)`; an empty side contributes nothing.
pub fn weighted_loss<M: Classifier>(model: &M, pos: &Samples, neg: &Samples, w: LossWeights) -> f64 {
    let p = if pos.is_empty() { 0.0 } else { mean_loss(model, pos, Label::Positive).unwrap() };
    let n = if neg.is_empty() { 0.0 } else { mean_loss(model, neg, Label::Negative).unwrap() };
    w.pos * p + w.neg * n
}

/// Summed 0-1 training error `Ê⁺(f; pos) + Ê⁻(f; neg)`, so in `[0, 2]`.
pub fn train_error<M: Classifier>(model: &M, pos: &Samples, neg: &Samples, threshold: f64) -> Result<f64> {
    if pos.is_empty() && neg.is_empty() {
        return Err(Error::invalid("training error of two empty sets"));
    }
    let rate = |s: &Samples, wrong: &dyn Fn(f64) -> bool| -> f64 {
        if s.is_empty() {
            0.0
        } else {
            s.rows().filter(|x| wrong(model.score(x))).count() as f64 / s.len() as f64
        }
    };
    let e_pos = rate(pos, &|z| !predicts_positive(z, threshold));
    let e_neg = rate(neg, &|z| predicts_positive(z, threshold));
    Ok(e_pos + e_neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: RandomSeed,
    /// Stop once the summed training error is flat over a 5-epoch window.
    pub stop_on_convergence: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 64,
            epochs: 100,
            loss: LossKind::CrossEntropy,
            seed: RandomSeed(0),
            stop_on_convergence: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0,1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Momentum SGD with L2 weight decay over a single model.
///
/// Owns the model, the velocity buffer and the shuffling stream, so
/// consecutive epochs continue one optimization trajectory.
#[derive(Debug, Clone)]
pub struct Trainer<M> {
    model: M,
    config: TrainConfig,
    velocity: Vec<f64>,
    rng: ChaCha8Rng,
    grad: Vec<f64>,
    scratch: Vec<f64>,
}

impl<M: Classifier> Trainer<M> {
    pub fn new(model: M, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let p = model.num_params();
        Ok(Trainer {
            model,
            config: *config,
            velocity: vec![0.0; p],
            rng: config.seed.rng(streams::SHUFFLE),
            grad: vec![0.0; p],
            scratch: vec![0.0; p],
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn into_model(self) -> M {
        self.model
    }

    /// One shuffled pass over `pos ∪ neg` in mini-batches of `batch_size`.
    /// Each batch descends `w⁺·L̂⁺(batch pos) + w⁻·L̂⁻(batch neg)`.
    pub fn sgd_epoch(&mut self, pos: &Samples, neg: &Samples, w: LossWeights) -> Result<()> {
        if pos.dim() != self.model.dim() || neg.dim() != self.model.dim() {
            return Err(Error::invalid("sample dimension does not match the model"));
        }
        let mut order: Vec<(Label, usize)> = (0..pos.len())
            .map(|i| (Label::Positive, i))
            .chain((0..neg.len()).map(|i| (Label::Negative, i)))
            .collect();
        order.shuffle(&mut self.rng);

        for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
            let n_pos = batch.iter().filter(|(l, _)| *l == Label::Positive).count();
            let n_neg = batch.len() - n_pos;
            self.grad.fill(0.0);
            for &(label, i) in batch {
                let (x, scale) = match label {
                    Label::Positive => (pos.row(i), w.pos / n_pos as f64),
                    Label::Negative => (neg.row(i), w.neg / n_neg as f64),
                };
                let a = self.model.logit_grad(x, &mut self.scratch);
                let coef = scale * cross_entropy_dlogit(sigmoid(a), label);
                if coef != 0.0 {
                    for (g, s) in self.grad.iter_mut().zip(&self.scratch) {
                        *g += coef * s;
                    }
                }
            }
            if self.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { batch: b });
            }
            let TrainConfig { learning_rate: lr, momentum: mu, weight_decay: wd, .. } = self.config;
            for ((p, v), g) in self.model.params_mut().iter_mut().zip(&mut self.velocity).zip(&self.grad) {
                *v = mu * *v + g + wd * *p;
                *p -= lr * *v;
            }
        }
        Ok(())
    }
}

/// Indices of the `floor(keep_fraction · n)` smallest losses, ties broken by
/// index, returned in ascending index order.
pub fn select_lowest(losses: &[f64], keep_fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&keep_fraction) {
        return Err(Error::invalid(format!("keep_fraction must lie in [0,1], got {keep_fraction}")));
    }
    if losses.is_empty() {
        return Err(Error::invalid("nothing to rank"));
    }
    let n = losses.len();
    // the 1e-9 guards against products like 0.7 * 10 = 6.999...
    let keep = ((keep_fraction * n as f64 + 1e-9).floor() as usize).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    idx.truncate(keep);
    idx.sort_unstable();
    Ok(idx)
}

/// Keeps the unlabeled samples with the smallest negative-label loss
/// `ℓ(f(x), -1)`, i.e. those the model scores as least positive.
pub fn rank_and_discard<M: Classifier>(model: &M, unlabeled: &Samples, keep_fraction: f64) -> Result<Vec<usize>> {
    let losses: Vec<f64> = unlabeled.rows().map(|x| cross_entropy(model.score(x), Label::Negative)).collect();
    select_lowest(&losses, keep_fraction)
}

/// Tracks the summed training error and reports when it has gone flat.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceMonitor {
    history: Vec<f64>,
}

impl ConvergenceMonitor {
    /// Records one epoch; true once the last [`CONVERGENCE_WINDOW`] values
    /// span less than [`CONVERGENCE_TOL`].
    pub fn push(&mut self, err: f64) -> bool {
        self.history.push(err);
        if self.history.len() < CONVERGENCE_WINDOW {
            return false;
        }
        let w = &self.history[self.history.len() - CONVERGENCE_WINDOW..];
        let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo < CONVERGENCE_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossWeighting {
    /// `(α, 1 - α)`.
    #[default]
    Weighted,
    /// `(1, 1)`.
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_error: f64,
    /// Size of the provisional negative set used in this epoch.
    pub retained: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub history: Vec<EpochStats>,
    pub converged: bool,
}

/// CVIR training with a known (or externally estimated) mixture proportion.
///
/// Each epoch re-ranks the unlabeled set with the current model, keeps the
/// `1 - α` fraction with the lowest negative-label loss as provisional
/// negatives, then runs one SGD epoch on positives vs. those negatives.
/// `on_epoch` sees the model after every epoch.
pub fn cvir_train<M: Classifier>(
    model: M,
    data: &PuSamples,
    alpha: f64,
    config: &TrainConfig,
    weighting: LossWeighting,
    mut on_epoch: impl FnMut(&M, &EpochStats),
) -> Result<TrainOutcome<M>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0,1], got {alpha}")));
    }
    if data.positives().is_empty() || data.unlabeled().is_empty() {
        return Err(Error::invalid("CVIR needs positive and unlabeled samples"));
    }
    let weights = match weighting {
        LossWeighting::Weighted => LossWeights::from_alpha(alpha),
        LossWeighting::Unweighted => LossWeights::UNWEIGHTED,
    };
    let mut trainer = Trainer::new(model, config)?;
    let mut monitor = ConvergenceMonitor::default();
    let mut history = Vec::new();
    let mut converged = false;
    for epoch in 0..config.epochs {
        let keep = rank_and_discard(trainer.model(), data.unlabeled(), 1.0 - alpha)?;
        let negatives = data.unlabeled().select(&keep);
        trainer.sgd_epoch(data.positives(), &negatives, weights)?;
        let err = train_error(trainer.model(), data.positives(), &negatives, crate::data::DEFAULT_THRESHOLD)?;
        let stats = EpochStats { epoch, train_error: err, retained: keep.len() };
        on_epoch(trainer.model(), &stats);
        history.push(stats);
        if monitor.push(err) && config.stop_on_convergence {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome { model: trainer.into_model(), history, converged })
}

/// Plain positive-versus-unlabeled training for exactly `epochs` epochs,
/// treating every unlabeled sample as negative with unweighted losses.
pub fn pvu_train<M: Classifier>(
    model: M,
    data: &PuSamples,
    epochs: usize,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&M, &EpochStats),
) -> Result<TrainOutcome<M>> {
    let mut trainer = Trainer::new(model, config)?;
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        trainer.sgd_epoch(data.positives(), data.unlabeled(), LossWeights::UNWEIGHTED)?;
        let err = train_error(trainer.model(), data.positives(), data.unlabeled(), crate::data::DEFAULT_THRESHOLD)?;
        let stats = EpochStats { epoch, train_error: err, retained: data.unlabeled().len() };
        on_epoch(trainer.model(), &stats);
        history.push(stats);
    }
    Ok(TrainOutcome { model: trainer.into_model(), history, converged: false })
}

/// `W` epochs of domain-discrimination (PvU) training. `W = 0` returns the
/// model untouched.
pub fn pvu_warm_start<M: Classifier>(model: M, data: &PuSamples, warm_epochs: usize, config: &TrainConfig) -> Result<M> {
    Ok(pvu_train(model, data, warm_epochs, config, |_, _| {})?.model)
}
