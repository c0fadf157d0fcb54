//! Dataset containers, seeded randomness, splitting and PvN metrics.
//!
//! Ground-truth labels for unlabeled samples live in [`GroundTruth`], which is
//! kept apart from [`PuSamples`]. Every training and estimation entry point in
//! this crate takes `&PuSamples`, so hidden labels cannot leak into them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default decision threshold on classifier scores.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Default share of samples kept for training in a train/hold-out split.
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.8;

/// A single input point. All entries are finite and there is at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature vector must have dimension >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector contains a non-finite entry"));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major matrix of feature vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("sample dimension must be >= 1"));
        }
        Ok(Samples { dim, data: Vec::new() })
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Result<Self> {
        let mut s = Samples::new(dim)?;
        s.data.reserve(dim * rows);
        Ok(s)
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut s = Samples::new(dim)?;
        for r in rows {
            s.push(r.as_ref())?;
        }
        Ok(s)
    }

    /// One-dimensional samples, e.g. raw classifier scores.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Samples::from_rows(1, values.iter().map(std::slice::from_ref))
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::invalid(format!(
                "row has dimension {}, expected {}",
                row.len(),
                self.dim
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector contains a non-finite entry"));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn push_vector(&mut self, v: &FeatureVector) -> Result<()> {
        self.push(v.as_slice())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Copies the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Samples { dim: self.dim, data }
    }

    /// Appends all rows of `other`.
    pub fn extend(&mut self, other: &Samples) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::invalid("cannot concatenate samples of different dimension"));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::invalid(format!("label must be +1 or -1, got {other}"))),
        }
    }
}

/// The part of a PU dataset that learners and estimators may see.
#[derive(Debug, Clone, PartialEq)]
pub struct PuSamples {
    positives: Samples,
    unlabeled: Samples,
}

impl PuSamples {
    pub fn new(positives: Samples, unlabeled: Samples) -> Result<Self> {
        if positives.dim() != unlabeled.dim() {
            return Err(Error::invalid(format!(
                "positives have dimension {} but unlabeled have {}",
                positives.dim(),
                unlabeled.dim()
            )));
        }
        Ok(PuSamples { positives, unlabeled })
    }

    pub fn positives(&self) -> &Samples {
        &self.positives
    }

    pub fn unlabeled(&self) -> &Samples {
        &self.unlabeled
    }

    pub fn dim(&self) -> usize {
        self.positives.dim()
    }
}

/// Evaluation-only knowledge about a PU dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    unlabeled_labels: Vec<Label>,
    alpha: Option<f64>,
}

impl GroundTruth {
    pub fn new(unlabeled_labels: Vec<Label>, alpha: Option<f64>) -> Result<Self> {
        if let Some(a) = alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid(format!("alpha_true must lie in [0,1], got {a}")));
            }
        }
        Ok(GroundTruth { unlabeled_labels, alpha })
    }

    pub fn labels(&self) -> &[Label] {
        &self.unlabeled_labels
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Fraction of unlabeled samples that are actually positive.
    pub fn empirical_alpha(&self) -> f64 {
        if self.unlabeled_labels.is_empty() {
            return 0.0;
        }
        let pos = self.unlabeled_labels.iter().filter(|l| **l == Label::Positive).count();
        pos as f64 / self.unlabeled_labels.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PuDataset {
    samples: PuSamples,
    truth: Option<GroundTruth>,
}

impl PuDataset {
    pub fn new(samples: PuSamples, truth: Option<GroundTruth>) -> Result<Self> {
        if let Some(t) = &truth {
            if t.labels().len() != samples.unlabeled().len() {
                return Err(Error::invalid(format!(
                    "hidden labels have length {} but there are {} unlabeled samples",
                    t.labels().len(),
                    samples.unlabeled().len()
                )));
            }
        }
        Ok(PuDataset { samples, truth })
    }

    pub fn samples(&self) -> &PuSamples {
        &self.samples
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }

    pub fn alpha_true(&self) -> Option<f64> {
        self.truth.as_ref().and_then(GroundTruth::alpha)
    }
}

/// Labeled positive-versus-negative data used only for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    samples: Samples,
    labels: Vec<Label>,
}

impl LabeledSet {
    pub fn new(samples: Samples, labels: Vec<Label>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::invalid("labeled set: samples and labels differ in length"));
        }
        Ok(LabeledSet { samples, labels })
    }

    /// The unlabeled half of a dataset together with its hidden labels.
    pub fn from_unlabeled(data: &PuDataset) -> Result<Self> {
        let truth = data
            .truth()
            .ok_or_else(|| Error::Unsupported("dataset carries no hidden labels".into()))?;
        LabeledSet::new(data.samples().unlabeled().clone(), truth.labels().to_vec())
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHoldoutSplit {
    pub train: PuDataset,
    pub holdout: PuDataset,
    pub split_fraction: f64,
}

/// A 64-bit seed. Every random draw in the crate flows from one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    /// Independent generator for a named purpose. Distinct streams of the
    /// same seed never share output.
    pub fn rng(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// A new seed deterministically derived from this one.
    pub fn derive(self, salt: u64) -> RandomSeed {
        // splitmix64 finalizer
        let mut z = self.0 ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RandomSeed(z ^ (z >> 31))
    }
}

pub(crate) mod streams {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const POSITIVES: u64 = 4;
    pub const UNLABELED: u64 = 5;
    pub const EVAL: u64 = 6;
}

/// One row of an experiment log.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub method: String,
    pub seed: u64,
    pub epoch: usize,
    pub alpha_true: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub abs_err: Option<f64>,
    /// Summed error Ê⁺ + Ê⁻, so it ranges over [0, 2].
    pub train_error: Option<f64>,
    pub pvn_accuracy: Option<f64>,
}

impl ExperimentRecord {
    pub fn new(method: impl Into<String>, seed: u64, epoch: usize) -> Self {
        ExperimentRecord {
            method: method.into(),
            seed,
            epoch,
            alpha_true: None,
            alpha_hat: None,
            abs_err: None,
            train_error: None,
            pvn_accuracy: None,
        }
    }

    /// Sets the estimate and, when the truth is known, the absolute error.
    pub fn with_alpha(mut self, alpha_hat: f64, alpha_true: Option<f64>) -> Self {
        self.alpha_hat = Some(alpha_hat);
        self.alpha_true = alpha_true;
        self.abs_err = alpha_true.map(|a| (alpha_hat - a).abs());
        self
    }
}

fn split_indices(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train = idx[..n_train].to_vec();
    let mut hold = idx[n_train..].to_vec();
    train.sort_unstable();
    hold.sort_unstable();
    (train, hold)
}

/// Random partition of positives and unlabeled into train and hold-out parts.
///
/// Each side keeps `round(fraction * n)` samples for training (at least one
/// on each side). Hidden labels follow their unlabeled samples. Rows keep
/// their source order inside each part.
pub fn split_pu(data: &PuDataset, fraction: f64, seed: RandomSeed) -> Result<TrainHoldoutSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must lie in (0,1), got {fraction}")));
    }
    let s = data.samples();
    if s.positives().len() < 2 || s.unlabeled().len() < 2 {
        return Err(Error::invalid(
            "split needs at least two positive and two unlabeled samples",
        ));
    }
    let mut rng = seed.rng(streams::SPLIT);
    let (p_train, p_hold) = split_indices(s.positives().len(), fraction, &mut rng);
    let (u_train, u_hold) = split_indices(s.unlabeled().len(), fraction, &mut rng);

    let part = |p_idx: &[usize], u_idx: &[usize]| -> Result<PuDataset> {
        let samples = PuSamples::new(s.positives().select(p_idx), s.unlabeled().select(u_idx))?;
        let truth = match data.truth() {
            Some(t) => Some(GroundTruth::new(
                u_idx.iter().map(|&i| t.labels()[i]).collect(),
                t.alpha(),
            )?),
            None => None,
        };
        PuDataset::new(samples, truth)
    };

    Ok(TrainHoldoutSplit {
        train: part(&p_train, &u_train)?,
        holdout: part(&p_hold, &u_hold)?,
        split_fraction: fraction,
    })
}

fn check_scored(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("no scores to evaluate"));
    }
    Ok(())
}

/// True when a score is classified as positive. A score equal to the
/// threshold is a negative prediction.
#[inline]
pub fn predicts_positive(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// Fraction of samples whose thresholded score agrees with the label.
pub fn pvn_accuracy(scores: &[f64], labels: &[Label], threshold: f64) -> Result<f64> {
    check_scored(scores, labels)?;
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| predicts_positive(**s, threshold) == (**l == Label::Positive))
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

pub fn pvn_error(scores: &[f64], labels: &[Label], threshold: f64) -> Result<f64> {
    Ok(1.0 - pvn_accuracy(scores, labels, threshold)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_p: usize, n_u: usize) -> PuDataset {
        let p = Samples::from_rows(1, (0..n_p).map(|i| [i as f64])).unwrap();
        let u = Samples::from_rows(1, (0..n_u).map(|i| [1000.0 + i as f64])).unwrap();
        let labels = (0..n_u)
            .map(|i| if i.is_multiple_of(2) { Label::Positive } else { Label::Negative })
            .collect();
        PuDataset::new(PuSamples::new(p, u).unwrap(), Some(GroundTruth::new(labels, Some(0.5)).unwrap()))
            .unwrap()
    }

    #[test]
    fn split_sizes_follow_fraction() {
        let s = split_pu(&toy(10, 10), 0.8, RandomSeed(1)).unwrap();
        assert_eq!(s.train.samples().positives().len(), 8);
        assert_eq!(s.train.samples().unlabeled().len(), 8);
        assert_eq!(s.holdout.samples().positives().len(), 2);
        assert_eq!(s.holdout.samples().unlabeled().len(), 2);
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy(30, 40);
        assert_eq!(split_pu(&d, 0.5, RandomSeed(9)).unwrap(), split_pu(&d, 0.5, RandomSeed(9)).unwrap());
        assert_ne!(split_pu(&d, 0.5, RandomSeed(9)).unwrap(), split_pu(&d, 0.5, RandomSeed(10)).unwrap());
    }

    #[test]
    fn split_is_a_partition_and_labels_follow_samples() {
        let d = toy(100, 100);
        let s = split_pu(&d, 0.8, RandomSeed(3)).unwrap();
        for positives in [true, false] {
            let total = 100usize;
            let pick = |x: &PuDataset| {
                if positives {
                    x.samples().positives().clone()
                } else {
                    x.samples().unlabeled().clone()
                }
            };
            let mut all: Vec<f64> = pick(&s.train).rows().map(|r| r[0]).collect();
            all.extend(pick(&s.holdout).rows().map(|r| r[0]));
            all.sort_by(f64::total_cmp);
            let mut src: Vec<f64> = pick(&d).rows().map(|r| r[0]).collect();
            src.sort_by(f64::total_cmp);
            assert_eq!(all.len(), total);
            assert_eq!(all, src);
        }
        for part in [&s.train, &s.holdout] {
            let labels = part.truth().unwrap().labels();
            for (row, l) in part.samples().unlabeled().rows().zip(labels) {
                let i = (row[0] - 1000.0) as usize;
                assert_eq!(*l, if i.is_multiple_of(2) { Label::Positive } else { Label::Negative });
            }
        }
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(split_pu(&toy(10, 10), 1.0, RandomSeed(1)).is_err());
        assert!(split_pu(&toy(10, 10), 0.0, RandomSeed(1)).is_err());
        assert!(split_pu(&toy(1, 10), 0.5, RandomSeed(1)).is_err());
        assert!(split_pu(&toy(0, 0), 0.5, RandomSeed(1)).is_err());
    }

    #[test]
    fn accuracy_examples() {
        use Label::*;
        assert_eq!(pvn_accuracy(&[0.9, 0.1], &[Positive, Negative], 0.5).unwrap(), 1.0);
        assert_eq!(pvn_accuracy(&[0.1, 0.9], &[Positive, Negative], 0.5).unwrap(), 0.0);
        let acc = pvn_accuracy(&[0.6, 0.6, 0.4, 0.2], &[Positive, Negative, Negative, Negative], 0.5);
        assert_eq!(acc.unwrap(), 0.75);
        // score == threshold is a negative prediction
        assert_eq!(pvn_accuracy(&[0.5, 0.5], &[Positive, Negative], 0.5).unwrap(), 0.5);
        assert!(pvn_accuracy(&[0.5], &[Positive, Negative], 0.5).is_err());
    }

    #[test]
    fn dataset_invariants_enforced() {
        let p = Samples::from_rows(2, [[0.0, 1.0]]).unwrap();
        let u = Samples::from_rows(1, [[0.0]]).unwrap();
        assert!(PuSamples::new(p, u).is_err());
        assert!(Samples::from_rows(1, [[f64::NAN]]).is_err());
        assert!(FeatureVector::new(vec![]).is_err());
        assert!(GroundTruth::new(vec![], Some(1.5)).is_err());
        let s = PuSamples::new(
            Samples::from_scalars(&[0.1]).unwrap(),
            Samples::from_scalars(&[0.2, 0.3]).unwrap(),
        )
        .unwrap();
        let t = GroundTruth::new(vec![Label::Positive], None).unwrap();
        assert!(PuDataset::new(s, Some(t)).is_err());
    }

    #[test]
    fn seed_streams_are_independent() {
        use rand::Rng;
        let a: u64 = RandomSeed(5).rng(1).random();
        let b: u64 = RandomSeed(5).rng(2).random();
        let a2: u64 = RandomSeed(5).rng(1).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert_ne!(RandomSeed(5).derive(1), RandomSeed(5).derive(2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn accuracy_plus_error_is_one(
                pairs in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..50),
                t in 0.0f64..1.0,
            ) {
                let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let labels: Vec<Label> = pairs
                    .iter()
                    .map(|p| if p.1 { Label::Positive } else { Label::Negative })
                    .collect();
                let a = pvn_accuracy(&scores, &labels, t).unwrap();
                let e = pvn_error(&scores, &labels, t).unwrap();
                prop_assert!((a + e - 1.0).abs() < 1e-12);
            }
        }
    }
}
