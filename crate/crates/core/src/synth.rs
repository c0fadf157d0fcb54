//! Synthetic PU tasks with known mixture proportion and hidden labels.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{streams, GroundTruth, Label, LabeledSet, PuDataset, PuSamples, RandomSeed, Samples};
use crate::error::{Error, Result};

pub const TRIANGLE_POSITIVE: [[f64; 2]; 3] = [[-1.0, 0.1], [0.0, 4.0], [1.0, 0.1]];
pub const TRIANGLE_NEGATIVE: [[f64; 2]; 3] = [[-1.0, -0.1], [4.0, -4.0], [1.0, -0.1]];

/// Class-conditional distributions of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Isotropic Gaussians `N(μ, σ²I)` for each class.
    Gaussian { mean_pos: Vec<f64>, mean_neg: Vec<f64>, sigma: f64 },
    /// Uniform on two triangles separated by the horizontal axis.
    Triangle,
    /// Positives put mass `gamma_margin` on `[2,3]`, which negatives never
    /// reach; the rest of both classes is uniform on `[0,1]`. Optional extra
    /// coordinates carry Gaussian noise.
    Anchor {
        gamma_margin: f64,
        #[serde(default)]
        noise_dims: usize,
        #[serde(default = "one")]
        noise_scale: f64,
    },
    /// One-dimensional uniform scores, e.g. for exercising estimators directly.
    CustomScore { pos: [f64; 2], neg: [f64; 2] },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub generator: Generator,
    pub alpha: f64,
    pub n_p: usize,
    pub n_u: usize,
    /// Draw exactly `round(alpha · n_u)` unlabeled positives instead of
    /// labeling each sample independently.
    #[serde(default)]
    pub exact_mixture: bool,
}

impl TaskSpec {
    pub fn new(generator: Generator, alpha: f64, n_p: usize, n_u: usize) -> Self {
        TaskSpec { generator, alpha, n_p, n_u, exact_mixture: false }
    }

    pub fn gaussian(mean_pos: Vec<f64>, mean_neg: Vec<f64>, sigma: f64, alpha: f64, n_p: usize, n_u: usize) -> Self {
        TaskSpec::new(Generator::Gaussian { mean_pos, mean_neg, sigma }, alpha, n_p, n_u)
    }

    pub fn triangle(alpha: f64, n_p: usize, n_u: usize) -> Self {
        TaskSpec::new(Generator::Triangle, alpha, n_p, n_u)
    }

    pub fn anchor(gamma_margin: f64, alpha: f64, n_p: usize, n_u: usize) -> Self {
        TaskSpec::new(Generator::Anchor { gamma_margin, noise_dims: 0, noise_scale: 1.0 }, alpha, n_p, n_u)
    }

    pub fn dim(&self) -> usize {
        match &self.generator {
            Generator::Gaussian { mean_pos, .. } => mean_pos.len(),
            Generator::Triangle => 2,
            Generator::Anchor { noise_dims, .. } => 1 + noise_dims,
            Generator::CustomScore { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0,1], got {}", self.alpha)));
        }
        if self.n_p == 0 || self.n_u == 0 {
            return Err(Error::invalid("n_p and n_u must be >= 1"));
        }
        match &self.generator {
            Generator::Gaussian { mean_pos, mean_neg, sigma } => {
                if mean_pos.is_empty() || mean_pos.len() != mean_neg.len() {
                    return Err(Error::invalid("Gaussian means must be nonempty and of equal length"));
                }
                if mean_pos.iter().chain(mean_neg).any(|v| !v.is_finite()) {
                    return Err(Error::invalid("Gaussian means must be finite"));
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
                }
            }
            Generator::Triangle => {}
            Generator::Anchor { gamma_margin, noise_scale, .. } => {
                if !(*gamma_margin > 0.0 && *gamma_margin <= 1.0) {
                    return Err(Error::invalid(format!("gamma_margin must lie in (0,1], got {gamma_margin}")));
                }
                if !(*noise_scale >= 0.0 && noise_scale.is_finite()) {
                    return Err(Error::invalid("noise_scale must be >= 0"));
                }
            }
            Generator::CustomScore { pos, neg } => {
                for [lo, hi] in [pos, neg] {
                    if !(0.0 <= *lo && lo < hi && *hi <= 1.0) {
                        return Err(Error::invalid(format!("score range [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1")));
                    }
                }
            }
        }
        Ok(())
    }

    /// PvN accuracy of the Bayes classifier under equal class priors; only
    /// defined for Gaussian tasks.
    pub fn bayes_accuracy(&self) -> Option<f64> {
        match &self.generator {
            Generator::Gaussian { mean_pos, mean_neg, sigma } => {
                let dist = mean_pos.iter().zip(mean_neg).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                Some(Normal::standard().cdf(dist / (2.0 * sigma)))
            }
            _ => None,
        }
    }

    fn draw(&self, label: Label, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        match &self.generator {
            Generator::Gaussian { mean_pos, mean_neg, sigma } => {
                let mu = if label == Label::Positive { mean_pos } else { mean_neg };
                out.extend(mu.iter().map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)));
            }
            Generator::Triangle => {
                let v = if label == Label::Positive { &TRIANGLE_POSITIVE } else { &TRIANGLE_NEGATIVE };
                out.extend_from_slice(&uniform_in_triangle(v, rng));
            }
            Generator::Anchor { gamma_margin, noise_dims, noise_scale } => {
                let anchored = label == Label::Positive && rng.random::<f64>() < *gamma_margin;
                let base = if anchored { 2.0 } else { 0.0 };
                out.push(base + rng.random::<f64>());
                out.extend((0..*noise_dims).map(|_| noise_scale * rng.sample::<f64, _>(StandardNormal)));
            }
            Generator::CustomScore { pos, neg } => {
                let [lo, hi] = if label == Label::Positive { *pos } else { *neg };
                out.push(rng.random_range(lo..hi));
            }
        }
    }
}

/// Uniform point in a triangle via square-root barycentric weights.
pub fn uniform_in_triangle(v: &[[f64; 2]; 3], rng: &mut impl Rng) -> [f64; 2] {
    let s = rng.random::<f64>().sqrt();
    let t = rng.random::<f64>();
    let (a, b, c) = (1.0 - s, s * (1.0 - t), s * t);
    [a * v[0][0] + b * v[1][0] + c * v[2][0], a * v[0][1] + b * v[1][1] + c * v[2][1]]
}

/// Draws `n` unlabeled samples, each positive with probability `alpha`, or
/// exactly `round(alpha · n)` positives in random order when `exact` is set.
pub fn sample_unlabeled<R: Rng>(
    mut pos: impl FnMut(&mut R) -> Vec<f64>,
    mut neg: impl FnMut(&mut R) -> Vec<f64>,
    alpha: f64,
    n: usize,
    exact: bool,
    dim: usize,
    rng: &mut R,
) -> Result<(Samples, Vec<Label>)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0,1], got {alpha}")));
    }
    let labels: Vec<Label> = if exact {
        let k = (alpha * n as f64).round() as usize;
        let mut l: Vec<Label> = (0..n).map(|i| if i < k { Label::Positive } else { Label::Negative }).collect();
        l.shuffle(rng);
        l
    } else {
        (0..n)
            .map(|_| if rng.random::<f64>() < alpha { Label::Positive } else { Label::Negative })
            .collect()
    };
    let mut samples = Samples::with_capacity(dim, n)?;
    for &l in &labels {
        let x = match l {
            Label::Positive => pos(rng),
            Label::Negative => neg(rng),
        };
        samples.push(&x)?;
    }
    Ok((samples, labels))
}

fn draw_mixture(spec: &TaskSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<(Samples, Vec<Label>)> {
    let mut buf = Vec::with_capacity(spec.dim());
    let mut pos = |r: &mut ChaCha8Rng| {
        spec.draw(Label::Positive, r, &mut buf);
        buf.clone()
    };
    let mut buf_n = Vec::with_capacity(spec.dim());
    let neg = |r: &mut ChaCha8Rng| {
        spec.draw(Label::Negative, r, &mut buf_n);
        buf_n.clone()
    };
    sample_unlabeled(&mut pos, neg, spec.alpha, n, spec.exact_mixture, spec.dim(), rng)
}

/// Generates a PU dataset. Positives and unlabeled samples come from
/// separate streams of `seed`.
pub fn generate(spec: &TaskSpec, seed: RandomSeed) -> Result<PuDataset> {
    spec.validate()?;
    let mut rng = seed.rng(streams::POSITIVES);
    let mut positives = Samples::with_capacity(spec.dim(), spec.n_p)?;
    let mut buf = Vec::with_capacity(spec.dim());
    for _ in 0..spec.n_p {
        spec.draw(Label::Positive, &mut rng, &mut buf);
        positives.push(&buf)?;
    }
    let (unlabeled, labels) = draw_mixture(spec, spec.n_u, &mut seed.rng(streams::UNLABELED))?;
    PuDataset::new(PuSamples::new(positives, unlabeled)?, Some(GroundTruth::new(labels, Some(spec.alpha))?))
}

/// Labeled evaluation data with the same class mixture as the unlabeled set.
pub fn generate_eval(spec: &TaskSpec, n: usize, seed: RandomSeed) -> Result<LabeledSet> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("evaluation set size must be >= 1"));
    }
    let (samples, labels) = draw_mixture(spec, n, &mut seed.rng(streams::EVAL))?;
    LabeledSet::new(samples, labels)
}

pub fn gen_gaussian_task(mean_pos: Vec<f64>, mean_neg: Vec<f64>, sigma: f64, alpha: f64, n_p: usize, n_u: usize, seed: RandomSeed) -> Result<PuDataset> {
    generate(&TaskSpec::gaussian(mean_pos, mean_neg, sigma, alpha, n_p, n_u), seed)
}

pub fn gen_triangle_task(n_p: usize, n_u: usize, alpha: f64, seed: RandomSeed) -> Result<PuDataset> {
    generate(&TaskSpec::triangle(alpha, n_p, n_u), seed)
}

pub fn gen_anchor_task(gamma_margin: f64, alpha: f64, n_p: usize, n_u: usize, seed: RandomSeed) -> Result<PuDataset> {
    generate(&TaskSpec::anchor(gamma_margin, alpha, n_p, n_u), seed)
}
