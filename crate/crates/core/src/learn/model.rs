use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{RandomSeed, Samples};
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 64;

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// A trainable scorer `f: R^d -> [0,1]` with a flat parameter vector.
///
/// Every model squashes a real-valued logit through a sigmoid, so the loss
/// layer only needs the gradient of the logit.
pub trait Classifier: Clone + Send + Sync {
    fn dim(&self) -> usize;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn logit(&self, x: &[f64]) -> f64;

    /// Writes `d logit / d θ` into `grad` (overwriting it) and returns the logit.
    fn logit_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    fn scores(&self, samples: &Samples) -> Vec<f64> {
        samples.rows().map(|x| self.score(x)).collect()
    }

    fn num_params(&self) -> usize {
        self.params().len()
    }
}

fn xavier(rng: &mut impl Rng, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.random_range(-a..a);
    }
}

/// `σ(w·x + b)`. Parameters are laid out as `[w_1..w_d, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    dim: usize,
    params: Vec<f64>,
}

impl LogisticModel {
    pub fn new(dim: usize, seed: RandomSeed) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("model dimension must be >= 1"));
        }
        let mut params = vec![0.0; dim + 1];
        xavier(&mut seed.rng(crate::data::streams::INIT), dim, 1, &mut params[..dim]);
        Ok(LogisticModel { dim, params })
    }

    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Result<Self> {
        let dim = weights.len();
        if dim == 0 {
            return Err(Error::invalid("model dimension must be >= 1"));
        }
        let mut params = weights;
        params.push(bias);
        Ok(LogisticModel { dim, params })
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.dim]
    }

    pub fn bias(&self) -> f64 {
        self.params[self.dim]
    }
}

impl Classifier for LogisticModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logit(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.weights().iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias()
    }

    fn logit_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad[..self.dim].copy_from_slice(x);
        grad[self.dim] = 1.0;
        self.logit(x)
    }
}

/// One hidden layer of `H` ReLU units feeding a sigmoid output.
///
/// Parameter layout: `W1` (H×d, row-major), `b1` (H), `w2` (H), `b2` (1).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dim: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn new(dim: usize, hidden: usize, seed: RandomSeed) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::invalid("MLP needs dimension >= 1 and at least one hidden unit"));
        }
        let mut m = MlpModel { dim, hidden, params: vec![0.0; (dim + 1) * hidden + hidden + 1] };
        let mut rng = seed.rng(crate::data::streams::INIT);
        let (w1, w2) = (0..dim * hidden, m.w2_range());
        xavier(&mut rng, dim, hidden, &mut m.params[w1]);
        xavier(&mut rng, hidden, 1, &mut m.params[w2]);
        Ok(m)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.dim * self.hidden;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = (self.dim + 1) * self.hidden;
        s..s + self.hidden
    }

    fn b2_index(&self) -> usize {
        (self.dim + 2) * self.hidden
    }

    fn pre_activation(&self, j: usize, x: &[f64]) -> f64 {
        let row = &self.params[j * self.dim..(j + 1) * self.dim];
        row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[self.b1_range().start + j]
    }
}

impl Classifier for MlpModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logit(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let w2 = &self.params[self.w2_range()];
        let mut out = self.params[self.b2_index()];
        for (j, w) in w2.iter().enumerate() {
            let h = self.pre_activation(j, x);
            if h > 0.0 {
                out += w * h;
            }
        }
        out
    }

    fn logit_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (d, hdim) = (self.dim, self.hidden);
        let b1 = self.b1_range().start;
        let w2s = self.w2_range().start;
        let mut out = self.params[self.b2_index()];
        for j in 0..hdim {
            let h = self.pre_activation(j, x);
            let w2 = self.params[w2s + j];
            let row = &mut grad[j * d..(j + 1) * d];
            if h > 0.0 {
                out += w2 * h;
                for (g, v) in row.iter_mut().zip(x) {
                    *g = w2 * v;
                }
                grad[b1 + j] = w2;
                grad[w2s + j] = h;
            } else {
                row.fill(0.0);
                grad[b1 + j] = 0.0;
                grad[w2s + j] = 0.0;
            }
        }
        grad[self.b2_index()] = 1.0;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { kind: ModelKind::Mlp, hidden: DEFAULT_HIDDEN }
    }
}

impl ModelSpec {
    pub fn logistic() -> Self {
        ModelSpec { kind: ModelKind::Logistic, hidden: DEFAULT_HIDDEN }
    }

    pub fn build(&self, dim: usize, seed: RandomSeed) -> Result<Model> {
        Ok(match self.kind {
            ModelKind::Logistic => Model::Logistic(LogisticModel::new(dim, seed)?),
            ModelKind::Mlp => Model::Mlp(MlpModel::new(dim, self.hidden, seed)?),
        })
    }
}

/// Runtime choice between the two model families.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Logistic(LogisticModel),
    Mlp(MlpModel),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::Logistic($m) => $e,
            Model::Mlp($m) => $e,
        }
    };
}

impl Classifier for Model {
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }

    fn params(&self) -> &[f64] {
        dispatch!(self, m => m.params())
    }

    fn params_mut(&mut self) -> &mut [f64] {
        dispatch!(self, m => m.params_mut())
    }

    fn logit(&self, x: &[f64]) -> f64 {
        dispatch!(self, m => m.logit(x))
    }

    fn logit_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        dispatch!(self, m => m.logit_grad(x, grad))
    }
}

pub const MODEL_RECORD_FORMAT: &str = "pu-kit-model";
pub const MODEL_RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub values: Vec<f64>,
}

/// Versioned, flat serialization of model parameters as named arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    pub arrays: Vec<NamedArray>,
}

impl Model {
    pub fn to_record(&self) -> ModelRecord {
        let arr = |name: &str, v: &[f64]| NamedArray { name: name.into(), values: v.to_vec() };
        match self {
            Model::Logistic(m) => ModelRecord {
                format: MODEL_RECORD_FORMAT.into(),
                version: MODEL_RECORD_VERSION,
                kind: ModelKind::Logistic,
                dim: m.dim,
                hidden: None,
                arrays: vec![arr("weights", m.weights()), arr("bias", &[m.bias()])],
            },
            Model::Mlp(m) => ModelRecord {
                format: MODEL_RECORD_FORMAT.into(),
                version: MODEL_RECORD_VERSION,
                kind: ModelKind::Mlp,
                dim: m.dim,
                hidden: Some(m.hidden),
                arrays: vec![
                    arr("w1", &m.params[..m.dim * m.hidden]),
                    arr("b1", &m.params[m.b1_range()]),
                    arr("w2", &m.params[m.w2_range()]),
                    arr("b2", &[m.params[m.b2_index()]]),
                ],
            },
        }
    }

    pub fn from_record(rec: &ModelRecord) -> Result<Self> {
        if rec.format != MODEL_RECORD_FORMAT || rec.version != MODEL_RECORD_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model record {} v{}",
                rec.format, rec.version
            )));
        }
        let names: Vec<&str> = rec.arrays.iter().map(|a| a.name.as_str()).collect();
        let flat: Vec<f64> = rec.arrays.iter().flat_map(|a| a.values.iter().copied()).collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model record contains non-finite parameters"));
        }
        let mut model = match rec.kind {
            ModelKind::Logistic => {
                if names != ["weights", "bias"] {
                    return Err(Error::invalid("logistic record must hold arrays [weights, bias]"));
                }
                Model::Logistic(LogisticModel::new(rec.dim, RandomSeed(0))?)
            }
            ModelKind::Mlp => {
                if names != ["w1", "b1", "w2", "b2"] {
                    return Err(Error::invalid("mlp record must hold arrays [w1, b1, w2, b2]"));
                }
                let hidden = rec.hidden.ok_or_else(|| Error::invalid("mlp record lacks `hidden`"))?;
                Model::Mlp(MlpModel::new(rec.dim, hidden, RandomSeed(0))?)
            }
        };
        if flat.len() != model.num_params() {
            return Err(Error::invalid(format!(
                "model record holds {} parameters, expected {}",
                flat.len(),
                model.num_params()
            )));
        }
        model.params_mut().copy_from_slice(&flat);
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("model record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: ModelRecord =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("model record: {e}")))?;
        Model::from_record(&rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let m = MlpModel::new(3, 7, RandomSeed(1)).unwrap();
        assert_eq!(m.num_params(), (3 + 1) * 7 + 7 + 1);
        let l = LogisticModel::new(4, RandomSeed(1)).unwrap();
        assert_eq!(l.num_params(), 5);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = MlpModel::new(2, 16, RandomSeed(3)).unwrap();
        let b = MlpModel::new(2, 16, RandomSeed(3)).unwrap();
        let c = MlpModel::new(2, 16, RandomSeed(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (6.0f64 / 18.0).sqrt();
        assert!(a.params[..32].iter().all(|w| w.abs() <= bound));
        assert!(a.params[a.b1_range()].iter().all(|b| *b == 0.0));
    }

    #[test]
    fn logistic_score_is_sigmoid() {
        let m = LogisticModel::from_parts(vec![2.0, -1.0], 0.5).unwrap();
        let z = m.score(&[1.0, 3.0]);
        assert!((z - 1.0 / (1.0 + (0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_saturates_without_nan() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn record_roundtrip() {
        for spec in [ModelSpec::logistic(), ModelSpec { kind: ModelKind::Mlp, hidden: 5 }] {
            let m = spec.build(3, RandomSeed(11)).unwrap();
            let back = Model::from_json(&m.to_json()).unwrap();
            assert_eq!(m, back);
        }
    }

    #[test]
    fn record_rejects_mismatch() {
        let m = ModelSpec::logistic().build(3, RandomSeed(1)).unwrap();
        let mut rec = m.to_record();
        rec.arrays[0].values.pop();
        assert!(Model::from_record(&rec).is_err());
        let mut rec = m.to_record();
        rec.version = 99;
        assert!(Model::from_record(&rec).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scores_stay_in_unit_interval(
                seed in any::<u64>(),
                x in proptest::collection::vec(-1e6f64..1e6, 3),
            ) {
                for spec in [ModelSpec::logistic(), ModelSpec { kind: ModelKind::Mlp, hidden: 8 }] {
                    let m = spec.build(3, RandomSeed(seed)).unwrap();
                    let s = m.score(&x);
                    prop_assert!((0.0..=1.0).contains(&s));
                }
            }
        }
    }
}
