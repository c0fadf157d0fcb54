//! Runs configured experiments and collects per-epoch records.

use pu_kit::learn::{cvir_train, pvu_train, pvu_warm_start, sigmoid, Classifier, LossWeighting};
use pu_kit::mpe::{bbe_estimate, naive_ratio_estimate, scott_estimate};
use pu_kit::synth::{generate, generate_eval};
use pu_kit::{
    pvn_accuracy, split_pu, tedn_train, ExperimentRecord, Label, LabeledSet, Model, PuDataset, RandomSeed,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method, Scorer};
use crate::error::{CliError, Result};

/// Training data plus labeled evaluation data for one seed.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub data: PuDataset,
    pub eval: LabeledSet,
}

pub fn load_task(cfg: &ExperimentConfig, seed: RandomSeed) -> Result<TaskData> {
    match (&cfg.task, &cfg.mnist) {
        (Some(task), _) => Ok(TaskData { data: generate(task, seed)?, eval: generate_eval(task, cfg.eval_size, seed)? }),
        (None, Some(m)) => {
            if !m.available() {
                return Err(CliError::Data(format!("MNIST files not found under {}", m.dir.display())));
            }
            let (data, eval) = m.load(seed)?;
            Ok(TaskData { data, eval })
        }
        (None, None) => Err(CliError::config("task", "either [task] or [mnist] is required")),
    }
}

fn accuracy<M: Classifier>(model: &M, eval: &LabeledSet) -> Result<f64> {
    Ok(pvn_accuracy(&model.scores(eval.samples()), eval.labels(), pu_kit::data::DEFAULT_THRESHOLD)?)
}

/// Scores handed to the single-shot estimators.
#[derive(Debug, Clone)]
pub struct EstimatorScores {
    pub z_p: Vec<f64>,
    pub z_u: Vec<f64>,
    /// Hidden labels aligned with `z_u`, when the task has them.
    pub hidden: Option<Vec<Label>>,
}

/// Scores the positive and unlabeled samples with the configured scorer. The
/// `pvu` scorer trains on the train split and scores the hold-out split.
pub fn estimator_scores(cfg: &ExperimentConfig, data: &PuDataset, seed: RandomSeed) -> Result<EstimatorScores> {
    let hidden = |d: &PuDataset| d.truth().map(|t| t.labels().to_vec());
    match cfg.scorer {
        Scorer::FirstFeature => {
            let f = |s: &pu_kit::Samples| s.rows().map(|x| sigmoid(x[0])).collect::<Vec<_>>();
            let s = data.samples();
            Ok(EstimatorScores { z_p: f(s.positives()), z_u: f(s.unlabeled()), hidden: hidden(data) })
        }
        Scorer::Pvu => {
            let split = split_pu(data, cfg.tedn.split_fraction, seed)?;
            let model = cfg.model.build(data.samples().dim(), seed)?;
            let warm = pvu_warm_start(model, split.train.samples(), cfg.tedn.warm_start_epochs, &cfg.train.with_seed(seed))?;
            let hold = split.holdout.samples();
            Ok(EstimatorScores {
                z_p: warm.scores(hold.positives()),
                z_u: warm.scores(hold.unlabeled()),
                hidden: hidden(&split.holdout),
            })
        }
    }
}

/// All rows for one (method, seed) pair.
pub fn run_job(cfg: &ExperimentConfig, method: Method, seed: u64) -> Result<Vec<ExperimentRecord>> {
    Ok(train_job(cfg, method, seed)?.0)
}

/// Like [`run_job`], also returning the trained model for learning methods.
pub fn train_job(cfg: &ExperimentConfig, method: Method, seed: u64) -> Result<(Vec<ExperimentRecord>, Option<Model>)> {
    let rs = RandomSeed(seed);
    let TaskData { data, eval } = load_task(cfg, rs)?;
    let alpha_true = data.alpha_true();
    let samples = data.samples();
    let name = method.name();
    let train = cfg.train.with_seed(rs);

    let rows = match method {
        Method::Bbe | Method::Scott | Method::Naive => {
            let EstimatorScores { z_p, z_u, .. } = estimator_scores(cfg, &data, rs)?;
            let est = match method {
                Method::Bbe => bbe_estimate(&z_p, &z_u, &cfg.bbe)?,
                Method::Scott => scott_estimate(&z_p, &z_u, &cfg.scott)?,
                _ => naive_ratio_estimate(&z_p, &z_u)?,
            };
            (vec![ExperimentRecord::new(name, seed, 0).with_alpha(est.alpha_clamped, alpha_true)], None)
        }
        Method::Pvu | Method::Cvir => {
            let model = cfg.model.build(samples.dim(), rs)?;
            let mut rows = Vec::new();
            let mut failure = None;
            let mut on_epoch = |m: &Model, s: &pu_kit::learn::EpochStats| {
                let mut r = ExperimentRecord::new(name, seed, s.epoch);
                r.alpha_true = alpha_true;
                r.train_error = Some(s.train_error);
                match accuracy(m, &eval) {
                    Ok(a) => r.pvn_accuracy = Some(a),
                    Err(e) => failure = Some(e),
                }
                rows.push(r);
            };
            let out = if method == Method::Pvu {
                pvu_train(model, samples, train.epochs, &train, &mut on_epoch)?
            } else {
                let alpha = alpha_true.ok_or_else(|| CliError::config("methods", "cvir needs a task with known alpha"))?;
                cvir_train(model, samples, alpha, &train, LossWeighting::Weighted, &mut on_epoch)?
            };
            if let Some(e) = failure {
                return Err(e);
            }
            (rows, Some(out.model))
        }
        Method::Tedn => {
            let model = cfg.model.build(samples.dim(), rs)?;
            let out = tedn_train(model, samples, &cfg.tedn_config(rs), Some(&eval))?;
            (out.trace.records(name, seed, alpha_true), Some(out.model))
        }
    };
    Ok(rows)
}

/// Runs every (method, seed) job in parallel and returns the rows sorted by
/// method, seed and epoch, so the output does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let jobs: Vec<(Method, u64)> = cfg.methods.iter().flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s))).collect();
    let results: Vec<Result<Vec<ExperimentRecord>>> = jobs.par_iter().map(|&(m, s)| run_job(cfg, m, s)).collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| (&a.method, a.seed, a.epoch).cmp(&(&b.method, b.seed, b.epoch)));
    Ok(rows)
}

/// One experiment per mixture proportion; blocks appear in the order of
/// `alphas` and are told apart by `alpha_true`.
pub fn sweep_alpha(base: &ExperimentConfig, alphas: &[f64]) -> Result<Vec<ExperimentRecord>> {
    if alphas.is_empty() {
        return Err(CliError::config("alphas", "at least one mixture proportion is required"));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(CliError::config("alphas", format!("{a} lies outside [0,1]")));
    }
    let mut rows = Vec::new();
    for &alpha in alphas {
        let mut cfg = base.clone();
        match (&mut cfg.task, &mut cfg.mnist) {
            (Some(t), _) => t.alpha = alpha,
            (None, Some(m)) => m.alpha = alpha,
            (None, None) => return Err(CliError::config("task", "either [task] or [mnist] is required")),
        }
        rows.extend(run_experiment(&cfg)?);
    }
    Ok(rows)
}

/// Mean BBE absolute error over the configured seeds, for each sample size
/// `n = n_p = n_u`.
pub fn bbe_rate(base: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<(usize, f64)>> {
    if sizes.is_empty() {
        return Err(CliError::config("sizes", "at least one sample size is required"));
    }
    let mut out = Vec::new();
    for &n in sizes {
        let mut cfg = base.clone();
        let task = cfg.task.as_mut().ok_or_else(|| CliError::config("task", "rate curves need a synthetic task"))?;
        task.n_p = n;
        task.n_u = n;
        cfg.methods = vec![Method::Bbe];
        let rows = run_experiment(&cfg)?;
        let errs: Vec<f64> = rows.iter().filter_map(|r| r.abs_err).collect();
        out.push((n, errs.iter().sum::<f64>() / errs.len() as f64));
    }
    Ok(out)
}
