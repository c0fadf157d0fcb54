//! Mixture proportion estimators over one-dimensional classifier scores.
//!
//! All estimators search the same [`ThresholdGrid`] and break ties toward
//! the smallest threshold, i.e. the largest top bin.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::ecdf::{bbe_penalty, binomial_inversion, binomial_inversion_lower, TailCdf, ThresholdGrid};
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BbeConfig {
    /// Confidence level of the upper confidence bound.
    pub delta: f64,
    /// Inflation of the confidence term.
    pub gamma: f64,
}

impl Default for BbeConfig {
    fn default() -> Self {
        BbeConfig { delta: DEFAULT_DELTA, gamma: DEFAULT_GAMMA }
    }
}

impl BbeConfig {
    pub fn new(delta: f64, gamma: f64) -> Result<Self> {
        let c = BbeConfig { delta, gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Output of every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureEstimate {
    /// Raw estimate; may exceed 1.
    pub alpha_hat: f64,
    /// `alpha_hat` clamped to `[0, 1]`; this is what training consumes.
    pub alpha_clamped: f64,
    pub c_hat: f64,
    pub q_p_at_c: f64,
    pub q_u_at_c: f64,
    /// Value of the minimized objective at `c_hat`.
    pub objective: f64,
}

impl MixtureEstimate {
    fn new(alpha_hat: f64, c_hat: f64, q_p: f64, q_u: f64, objective: f64) -> Self {
        MixtureEstimate {
            alpha_hat,
            alpha_clamped: alpha_hat.clamp(0.0, 1.0),
            c_hat,
            q_p_at_c: q_p,
            q_u_at_c: q_u,
            objective,
        }
    }
}

struct Tails {
    p: TailCdf,
    u: TailCdf,
    grid: ThresholdGrid,
}

impl Tails {
    fn new(z_p: &[f64], z_u: &[f64]) -> Result<Self> {
        if z_u.is_empty() {
            return Err(Error::invalid("no unlabeled scores"));
        }
        let p = TailCdf::new(z_p)?;
        let u = TailCdf::new(z_u)?;
        let grid = ThresholdGrid::from_scores(z_p, z_u)?;
        Ok(Tails { p, u, grid })
    }

    /// (c, count_p, count_u) for every grid threshold with a non-empty positive tail.
    fn points(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        self.grid.candidates().iter().filter_map(move |&c| {
            let cp = self.p.count_at_least(c);
            (cp > 0).then(|| (c, cp, self.u.count_at_least(c)))
        })
    }

    fn np(&self) -> f64 {
        self.p.n() as f64
    }

    fn nu(&self) -> f64 {
        self.u.n() as f64
    }
}

/// Keeps the first minimum; callers feed thresholds in ascending order.
#[derive(Default)]
struct ArgMin {
    best: Option<(f64, MixtureEstimate)>,
}

impl ArgMin {
    fn offer(&mut self, objective: f64, est: impl FnOnce() -> MixtureEstimate) {
        if self.best.as_ref().is_none_or(|(b, _)| objective < *b) {
            self.best = Some((objective, est()));
        }
    }
}

/// One point of the BBE objective curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbPoint {
    pub c: f64,
    pub q_u_hat: f64,
    pub q_p_hat: f64,
    pub ratio: f64,
    pub ucb: f64,
}

/// Evaluates the BBE objective at every admissible grid threshold.
pub fn ucb_curve(z_p: &[f64], z_u: &[f64], config: &BbeConfig) -> Result<Vec<UcbPoint>> {
    config.validate()?;
    let t = Tails::new(z_p, z_u)?;
    let slack = (1.0 + config.gamma)
        * (bbe_penalty(t.u.n(), config.delta)? + bbe_penalty(t.p.n(), config.delta)?);
    Ok(t.points()
        .map(|(c, cp, cu)| {
            let q_p = cp as f64 / t.np();
            let q_u = cu as f64 / t.nu();
            let ratio = q_u / q_p;
            UcbPoint { c, q_u_hat: q_u, q_p_hat: q_p, ratio, ucb: ratio + slack / q_p }
        })
        .collect())
}

/// Best Bin Estimation.
///
/// Picks the threshold `ĉ` minimizing the upper confidence bound
/// `q̂_u(c)/q̂_p(c) + (1+γ)/q̂_p(c) · (sqrt(ln(4/δ)/2n_u) + sqrt(ln(4/δ)/2n_p))`
/// and returns the plain ratio `q̂_u(ĉ)/q̂_p(ĉ)`.
pub fn bbe_estimate(z_p: &[f64], z_u: &[f64], config: &BbeConfig) -> Result<MixtureEstimate> {
    let mut best = ArgMin::default();
    for pt in ucb_curve(z_p, z_u, config)? {
        best.offer(pt.ucb, || MixtureEstimate::new(pt.ratio, pt.c, pt.q_p_hat, pt.q_u_hat, pt.ucb));
    }
    best.best
        .map(|(_, e)| e)
        .ok_or_else(|| Error::Internal("threshold grid had no admissible point".into()))
}

/// Minimizes the empirical ratio with no confidence term.
pub fn naive_ratio_estimate(z_p: &[f64], z_u: &[f64]) -> Result<MixtureEstimate> {
    let t = Tails::new(z_p, z_u)?;
    let mut best = ArgMin::default();
    for (c, cp, cu) in t.points() {
        let q_p = cp as f64 / t.np();
        let q_u = cu as f64 / t.nu();
        let ratio = q_u / q_p;
        best.offer(ratio, || MixtureEstimate::new(ratio, c, q_p, q_u, ratio));
    }
    best.best
        .map(|(_, e)| e)
        .ok_or_else(|| Error::Internal("threshold grid had no admissible point".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScottConfig {
    pub delta: f64,
    /// Invert each tail at `δ/n` instead of `δ`.
    pub union_bound: bool,
}

impl Default for ScottConfig {
    fn default() -> Self {
        ScottConfig { delta: DEFAULT_DELTA, union_bound: false }
    }
}

/// ROC-slope heuristic built from exact binomial confidence bounds.
///
/// Minimizes `(q̂_u + binv_up(n_u, q̂_u)) / (q̂_p - binv_low(n_p, q̂_p))` over
/// thresholds whose denominator stays positive, and reports that minimized
/// ratio of bounds as the estimate.
pub fn scott_estimate(z_p: &[f64], z_u: &[f64], config: &ScottConfig) -> Result<MixtureEstimate> {
    let t = Tails::new(z_p, z_u)?;
    let (n_p, n_u) = (t.p.n(), t.u.n());
    let (delta_p, delta_u) = if config.union_bound {
        (config.delta / n_p as f64, config.delta / n_u as f64)
    } else {
        (config.delta, config.delta)
    };
    // Bounds depend only on the counts, which repeat across thresholds.
    let mut upper_u: HashMap<usize, f64> = HashMap::new();
    let mut lower_p: HashMap<usize, f64> = HashMap::new();

    let mut best = ArgMin::default();
    for (c, cp, cu) in t.points() {
        let q_p = cp as f64 / n_p as f64;
        let q_u = cu as f64 / n_u as f64;
        let lo = match lower_p.get(&cp) {
            Some(v) => *v,
            None => {
                let v = binomial_inversion_lower(n_p, q_p, delta_p)?;
                lower_p.insert(cp, v);
                v
            }
        };
        let den = q_p - lo;
        if den <= 0.0 {
            continue;
        }
        let up = match upper_u.get(&cu) {
            Some(v) => *v,
            None => {
                let v = binomial_inversion(n_u, q_u, delta_u)?;
                upper_u.insert(cu, v);
                v
            }
        };
        let obj = (q_u + up) / den;
        best.offer(obj, || MixtureEstimate::new(obj, c, q_p, q_u, obj));
    }
    best.best.map(|(_, e)| e).ok_or_else(|| {
        Error::EstimationFailure(format!(
            "every threshold has a non-positive lower bound on the positive tail \
             (n_p={n_p}, delta={})",
            delta_p
        ))
    })
}

/// One row of a top-bin purity table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopBinRow {
    pub c: f64,
    /// Fraction of unlabeled samples with score `>= c`.
    pub bin_size: f64,
    /// Fraction of those that are truly positive; `None` for an empty bin.
    pub purity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopBinDiagnostics {
    pub rows: Vec<TopBinRow>,
}

impl TopBinDiagnostics {
    /// Largest bin whose purity reaches `min_purity`.
    pub fn largest_pure_bin(&self, min_purity: f64) -> Option<TopBinRow> {
        self.rows
            .iter()
            .filter(|r| r.purity.is_some_and(|p| p >= min_purity))
            .max_by(|a, b| a.bin_size.total_cmp(&b.bin_size))
            .copied()
    }
}

/// Size and purity of the unlabeled top bin at each grid threshold.
/// Needs the hidden labels of the unlabeled samples.
pub fn top_bin_diagnostics(
    z_u: &[f64],
    hidden_labels: Option<&[Label]>,
    grid: &ThresholdGrid,
) -> Result<TopBinDiagnostics> {
    let labels = hidden_labels
        .ok_or_else(|| Error::Unsupported("top-bin purity requires hidden labels".into()))?;
    if labels.len() != z_u.len() {
        return Err(Error::invalid(format!(
            "{} unlabeled scores but {} hidden labels",
            z_u.len(),
            labels.len()
        )));
    }
    if z_u.is_empty() {
        return Err(Error::invalid("no unlabeled scores"));
    }
    let all = TailCdf::new(z_u)?;
    let mut pos: Vec<f64> = z_u
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == Label::Positive)
        .map(|(z, _)| *z)
        .collect();
    pos.sort_by(f64::total_cmp);
    let n = z_u.len() as f64;
    let rows = grid
        .candidates()
        .iter()
        .map(|&c| {
            let in_bin = all.count_at_least(c);
            let pos_in_bin = pos.len() - pos.partition_point(|&v| v < c);
            TopBinRow {
                c,
                bin_size: in_bin as f64 / n,
                purity: (in_bin > 0).then(|| pos_in_bin as f64 / in_bin as f64),
            }
        })
        .collect();
    Ok(TopBinDiagnostics { rows })
}
