//! Empirical tail CDFs over classifier scores and the deviation bounds built on them.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Absolute tolerance of the bisection in [`binomial_inversion`].
pub const BINV_TOLERANCE: f64 = 1e-9;

fn check_score(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("score {s} lies outside [0,1]")));
    }
    Ok(())
}

/// Empirical top-bin mass `q̂(z)`: the fraction of scores that are `>= z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCdf {
    sorted: Vec<f64>,
}

impl TailCdf {
    pub fn new(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("cannot build a tail CDF from zero scores"));
        }
        for &s in scores {
            check_score(s)?;
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(TailCdf { sorted })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_scores(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of scores `>= z`.
    pub fn count_at_least(&self, z: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&s| s < z)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.count_at_least(z) as f64 / self.sorted.len() as f64
    }
}

/// Candidate thresholds for the argmin searches of the estimators.
///
/// Ratios of tail CDFs are step functions that only change at observed
/// scores, so searching the observed scores (plus 0) is exhaustive.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    candidates: Vec<f64>,
}

impl ThresholdGrid {
    /// Sorted, deduplicated union of both score sets and `0.0`.
    pub fn from_scores(z_p: &[f64], z_u: &[f64]) -> Result<Self> {
        if z_p.is_empty() {
            return Err(Error::invalid("threshold grid needs at least one positive score"));
        }
        let mut c: Vec<f64> = Vec::with_capacity(z_p.len() + z_u.len() + 1);
        c.push(0.0);
        for &s in z_p.iter().chain(z_u) {
            check_score(s)?;
            c.push(s);
        }
        c.sort_by(f64::total_cmp);
        c.dedup();
        Ok(ThresholdGrid { candidates: c })
    }

    /// Grid from explicit candidates; they are sorted and deduplicated.
    pub fn new(mut candidates: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::invalid("threshold grid must not be empty"));
        }
        for &c in &candidates {
            check_score(c)?;
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        Ok(ThresholdGrid { candidates })
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// Single-population confidence term `sqrt(ln(4/δ) / 2n)` of the BBE objective.
pub fn bbe_penalty(n: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::invalid("penalty needs n >= 1"));
    }
    Ok(((4.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Two-sided DKW radius `sqrt(ln(2/δ) / 2n)`.
pub fn dkw_radius(n: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::invalid("DKW radius needs n >= 1"));
    }
    Ok(((2.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// `P(Binomial(n, p) <= k)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    // P(X <= k) = I_{1-p}(n - k, k + 1)
    beta_reg((n - k) as f64, (k + 1) as f64, 1.0 - p)
}

fn check_inversion_args(n: usize, p_hat: f64, delta: f64) -> Result<u64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::invalid("binomial inversion needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::invalid(format!("p_hat must lie in [0,1], got {p_hat}")));
    }
    Ok((p_hat * n as f64).round() as u64)
}

/// Upper binomial tail inversion.
///
/// Smallest `ε >= 0` such that a `Binomial(n, p̂ + ε) / n` draw lands at or
/// below `p̂` with probability at most `δ`, i.e. `p̂ + ε` is an exact upper
/// confidence bound on the success probability. Bisection on the binomial
/// CDF; the returned value errs on the conservative side by at most
/// [`BINV_TOLERANCE`].
pub fn binomial_inversion(n: usize, p_hat: f64, delta: f64) -> Result<f64> {
    let k = check_inversion_args(n, p_hat, delta)?;
    let n64 = n as u64;
    if k >= n64 {
        return Ok(0.0);
    }
    let mut lo = p_hat;
    let mut hi = 1.0;
    if binomial_cdf(k, n64, lo) <= delta {
        return Ok(0.0);
    }
    let mut iters = 0;
    while hi - lo > BINV_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if binomial_cdf(k, n64, mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
        if iters > 200 {
            return Err(Error::Internal(format!(
                "binomial inversion did not converge (n={n}, p_hat={p_hat}, delta={delta})"
            )));
        }
    }
    Ok((hi - p_hat).min(1.0 - p_hat))
}

/// Lower binomial tail inversion: `p̂ - ε` is an exact lower confidence bound.
///
/// Mirror image of [`binomial_inversion`] under `X -> n - X`.
pub fn binomial_inversion_lower(n: usize, p_hat: f64, delta: f64) -> Result<f64> {
    check_inversion_args(n, p_hat, delta)?;
    binomial_inversion(n, 1.0 - p_hat, delta)
}
