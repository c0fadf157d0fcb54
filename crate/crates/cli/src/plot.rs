//! Columnar data for redrawing figures with an external plotter.

use std::str::FromStr;

use pu_kit::mpe::{top_bin_diagnostics, ucb_curve, BbeConfig};
use pu_kit::{ExperimentRecord, Label, ThresholdGrid};

use crate::error::{CliError, Result};
use crate::report::fmt6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Epochwise,
    UcbCurve,
    PurityCurve,
    RateLogLog,
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epochwise" => Ok(PlotKind::Epochwise),
            "ucb_curve" => Ok(PlotKind::UcbCurve),
            "purity_curve" => Ok(PlotKind::PurityCurve),
            "rate_loglog" => Ok(PlotKind::RateLogLog),
            other => Err(CliError::config("kind", format!("unknown plot kind {other:?}"))),
        }
    }
}

/// What a plot is drawn from.
#[derive(Debug, Clone, Copy)]
pub enum PlotInput<'a> {
    Records(&'a [ExperimentRecord]),
    Scores { z_p: &'a [f64], z_u: &'a [f64], labels: Option<&'a [Label]>, bbe: &'a BbeConfig },
    /// `(n, mean absolute error)` pairs.
    Rate(&'a [(usize, f64)]),
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn mismatch(kind: PlotKind) -> CliError {
    CliError::config("kind", format!("{kind:?} cannot be drawn from the given input"))
}

pub fn emit_plot_data(kind: PlotKind, input: PlotInput<'_>) -> Result<String> {
    match (kind, input) {
        (PlotKind::Epochwise, PlotInput::Records(records)) => {
            if records.iter().all(|r| r.train_error.is_none() && r.pvn_accuracy.is_none()) {
                return Err(CliError::config("kind", "epochwise data needs training rows"));
            }
            Ok(table(
                &["method", "seed", "epoch", "alpha_hat", "abs_err", "train_error", "pvn_accuracy"],
                records.iter().map(|r| {
                    vec![
                        r.method.clone(),
                        r.seed.to_string(),
                        r.epoch.to_string(),
                        opt(r.alpha_hat),
                        opt(r.abs_err),
                        opt(r.train_error),
                        opt(r.pvn_accuracy),
                    ]
                }),
            ))
        }
        (PlotKind::UcbCurve, PlotInput::Scores { z_p, z_u, bbe, .. }) => {
            let pts = ucb_curve(z_p, z_u, bbe)?;
            Ok(table(
                &["c", "q_u_hat", "q_p_hat", "ratio", "ucb"],
                pts.iter().map(|p| vec![fmt6(p.c), fmt6(p.q_u_hat), fmt6(p.q_p_hat), fmt6(p.ratio), fmt6(p.ucb)]),
            ))
        }
        (PlotKind::PurityCurve, PlotInput::Scores { z_p, z_u, labels, .. }) => {
            let grid = ThresholdGrid::from_scores(z_p, z_u)?;
            let diag = top_bin_diagnostics(z_u, labels, &grid)?;
            Ok(table(
                &["c", "bin_size", "purity"],
                diag.rows.iter().map(|r| vec![fmt6(r.c), fmt6(r.bin_size), opt(r.purity)]),
            ))
        }
        (PlotKind::RateLogLog, PlotInput::Rate(points)) => {
            if points.iter().any(|&(n, e)| n == 0 || e.is_nan() || e <= 0.0) {
                return Err(CliError::Data("rate points need n >= 1 and a positive error".into()));
            }
            Ok(table(
                &["log_n", "log_mean_abs_err"],
                points.iter().map(|&(n, e)| vec![fmt6((n as f64).ln()), fmt6(e.ln())]),
            ))
        }
        (kind, _) => Err(mismatch(kind)),
    }
}

/// Least-squares slope of `log err` against `log n`.
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucb_curve_columns() {
        let bbe = BbeConfig::default();
        let out = emit_plot_data(
            PlotKind::UcbCurve,
            PlotInput::Scores { z_p: &[0.9, 0.8], z_u: &[0.1, 0.85], labels: None, bbe: &bbe },
        )
        .unwrap();
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("c,q_u_hat,q_p_hat,ratio,ucb"));
        // grid {0, 0.1, 0.8, 0.85, 0.9}; all have a nonempty positive tail
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn purity_curve_needs_labels() {
        let bbe = BbeConfig::default();
        let err = emit_plot_data(
            PlotKind::PurityCurve,
            PlotInput::Scores { z_p: &[0.9], z_u: &[0.1], labels: None, bbe: &bbe },
        )
        .unwrap_err();
        assert!(err.to_string().contains("unsupported"), "{err}");
        let labels = [Label::Negative];
        let out = emit_plot_data(
            PlotKind::PurityCurve,
            PlotInput::Scores { z_p: &[0.9], z_u: &[0.1], labels: Some(&labels), bbe: &bbe },
        )
        .unwrap();
        assert!(out.starts_with("c,bin_size,purity\n"));
    }

    #[test]
    fn rate_rows_and_slope() {
        let pts: Vec<(usize, f64)> = [100usize, 1000, 10_000, 100_000].iter().map(|&n| (n, 1.0 / (n as f64).sqrt())).collect();
        let out = emit_plot_data(PlotKind::RateLogLog, PlotInput::Rate(&pts)).unwrap();
        assert_eq!(out.lines().count(), 5);
        assert!((loglog_slope(&pts) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn kind_input_mismatch_is_a_schema_error() {
        let err = emit_plot_data(PlotKind::UcbCurve, PlotInput::Records(&[])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = emit_plot_data(PlotKind::Epochwise, PlotInput::Rate(&[])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let est = vec![ExperimentRecord::new("bbe", 0, 0).with_alpha(0.5, None)];
        assert!(emit_plot_data(PlotKind::Epochwise, PlotInput::Records(&est)).is_err());
        assert!("bogus".parse::<PlotKind>().is_err());
    }
}
