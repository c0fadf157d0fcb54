//! CSV output and the two reporting protocols.

use std::collections::BTreeMap;
use std::io::Write;

use pu_kit::ExperimentRecord;

use crate::config::Method;
use crate::error::{CliError, Result};

pub const CSV_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 9] =
    ["version", "method", "seed", "epoch", "alpha_true", "alpha_hat", "abs_err", "train_error", "pvn_accuracy"];
/// Epochs averaged by both reporting protocols.
pub const REPORT_WINDOW: usize = 10;

/// Six significant digits, trailing zeros trimmed; scientific notation
/// outside `[1e-4, 1e6)`.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').unwrap();
        return format!("{}e{e}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(format!("CSV: {e}"))
}

/// Writes records in the versioned schema, in the order given.
pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            CSV_VERSION.to_string(),
            r.method.clone(),
            r.seed.to_string(),
            r.epoch.to_string(),
            opt(r.alpha_true),
            opt(r.alpha_hat),
            opt(r.abs_err),
            opt(r.train_error),
            opt(r.pvn_accuracy),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

pub fn records_to_string(records: &[ExperimentRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Reads records written by [`write_records`].
pub fn read_records(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::Data(format!("unexpected CSV header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let num = |s: &str, col: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| CliError::Data(format!("column {col}: not a number: {s:?}")))
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        if row[0] != *CSV_VERSION.to_string() {
            return Err(CliError::Data(format!("unsupported CSV version {}", &row[0])));
        }
        let int = |i: usize| -> Result<u64> {
            row[i].parse().map_err(|_| CliError::Data(format!("column {}: not an integer", CSV_HEADER[i])))
        };
        out.push(ExperimentRecord {
            method: row[1].to_string(),
            seed: int(2)?,
            epoch: int(3)? as usize,
            alpha_true: num(&row[4], "alpha_true")?,
            alpha_hat: num(&row[5], "alpha_hat")?,
            abs_err: num(&row[6], "abs_err")?,
            train_error: num(&row[7], "train_error")?,
            pvn_accuracy: num(&row[8], "pvn_accuracy")?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    AbsErr,
}

impl Metric {
    fn get(self, r: &ExperimentRecord) -> Option<f64> {
        match self {
            Metric::Accuracy => r.pvn_accuracy,
            Metric::AbsErr => r.abs_err,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "pvn_accuracy",
            Metric::AbsErr => "abs_err",
        }
    }
}

fn values(records: &[ExperimentRecord], metric: Metric) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            metric
                .get(r)
                .ok_or_else(|| CliError::Data(format!("record at epoch {} has no {}", r.epoch, metric.name())))
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Oracle early stopping for baselines: mean accuracy over the 10-epoch
/// window ending at the best epoch (truncated at the start of the trace).
/// Refuses records of methods that must be reported on their final model.
pub fn oracle_early_stop(records: &[ExperimentRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(CliError::Data("oracle early stopping needs at least one record".into()));
    }
    if let Some(r) = records.iter().find(|r| Method::parse(&r.method).is_some_and(Method::reports_final_model)) {
        return Err(CliError::Data(format!("oracle early stopping is not applied to {} rows", r.method)));
    }
    let acc = values(records, Metric::Accuracy)?;
    // first maximum wins
    let best = acc.iter().enumerate().fold(0, |b, (i, &v)| if v > acc[b] { i } else { b });
    let lo = (best + 1).saturating_sub(REPORT_WINDOW);
    Ok(mean(&acc[lo..=best]))
}

/// Mean of `metric` over the last 10 records.
pub fn final_model_report(records: &[ExperimentRecord], metric: Metric) -> Result<f64> {
    if records.is_empty() {
        return Err(CliError::Data("final-model report needs at least one record".into()));
    }
    let tail = &records[records.len().saturating_sub(REPORT_WINDOW)..];
    Ok(mean(&values(tail, metric)?))
}

/// Per-method aggregate over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub seeds: usize,
    pub mean_abs_err: Option<f64>,
    pub std_abs_err: Option<f64>,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    /// `final` or `oracle`.
    pub accuracy_protocol: &'static str,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let m = mean(v);
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64 } else { 0.0 };
    (Some(m), Some(var.sqrt()))
}

/// Groups rows by (method, seed), applies the reporting protocol of each
/// method, and aggregates over seeds. Methods appear in name order.
///
/// Only rows that carry a value enter each metric: CVIR and (TED)^n use
/// their final 10 epochs, PvU its oracle window, and the one-row estimators
/// their single estimate.
pub fn summarize(records: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    let mut runs: BTreeMap<&str, BTreeMap<u64, Vec<ExperimentRecord>>> = BTreeMap::new();
    for r in records {
        runs.entry(&r.method).or_default().entry(r.seed).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for (method, by_seed) in runs {
        let final_model = Method::parse(method).is_none_or(Method::reports_final_model);
        let (mut errs, mut accs) = (Vec::new(), Vec::new());
        for rows in by_seed.values() {
            let mut rows = rows.clone();
            rows.sort_by_key(|r| r.epoch);
            let with_err: Vec<_> = rows.iter().filter(|r| r.abs_err.is_some()).cloned().collect();
            if !with_err.is_empty() {
                errs.push(final_model_report(&with_err, Metric::AbsErr)?);
            }
            let with_acc: Vec<_> = rows.iter().filter(|r| r.pvn_accuracy.is_some()).cloned().collect();
            if !with_acc.is_empty() {
                accs.push(if final_model {
                    final_model_report(&with_acc, Metric::Accuracy)?
                } else {
                    oracle_early_stop(&with_acc)?
                });
            }
        }
        let (mean_abs_err, std_abs_err) = mean_std(&errs);
        let (mean_accuracy, std_accuracy) = mean_std(&accs);
        out.push(SummaryRow {
            method: method.to_string(),
            seeds: by_seed.len(),
            mean_abs_err,
            std_abs_err,
            mean_accuracy,
            std_accuracy,
            accuracy_protocol: if final_model { "final" } else { "oracle" },
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "seeds",
        "mean_abs_err",
        "std_abs_err",
        "mean_accuracy",
        "std_accuracy",
        "accuracy_protocol",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.seeds.to_string(),
            opt(r.mean_abs_err),
            opt(r.std_abs_err),
            opt(r.mean_accuracy),
            opt(r.std_accuracy),
            r.accuracy_protocol.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}
