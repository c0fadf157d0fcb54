//! Experiment harness for `pu-kit`: configs, seeded runs, CSV reports and
//! plot data.

pub mod config;
pub mod error;
pub mod mnist;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Method, Scorer};
pub use error::{CliError, Result};
pub use plot::{emit_plot_data, PlotInput, PlotKind};
pub use report::{final_model_report, oracle_early_stop, read_records, summarize, write_records, Metric};
pub use run::{run_experiment, sweep_alpha};

use std::path::Path;

use pu_kit::Label;

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

/// One real number per line; blank lines are skipped.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| {
            l.parse::<f64>()
                .map_err(|_| CliError::Data(format!("{}:{n}: not a number: {l:?}", path.display())))
        })
        .collect()
}

/// One `+1`/`1` or `-1` per line.
pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| match l.as_str() {
            "1" | "+1" => Ok(Label::Positive),
            "-1" => Ok(Label::Negative),
            _ => Err(CliError::Data(format!("{}:{n}: expected +1 or -1, got {l:?}", path.display()))),
        })
        .collect()
}
