use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pu_kit::mpe::{bbe_estimate, naive_ratio_estimate, scott_estimate, BbeConfig, ScottConfig};
use pu_kit_cli::report::{fmt6, records_to_string, write_summary};
use pu_kit_cli::run::{bbe_rate, estimator_scores, load_task, train_job};
use pu_kit_cli::{
    emit_plot_data, read_labels, read_records, read_scores, run_experiment, summarize, sweep_alpha, CliError,
    ExperimentConfig, Method, PlotInput, PlotKind, Result,
};

#[derive(Parser)]
#[command(name = "pu-kit", version, about = "Mixture proportion estimation and PU learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Bbe,
    Scott,
    Naive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    Tedn,
    Cvir,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the mixture proportion from two score files.
    Estimate {
        /// Scores of labeled positives, one per line.
        #[arg(long)]
        pos: PathBuf,
        /// Scores of unlabeled samples, one per line.
        #[arg(long)]
        unl: PathBuf,
        #[arg(long, value_enum, default_value = "bbe")]
        method: Estimator,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.01)]
        gamma: f64,
        /// Scott estimator: invert each tail at delta/n.
        #[arg(long)]
        union_bound: bool,
    },
    /// Train one model with (TED)^n or CVIR and log every epoch.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "tedn")]
        method: Learner,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        warm_start: Option<usize>,
        /// Per-epoch CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Where to save the trained model as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Run every configured method and seed.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        warm_start: Option<usize>,
        /// Overrides `output` in the config; stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Per-method aggregate over seeds.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Repeat the experiment for several mixture proportions.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit columnar plot data.
    Plotdata {
        /// epochwise, ucb_curve, purity_curve or rate_loglog.
        #[arg(long)]
        kind: String,
        /// Experiment CSV (epochwise).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Score files (ucb_curve, purity_curve).
        #[arg(long)]
        pos: Option<PathBuf>,
        #[arg(long)]
        unl: Option<PathBuf>,
        /// Hidden labels of the unlabeled scores, +1 or -1 per line (purity_curve).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Experiment config (rate_loglog, or scores generated from seed 0).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(f);
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
        }
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn load_config(path: &Path, warm_start: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply_env()?;
    if let Some(w) = warm_start {
        cfg.tedn.warm_start_epochs = w;
    }
    Ok(cfg)
}

fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref().ok_or_else(|| CliError::config(flag, format!("--{flag} is required for this plot kind")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate { pos, unl, method, delta, gamma, union_bound } => {
            let z_p = read_scores(&pos)?;
            let z_u = read_scores(&unl)?;
            let est = match method {
                Estimator::Bbe => {
                    let cfg = BbeConfig::new(delta, gamma).map_err(|e| CliError::config("delta", e.to_string()))?;
                    bbe_estimate(&z_p, &z_u, &cfg)?
                }
                Estimator::Scott => scott_estimate(&z_p, &z_u, &ScottConfig { delta, union_bound })?,
                Estimator::Naive => naive_ratio_estimate(&z_p, &z_u)?,
            };
            let text = format!(
                "alpha_hat,alpha_clamped,c_hat,q_p_at_c,q_u_at_c\n{},{},{},{},{}\n",
                fmt6(est.alpha_hat),
                fmt6(est.alpha_clamped),
                fmt6(est.c_hat),
                fmt6(est.q_p_at_c),
                fmt6(est.q_u_at_c)
            );
            write_out(None, &text)
        }
        Command::Train { config, method, seed, warm_start, output, model_out } => {
            let cfg = load_config(&config, warm_start)?;
            let m = match method {
                Learner::Tedn => Method::Tedn,
                Learner::Cvir => Method::Cvir,
            };
            let (rows, model) = train_job(&cfg, m, seed)?;
            write_out(output.as_deref(), &records_to_string(&rows)?)?;
            if let (Some(path), Some(model)) = (model_out, model) {
                write_out(Some(&path), &model.to_json())?;
            }
            Ok(())
        }
        Command::Bench { config, warm_start, output, summary } => {
            let cfg = load_config(&config, warm_start)?;
            if let Some(m) = cfg.mnist.as_ref().filter(|m| !m.available()) {
                eprintln!("MNIST files not found under {}; skipping", m.dir.display());
                return Ok(());
            }
            let rows = run_experiment(&cfg)?;
            let out = output.or(cfg.output.clone());
            write_out(out.as_deref(), &records_to_string(&rows)?)?;
            if let Some(path) = summary {
                let mut buf = Vec::new();
                write_summary(&mut buf, &summarize(&rows)?)?;
                write_out(Some(&path), &String::from_utf8(buf).expect("CSV output is UTF-8"))?;
            }
            Ok(())
        }
        Command::Sweep { config, alphas, output } => {
            let cfg = load_config(&config, None)?;
            let rows = sweep_alpha(&cfg, &alphas)?;
            let out = output.or(cfg.output.clone());
            write_out(out.as_deref(), &records_to_string(&rows)?)
        }
        Command::Plotdata { kind, records, pos, unl, labels, config, sizes, output } => {
            let kind: PlotKind = kind.parse()?;
            let text = match kind {
                PlotKind::Epochwise => {
                    let path = need(&records, "records")?;
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                    emit_plot_data(kind, PlotInput::Records(&read_records(&text)?))?
                }
                PlotKind::UcbCurve | PlotKind::PurityCurve => {
                    let bbe = BbeConfig::default();
                    if let Some(cfg_path) = &config {
                        // scores from the configured task at seed 0, with its hidden labels
                        let cfg = load_config(cfg_path, None)?;
                        let seed = pu_kit::RandomSeed(cfg.seeds[0]);
                        let task = load_task(&cfg, seed)?;
                        let s = estimator_scores(&cfg, &task.data, seed)?;
                        emit_plot_data(
                            kind,
                            PlotInput::Scores { z_p: &s.z_p, z_u: &s.z_u, labels: s.hidden.as_deref(), bbe: &cfg.bbe },
                        )?
                    } else {
                        let z_p = read_scores(need(&pos, "pos")?)?;
                        let z_u = read_scores(need(&unl, "unl")?)?;
                        let l = labels.as_deref().map(read_labels).transpose()?;
                        emit_plot_data(kind, PlotInput::Scores { z_p: &z_p, z_u: &z_u, labels: l.as_deref(), bbe: &bbe })?
                    }
                }
                PlotKind::RateLogLog => {
                    let cfg = load_config(need(&config, "config")?, None)?;
                    let pts = bbe_rate(&cfg, &sizes)?;
                    emit_plot_data(kind, PlotInput::Rate(&pts))?
                }
            };
            write_out(output.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
