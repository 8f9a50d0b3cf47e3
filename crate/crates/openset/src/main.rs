use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use openset::config::ExperimentConfig;
use openset::experiment;
use openset::report::write_curves_to;
use openset::{Error, Result};

#[derive(Parser)]
#[command(name = "openset", version, about = "Open-set recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the top-level `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the four data CSVs and a manifest.
    GenData(Common),
    /// Train a model; writes checkpoint.json and trace.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint; writes report.json, scores.csv and oscr_curve.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate one model per λ; writes sweep.csv.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        /// Comma-separated λ values, kept in the given order.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.5,1,5,10")]
        lambdas: Vec<f64>,
    },
    /// Print or write distance, P_I and P_H columns.
    Curves {
        /// Latent dimension.
        #[arg(long, default_value_t = 128)]
        n: u32,
        /// Largest distance.
        #[arg(long, default_value_t = 20.0)]
        max: f64,
        /// Number of intervals.
        #[arg(long, default_value_t = 400)]
        steps: usize,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(common) => {
            let cfg = load(&common)?;
            experiment::cmd_gen_data(&cfg)?;
            eprintln!("wrote {}", cfg.out_dir.display());
        }
        Command::Train { common, resume } => {
            let cfg = load(&common)?;
            let (state, trace) = experiment::cmd_train(&cfg, resume.as_deref())?;
            if let Some(last) = trace.records.last() {
                eprintln!(
                    "epoch {}: loss {:.6}, train accuracy {:.4}",
                    last.epoch, last.loss_total, last.train_accuracy
                );
            }
            eprintln!("{} epochs done, wrote {}", state.epochs_done, cfg.out_dir.display());
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load(&common)?;
            let r = experiment::cmd_eval(&cfg, &checkpoint)?;
            println!(
                "accuracy {:.4}  auroc {:.4}  oscr {:.4}  aupr {:.4}  fpr95 {:.4}  macro_f1 {:.4}",
                r.accuracy, r.auroc, r.oscr_ccr_at_fpr, r.aupr, r.fpr95, r.macro_f1
            );
        }
        Command::SweepLambda { common, lambdas } => {
            let cfg = load(&common)?;
            for row in experiment::cmd_sweep_lambda(&cfg, &lambdas)? {
                println!(
                    "lambda {}  accuracy {:.4}  auroc {:.4}  oscr {:.4}",
                    row.lambda, row.accuracy, row.auroc, row.oscr
                );
            }
        }
        Command::Curves { n, max, steps, out } => {
            let rows = experiment::curves(n, max, steps)?;
            match out {
                Some(path) => openset::report::write_curves(&path, &rows)?,
                None => write_curves_to(std::io::stdout().lock(), &rows).map_err(|e| Error::Format {
                    path: "<stdout>".into(),
                    reason: e.to_string(),
                })?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
