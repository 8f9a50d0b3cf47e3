//! End-to-end runs: data generation, training, evaluation, λ sweeps and
//! inclusion-probability curves.
//!
//! Every command writes into an output directory and records a
//! `manifest.json` with the command name, the crate version and the full
//! configuration. Manifests carry no timestamps, so repeated runs with the
//! same configuration produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use openset_core::data::{generate, DatasetBundle, SampleSet};
use openset_core::metrics::{self, MetricReport, ScoredSample};
use openset_core::model::{Head, Model};
use openset_core::special::{prob_hypersphere, prob_inclusion};
use openset_core::trainer::{train_until, TrainState, TrainTrace};
use serde::Serialize;

use crate::checkpoint;
use crate::config::{DataSource, ExperimentConfig};
use crate::csv_io::{read_samples, write_samples, LabelColumn};
use crate::error::{Error, Result};
use crate::report::{self, CurveRow, ReportJson, SweepRow};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub const TRAIN_KNOWN_CSV: &str = "train_known.csv";
pub const BACKGROUND_CSV: &str = "background.csv";
pub const TEST_KNOWN_CSV: &str = "test_known.csv";
pub const TEST_UNKNOWN_CSV: &str = "test_unknown.csv";
pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const TRACE_CSV: &str = "trace.csv";
pub const REPORT: &str = "report.json";
pub const SCORES_CSV: &str = "scores.csv";
pub const OSCR_CSV: &str = "oscr_curve.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<T>,
}

fn write_manifest<T: Serialize>(dir: &Path, command: &str, cfg: &ExperimentConfig, extra: Option<T>) -> Result<()> {
    report::write_json(
        &dir.join(MANIFEST),
        &Manifest {
            command,
            version: VERSION,
            seed: cfg.seed,
            config: cfg,
            extra,
        },
    )
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("checkpoint_epoch_{epoch:04}.json")
}

/// Synthetic bundle or the four CSV files named in the config.
pub fn load_bundle(cfg: &ExperimentConfig) -> Result<DatasetBundle> {
    let bundle = match cfg.data.source {
        DataSource::Synthetic => generate(&cfg.synthetic_spec()?)?,
        DataSource::Csv => {
            let d = Some(cfg.data.input_dim);
            let path = |p: &Option<PathBuf>| p.clone().expect("validated");
            DatasetBundle {
                train_known: read_samples(&path(&cfg.data.train_known), d, LabelColumn::Required)?,
                background: read_samples(&path(&cfg.data.background), d, LabelColumn::Optional)?,
                test_known: read_samples(&path(&cfg.data.test_known), d, LabelColumn::Required)?,
                test_unknown: read_samples(&path(&cfg.data.test_unknown), d, LabelColumn::Optional)?,
            }
        }
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn init_model(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<Model> {
    let mut model = Model::init(
        &cfg.layer_sizes(bundle.input_dim()),
        bundle.classes(),
        cfg.head_kind()?,
        cfg.seed,
    )?;
    model.freeze_anchors = cfg.model.freeze_anchors;
    Ok(model)
}

/// Acceptance score and closed-set prediction: `−min_c D²` for the distance
/// head, the maximum softmax posterior for the softmax head.
pub fn score(model: &Model, x: &[f64]) -> Result<(f64, usize)> {
    let tau = match model.head() {
        Head::Distance(_) => 0.0,
        Head::Softmax(_) => 1.0,
    };
    let d = model.decide(x, tau)?;
    Ok((d.score, d.closed_set_class))
}

fn score_set(model: &Model, set: &SampleSet, known: bool, out: &mut Vec<ScoredSample>) -> Result<()> {
    for i in 0..set.len() {
        let (s, predicted) = score(model, set.row(i))?;
        out.push(match (known, set.label(i)) {
            (true, Some(y)) => ScoredSample::known(s, predicted, y),
            _ => ScoredSample::unknown(s, predicted),
        });
    }
    Ok(())
}

/// Scores for `test_known` followed by `test_unknown`.
pub fn score_samples(model: &Model, bundle: &DatasetBundle) -> Result<Vec<ScoredSample>> {
    let mut out = Vec::with_capacity(bundle.test_known.len() + bundle.test_unknown.len());
    score_set(model, &bundle.test_known, true, &mut out)?;
    score_set(model, &bundle.test_unknown, false, &mut out)?;
    Ok(out)
}

/// Fixed threshold from the config, or the score accepting
/// `f1_acceptance_rate` of the training knowns.
pub fn f1_threshold(cfg: &ExperimentConfig, model: &Model, bundle: &DatasetBundle) -> Result<f64> {
    if let Some(t) = cfg.eval.f1_threshold {
        return Ok(t);
    }
    let scores = bundle
        .train_known
        .rows()
        .map(|x| score(model, x).map(|s| s.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(metrics::acceptance_threshold(&scores, cfg.eval.f1_acceptance_rate)?)
}

pub fn evaluate(cfg: &ExperimentConfig, model: &Model, bundle: &DatasetBundle) -> Result<(MetricReport, Vec<ScoredSample>)> {
    let samples = score_samples(model, bundle)?;
    let tau = f1_threshold(cfg, model, bundle)?;
    let report = metrics::report(&samples, model.classes(), cfg.eval.fpr_target, cfg.eval.tpr_target, tau)?;
    Ok((report, samples))
}

/// Trains from `start` (or a fresh model) to `optim.epochs`, saving a
/// checkpoint into `checkpoint_dir` every `checkpoint_every` epochs.
pub fn train(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
    start: Option<TrainState>,
    checkpoint_dir: Option<&Path>,
) -> Result<(TrainState, TrainTrace)> {
    let loss = cfg.loss_config()?;
    let optim = cfg.optim_config();
    let mut state = match start {
        Some(s) => s,
        None => TrainState::new(init_model(cfg, bundle)?),
    };
    let every = optim.checkpoint_every;
    let mut io_error = None;
    let trace = train_until(&mut state, bundle, &loss, &optim, optim.epochs, |s, _| {
        if let (Some(dir), true) = (checkpoint_dir, every > 0 && s.epochs_done % every == 0) {
            if let Err(e) = checkpoint::save(&dir.join(checkpoint_name(s.epochs_done)), s) {
                io_error = Some(e);
                return Err(openset_core::Error::Contract("checkpoint write failed".into()));
            }
        }
        Ok(())
    });
    match (trace, io_error) {
        (_, Some(e)) => Err(e),
        (t, None) => Ok((state, t?)),
    }
}

pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<DatasetBundle> {
    let bundle = load_bundle(cfg)?;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    write_samples(&dir.join(TRAIN_KNOWN_CSV), &bundle.train_known)?;
    write_samples(&dir.join(BACKGROUND_CSV), &bundle.background)?;
    write_samples(&dir.join(TEST_KNOWN_CSV), &bundle.test_known)?;
    write_samples(&dir.join(TEST_UNKNOWN_CSV), &bundle.test_unknown)?;
    write_manifest::<()>(dir, "gen-data", cfg, None)?;
    Ok(bundle)
}

/// Writes `checkpoint.json`, `trace.csv` and the manifest. With `resume`,
/// continues from that checkpoint; the trace then covers only the
/// remaining epochs.
pub fn cmd_train(cfg: &ExperimentConfig, resume: Option<&Path>) -> Result<(TrainState, TrainTrace)> {
    let bundle = load_bundle(cfg)?;
    let start = resume.map(checkpoint::load).transpose()?;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let (state, trace) = train(cfg, &bundle, start, Some(dir))?;
    checkpoint::save(&dir.join(CHECKPOINT), &state)?;
    report::write_trace(&dir.join(TRACE_CSV), &trace.records)?;
    write_manifest(dir, "train", cfg, resume.map(|p| p.display().to_string()))?;
    Ok((state, trace))
}

/// Writes `report.json`, `scores.csv`, `oscr_curve.csv` and the manifest.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint_path: &Path) -> Result<MetricReport> {
    let bundle = load_bundle(cfg)?;
    let state = checkpoint::load(checkpoint_path)?;
    let (report, samples) = evaluate(cfg, &state.model, &bundle)?;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    report::write_json(&dir.join(REPORT), &ReportJson::from(report))?;
    report::write_scores(&dir.join(SCORES_CSV), &samples)?;
    report::write_oscr_curve(&dir.join(OSCR_CSV), &metrics::oscr_curve(&samples)?)?;
    write_manifest(dir, "eval", cfg, Some(checkpoint_path.display().to_string()))?;
    Ok(report)
}

/// Trains and evaluates one model per λ on worker threads and returns
/// rows in the order given.
pub fn sweep_lambda(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    let bundle = load_bundle(cfg)?;
    let results: Vec<Result<SweepRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = lambdas
            .iter()
            .map(|&lambda| {
                let bundle = &bundle;
                scope.spawn(move || {
                    let mut run = cfg.clone();
                    run.loss.lambda = lambda;
                    run.validate()?;
                    let (state, _) = train(&run, bundle, None, None)?;
                    let (report, _) = evaluate(&run, &state.model, bundle)?;
                    Ok(SweepRow {
                        lambda,
                        accuracy: report.accuracy,
                        auroc: report.auroc,
                        oscr: report.oscr_ccr_at_fpr,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    results.into_iter().collect()
}

pub fn cmd_sweep_lambda(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    let rows = sweep_lambda(cfg, lambdas)?;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    report::write_sweep(&dir.join(SWEEP_CSV), &rows)?;
    write_manifest(dir, "sweep-lambda", cfg, Some(lambdas))?;
    Ok(rows)
}

/// `steps + 1` evenly spaced distances on `[0, max_distance]` with the
/// chi-square inclusion probability and the hypersphere probability for
/// latent dimension `n`.
pub fn curves(n: u32, max_distance: f64, steps: usize) -> Result<Vec<CurveRow>> {
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    if !(max_distance.is_finite() && max_distance > 0.0) {
        return Err(Error::config("max", "must be a positive number"));
    }
    if steps == 0 {
        return Err(Error::config("steps", "must be at least 1"));
    }
    (0..=steps)
        .map(|i| {
            let distance = max_distance * i as f64 / steps as f64;
            let d_sq = distance * distance;
            Ok(CurveRow {
                distance,
                p_inclusion: prob_inclusion(d_sq, n)?,
                p_hypersphere: prob_hypersphere(d_sq)?,
            })
        })
        .collect()
}
