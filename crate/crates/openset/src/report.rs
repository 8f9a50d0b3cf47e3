//! Output artifacts: metric report JSON and CSV tables.
//!
//! | file              | columns                                                                  |
//! |-------------------|--------------------------------------------------------------------------|
//! | `report.json`     | flat object, see [`ReportJson`]                                          |
//! | `scores.csv`      | `score,predicted,label,is_known` (1-based classes, empty label for unknowns) |
//! | `oscr_curve.csv`  | `threshold,fpr,ccr`                                                      |
//! | `trace.csv`       | `epoch,lr,loss_cf,loss_bg_known,loss_bg_background,loss_total,train_accuracy` |
//! | `sweep.csv`       | `lambda,accuracy,auroc,oscr`                                             |
//! | curves            | `distance,p_inclusion,p_hypersphere`                                     |

use std::io::Write;
use std::path::Path;

use openset_core::metrics::{MetricReport, OscrPoint, ScoredSample};
use openset_core::trainer::TrainRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportJson {
    pub accuracy: f64,
    pub auroc: f64,
    pub aupr: f64,
    pub fpr95: f64,
    pub oscr_ccr_at_fpr: f64,
    pub macro_f1: f64,
    pub threshold_used_for_f1: f64,
}

impl From<MetricReport> for ReportJson {
    fn from(r: MetricReport) -> Self {
        ReportJson {
            accuracy: r.accuracy,
            auroc: r.auroc,
            aupr: r.aupr,
            fpr95: r.fpr95,
            oscr_ccr_at_fpr: r.oscr_ccr_at_fpr,
            macro_f1: r.macro_f1,
            threshold_used_for_f1: r.threshold_used_for_f1,
        }
    }
}

/// One row of a λ sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub auroc: f64,
    pub oscr: f64,
}

/// One row of the inclusion-probability curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub distance: f64,
    pub p_inclusion: f64,
    pub p_hypersphere: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let fail = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_scores(path: &Path, samples: &[ScoredSample]) -> Result<()> {
    write_csv(
        path,
        &["score", "predicted", "label", "is_known"],
        samples.iter().map(|s| {
            [
                s.score.to_string(),
                (s.predicted + 1).to_string(),
                s.label.map_or(String::new(), |y| (y + 1).to_string()),
                s.is_known().to_string(),
            ]
        }),
    )
}

pub fn write_oscr_curve(path: &Path, points: &[OscrPoint]) -> Result<()> {
    write_csv(
        path,
        &["threshold", "fpr", "ccr"],
        points.iter().map(|p| [p.threshold.to_string(), p.fpr.to_string(), p.ccr.to_string()]),
    )
}

pub fn write_trace(path: &Path, records: &[TrainRecord]) -> Result<()> {
    write_csv(
        path,
        &["epoch", "lr", "loss_cf", "loss_bg_known", "loss_bg_background", "loss_total", "train_accuracy"],
        records.iter().map(|r| {
            [
                r.epoch.to_string(),
                r.lr.to_string(),
                r.loss_cf.to_string(),
                r.loss_bg_known.to_string(),
                r.loss_bg_background.to_string(),
                r.loss_total.to_string(),
                r.train_accuracy.to_string(),
            ]
        }),
    )
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(
        path,
        &["lambda", "accuracy", "auroc", "oscr"],
        rows.iter().map(|r| [r.lambda.to_string(), r.accuracy.to_string(), r.auroc.to_string(), r.oscr.to_string()]),
    )
}

pub fn write_curves_to(out: impl Write, rows: &[CurveRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["distance", "p_inclusion", "p_hypersphere"])?;
    for r in rows {
        w.write_record([r.distance.to_string(), r.p_inclusion.to_string(), r.p_hypersphere.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_curves_to(file, rows).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
