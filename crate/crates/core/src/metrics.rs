//! Closed-set accuracy and unknown-rejection measures.
//!
//! Every threshold sweep treats a sample as accepted when `score ≥ τ` and
//! visits each distinct observed score once, so tied scores always move
//! together.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One scored test example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    /// Higher means more likely known.
    pub score: f64,
    /// Closed-set prediction, populated regardless of rejection.
    pub predicted: usize,
    /// True class for known samples, `None` for unknowns.
    pub label: Option<usize>,
}

impl ScoredSample {
    pub fn known(score: f64, predicted: usize, label: usize) -> Self {
        ScoredSample {
            score,
            predicted,
            label: Some(label),
        }
    }

    pub fn unknown(score: f64, predicted: usize) -> Self {
        ScoredSample {
            score,
            predicted,
            label: None,
        }
    }

    pub fn is_known(&self) -> bool {
        self.label.is_some()
    }

    pub fn is_correct(&self) -> bool {
        self.label == Some(self.predicted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub accuracy: f64,
    pub auroc: f64,
    pub aupr: f64,
    pub fpr95: f64,
    pub oscr_ccr_at_fpr: f64,
    pub macro_f1: f64,
    pub threshold_used_for_f1: f64,
}

fn split_counts(samples: &[ScoredSample]) -> (usize, usize) {
    let k = samples.iter().filter(|s| s.is_known()).count();
    (k, samples.len() - k)
}

fn require_both(func: &str, samples: &[ScoredSample]) -> Result<(usize, usize)> {
    let (k, u) = split_counts(samples);
    if k == 0 || u == 0 {
        return Err(Error::contract(format!(
            "{func} needs known and unknown samples, got {k} known / {u} unknown"
        )));
    }
    if samples.iter().any(|s| s.score.is_nan()) {
        return Err(Error::contract(format!("{func}: NaN score")));
    }
    Ok((k, u))
}

/// Fraction of known samples whose closed-set prediction is correct.
pub fn accuracy(samples: &[ScoredSample]) -> Result<f64> {
    let known: Vec<_> = samples.iter().filter(|s| s.is_known()).collect();
    if known.is_empty() {
        return Err(Error::contract("accuracy needs at least one known sample"));
    }
    Ok(known.iter().filter(|s| s.is_correct()).count() as f64 / known.len() as f64)
}

/// Cumulative counts after accepting every sample with `score ≥ τ`, for
/// each distinct τ in descending order.
struct SweepPoint {
    threshold: f64,
    known: usize,
    unknown: usize,
    correct: usize,
}

fn sweep(samples: &[ScoredSample]) -> Vec<SweepPoint> {
    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut out = Vec::new();
    let (mut known, mut unknown, mut correct) = (0, 0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            let s = sorted[i];
            if s.is_known() {
                known += 1;
                if s.is_correct() {
                    correct += 1;
                }
            } else {
                unknown += 1;
            }
            i += 1;
        }
        out.push(SweepPoint {
            threshold: t,
            known,
            unknown,
            correct,
        });
    }
    out
}

/// Area under the ROC curve with knowns as positives: the Mann–Whitney
/// statistic `P(s_k > s_u) + ½ P(s_k = s_u)`.
///
/// Wins and ties are counted in integers, so the result is the exact
/// pairwise count divided once by `2 · N_k · N_u`.
pub fn auroc(samples: &[ScoredSample]) -> Result<f64> {
    let (nk, nu) = require_both("auroc", samples)?;
    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    // twice the Mann–Whitney U: 2 per strict win, 1 per tie
    let mut doubled: u128 = 0;
    let mut unknown_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        let (mut k, mut u) = (0u128, 0u128);
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].is_known() {
                k += 1;
            } else {
                u += 1;
            }
            i += 1;
        }
        doubled += k * (2 * unknown_below + u);
        unknown_below += u;
    }
    Ok(doubled as f64 / (2 * nk as u128 * nu as u128) as f64)
}

/// Area under the precision–recall curve with knowns as positives,
/// step-interpolated: `Σ (R_i − R_{i−1}) P_i` over the threshold sweep.
pub fn aupr(samples: &[ScoredSample]) -> Result<f64> {
    let (nk, _) = require_both("aupr", samples)?;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for p in sweep(samples) {
        let recall = p.known as f64 / nk as f64;
        let precision = p.known as f64 / (p.known + p.unknown) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Smallest false-positive rate over observed thresholds whose
/// true-positive rate reaches `tpr_target`.
pub fn fpr_at_tpr(samples: &[ScoredSample], tpr_target: f64) -> Result<f64> {
    let (nk, nu) = require_both("fpr_at_tpr", samples)?;
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(Error::invalid("tpr_target", format!("{tpr_target} is outside (0, 1]")));
    }
    // FPR grows along the sweep, so the first qualifying point is the minimum
    for p in sweep(samples) {
        if p.known as f64 / nk as f64 >= tpr_target {
            return Ok(p.unknown as f64 / nu as f64);
        }
    }
    unreachable!("the last sweep point accepts every known sample")
}

/// Correct classification rate at a fixed false-positive rate.
///
/// Along the descending threshold sweep (starting from "reject all" at
/// FPR 0, CCR 0), takes the last point with `FPR ≤ fpr_target` and the next
/// point beyond it, and interpolates CCR linearly in FPR at `fpr_target`.
/// When no point exceeds the target the CCR of the last point is returned.
pub fn oscr_ccr_at_fpr(samples: &[ScoredSample], fpr_target: f64) -> Result<f64> {
    let (nk, nu) = require_both("oscr_ccr_at_fpr", samples)?;
    if !(0.0..=1.0).contains(&fpr_target) {
        return Err(Error::invalid("fpr_target", format!("{fpr_target} is outside [0, 1]")));
    }
    let mut below = (0.0, 0.0);
    for p in sweep(samples) {
        let fpr = p.unknown as f64 / nu as f64;
        let ccr = p.correct as f64 / nk as f64;
        if fpr <= fpr_target {
            below = (fpr, ccr);
        } else {
            let (f0, c0) = below;
            return Ok(c0 + (fpr_target - f0) / (fpr - f0) * (ccr - c0));
        }
    }
    Ok(below.1)
}

/// Macro-averaged F1 over the `classes` known classes plus the unknown
/// class, after rejecting samples with `score < tau`.
///
/// A class with neither instances nor predictions is left out of the mean;
/// a class whose precision and recall are both zero scores 0.
pub fn macro_f1(samples: &[ScoredSample], tau: f64, classes: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::contract("macro_f1 needs at least one sample"));
    }
    let unknown = classes;
    let mut tp = vec![0usize; classes + 1];
    let mut fp = vec![0usize; classes + 1];
    let mut fne = vec![0usize; classes + 1];
    for s in samples {
        let truth = s.label.unwrap_or(unknown);
        let pred = if s.score >= tau { s.predicted } else { unknown };
        if truth > classes || pred > classes {
            return Err(Error::contract(format!("class index out of range for {classes} classes")));
        }
        if truth == pred {
            tp[truth] += 1;
        } else {
            fp[pred] += 1;
            fne[truth] += 1;
        }
    }
    let mut total = 0.0;
    let mut populated = 0;
    for c in 0..=classes {
        if tp[c] + fp[c] + fne[c] == 0 {
            continue;
        }
        populated += 1;
        // F1 = 2TP / (2TP + FP + FN), zero when TP = 0
        total += 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fne[c]) as f64;
    }
    Ok(total / populated as f64)
}

/// Threshold accepting at least `rate` of the given scores: the largest
/// observed score `τ` with `|{s ≥ τ}| ≥ rate · N`.
pub fn acceptance_threshold(scores: &[f64], rate: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::contract("acceptance_threshold needs scores"));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::invalid("rate", format!("{rate} is outside (0, 1]")));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let needed = libm::ceil(rate * sorted.len() as f64) as usize;
    Ok(sorted[needed.clamp(1, sorted.len()) - 1])
}

/// One point of the open-set classification rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscrPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub ccr: f64,
}

/// Full OSCR curve over the distinct observed scores, from the highest
/// threshold down.
pub fn oscr_curve(samples: &[ScoredSample]) -> Result<Vec<OscrPoint>> {
    let (nk, nu) = require_both("oscr_curve", samples)?;
    Ok(sweep(samples)
        .into_iter()
        .map(|p| OscrPoint {
            threshold: p.threshold,
            fpr: p.unknown as f64 / nu as f64,
            ccr: p.correct as f64 / nk as f64,
        })
        .collect())
}

/// Every measure at once.
pub fn report(
    samples: &[ScoredSample],
    classes: usize,
    fpr_target: f64,
    tpr_target: f64,
    f1_threshold: f64,
) -> Result<MetricReport> {
    Ok(MetricReport {
        accuracy: accuracy(samples)?,
        auroc: auroc(samples)?,
        aupr: aupr(samples)?,
        fpr95: fpr_at_tpr(samples, tpr_target)?,
        oscr_ccr_at_fpr: oscr_ccr_at_fpr(samples, fpr_target)?,
        macro_f1: macro_f1(samples, f1_threshold, classes)?,
        threshold_used_for_f1: f1_threshold,
    })
}
