//! OOD detection and calibration metrics.
//!
//! OOD is the positive class and a sample is flagged when `score ≥ τ`.
//! Threshold metrics count with integers so they match pairwise brute
//! force exactly.

use std::cmp::Ordering;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::check_simplex;

pub const DEFAULT_ECE_BINS: usize = 15;
pub const NLL_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodEval {
    pub auroc: f64,
    pub aupr: f64,
    pub fpr95: f64,
    pub detection_accuracy: f64,
}

impl OodEval {
    pub fn compute(id_scores: &[f64], ood_scores: &[f64]) -> Result<Self> {
        Ok(Self {
            auroc: auroc(id_scores, ood_scores)?,
            aupr: aupr(id_scores, ood_scores)?,
            fpr95: fpr_at_tpr(id_scores, ood_scores, 0.95)?,
            detection_accuracy: detection_accuracy_youden(id_scores, ood_scores)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdEval {
    pub accuracy: f64,
    pub ece: f64,
    pub nll: f64,
    pub brier: f64,
}

impl IdEval {
    pub fn compute(probs: ArrayView2<'_, f64>, labels: &[usize], ece_bins: usize) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(probs, labels)?,
            ece: ece_with_bins(probs, labels, ece_bins)?,
            nll: nll(probs, labels)?,
            brier: brier(probs, labels)?,
        })
    }
}

/// One distinct score value with how many ID and OOD samples carry it.
struct Level {
    score: f64,
    n_id: u64,
    n_ood: u64,
}

/// Distinct score levels in ascending order.
fn levels(id: &[f64], ood: &[f64]) -> Result<Vec<Level>> {
    if id.is_empty() {
        return Err(Error::EmptyInput("ID scores"));
    }
    if ood.is_empty() {
        return Err(Error::EmptyInput("OOD scores"));
    }
    if id.iter().chain(ood).any(|s| s.is_nan()) {
        return Err(Error::NonFiniteInput("scores"));
    }
    let mut tagged: Vec<(f64, bool)> =
        id.iter().map(|&s| (s, false)).chain(ood.iter().map(|&s| (s, true))).collect();
    tagged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut out: Vec<Level> = Vec::new();
    for (s, is_ood) in tagged {
        match out.last_mut() {
            Some(l) if l.score == s => {}
            _ => out.push(Level { score: s, n_id: 0, n_ood: 0 }),
        }
        let l = out.last_mut().unwrap();
        if is_ood {
            l.n_ood += 1;
        } else {
            l.n_id += 1;
        }
    }
    Ok(out)
}

/// Probability that an OOD score beats an ID score, ties counted 1/2.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    let lv = levels(id_scores, ood_scores)?;
    let mut id_below = 0u64;
    let mut twice_u = 0u128;
    for l in &lv {
        twice_u += u128::from(l.n_ood) * u128::from(2 * id_below + l.n_id);
        id_below += l.n_id;
    }
    let pairs = id_scores.len() as f64 * ood_scores.len() as f64;
    Ok(twice_u as f64 / 2.0 / pairs)
}

/// Average precision: `Σ_τ (ΔTP(τ)/P) · precision(τ)` over distinct
/// thresholds, walking from the highest score down.
pub fn aupr(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    let lv = levels(id_scores, ood_scores)?;
    let n_pos = ood_scores.len() as f64;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    for l in lv.iter().rev() {
        tp += l.n_ood;
        fp += l.n_id;
        if l.n_ood > 0 {
            ap += (l.n_ood as f64 / n_pos) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap.min(1.0))
}

/// FPR at the largest threshold whose TPR reaches `tpr_target`.
pub fn fpr_at_tpr(id_scores: &[f64], ood_scores: &[f64], tpr_target: f64) -> Result<f64> {
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(Error::param("tpr_target", "must be in (0, 1]"));
    }
    let lv = levels(id_scores, ood_scores)?;
    let (n_id, n_ood) = (id_scores.len() as f64, ood_scores.len() as f64);
    let (mut tp, mut fp) = (0u64, 0u64);
    for l in lv.iter().rev() {
        tp += l.n_ood;
        fp += l.n_id;
        if tp as f64 / n_ood >= tpr_target {
            return Ok(fp as f64 / n_id);
        }
    }
    // TPR reaches 1 at the lowest level, so the loop always returns.
    Ok(1.0)
}

/// Plain accuracy at the threshold maximising `TPR − FPR`; ties go to the
/// smallest threshold.
pub fn detection_accuracy_youden(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    let lv = levels(id_scores, ood_scores)?;
    let (n_id, n_ood) = (id_scores.len() as i128, ood_scores.len() as i128);
    let (mut tp, mut fp) = (0i128, 0i128);
    // J·n_id·n_ood = tp·n_id − fp·n_ood, compared exactly.
    let mut best = (i128::MIN, 0i128, 0i128);
    for l in lv.iter().rev() {
        tp += l.n_ood as i128;
        fp += l.n_id as i128;
        let j = tp * n_id - fp * n_ood;
        if j >= best.0 {
            best = (j, tp, fp);
        }
    }
    let (_, tp, fp) = best;
    let correct = tp + (n_id - fp);
    Ok(correct as f64 / (n_id + n_ood) as f64)
}

fn check_labelled_probs(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
    if probs.nrows() == 0 {
        return Err(Error::EmptyInput("probabilities"));
    }
    if labels.len() != probs.nrows() {
        return Err(Error::DimensionMismatch { expected: probs.nrows(), got: labels.len() });
    }
    let c = probs.ncols();
    for (row, (p, &y)) in probs.rows().into_iter().zip(labels).enumerate() {
        if y >= c {
            return Err(Error::BadLabel { row, label: y as i64, classes: c });
        }
        match p.as_slice() {
            Some(s) => check_simplex(s)?,
            None => check_simplex(&p.to_vec())?,
        }
    }
    Ok(())
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Works on probabilities or logits alike; only the argmax is used.
pub fn accuracy(scores: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    if scores.nrows() == 0 {
        return Err(Error::EmptyInput("predictions"));
    }
    if labels.len() != scores.nrows() {
        return Err(Error::DimensionMismatch { expected: scores.nrows(), got: labels.len() });
    }
    let hits = scores
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(r, &y)| argmax(r.iter().copied()) == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn ece(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    ece_with_bins(probs, labels, DEFAULT_ECE_BINS)
}

/// Bin `b ∈ 1..=B` covers `((b−1)/B, b/B]`; confidence 0 falls in bin 1.
fn ece_bin(conf: f64, bins: usize) -> usize {
    let edge = |b: usize| b as f64 / bins as f64;
    let mut b = ((conf * bins as f64).ceil() as usize).clamp(1, bins);
    while b > 1 && conf <= edge(b - 1) {
        b -= 1;
    }
    while b < bins && conf > edge(b) {
        b += 1;
    }
    b
}

pub fn ece_with_bins(probs: ArrayView2<'_, f64>, labels: &[usize], bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::param("ece_bins", "must be ≥ 1"));
    }
    check_labelled_probs(probs, labels)?;
    let mut count = vec![0usize; bins + 1];
    let mut hits = vec![0usize; bins + 1];
    let mut conf_sum = vec![0.0; bins + 1];
    for (p, &y) in probs.rows().into_iter().zip(labels) {
        let pred = argmax(p.iter().copied());
        let conf = p[pred];
        let b = ece_bin(conf, bins);
        count[b] += 1;
        conf_sum[b] += conf;
        if pred == y {
            hits[b] += 1;
        }
    }
    let n = labels.len() as f64;
    let total: f64 = (1..=bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let nb = count[b] as f64;
            (nb / n) * (hits[b] as f64 / nb - conf_sum[b] / nb).abs()
        })
        .sum();
    Ok(total.clamp(0.0, 1.0))
}

pub fn nll(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    check_labelled_probs(probs, labels)?;
    let s: f64 = probs
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(p, &y)| -p[y].max(NLL_CLAMP).ln())
        .sum();
    Ok((s / labels.len() as f64).max(0.0))
}

pub fn brier(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    check_labelled_probs(probs, labels)?;
    let s: f64 = probs
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(p, &y)| {
            p.iter()
                .enumerate()
                .map(|(c, &pc)| {
                    let d = pc - if c == y { 1.0 } else { 0.0 };
                    d * d
                })
                .sum::<f64>()
        })
        .sum();
    Ok(s / labels.len() as f64)
}
