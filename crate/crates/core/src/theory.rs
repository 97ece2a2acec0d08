//! Numerical checks of the geometric claims the detector rests on.
//!
//! Each check runs a seeded experiment, measures a statistic and compares it
//! with a tolerance from [`Tolerances`]. Tolerances are plain fields so a
//! caller can tighten them past what is achievable and watch the check fail.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{condition_number, population_covariance};
use crate::head::{train_head, CueVector, TrainConfig};
use crate::metrics::auroc;
use crate::rng::Xoshiro256;
use crate::synthetic::{
    gaussian, kendall_tau_b, midpoint_ood_experiment, random_rotation, random_unit, MixtureSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// Normalising anisotropic features lowers the covariance condition number.
    Conditioning,
    /// Min-Mahalanobis ranks points like the negative mixture log-likelihood.
    MinMahalanobis,
    /// A head trained with soft targets recovers the Bayes posterior.
    BayesHead,
    /// Mahalanobis AUROC against midpoint OOD drops as classes merge.
    Separation,
}

impl Check {
    pub const ALL: [Check; 4] =
        [Check::Conditioning, Check::MinMahalanobis, Check::BayesHead, Check::Separation];

    pub fn name(self) -> &'static str {
        match self {
            Check::Conditioning => "conditioning",
            Check::MinMahalanobis => "min-mahalanobis",
            Check::BayesHead => "bayes-head",
            Check::Separation => "separation",
        }
    }

    pub fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub conditioning_seeds: u64,
    /// Required number of seeds where the condition number drops.
    pub conditioning_min_pass: u64,
    pub conditioning_spectrum_ratio: f64,
    pub min_maha_tau_min: f64,
    pub min_maha_auroc_gap_max: f64,
    pub bayes_mse_max: f64,
    pub bayes_train_samples: usize,
    pub separation_seeds: u64,
    pub separation_min_pass: u64,
    pub separation_drop_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            conditioning_seeds: 20,
            conditioning_min_pass: 20,
            conditioning_spectrum_ratio: 250.0,
            min_maha_tau_min: 0.95,
            min_maha_auroc_gap_max: 0.01,
            bayes_mse_max: 0.05,
            bayes_train_samples: 20_000,
            separation_seeds: 20,
            separation_min_pass: 18,
            separation_drop_min: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stat {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub summary: String,
    pub stats: Vec<Stat>,
}

fn stat(name: &'static str, value: f64) -> Stat {
    Stat { name, value }
}

pub fn run_check(check: Check, seed: u64, tol: &Tolerances) -> Result<CheckOutcome> {
    match check {
        Check::Conditioning => check_conditioning(seed, tol),
        Check::MinMahalanobis => check_min_mahalanobis(seed, tol),
        Check::BayesHead => check_bayes_head(seed, tol),
        Check::Separation => check_separation(seed, tol),
    }
}

/// Zero-mean Gaussian rows with a geometric covariance spectrum from
/// `ratio` down to 1, randomly rotated.
pub fn anisotropic_features(n: usize, dim: usize, ratio: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = Xoshiro256::derive(seed, 0x616e_6973);
    let q = random_rotation(&mut rng, dim);
    let scales: Vec<f64> = (0..dim)
        .map(|j| {
            let t = if dim == 1 { 0.0 } else { j as f64 / (dim - 1) as f64 };
            ratio.powf(1.0 - t).sqrt()
        })
        .collect();
    let g = DMatrix::from_fn(n, dim, |_, j| scales[j] * gaussian(&mut rng));
    g * q.transpose()
}

fn normalize_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let n = row.norm();
        row /= n;
    }
    out
}

pub fn check_conditioning(seed: u64, tol: &Tolerances) -> Result<CheckOutcome> {
    let mut passes = 0u64;
    let (mut min_raw, mut max_norm) = (f64::INFINITY, 0.0f64);
    for s in 0..tol.conditioning_seeds {
        let raw = anisotropic_features(2000, 8, tol.conditioning_spectrum_ratio, seed.wrapping_add(s));
        let k_raw = condition_number(&population_covariance(&raw))?;
        let k_norm = condition_number(&population_covariance(&normalize_rows(&raw)))?;
        if k_norm < k_raw {
            passes += 1;
        }
        min_raw = min_raw.min(k_raw);
        max_norm = max_norm.max(k_norm);
    }
    Ok(CheckOutcome {
        check: Check::Conditioning,
        passed: passes >= tol.conditioning_min_pass,
        summary: format!(
            "condition number dropped in {passes}/{} draws (need {})",
            tol.conditioning_seeds, tol.conditioning_min_pass
        ),
        stats: vec![
            stat("passes", passes as f64),
            stat("min_raw_kappa", min_raw),
            stat("max_normalized_kappa", max_norm),
        ],
    })
}

pub fn check_min_mahalanobis(seed: u64, tol: &Tolerances) -> Result<CheckOutcome> {
    let spec = MixtureSpec::random(5, 8, 0.2, 200, seed)?;
    let truth = spec.truth()?;
    let (id, _) = spec.sample()?;
    let mut rng = Xoshiro256::derive(seed, 0x6f6f_6433);
    let mut maha = Vec::with_capacity(2000);
    let mut neg_ll = Vec::with_capacity(2000);
    for row in id.rows() {
        let z = row.to_vec();
        maha.push(truth.min_mahalanobis(&z)?);
        neg_ll.push(-truth.log_likelihood(&z)?);
    }
    for _ in 0..1000 {
        let z = random_unit(&mut rng, 8);
        maha.push(truth.min_mahalanobis(&z)?);
        neg_ll.push(-truth.log_likelihood(&z)?);
    }
    let tau = kendall_tau_b(&maha, &neg_ll)?;
    let auc_maha = auroc(&maha[..1000], &maha[1000..])?;
    let auc_ll = auroc(&neg_ll[..1000], &neg_ll[1000..])?;
    let gap = (auc_maha - auc_ll).abs();
    Ok(CheckOutcome {
        check: Check::MinMahalanobis,
        passed: tau >= tol.min_maha_tau_min && gap <= tol.min_maha_auroc_gap_max,
        summary: format!(
            "kendall tau {tau:.4} (need ≥ {}), auroc gap {gap:.4} (need ≤ {})",
            tol.min_maha_tau_min, tol.min_maha_auroc_gap_max
        ),
        stats: vec![
            stat("kendall_tau", tau),
            stat("auroc_min_mahalanobis", auc_maha),
            stat("auroc_neg_log_likelihood", auc_ll),
            stat("auroc_gap", gap),
        ],
    })
}

/// Cue construction with a closed-form posterior: ID `m1 ~ Exp(1)`, OOD
/// `m1 ~ Gamma(3, 1)`, and `m2 ~ U[−1, 1]`, `m3 ~ U[0, 2]` for both.
/// With equal priors `P(OOD | m) = m1² / (2 + m1²)`.
pub fn bayes_cues(n: usize, ood: bool, rng: &mut Xoshiro256) -> Vec<CueVector> {
    let exp1 = |rng: &mut Xoshiro256| -(1.0 - rng.unit_f64()).ln();
    (0..n)
        .map(|_| {
            let m1 = if ood { exp1(rng) + exp1(rng) + exp1(rng) } else { exp1(rng) };
            let m2 = rng.uniform(-1.0, 1.0);
            let m3 = rng.uniform(0.0, 2.0);
            CueVector { m1, m2, m3 }
        })
        .collect()
}

pub fn bayes_posterior(m1: f64) -> f64 {
    m1 * m1 / (2.0 + m1 * m1)
}

/// Trains on [`bayes_cues`] and returns `(mse, mse_unmapped)` on a grid.
///
/// A soft-target BCE minimiser is `t_id + (t_ood − t_id)·P(OOD | m)`, so the
/// first value compares against that; the second maps the head output back
/// to the probability scale first.
pub fn bayes_head_mse(samples: usize, cfg: &TrainConfig) -> Result<(f64, f64)> {
    if samples < 4 {
        return Err(Error::param("samples", "need at least 4"));
    }
    let mut rng = Xoshiro256::derive(cfg.seed, 0x6261_7965);
    let half = samples / 2;
    let id = bayes_cues(half, false, &mut rng);
    let ood = bayes_cues(samples - half, true, &mut rng);
    let hold = (samples / 10).max(1);
    let hold_id = bayes_cues(hold, false, &mut rng);
    let hold_ood = bayes_cues(hold, true, &mut rng);
    let (head, _) = train_head(&id, &ood, &hold_id, &hold_ood, cfg)?;

    let span = cfg.target_ood - cfg.target_id;
    let (mut sq, mut sq_raw, mut count) = (0.0, 0.0, 0usize);
    for i in 0..=50 {
        let m1 = 5.0 * i as f64 / 50.0;
        for j in 0..5 {
            let m2 = -1.0 + 0.5 * j as f64;
            for k in 0..5 {
                let m3 = 0.5 * k as f64;
                let u = head.forward(&CueVector { m1, m2, m3 })?;
                let q = bayes_posterior(m1);
                sq += (u - (cfg.target_id + span * q)).powi(2);
                sq_raw += ((u - cfg.target_id) / span - q).powi(2);
                count += 1;
            }
        }
    }
    Ok((sq / count as f64, sq_raw / count as f64))
}

pub fn check_bayes_head(seed: u64, tol: &Tolerances) -> Result<CheckOutcome> {
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    let (mse, mse_raw) = bayes_head_mse(tol.bayes_train_samples, &cfg)?;
    Ok(CheckOutcome {
        check: Check::BayesHead,
        passed: mse < tol.bayes_mse_max,
        summary: format!("grid mse {mse:.5} to the target-scale posterior (need < {})", tol.bayes_mse_max),
        stats: vec![stat("mse", mse), stat("mse_probability_scale", mse_raw)],
    })
}

pub const SEPARATION_GRID: [f64; 5] = [10.0, 3.0, 1.0, 0.3, 0.1];
const SEPARATION_STD: f64 = 0.05;
const SEPARATION_N: usize = 1000;

/// AUROC at each `SEPARATION_GRID` multiple of the within-class spread.
pub fn separation_curve(seed: u64) -> Result<Vec<f64>> {
    SEPARATION_GRID
        .iter()
        .map(|&k| midpoint_ood_experiment(k * SEPARATION_STD, SEPARATION_STD, SEPARATION_N, seed))
        .collect()
}

pub fn check_separation(seed: u64, tol: &Tolerances) -> Result<CheckOutcome> {
    let (mut drops, mut monotone) = (0u64, 0u64);
    let mut min_drop = f64::INFINITY;
    let mut min_wide = f64::INFINITY;
    for s in 0..tol.separation_seeds {
        let curve = separation_curve(seed.wrapping_add(s))?;
        let drop = curve[0] - curve[4];
        min_drop = min_drop.min(drop);
        min_wide = min_wide.min(curve[0]);
        if drop >= tol.separation_drop_min {
            drops += 1;
        }
        if curve[..4].windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    Ok(CheckOutcome {
        check: Check::Separation,
        passed: drops >= tol.separation_min_pass,
        summary: format!(
            "auroc dropped by ≥ {} in {drops}/{} seeds (need {}); monotone in {monotone}",
            tol.separation_drop_min, tol.separation_seeds, tol.separation_min_pass
        ),
        stats: vec![
            stat("seeds_with_drop", drops as f64),
            stat("seeds_monotone", monotone as f64),
            stat("min_drop", min_drop),
            stat("min_wide_auroc", min_wide),
        ],
    })
}
