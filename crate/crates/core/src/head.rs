//! Calibration head: a 3→64→32→1 MLP (ReLU hidden layers, sigmoid output)
//! mapping the cue vector `(log-Mahalanobis, max cosine, entropy)` to an OOD
//! probability `u ∈ (0, 1)`.
//!
//! Forward and backward passes are written out by hand. Parameters live in a
//! single flat vector in file order: `W1, b1, W2, b2, W3, b3`, weights
//! row-major (`W[out][in]`).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::feature_store::FeatureSet;
use crate::geometry::GaussianModel;
use crate::rng::Xoshiro256;
use crate::scores::{predictive_entropy, softmax};

pub const LAYER_SIZES: [usize; 4] = [3, 64, 32, 1];
pub const PARAM_COUNT: usize = 3 * 64 + 64 + 64 * 32 + 32 + 32 + 1;

pub const HEAD_MAGIC: &[u8; 8] = b"GOENHEAD";
pub const HEAD_VERSION: u32 = 1;

/// Probability clamp shared by the loss and the head output.
pub const PROB_CLAMP: f64 = 1e-12;

const W1: usize = 0;
const B1: usize = W1 + 64 * 3;
const W2: usize = B1 + 64;
const B2: usize = W2 + 32 * 64;
const W3: usize = B2 + 32;
const B3: usize = W3 + 32;

/// `(m1, m2, m3)` = (`ln(min Mahalanobis + 1)`, max cosine, predictive entropy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueVector {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl CueVector {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        if !(m1.is_finite() && m2.is_finite() && m3.is_finite()) {
            return Err(Error::NonFiniteInput("cue vector"));
        }
        if m1 < 0.0 || m3 < 0.0 {
            return Err(Error::invariant("cue", format!("m1 = {m1} and m3 = {m3} must be ≥ 0")));
        }
        Ok(Self { m1, m2, m3 })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }
}

/// Cues for every row of a set that carries logits, in row order.
pub fn build_cues(model: &GaussianModel, set: &FeatureSet) -> Result<Vec<CueVector>> {
    let logits = set.require_logits()?;
    let geo = model.score_rows(set)?;
    geo.into_iter()
        .zip(logits.rows())
        .map(|((maha, cos), row)| {
            let l: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
            let entropy = predictive_entropy(&softmax(&l))?;
            CueVector::new(maha.ln_1p(), cos, entropy)
        })
        .collect()
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Soft-target binary cross-entropy `−t ln u − (1−t) ln(1−u)`, u clamped to `[1e-12, 1−1e-12]`.
pub fn bce_soft(u: f64, t: f64) -> f64 {
    let u = u.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -t * u.ln() - (1.0 - t) * (1.0 - u).ln()
}

struct Activations {
    h1: [f64; 64],
    h2: [f64; 32],
    u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationHead {
    params: Vec<f64>,
}

impl CalibrationHead {
    /// Fan-in scaled uniform weights `U(±√(6/fan_in))`, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = Xoshiro256::seed_from_u64(seed);
        let mut params = vec![0.0; PARAM_COUNT];
        for (offset, fan_in, fan_out) in [(W1, 3, 64), (W2, 64, 32), (W3, 32, 1)] {
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[offset..offset + fan_in * fan_out] {
                *p = rng.uniform(-bound, bound);
            }
        }
        Self { params }
    }

    pub fn zeros() -> Self {
        Self { params: vec![0.0; PARAM_COUNT] }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != PARAM_COUNT {
            return Err(Error::DimensionMismatch { expected: PARAM_COUNT, got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteInput("head parameters"));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn activations(&self, m: &[f64; 3]) -> (Activations, f64) {
        let p = &self.params;
        let mut h1 = [0.0; 64];
        for (j, h) in h1.iter_mut().enumerate() {
            let w = &p[W1 + 3 * j..W1 + 3 * j + 3];
            *h = (w[0] * m[0] + w[1] * m[1] + w[2] * m[2] + p[B1 + j]).max(0.0);
        }
        let mut h2 = [0.0; 32];
        for (k, h) in h2.iter_mut().enumerate() {
            let w = &p[W2 + 64 * k..W2 + 64 * k + 64];
            let s: f64 = w.iter().zip(&h1).map(|(a, b)| a * b).sum();
            *h = (s + p[B2 + k]).max(0.0);
        }
        let a: f64 = p[W3..W3 + 32].iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>() + p[B3];
        let u = sigmoid(a).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        (Activations { h1, h2, u }, a)
    }

    pub fn forward(&self, m: &CueVector) -> Result<f64> {
        let arr = m.as_array();
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("cue vector"));
        }
        Ok(self.activations(&arr).0.u)
    }

    pub fn forward_batch(&self, cues: &[CueVector]) -> Vec<f64> {
        cues.iter().map(|m| self.activations(&m.as_array()).0.u).collect()
    }

    pub fn loss(&self, m: &CueVector, target: f64) -> Result<f64> {
        Ok(bce_soft(self.forward(m)?, target))
    }

    /// Gradient of [`bce_soft`] at the head output w.r.t. every parameter.
    ///
    /// The output-layer error is `σ(a) − t`, the exact derivative of the
    /// loss whenever the output is not clamped.
    pub fn backward(&self, m: &CueVector, target: f64) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; PARAM_COUNT];
        self.accumulate_gradient(m, target, 1.0, &mut grad)?;
        Ok(grad)
    }

    fn accumulate_gradient(
        &self,
        m: &CueVector,
        target: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let x = m.as_array();
        if x.iter().any(|v| !v.is_finite()) || !target.is_finite() {
            return Err(Error::NonFiniteInput("cue vector"));
        }
        let p = &self.params;
        let (act, a) = self.activations(&x);
        let out_err = (sigmoid(a) - target) * weight;

        grad[B3] += out_err;
        let mut d2 = [0.0; 32];
        for k in 0..32 {
            grad[W3 + k] += out_err * act.h2[k];
            if act.h2[k] > 0.0 {
                d2[k] = out_err * p[W3 + k];
            }
        }
        let mut d1 = [0.0; 64];
        for k in 0..32 {
            if d2[k] == 0.0 {
                continue;
            }
            grad[B2 + k] += d2[k];
            let row = W2 + 64 * k;
            for j in 0..64 {
                grad[row + j] += d2[k] * act.h1[j];
                d1[j] += d2[k] * p[row + j];
            }
        }
        for j in 0..64 {
            if act.h1[j] > 0.0 && d1[j] != 0.0 {
                grad[B1 + j] += d1[j];
                for (i, xi) in x.iter().enumerate() {
                    grad[W1 + 3 * j + i] += d1[j] * xi;
                }
            }
        }
        Ok(bce_soft(act.u, target) * weight)
    }

    /// `GOENHEAD` layout: magic, version u32, layer sizes 4×u32, then the
    /// flat parameter vector as f64, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 + 16 + 8 * PARAM_COUNT);
        out.extend_from_slice(HEAD_MAGIC);
        out.extend_from_slice(&HEAD_VERSION.to_le_bytes());
        for s in LAYER_SIZES {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != HEAD_MAGIC {
            return Err(Error::BadMagic { expected: "GOENHEAD" });
        }
        if bytes.len() < 28 {
            return Err(Error::TruncatedFile { field: "header" });
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != HEAD_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        for (i, &expected) in LAYER_SIZES.iter().enumerate() {
            let got = u32::from_le_bytes(bytes[12 + 4 * i..16 + 4 * i].try_into().unwrap()) as usize;
            if got != expected {
                return Err(Error::invariant(
                    "layer sizes",
                    format!("layer {i} has {got} units, expected {expected}"),
                ));
            }
        }
        let body = &bytes[28..];
        if body.len() < 8 * PARAM_COUNT {
            return Err(Error::TruncatedFile { field: "parameters" });
        }
        if body.len() > 8 * PARAM_COUNT {
            return Err(Error::invariant("file", "trailing bytes after parameters"));
        }
        let params = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        CalibrationHead::from_params(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        CalibrationHead::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub target_id: f64,
    pub target_ood: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 20,
            batch_size: 128,
            target_id: 0.05,
            target_ood: 0.95,
            early_stop_patience: 5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        if !(0.0 <= self.target_id && self.target_id < self.target_ood && self.target_ood <= 1.0) {
            return Err(Error::param(
                "targets",
                format!("need 0 ≤ target_id < target_ood ≤ 1, got {} and {}", self.target_id, self.target_ood),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be ≥ 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::param("max_epochs", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// Pools the OOD half of every batch is drawn from.
///
/// Each batch of size `B` takes `round(hard_fraction · B)` cues from `hard`
/// and the rest from `noise`; an empty pool hands its share to the other.
#[derive(Debug, Clone, Copy)]
pub struct OodMix<'a> {
    pub hard: &'a [CueVector],
    pub noise: &'a [CueVector],
    pub hard_fraction: f64,
}

impl<'a> OodMix<'a> {
    pub fn single(pool: &'a [CueVector]) -> Self {
        Self { hard: pool, noise: &[], hard_fraction: 1.0 }
    }

    fn draw(&self, rng: &mut Xoshiro256, batch: usize, out: &mut Vec<CueVector>) {
        out.clear();
        let n_hard = if self.noise.is_empty() {
            batch
        } else if self.hard.is_empty() {
            0
        } else {
            ((self.hard_fraction * batch as f64).round() as usize).min(batch)
        };
        for _ in 0..n_hard {
            out.push(self.hard[rng.below(self.hard.len() as u64) as usize]);
        }
        for _ in n_hard..batch {
            out.push(self.noise[rng.below(self.noise.len() as u64) as usize]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 0 is the untrained head.
    pub epoch: usize,
    /// Mean per-step training loss; `None` for epoch 0.
    pub train_loss: Option<f64>,
    /// `mean BCE(holdout ID, t_id) + mean BCE(holdout OOD, t_ood)`.
    pub holdout_loss: f64,
    /// `mean u(holdout OOD) − mean u(holdout ID)`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn evaluate(
    head: &CalibrationHead,
    holdout_id: &[CueVector],
    holdout_ood: &[CueVector],
    cfg: &TrainConfig,
) -> (f64, f64) {
    let u_id = head.forward_batch(holdout_id);
    let u_ood = head.forward_batch(holdout_ood);
    let loss = mean(u_id.iter().map(|&u| bce_soft(u, cfg.target_id)))
        + mean(u_ood.iter().map(|&u| bce_soft(u, cfg.target_ood)));
    let gap = mean(u_ood.iter().copied()) - mean(u_id.iter().copied());
    (loss, gap)
}

/// Trains on one merged OOD pool. See [`train_head_mixed`].
pub fn train_head(
    id_cues: &[CueVector],
    ood_cues: &[CueVector],
    holdout_id: &[CueVector],
    holdout_ood: &[CueVector],
    cfg: &TrainConfig,
) -> Result<(CalibrationHead, TrainHistory)> {
    train_head_mixed(id_cues, OodMix::single(ood_cues), holdout_id, holdout_ood, cfg)
}

/// Trains the head with soft-target BCE and Adam, keeping the parameters of
/// the epoch with the largest holdout gap.
///
/// An epoch walks a fresh permutation of the ID cues in batches of
/// `batch_size`; every ID batch is paired with an equal-sized OOD batch drawn
/// with replacement from `ood`. Training stops after `early_stop_patience`
/// epochs without a gap improvement, or at `max_epochs`.
pub fn train_head_mixed(
    id_cues: &[CueVector],
    ood: OodMix<'_>,
    holdout_id: &[CueVector],
    holdout_ood: &[CueVector],
    cfg: &TrainConfig,
) -> Result<(CalibrationHead, TrainHistory)> {
    cfg.validate()?;
    if id_cues.is_empty() {
        return Err(Error::EmptyInput("ID training cues"));
    }
    if ood.hard.is_empty() && ood.noise.is_empty() {
        return Err(Error::EmptyInput("OOD training cues"));
    }
    if holdout_id.is_empty() || holdout_ood.is_empty() {
        return Err(Error::EmptyInput("holdout cues"));
    }
    if !(0.0..=1.0).contains(&ood.hard_fraction) {
        return Err(Error::param("hard_fraction", "must be in [0, 1]"));
    }

    let mut head = CalibrationHead::init(cfg.seed);
    let mut rng = Xoshiro256::derive(cfg.seed, 0x7261_696e);
    let mut adam = Adam::new(cfg.learning_rate, PARAM_COUNT);

    let (loss0, gap0) = evaluate(&head, holdout_id, holdout_ood, cfg);
    let mut history = TrainHistory {
        epochs: vec![EpochRecord { epoch: 0, train_loss: None, holdout_loss: loss0, gap: gap0 }],
        best_epoch: 0,
    };
    let mut best = (gap0, head.clone());
    let mut stale = 0usize;

    let mut grad = vec![0.0; PARAM_COUNT];
    let mut ood_batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.max_epochs {
        let order = rng.permutation(id_cues.len());
        let mut epoch_loss = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            ood.draw(&mut rng, chunk.len(), &mut ood_batch);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / chunk.len() as f64;
            let mut loss = 0.0;
            for &i in chunk {
                loss += head.accumulate_gradient(&id_cues[i], cfg.target_id, w, &mut grad)?;
            }
            for m in &ood_batch {
                loss += head.accumulate_gradient(m, cfg.target_ood, w, &mut grad)?;
            }
            adam.step(head.params_mut(), &grad);
            epoch_loss += loss;
            steps += 1;
        }
        let (holdout_loss, gap) = evaluate(&head, holdout_id, holdout_ood, cfg);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: Some(epoch_loss / steps as f64),
            holdout_loss,
            gap,
        });
        if gap > best.0 {
            best = (gap, head.clone());
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience.max(1) {
                break;
            }
        }
    }
    Ok((best.1, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parameter_count() {
        assert_eq!(PARAM_COUNT, 2369);
        assert_eq!(B3 + 1, PARAM_COUNT);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = CalibrationHead::init(9);
        assert_eq!(a, CalibrationHead::init(9));
        assert_ne!(a, CalibrationHead::init(10));
        for (offset, fan_in, fan_out) in [(W1, 3usize, 64usize), (W2, 64, 32), (W3, 32, 1)] {
            let bound = (6.0 / fan_in as f64).sqrt();
            assert!(a.params()[offset..offset + fan_in * fan_out].iter().all(|w| w.abs() <= bound));
        }
        assert!(a.params()[B1..W2].iter().all(|&b| b == 0.0));
        assert!(a.params()[B2..W3].iter().all(|&b| b == 0.0));
        assert_eq!(a.params()[B3], 0.0);
    }

    #[test]
    fn zero_head_outputs_half() {
        let h = CalibrationHead::zeros();
        assert_eq!(h.forward(&CueVector::new(3.0, 0.2, 1.0).unwrap()).unwrap(), 0.5);
        let g = h.backward(&CueVector::new(3.0, 0.2, 1.0).unwrap(), 0.05).unwrap();
        assert_relative_eq!(g[B3], 0.45, epsilon = 1e-15);
        // Every hidden unit is dead at zero weights, so nothing else moves.
        assert!(g[..B3].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_built_monotone_network() {
        let mut h = CalibrationHead::zeros();
        h.params_mut()[W1] = 1.0; // unit 0 reads m1
        h.params_mut()[W2] = 1.0; // unit 0 of layer 2 reads unit 0 of layer 1
        h.params_mut()[W3] = 1.0;
        let lo = h.forward(&CueVector::new(0.5, 0.0, 0.0).unwrap()).unwrap();
        let hi = h.forward(&CueVector::new(2.0, 0.0, 0.0).unwrap()).unwrap();
        assert!(hi > lo);
        assert_relative_eq!(hi, sigmoid(2.0), epsilon = 1e-15);
    }

    #[test]
    fn output_stays_open_interval() {
        let h = CalibrationHead::init(3);
        for m in [[1e3, 1.0, 1e3], [0.0, -1.0, 0.0], [1e3, -1.0, 0.0]] {
            let u = h.forward(&CueVector::new(m[0], m[1], m[2]).unwrap()).unwrap();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn bce_values() {
        assert_relative_eq!(bce_soft(0.5, 0.5), 2f64.ln(), epsilon = 1e-15);
        let expected = -0.05 * 0.05f64.ln() - 0.95 * 0.95f64.ln();
        assert_relative_eq!(bce_soft(0.05, 0.05), expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 0.198_515, epsilon = 1e-6);
        for t in [0.05, 0.3, 0.95] {
            let at = bce_soft(t, t);
            assert!(bce_soft(t + 0.01, t) > at && bce_soft(t - 0.01, t) > at);
        }
        assert!(bce_soft(0.0, 1.0).is_finite());
    }

    #[test]
    fn dead_relu_has_zero_incoming_gradient() {
        let mut h = CalibrationHead::init(5);
        // Force hidden unit 7 of layer 1 off for nonnegative cues.
        for i in 0..3 {
            h.params_mut()[W1 + 3 * 7 + i] = -1.0;
        }
        h.params_mut()[B1 + 7] = -1.0;
        let g = h.backward(&CueVector::new(1.0, 0.5, 0.5).unwrap(), 0.9).unwrap();
        assert!(g[W1 + 21..W1 + 24].iter().all(|&v| v == 0.0));
        assert_eq!(g[B1 + 7], 0.0);
    }

    #[test]
    fn head_file_round_trip() {
        let h = CalibrationHead::init(1);
        let bytes = h.to_bytes();
        assert_eq!(bytes.len(), 28 + 8 * PARAM_COUNT);
        assert_eq!(CalibrationHead::from_bytes(&bytes).unwrap(), h);
        let mut bad = bytes.clone();
        bad[16] = 9;
        assert!(CalibrationHead::from_bytes(&bad).is_err());
        assert!(CalibrationHead::from_bytes(&bytes[..100]).is_err());
    }

    #[test]
    fn cue_invariants() {
        assert!(CueVector::new(-0.1, 0.0, 0.0).is_err());
        assert!(CueVector::new(0.0, 0.0, -1.0).is_err());
        assert!(CueVector::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn train_rejects_empty_inputs() {
        let c = [CueVector::new(0.0, 0.0, 0.0).unwrap()];
        let cfg = TrainConfig::default();
        assert!(matches!(train_head(&[], &c, &c, &c, &cfg), Err(Error::EmptyInput(_))));
        assert!(matches!(train_head(&c, &[], &c, &c, &cfg), Err(Error::EmptyInput(_))));
        assert!(matches!(train_head(&c, &c, &[], &c, &cfg), Err(Error::EmptyInput(_))));
        let bad = TrainConfig { target_id: 0.9, target_ood: 0.1, ..TrainConfig::default() };
        assert!(train_head(&c, &c, &c, &c, &bad).is_err());
    }

    #[test]
    fn mix_respects_fraction() {
        let hard = vec![CueVector::new(1.0, 0.0, 0.0).unwrap(); 3];
        let noise = vec![CueVector::new(2.0, 0.0, 0.0).unwrap(); 3];
        let mix = OodMix { hard: &hard, noise: &noise, hard_fraction: 0.5 };
        let mut rng = Xoshiro256::seed_from_u64(0);
        let mut out = Vec::new();
        mix.draw(&mut rng, 128, &mut out);
        assert_eq!(out.iter().filter(|c| c.m1 == 1.0).count(), 64);
        let only_noise = OodMix { hard: &[], noise: &noise, hard_fraction: 0.5 };
        only_noise.draw(&mut rng, 10, &mut out);
        assert!(out.iter().all(|c| c.m1 == 2.0));
    }
}
