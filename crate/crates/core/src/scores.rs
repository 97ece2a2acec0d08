//! Post-hoc uncertainty score rules. Every rule follows the same convention:
//! a higher score means "more likely out-of-distribution".
//!
//! Logarithms are natural throughout.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature_store::FeatureSet;
use crate::geometry::{l2_normalize, normalize_row};

/// Row-sum tolerance for probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-5;
const ENTRY_TOL: f64 = 1e-9;

const TEMP_LOG_LO: f64 = -2.995_732_273_553_991; // ln 0.05
const TEMP_LOG_HI: f64 = 2.995_732_273_553_991; // ln 20
const TEMP_TOL: f64 = 1e-4;

pub fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput("probability vector"));
    }
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !sum.is_finite() || (sum - 1.0).abs() > SIMPLEX_TOL || min < -ENTRY_TOL || max > 1.0 + ENTRY_TOL
    {
        return Err(Error::NotSimplex { sum, min });
    }
    Ok(())
}

fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput(what));
    }
    Ok(())
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("temperature", format!("must be > 0, got {t}")));
    }
    Ok(())
}

/// `ln Σ exp(x)` with the max-shift trick.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax of every logit row, widened to f64.
pub fn softmax_rows(logits: &Array2<f32>) -> Array2<f64> {
    let mut out = logits.mapv(f64::from);
    for mut row in out.axis_iter_mut(Axis(0)) {
        let p = softmax(row.as_slice().expect("row-major"));
        row.iter_mut().zip(p).for_each(|(dst, v)| *dst = v);
    }
    out
}

/// `1 − max_c p_c`.
pub fn max_softmax_uncertainty(probs: &[f64]) -> Result<f64> {
    check_simplex(probs)?;
    Ok(1.0 - probs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn entropy_unchecked(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// `−Σ p ln p`, with `0 ln 0 = 0`.
pub fn predictive_entropy(probs: &[f64]) -> Result<f64> {
    check_simplex(probs)?;
    Ok(entropy_unchecked(probs).max(0.0))
}

/// Energy `E = −T ln Σ exp(f_c / T)`, returned as is.
pub fn energy_score(logits: &[f64], temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    check_finite(logits, "logits")?;
    if logits.is_empty() {
        return Err(Error::EmptyInput("logits"));
    }
    let scaled: Vec<f64> = logits.iter().map(|v| v / temperature).collect();
    Ok(-temperature * log_sum_exp(&scaled))
}

/// `softmax(logits / T)`.
pub fn temperature_scale(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    check_finite(logits, "logits")?;
    let scaled: Vec<f64> = logits.iter().map(|v| v / temperature).collect();
    Ok(softmax(&scaled))
}

/// Mean negative log-likelihood of `softmax(logits / T)` against the labels.
pub fn temperature_nll(logits: ArrayView2<'_, f64>, labels: &[usize], temperature: f64) -> f64 {
    let total: f64 = logits
        .axis_iter(Axis(0))
        .zip(labels)
        .map(|(row, &y)| {
            let scaled: Vec<f64> = row.iter().map(|v| v / temperature).collect();
            log_sum_exp(&scaled) - scaled[y]
        })
        .sum();
    total / labels.len() as f64
}

/// Temperature minimising the NLL, by golden-section search on ln T over [0.05, 20].
pub fn fit_temperature(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let (n, c) = logits.dim();
    if n == 0 {
        return Err(Error::EmptyInput("logits"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if let Some((row, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= c) {
        return Err(Error::BadLabel { row, label: y as i64, classes: c });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("logits"));
    }
    let all_flat = logits.axis_iter(Axis(0)).all(|row| row.iter().all(|&v| v == row[0]));
    if all_flat {
        return Err(Error::DegenerateInput("every logit row is constant"));
    }

    let f = |log_t: f64| temperature_nll(logits, labels, log_t.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (TEMP_LOG_LO, TEMP_LOG_HI);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b.exp() - a.exp() > TEMP_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    // The bracket edges are only ever probed indirectly; compare them directly
    // so a boundary optimum is returned exactly.
    let best = [(TEMP_LOG_LO, f(TEMP_LOG_LO)), (mid, f(mid)), (TEMP_LOG_HI, f(TEMP_LOG_HI))]
        .into_iter()
        .fold((mid, f64::INFINITY), |acc, (x, fx)| if fx < acc.1 { (x, fx) } else { acc });
    Ok(best.0.exp())
}

/// Reference rows for the k-th nearest-neighbour cosine distance.
#[derive(Debug, Clone)]
pub struct KnnReference {
    rows: Array2<f64>,
}

impl KnnReference {
    /// Normalises every row of `set`.
    pub fn from_features(set: &FeatureSet) -> Result<Self> {
        let mut rows = Array2::<f64>::zeros((set.len(), set.dim()));
        for i in 0..set.len() {
            let unit = normalize_row(set.row(i))?;
            rows.row_mut(i).iter_mut().zip(unit).for_each(|(dst, v)| *dst = v);
        }
        Ok(Self { rows })
    }

    /// Wraps rows that are already unit-norm.
    pub fn from_normalized(rows: Array2<f64>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn score(&self, z: &[f64], k: usize) -> Result<f64> {
        knn_score(self.rows.view(), z, k)
    }

    pub fn score_rows(&self, set: &FeatureSet, k: usize) -> Result<Vec<f64>> {
        (0..set.len())
            .into_par_iter()
            .map(|i| {
                let z: Vec<f64> = set.row(i).iter().map(|&v| f64::from(v)).collect();
                self.score(&z, k)
            })
            .collect()
    }
}

/// k-th smallest cosine distance `1 − z̃·xᵢ` (1-indexed) over unit rows `train`.
pub fn knn_score(train_normalized: ArrayView2<'_, f64>, z: &[f64], k: usize) -> Result<f64> {
    let n = train_normalized.nrows();
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if z.len() != train_normalized.ncols() {
        return Err(Error::DimensionMismatch { expected: train_normalized.ncols(), got: z.len() });
    }
    let unit = l2_normalize(z)?;
    let mut dist: Vec<f64> = train_normalized
        .axis_iter(Axis(0))
        .map(|row| 1.0 - row.iter().zip(&unit).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let (_, kth, _) = dist.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    Ok(kth.clamp(0.0, 2.0))
}

fn check_stack(stack: ArrayView2<'_, f64>) -> Result<()> {
    if stack.nrows() == 0 {
        return Err(Error::EmptyInput("member predictions"));
    }
    for row in stack.axis_iter(Axis(0)) {
        check_simplex(&row.to_vec())?;
    }
    Ok(())
}

/// Entropy of the member-averaged prediction minus the average member entropy.
/// `stack` is M×C for a single sample.
pub fn mutual_information(stack: ArrayView2<'_, f64>) -> Result<f64> {
    check_stack(stack)?;
    let mean = stack.mean_axis(Axis(0)).expect("nonempty");
    let h_mean = entropy_unchecked(mean.as_slice().expect("contiguous"));
    let mean_h = stack.axis_iter(Axis(0)).map(|r| entropy_unchecked(&r.to_vec())).sum::<f64>()
        / stack.nrows() as f64;
    Ok((h_mean - mean_h).max(0.0))
}

/// Sum over classes of the population variance across members. `stack` is M×C.
pub fn ensemble_variance(stack: ArrayView2<'_, f64>) -> Result<f64> {
    if stack.nrows() < 2 {
        return Err(Error::TooFewMembers(stack.nrows()));
    }
    check_stack(stack)?;
    Ok(stack.var_axis(Axis(0), 0.0).sum())
}

/// Dirichlet concentrations from evidential logits: `α_c = ReLU(logit_c) + 1`.
pub fn evidence_alphas(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&v| v.max(0.0) + 1.0).collect()
}

/// `C / Σ α_c`.
pub fn vacuity(alphas: &[f64]) -> Result<f64> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput("alphas"));
    }
    if let Some(&a) = alphas.iter().find(|&&a| !(a >= 1.0)) {
        return Err(Error::AlphaBelowOne(a));
    }
    Ok(alphas.len() as f64 / alphas.iter().sum::<f64>())
}

/// `1 − max` gate weight.
pub fn gate_uncertainty(gate_weights: &[f64]) -> Result<f64> {
    check_simplex(gate_weights)?;
    Ok(1.0 - gate_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn max_softmax_values() {
        assert_eq!(max_softmax_uncertainty(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(max_softmax_uncertainty(&[0.1; 10]).unwrap(), 0.9, epsilon = 1e-12);
        assert_relative_eq!(max_softmax_uncertainty(&[0.7, 0.2, 0.1]).unwrap(), 0.3, epsilon = 1e-12);
        assert!(matches!(max_softmax_uncertainty(&[0.7, 0.7]), Err(Error::NotSimplex { .. })));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(predictive_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(predictive_entropy(&[0.1; 10]).unwrap(), 10f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(predictive_entropy(&[0.5, 0.5]).unwrap(), std::f64::consts::LN_2, epsilon = 1e-12);
        assert!(predictive_entropy(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn energy_values() {
        assert_relative_eq!(energy_score(&[0.0; 10], 1.0).unwrap(), -10f64.ln(), epsilon = 1e-12);
        let e = energy_score(&[1000.0, 0.0], 1.0).unwrap();
        assert!(e.is_finite());
        assert_relative_eq!(e, -1000.0, epsilon = 1e-12);
        let base = energy_score(&[1.0, -2.0, 0.5], 1.0).unwrap();
        let shifted = energy_score(&[4.0, 1.0, 3.5], 1.0).unwrap();
        assert_relative_eq!(shifted, base - 3.0, epsilon = 1e-12);
        assert!(energy_score(&[1e4, -1e4], 1.0).unwrap().is_finite());
        assert!(energy_score(&[f64::NAN], 1.0).is_err());
        assert!(energy_score(&[1.0], 0.0).is_err());
    }

    #[test]
    fn knn_values() {
        let train = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(knn_score(train.view(), &[1.0, 0.0], 1).unwrap(), 0.0);
        assert_eq!(knn_score(train.view(), &[1.0, 0.0], 2).unwrap(), 1.0);
        assert!(matches!(knn_score(train.view(), &[1.0, 0.0], 3), Err(Error::KTooLarge { .. })));
        assert!(matches!(knn_score(train.view(), &[0.0, 0.0], 1), Err(Error::ZeroVector)));
    }

    #[test]
    fn mutual_information_values() {
        let same = array![[0.2, 0.8], [0.2, 0.8], [0.2, 0.8]];
        assert_relative_eq!(mutual_information(same.view()).unwrap(), 0.0, epsilon = 1e-15);
        let split = array![[1.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(mutual_information(split.view()).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert!(mutual_information(array![[0.4, 0.4]].view()).is_err());
    }

    #[test]
    fn ensemble_variance_values() {
        let same = array![[0.3, 0.7], [0.3, 0.7]];
        assert_eq!(ensemble_variance(same.view()).unwrap(), 0.0);
        let split = array![[1.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(ensemble_variance(split.view()).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(ensemble_variance(array![[1.0, 0.0]].view()), Err(Error::TooFewMembers(1))));
    }

    #[test]
    fn vacuity_values() {
        assert_eq!(vacuity(&[1.0; 10]).unwrap(), 1.0);
        assert_relative_eq!(vacuity(&[10.0; 10]).unwrap(), 0.1, epsilon = 1e-15);
        assert!(vacuity(&[1.0, 2.0]).unwrap() > vacuity(&[1.0, 2.5]).unwrap());
        assert!(matches!(vacuity(&[0.5, 1.0]), Err(Error::AlphaBelowOne(_))));
        assert_eq!(evidence_alphas(&[-3.0, 0.0, 2.5]), vec![1.0, 1.0, 3.5]);
    }

    #[test]
    fn gate_values() {
        assert_eq!(gate_uncertainty(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(gate_uncertainty(&[0.2; 5]).unwrap(), 0.8, epsilon = 1e-12);
        assert_relative_eq!(gate_uncertainty(&[0.6, 0.4]).unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn temperature_scaling_values() {
        let p = temperature_scale(&[2.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(p[0], 0.880_797_077_977_882_3, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.119_202_922_022_117_6, epsilon = 1e-12);
        let flat = temperature_scale(&[10.0, -10.0, 3.0, 0.0], 1e6).unwrap();
        assert!(flat.iter().all(|v| (v - 0.25).abs() < 1e-5));
    }

    #[test]
    fn fit_temperature_rejects_flat_rows() {
        let logits = array![[1.0, 1.0], [3.0, 3.0]];
        assert!(matches!(fit_temperature(logits.view(), &[0, 1]), Err(Error::DegenerateInput(_))));
        assert!(matches!(fit_temperature(array![[1.0, 0.0]].view(), &[2]), Err(Error::BadLabel { .. })));
    }
}
