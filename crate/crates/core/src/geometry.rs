//! Unit-sphere geometry: L2 normalisation, class-conditional Gaussian fitting
//! with a tied covariance, and the Mahalanobis / cosine scores built on it.
//!
//! All accumulation is done in f64. The precision matrix comes from a
//! Cholesky factor-and-solve; distances are evaluated through the inverse
//! Cholesky factor (`Λ = L⁻ᵀL⁻¹`), so `d_c = ‖L⁻¹z̃ − L⁻¹μ_c‖²` is a sum of
//! squares and never goes negative.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature_store::FeatureSet;

/// Default covariance regulariser.
pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Norms below this are treated as zero vectors.
pub const ZERO_NORM: f64 = 1e-30;

pub const MODEL_MAGIC: &[u8; 8] = b"GOENMODL";
pub const MODEL_VERSION: u32 = 1;

const SYMMETRY_TOL: f64 = 1e-9;
const PRECISION_TOL: f64 = 1e-6;
const FIT_CHUNK_ROWS: usize = 4096;

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFiniteInput("vector"));
    }
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Widens an f32 feature row to f64 and normalises it.
pub fn normalize_row(row: ArrayView1<'_, f32>) -> Result<Vec<f64>> {
    let wide: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
    l2_normalize(&wide)
}

/// Class-conditional Gaussians on the unit sphere sharing one covariance.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    means: DMatrix<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    epsilon: f64,
    class_counts: Option<Vec<usize>>,
    /// Inverse Cholesky factor of the covariance.
    whitener: DMatrix<f64>,
    /// `whitener · μ_c`, one column per class.
    whitened_means: DMatrix<f64>,
}

impl GaussianModel {
    /// Builds a model from stored means and covariance, recomputing the precision.
    pub fn from_parts(
        means: DMatrix<f64>,
        covariance: DMatrix<f64>,
        epsilon: f64,
        class_counts: Option<Vec<usize>>,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
        }
        let (c, d) = means.shape();
        if c == 0 || d == 0 {
            return Err(Error::invariant("means", "empty mean matrix"));
        }
        if covariance.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, got: covariance.nrows() });
        }
        if means.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("model parameters"));
        }
        if let Some(counts) = &class_counts {
            if counts.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: counts.len() });
            }
            if let Some(k) = counts.iter().position(|&n| n == 0) {
                return Err(Error::EmptyClass(k));
            }
        }
        let asym = max_asymmetry(&covariance);
        if asym > SYMMETRY_TOL * max_abs(&covariance).max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let identity = DMatrix::<f64>::identity(d, d);
        let raw = chol.solve(&identity);
        let precision = (&raw + raw.transpose()) * 0.5;
        let whitener = chol
            .l()
            .solve_lower_triangular(&identity)
            .ok_or(Error::NotPositiveDefinite)?;
        let whitened_means = &whitener * means.transpose();

        let deviation = max_abs(&(&precision * &covariance - &identity));
        if !(deviation < PRECISION_TOL) {
            return Err(Error::invariant(
                "precision",
                format!("|ΛΣ − I|_max = {deviation:e} exceeds {PRECISION_TOL:e}"),
            ));
        }
        Ok(Self { means, covariance, precision, epsilon, class_counts, whitener, whitened_means })
    }

    pub fn num_classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// C×D matrix of class means (not renormalised).
    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Per-class sample counts; `None` for models loaded from disk.
    pub fn class_counts(&self) -> Option<&[usize]> {
        self.class_counts.as_deref()
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        Ok(())
    }

    fn distances_normalized(&self, unit: &[f64]) -> Vec<f64> {
        let w = &self.whitener * DVector::from_column_slice(unit);
        self.whitened_means
            .column_iter()
            .map(|m| w.iter().zip(m.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect()
    }

    /// Squared Mahalanobis distance of `l2_normalize(z)` to every class mean.
    pub fn mahalanobis_per_class(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok(self.distances_normalized(&l2_normalize(z)?))
    }

    pub fn min_mahalanobis(&self, z: &[f64]) -> Result<f64> {
        Ok(self.mahalanobis_per_class(z)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// `max_c z̃·μ_c` with the means used as stored.
    pub fn max_cosine(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        let unit = l2_normalize(z)?;
        Ok(self
            .means
            .row_iter()
            .map(|m| m.iter().zip(&unit).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// `(min Mahalanobis, max cosine)` for every row of a set, in row order.
    pub fn score_rows(&self, set: &FeatureSet) -> Result<Vec<(f64, f64)>> {
        if set.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: set.dim() });
        }
        (0..set.len())
            .into_par_iter()
            .map(|i| {
                let unit = normalize_row(set.row(i))?;
                let maha = self.distances_normalized(&unit).into_iter().fold(f64::INFINITY, f64::min);
                let cos = self
                    .means
                    .row_iter()
                    .map(|m| m.iter().zip(&unit).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok((maha, cos))
            })
            .collect()
    }

    pub fn min_mahalanobis_rows(&self, set: &FeatureSet) -> Result<Vec<f64>> {
        Ok(self.score_rows(set)?.into_iter().map(|(m, _)| m).collect())
    }

    /// Encodes as `GOENMODL`: magic, version u32, C u32, D u64, ε f64, means
    /// C×D f64 row-major, covariance D×D f64 row-major; all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (c, d) = self.means.shape();
        let mut out = Vec::with_capacity(32 + 8 * (c * d + d * d));
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(c as u32).to_le_bytes());
        out.extend_from_slice(&(d as u64).to_le_bytes());
        out.extend_from_slice(&self.epsilon.to_le_bytes());
        for m in self.means.row_iter() {
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for r in self.covariance.row_iter() {
            for v in r.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let take = |pos: &mut usize, n: usize, field: &'static str| -> Result<&[u8]> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
            let end = end.ok_or(Error::TruncatedFile { field })?;
            let s = &bytes[*pos..end];
            *pos = end;
            Ok(s)
        };
        let mut pos = 0usize;
        if take(&mut pos, 8, "magic").map_err(|_| Error::BadMagic { expected: "GOENMODL" })?
            != MODEL_MAGIC
        {
            return Err(Error::BadMagic { expected: "GOENMODL" });
        }
        let version = u32::from_le_bytes(take(&mut pos, 4, "version")?.try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let c = u32::from_le_bytes(take(&mut pos, 4, "C")?.try_into().unwrap()) as usize;
        let d = u64::from_le_bytes(take(&mut pos, 8, "D")?.try_into().unwrap());
        let d = usize::try_from(d).map_err(|_| Error::invariant("D", "too large"))?;
        let epsilon = f64::from_le_bytes(take(&mut pos, 8, "epsilon")?.try_into().unwrap());
        let mut read_f64s = |count: usize, field: &'static str| -> Result<Vec<f64>> {
            let n = count.checked_mul(8).ok_or(Error::TruncatedFile { field })?;
            Ok(take(&mut pos, n, field)?
                .chunks_exact(8)
                .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
                .collect())
        };
        let means = read_f64s(c.checked_mul(d).ok_or(Error::TruncatedFile { field: "means" })?, "means")?;
        let cov = read_f64s(
            d.checked_mul(d).ok_or(Error::TruncatedFile { field: "covariance" })?,
            "covariance",
        )?;
        if pos != bytes.len() {
            return Err(Error::invariant("file", "trailing bytes after covariance"));
        }
        GaussianModel::from_parts(
            DMatrix::from_row_slice(c, d, &means),
            DMatrix::from_row_slice(d, d, &cov),
            epsilon,
            None,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        GaussianModel::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Fits class means of the normalised features and their tied covariance
/// `Σ = (1/N) Σ_c Σ_{i∈c} (z̃ᵢ − μ_c)(z̃ᵢ − μ_c)ᵀ + εI`.
pub fn fit_gaussian(train: &FeatureSet, epsilon: f64) -> Result<GaussianModel> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let labels = train.class_labels()?;
    let (n, d, c) = (train.len(), train.dim(), train.num_classes());

    let unit: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| normalize_row(train.row(i))).collect::<Result<_>>()?;

    let mut counts = vec![0usize; c];
    let mut means = DMatrix::<f64>::zeros(c, d);
    for (row, &y) in unit.iter().zip(&labels) {
        counts[y] += 1;
        for (j, v) in row.iter().enumerate() {
            means[(y, j)] += v;
        }
    }
    if let Some(k) = counts.iter().position(|&m| m == 0) {
        return Err(Error::EmptyClass(k));
    }
    for (k, &m) in counts.iter().enumerate() {
        let inv = 1.0 / m as f64;
        means.row_mut(k).iter_mut().for_each(|v| *v *= inv);
    }

    let mut scatter = DMatrix::<f64>::zeros(d, d);
    let mut start = 0;
    while start < n {
        let end = (start + FIT_CHUNK_ROWS).min(n);
        let mut block = DMatrix::<f64>::zeros(end - start, d);
        for (r, i) in (start..end).enumerate() {
            let y = labels[i];
            for j in 0..d {
                block[(r, j)] = unit[i][j] - means[(y, j)];
            }
        }
        scatter += block.tr_mul(&block);
        start = end;
    }
    let mut cov = scatter / n as f64;
    symmetrize(&mut cov);
    for j in 0..d {
        cov[(j, j)] += epsilon;
    }
    GaussianModel::from_parts(means, cov, epsilon, Some(counts))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `λ_max / λ_min` of a symmetric positive-definite matrix.
pub fn condition_number(matrix: &DMatrix<f64>) -> Result<f64> {
    if !matrix.is_square() || matrix.nrows() == 0 {
        return Err(Error::invariant("matrix", "must be square and nonempty"));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("matrix"));
    }
    let asym = max_asymmetry(matrix);
    if asym > SYMMETRY_TOL * max_abs(matrix).max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = matrix.clone().symmetric_eigen();
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(hi / lo)
}

/// Population covariance (divisor N) of the rows of `data`, about their mean.
pub fn population_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let mean = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let mut cov = centered.tr_mul(&centered) / n;
    symmetrize(&mut cov);
    cov
}
