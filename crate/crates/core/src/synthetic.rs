//! Seeded generators and exact oracles for desk-scale experiments.
//!
//! Every generator takes its own seed and is a pure function of it.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::feature_store::FeatureSet;
use crate::geometry::{fit_gaussian, l2_normalize, DEFAULT_EPSILON};
use crate::metrics::auroc;
use crate::rng::Xoshiro256;
use crate::scores::log_sum_exp;

#[inline]
pub fn gaussian(rng: &mut Xoshiro256) -> f64 {
    StandardNormal.sample(rng)
}

/// Isotropic Gaussian mixture with tied covariance `within_std² · I`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub num_classes: usize,
    pub dim: usize,
    /// One unit vector per class, `num_classes × dim`.
    pub mean_directions: Vec<Vec<f64>>,
    pub within_std: f64,
    pub per_class: usize,
    pub seed: u64,
}

impl MixtureSpec {
    /// Class directions drawn uniformly on the sphere from `seed`.
    pub fn random(
        num_classes: usize,
        dim: usize,
        within_std: f64,
        per_class: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_classes == 0 || dim == 0 {
            return Err(Error::param("mixture", "need at least one class and one dimension"));
        }
        let mut rng = Xoshiro256::derive(seed, 0x6469_7273);
        let mean_directions = (0..num_classes).map(|_| random_unit(&mut rng, dim)).collect();
        let spec = Self { num_classes, dim, mean_directions, within_std, per_class, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_directions.len() != self.num_classes {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes,
                got: self.mean_directions.len(),
            });
        }
        for m in &self.mean_directions {
            if m.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: m.len() });
            }
            let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invariant("mean_directions", format!("norm {norm} is not 1")));
            }
        }
        if !(self.within_std >= 0.0) || !self.within_std.is_finite() {
            return Err(Error::param("within_std", "must be finite and ≥ 0"));
        }
        if self.per_class == 0 {
            return Err(Error::param("per_class", "must be ≥ 1"));
        }
        Ok(())
    }

    /// Samples `μ_c + within_std · g` in f64, class-major row order.
    pub fn sample(&self) -> Result<(Array2<f64>, Vec<usize>)> {
        self.validate()?;
        let mut rng = Xoshiro256::derive(self.seed, 0x6d69_7874);
        let n = self.num_classes * self.per_class;
        let mut x = Array2::<f64>::zeros((n, self.dim));
        let mut labels = Vec::with_capacity(n);
        for c in 0..self.num_classes {
            for k in 0..self.per_class {
                let row = c * self.per_class + k;
                for j in 0..self.dim {
                    x[(row, j)] = self.mean_directions[c][j] + self.within_std * gaussian(&mut rng);
                }
                labels.push(c);
            }
        }
        Ok((x, labels))
    }

    /// Exact mixture with equal priors and covariance `within_std² · I`.
    pub fn truth(&self) -> Result<TrueMixture> {
        let means = DMatrix::from_fn(self.num_classes, self.dim, |c, j| self.mean_directions[c][j]);
        let cov = DMatrix::<f64>::identity(self.dim, self.dim) * (self.within_std * self.within_std);
        TrueMixture::new(means, cov, vec![1.0 / self.num_classes as f64; self.num_classes])
    }
}

pub fn random_unit(rng: &mut Xoshiro256, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        if let Ok(u) = l2_normalize(&v) {
            return u;
        }
    }
}

/// Haar-random rotation from the QR factorisation of a Gaussian matrix.
pub fn random_rotation(rng: &mut Xoshiro256, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn to_f32(x: &Array2<f64>) -> Array2<f32> {
    x.mapv(|v| v as f32)
}

/// Labelled mixture features (no logits).
pub fn gen_mixture(spec: &MixtureSpec) -> Result<FeatureSet> {
    let (x, labels) = spec.sample()?;
    FeatureSet::new(
        "mixture",
        to_f32(&x),
        Some(labels.iter().map(|&y| y as i32).collect()),
        None,
        spec.num_classes,
    )
}

fn sphere_rows(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = Xoshiro256::derive(seed, 0x7370_6872);
    let mut x = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for (j, v) in random_unit(&mut rng, d).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    x
}

/// Rows uniform on the unit sphere; unlabelled, one nominal class.
pub fn gen_uniform_sphere(n: usize, d: usize, seed: u64) -> Result<FeatureSet> {
    FeatureSet::new("sphere", to_f32(&sphere_rows(n, d, seed)), None, None, 1)
}

/// Entries `clip(N(0.5, 0.5²), 0, 1)`, the pixel rule for noise images
/// applied directly at feature level.
pub fn gen_noise_images_features(n: usize, d: usize, seed: u64) -> Result<FeatureSet> {
    let mut rng = Xoshiro256::derive(seed, 0x6e6f_6973);
    let x = Array2::from_shape_fn((n, d), |_| (0.5 + 0.5 * gaussian(&mut rng)).clamp(0.0, 1.0) as f32);
    FeatureSet::new("noise", x, None, None, 1)
}

/// `logits_c = scale · ⟨z̃, dir_c⟩`, a cosine classifier on normalised rows.
pub fn cosine_logits(set: &FeatureSet, directions: &[Vec<f64>], scale: f64) -> Result<Array2<f32>> {
    let n = set.len();
    let mut out = Array2::<f32>::zeros((n, directions.len()));
    for i in 0..n {
        let z = crate::geometry::normalize_row(set.row(i))?;
        for (c, dir) in directions.iter().enumerate() {
            if dir.len() != z.len() {
                return Err(Error::DimensionMismatch { expected: z.len(), got: dir.len() });
            }
            out[(i, c)] = (scale * z.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>()) as f32;
        }
    }
    Ok(out)
}

/// Replaces the logits and resets the class count to their width.
pub fn attach_logits(set: &FeatureSet, logits: Array2<f32>) -> Result<FeatureSet> {
    let c = logits.ncols();
    FeatureSet::new(
        set.name().to_string(),
        set.features().clone(),
        set.labels().map(|l| l.to_vec()),
        Some(logits),
        c,
    )
}

/// Gaussian mixture with known parameters.
#[derive(Debug, Clone)]
pub struct TrueMixture {
    means: DMatrix<f64>,
    log_priors: Vec<f64>,
    chol_l: DMatrix<f64>,
    log_norm: f64,
}

impl TrueMixture {
    pub fn new(means: DMatrix<f64>, covariance: DMatrix<f64>, priors: Vec<f64>) -> Result<Self> {
        let d = means.ncols();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: covariance.nrows() });
        }
        if priors.len() != means.nrows() {
            return Err(Error::DimensionMismatch { expected: means.nrows(), got: priors.len() });
        }
        if priors.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::param("priors", "must be positive"));
        }
        let total: f64 = priors.iter().sum();
        let chol = covariance.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let chol_l = chol.l();
        let log_det = 2.0 * chol_l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            means,
            log_priors: priors.iter().map(|p| (p / total).ln()).collect(),
            chol_l,
            log_norm,
        })
    }

    /// `(z − μ_c)ᵀ Σ⁻¹ (z − μ_c)` for each component.
    pub fn mahalanobis(&self, z: &[f64]) -> Result<Vec<f64>> {
        let d = self.means.ncols();
        if z.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: z.len() });
        }
        let mut out = Vec::with_capacity(self.means.nrows());
        for c in 0..self.means.nrows() {
            let diff = DVector::from_fn(d, |j, _| z[j] - self.means[(c, j)]);
            let w = self
                .chol_l
                .solve_lower_triangular(&diff)
                .ok_or(Error::NotPositiveDefinite)?;
            out.push(w.norm_squared());
        }
        Ok(out)
    }

    pub fn min_mahalanobis(&self, z: &[f64]) -> Result<f64> {
        Ok(self.mahalanobis(z)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// `ln Σ_c π_c N(z; μ_c, Σ)`.
    pub fn log_likelihood(&self, z: &[f64]) -> Result<f64> {
        let terms: Vec<f64> = self
            .mahalanobis(z)?
            .into_iter()
            .zip(&self.log_priors)
            .map(|(m, lp)| lp + self.log_norm - 0.5 * m)
            .collect();
        Ok(log_sum_exp(&terms))
    }
}

pub fn mixture_log_likelihood(
    means: &DMatrix<f64>,
    covariance: &DMatrix<f64>,
    priors: &[f64],
    z: &[f64],
) -> Result<f64> {
    TrueMixture::new(means.clone(), covariance.clone(), priors.to_vec())?.log_likelihood(z)
}

/// Shrinks every row toward its class mean: `(1−α)·z + α·mean_c`, using
/// the raw (unnormalised) class means.
pub fn compact_features(set: &FeatureSet, alpha: f64) -> Result<FeatureSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("compact_alpha", "must be in [0, 1]"));
    }
    let labels = set.class_labels()?;
    if alpha == 0.0 {
        return Ok(set.clone());
    }
    let (c, d) = (set.num_classes(), set.dim());
    let mut sums = vec![vec![0.0f64; d]; c];
    let mut counts = vec![0usize; c];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for (s, &v) in sums[y].iter_mut().zip(set.row(i)) {
            *s += f64::from(v);
        }
    }
    let mut out = set.features().clone();
    for (i, &y) in labels.iter().enumerate() {
        let n = counts[y] as f64;
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = ((1.0 - alpha) * f64::from(*v) + alpha * sums[y][j] / n) as f32;
        }
    }
    set.with_features(out)
}

/// Two classes at `e₁ ± (δ/2)e₂` with spread `within_std`, and an OOD
/// cluster at their midpoint `e₁` with spread `0.1·within_std`, all in four
/// dimensions. Returns the min-Mahalanobis AUROC of a fresh ID test draw
/// against the OOD cluster.
pub fn midpoint_ood_experiment(delta: f64, within_std: f64, n: usize, seed: u64) -> Result<f64> {
    const D: usize = 4;
    if !(delta > 0.0) || !(within_std > 0.0) {
        return Err(Error::param("midpoint", "delta and within_std must be > 0"));
    }
    if n < 2 {
        return Err(Error::param("n", "need at least 2 samples per class"));
    }
    let mut rng = Xoshiro256::derive(seed, 0x6d69_6470);
    let mean = |c: usize| {
        let mut m = [0.0; D];
        m[0] = 1.0;
        m[1] = if c == 0 { delta / 2.0 } else { -delta / 2.0 };
        m
    };
    let mut draw = |centre: [f64; D], std: f64, rows: usize| {
        Array2::from_shape_fn((rows, D), |(_, j)| (centre[j] + std * gaussian(&mut rng)) as f32)
    };
    let train = ndarray::concatenate![ndarray::Axis(0), draw(mean(0), within_std, n), draw(mean(1), within_std, n)];
    let labels: Vec<i32> = (0..2 * n).map(|i| (i >= n) as i32).collect();
    let test = ndarray::concatenate![
        ndarray::Axis(0),
        draw(mean(0), within_std, n / 2),
        draw(mean(1), within_std, n - n / 2)
    ];
    let mut midpoint = [0.0; D];
    midpoint[0] = 1.0;
    let ood = draw(midpoint, 0.1 * within_std, n);

    let model = fit_gaussian(&FeatureSet::new("train", train, Some(labels), None, 2)?, DEFAULT_EPSILON)?;
    let id_scores = model.min_mahalanobis_rows(&FeatureSet::new("test", test, None, None, 2)?)?;
    let ood_scores = model.min_mahalanobis_rows(&FeatureSet::new("ood", ood, None, None, 2)?)?;
    auroc(&id_scores, &ood_scores)
}

/// Kendall's τ-b, O(n²).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput("need at least two paired values"));
    }
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let denom = (((concordant + discordant + tie_x) as f64) * ((concordant + discordant + tie_y) as f64)).sqrt();
    if denom == 0.0 {
        return Err(Error::DegenerateInput("all values tied"));
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// A labelled mixture ID problem with a cosine classifier on top, plus
/// three OOD sources: uniform-sphere points, near-manifold points (blends of
/// two class means, see `hard_spread`) and clipped-noise features.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_classes: usize,
    pub dim: usize,
    pub within_std: f64,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    /// Spread around the class-mean blends, as a multiple of `within_std`.
    pub hard_spread: f64,
    pub hard_calib: usize,
    pub hard_eval: usize,
    pub sphere_eval: usize,
    pub noise_calib: usize,
    pub noise_eval: usize,
    pub logit_scale: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            dim: 16,
            within_std: 0.15,
            train_per_class: 200,
            val_per_class: 500,
            test_per_class: 100,
            hard_spread: 0.7,
            hard_calib: 500,
            hard_eval: 1000,
            sphere_eval: 1000,
            noise_calib: 2000,
            noise_eval: 1000,
            logit_scale: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id_train: FeatureSet,
    pub id_val: FeatureSet,
    pub id_test: FeatureSet,
    pub hard_calib: FeatureSet,
    pub hard_eval: FeatureSet,
    pub sphere_eval: FeatureSet,
    pub noise_calib: FeatureSet,
    pub noise_eval: FeatureSet,
}

impl Scenario {
    /// `(file stem, set)` pairs, ID splits first.
    pub fn named_sets(&self) -> Vec<(&'static str, &FeatureSet)> {
        vec![
            ("id_train", &self.id_train),
            ("id_val", &self.id_val),
            ("id_test", &self.id_test),
            ("hard_calib", &self.hard_calib),
            ("hard", &self.hard_eval),
            ("sphere", &self.sphere_eval),
            ("noise_calib", &self.noise_calib),
            ("noise", &self.noise_eval),
        ]
    }
}

/// Blends of two distinct class means, `λ·μ_a + (1−λ)·μ_b` with
/// `λ ~ U[0.35, 0.65]`, plus isotropic spread.
fn near_manifold(spec: &MixtureSpec, spread: f64, n: usize, rng: &mut Xoshiro256) -> Array2<f32> {
    let c = spec.num_classes as u64;
    let mut x = Array2::<f32>::zeros((n, spec.dim));
    for i in 0..n {
        let a = rng.below(c) as usize;
        let b = if c > 1 { (a + 1 + rng.below(c - 1) as usize) % spec.num_classes } else { a };
        let lambda = rng.uniform(0.35, 0.65);
        for j in 0..spec.dim {
            let centre = lambda * spec.mean_directions[a][j] + (1.0 - lambda) * spec.mean_directions[b][j];
            x[(i, j)] = (centre + spread * gaussian(rng)) as f32;
        }
    }
    x
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let base = MixtureSpec::random(cfg.num_classes, cfg.dim, cfg.within_std, 1, cfg.seed)?;
    let dirs = base.mean_directions.clone();
    let with_logits = |set: FeatureSet, name: &str| -> Result<FeatureSet> {
        let logits = cosine_logits(&set, &dirs, cfg.logit_scale)?;
        attach_logits(&set.with_name(name), logits)
    };
    let id_split = |per_class: usize, stream: u64, name: &str| -> Result<FeatureSet> {
        let spec = MixtureSpec {
            per_class,
            seed: Xoshiro256::derive(cfg.seed, stream).next(),
            ..base.clone()
        };
        with_logits(gen_mixture(&spec)?, name)
    };
    let hard = |n: usize, stream: u64, name: &str| -> Result<FeatureSet> {
        let mut rng = Xoshiro256::derive(cfg.seed, stream);
        let x = near_manifold(&base, cfg.hard_spread * cfg.within_std, n, &mut rng);
        with_logits(FeatureSet::new(name, x, None, None, 1)?, name)
    };
    let sub = |stream: u64| Xoshiro256::derive(cfg.seed, stream).next();
    Ok(Scenario {
        id_train: id_split(cfg.train_per_class, 1, "id_train")?,
        id_val: id_split(cfg.val_per_class, 2, "id_val")?,
        id_test: id_split(cfg.test_per_class, 3, "id_test")?,
        hard_calib: hard(cfg.hard_calib, 4, "hard_calib")?,
        hard_eval: hard(cfg.hard_eval, 5, "hard")?,
        sphere_eval: with_logits(gen_uniform_sphere(cfg.sphere_eval, cfg.dim, sub(6))?, "sphere")?,
        noise_calib: with_logits(gen_noise_images_features(cfg.noise_calib, cfg.dim, sub(7))?, "noise_calib")?,
        noise_eval: with_logits(gen_noise_images_features(cfg.noise_eval, cfg.dim, sub(8))?, "noise")?,
    })
}
