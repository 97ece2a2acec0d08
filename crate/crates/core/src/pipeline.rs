//! End-to-end runs: density fitting, head calibration, evaluation, the
//! post-hoc baseline sweep, ablation variants and multi-seed aggregation.
//!
//! All runs work on an in-memory [`PipelineData`]; [`DataPaths::load`]
//! builds one from feature files and enforces the calibration/evaluation
//! leakage guard on file identity.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::feature_store::{load_feature_file, load_prob_stack, FeatureSet};
use crate::geometry::{fit_gaussian, GaussianModel, DEFAULT_EPSILON};
use crate::head::{build_cues, train_head_mixed, CalibrationHead, CueVector, OodMix, TrainConfig, TrainHistory};
use crate::metrics::{IdEval, OodEval, DEFAULT_ECE_BINS};
use crate::report::{DatasetEval, EvalReport, SeedSummary};
use crate::rng::Xoshiro256;
use crate::scores::{
    energy_score, ensemble_variance, evidence_alphas, fit_temperature, gate_uncertainty,
    max_softmax_uncertainty, mutual_information, softmax_rows, temperature_scale, vacuity, KnnReference,
};
use crate::synthetic::{attach_logits, compact_features, gen_noise_images_features, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub epsilon: f64,
    pub train: TrainConfig,
    /// Fraction of hard OOD cues in each calibration batch.
    pub ood_mix_ratio: f64,
    /// Share of each calibration pool held out for early stopping.
    pub holdout_fraction: f64,
    pub ece_bins: usize,
    pub knn_k: usize,
    /// Rows of generated noise when no noise calibration set is supplied.
    pub noise_fallback_count: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            train: TrainConfig::default(),
            ood_mix_ratio: 0.5,
            holdout_fraction: 0.1,
            ece_bins: DEFAULT_ECE_BINS,
            knn_k: 50,
            noise_fallback_count: 2000,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::param("epsilon", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.ood_mix_ratio) {
            return Err(Error::param("ood_mix_ratio", "must be in [0, 1]"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::param("holdout_fraction", "must be in (0, 1)"));
        }
        if self.ece_bins == 0 {
            return Err(Error::param("ece_bins", "must be ≥ 1"));
        }
        if self.knn_k == 0 {
            return Err(Error::param("knn_k", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// One ablation setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    /// When false, calibration sees only noise OOD.
    pub use_hard_ood: bool,
    pub ood_mix_ratio: f64,
    /// Compaction of the ID training features toward their class means
    /// before fitting, a stand-in for a center-loss backbone.
    pub compact_alpha: f64,
}

impl Variant {
    pub fn default_for(settings: &Settings) -> Self {
        Self {
            name: "GOEN".into(),
            use_hard_ood: true,
            ood_mix_ratio: settings.ood_mix_ratio,
            compact_alpha: 0.0,
        }
    }

    pub fn noise_only(settings: &Settings) -> Self {
        Self { name: "NoiseOnly".into(), use_hard_ood: false, ..Self::default_for(settings) }
    }

    pub fn compacted(settings: &Settings, alpha: f64) -> Self {
        Self { name: format!("Compact{alpha}"), compact_alpha: alpha, ..Self::default_for(settings) }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineData {
    pub id_train: Option<FeatureSet>,
    pub id_val: Option<FeatureSet>,
    pub id_test: Option<FeatureSet>,
    pub hard_calib: Option<FeatureSet>,
    pub noise_calib: Option<FeatureSet>,
    pub ood_eval: Vec<FeatureSet>,
    /// `M×N×C` member probabilities, keyed by set name.
    pub prob_stacks: Vec<(String, Array3<f64>)>,
    /// `N×K` gate weights, keyed by set name.
    pub gate_weights: Vec<(String, Array2<f64>)>,
}

fn require<'a>(set: &'a Option<FeatureSet>, what: &'static str) -> Result<&'a FeatureSet> {
    set.as_ref().ok_or(Error::EmptyInput(what))
}

impl PipelineData {
    /// Calibrates on the scenario's hard and noise calibration sets and
    /// evaluates on sphere, hard and noise OOD, in that order.
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            id_train: Some(s.id_train.clone()),
            id_val: Some(s.id_val.clone()),
            id_test: Some(s.id_test.clone()),
            hard_calib: Some(s.hard_calib.clone()),
            noise_calib: Some(s.noise_calib.clone()),
            ood_eval: vec![s.sphere_eval.clone(), s.hard_eval.clone(), s.noise_eval.clone()],
            ..Self::default()
        }
    }

    pub fn id_train(&self) -> Result<&FeatureSet> {
        require(&self.id_train, "ID train set")
    }

    pub fn id_val(&self) -> Result<&FeatureSet> {
        require(&self.id_val, "ID validation set")
    }

    pub fn id_test(&self) -> Result<&FeatureSet> {
        require(&self.id_test, "ID test set")
    }

    /// Refuses an evaluation set identical to a calibration set.
    pub fn check_leakage(&self) -> Result<()> {
        for calib in [&self.hard_calib, &self.noise_calib].into_iter().flatten() {
            for eval in &self.ood_eval {
                if eval.features() == calib.features() {
                    return Err(Error::SameFileForCalibAndEval(PathBuf::from(eval.name())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataPaths {
    pub id_train: Option<PathBuf>,
    pub id_val: Option<PathBuf>,
    pub id_test: Option<PathBuf>,
    pub hard_calib: Option<PathBuf>,
    pub noise_calib: Option<PathBuf>,
    pub ood_eval: Vec<PathBuf>,
    pub prob_stacks: Vec<(String, PathBuf)>,
    /// Gate weights are stored as probability stacks with one member.
    pub gate_weights: Vec<(String, PathBuf)>,
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Fails if any evaluation path names the same file as a calibration path.
pub fn check_path_leakage(calib: &[&Path], eval: &[PathBuf]) -> Result<()> {
    for c in calib {
        if let Some(e) = eval.iter().find(|e| same_file(c, e)) {
            return Err(Error::SameFileForCalibAndEval(e.clone()));
        }
    }
    Ok(())
}

impl DataPaths {
    pub fn check_leakage(&self) -> Result<()> {
        let calib: Vec<&Path> =
            [&self.hard_calib, &self.noise_calib].into_iter().flatten().map(|p| p.as_path()).collect();
        check_path_leakage(&calib, &self.ood_eval)
    }

    pub fn load(&self) -> Result<PipelineData> {
        self.check_leakage()?;
        let load = |p: &Option<PathBuf>| p.as_ref().map(load_feature_file).transpose();
        let data = PipelineData {
            id_train: load(&self.id_train)?,
            id_val: load(&self.id_val)?,
            id_test: load(&self.id_test)?,
            hard_calib: load(&self.hard_calib)?,
            noise_calib: load(&self.noise_calib)?,
            ood_eval: self.ood_eval.iter().map(load_feature_file).collect::<Result<_>>()?,
            prob_stacks: self
                .prob_stacks
                .iter()
                .map(|(n, p)| Ok((n.clone(), load_prob_stack(p)?)))
                .collect::<Result<_>>()?,
            gate_weights: self
                .gate_weights
                .iter()
                .map(|(n, p)| {
                    let stack = load_prob_stack(p)?;
                    if stack.shape()[0] != 1 {
                        return Err(Error::invariant("gate weights", "expected a single-member stack"));
                    }
                    Ok((n.clone(), stack.index_axis(Axis(0), 0).to_owned()))
                })
                .collect::<Result<_>>()?,
        };
        Ok(data)
    }
}

/// Affine least-squares map from features to logits, used to give generated
/// noise features logits when only the ID training set has them.
#[derive(Debug, Clone)]
pub struct LinearLogits {
    /// `(D + 1) × C`, bias in the last row.
    weights: DMatrix<f64>,
}

impl LinearLogits {
    pub fn fit(train: &FeatureSet) -> Result<Self> {
        let logits = train.require_logits()?;
        let (n, d) = (train.len(), train.dim());
        let x = DMatrix::from_fn(n, d + 1, |i, j| if j < d { f64::from(train.features()[(i, j)]) } else { 1.0 });
        let y = DMatrix::from_fn(n, logits.ncols(), |i, c| f64::from(logits[(i, c)]));
        let mut gram = x.tr_mul(&x);
        let ridge = 1e-8 * (gram.trace() / (d + 1) as f64).max(1e-300);
        for j in 0..=d {
            gram[(j, j)] += ridge;
        }
        let weights = gram.cholesky().ok_or(Error::NotPositiveDefinite)?.solve(&x.tr_mul(&y));
        Ok(Self { weights })
    }

    pub fn apply(&self, set: &FeatureSet) -> Result<Array2<f32>> {
        let d = self.weights.nrows() - 1;
        if set.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: set.dim() });
        }
        let c = self.weights.ncols();
        Ok(Array2::from_shape_fn((set.len(), c), |(i, k)| {
            let mut s = self.weights[(d, k)];
            for j in 0..d {
                s += f64::from(set.features()[(i, j)]) * self.weights[(j, k)];
            }
            s as f32
        }))
    }
}

/// Splits a cue pool into (train, holdout) by a seeded permutation. The
/// holdout gets `round(fraction · n)` cues, at least one, and the train part
/// keeps at least one.
fn carve(cues: &[CueVector], fraction: f64, rng: &mut Xoshiro256) -> (Vec<CueVector>, Vec<CueVector>) {
    if cues.len() < 2 {
        return (cues.to_vec(), cues.to_vec());
    }
    let order = rng.permutation(cues.len());
    let hold = ((fraction * cues.len() as f64).round() as usize).clamp(1, cues.len() - 1);
    let holdout = order[..hold].iter().map(|&i| cues[i]).collect();
    let train = order[hold..].iter().map(|&i| cues[i]).collect();
    (train, holdout)
}

pub fn fit_stage(data: &PipelineData, settings: &Settings, variant: &Variant) -> Result<GaussianModel> {
    let train = data.id_train()?;
    if variant.compact_alpha > 0.0 {
        fit_gaussian(&compact_features(train, variant.compact_alpha)?, settings.epsilon)
    } else {
        fit_gaussian(train, settings.epsilon)
    }
}

/// Noise calibration set: supplied, or generated at feature level with
/// logits from a linear map fitted on the ID training set.
pub fn noise_set(data: &PipelineData, settings: &Settings, seed: u64) -> Result<FeatureSet> {
    if let Some(n) = &data.noise_calib {
        return Ok(n.clone());
    }
    let train = data.id_train()?;
    let noise = gen_noise_images_features(settings.noise_fallback_count, train.dim(), seed)?;
    let logits = LinearLogits::fit(train)?.apply(&noise)?;
    attach_logits(&noise.with_name("noise"), logits)
}

pub fn calibrate_stage(
    model: &GaussianModel,
    data: &PipelineData,
    settings: &Settings,
    variant: &Variant,
) -> Result<(CalibrationHead, TrainHistory)> {
    settings.validate()?;
    let seed = settings.train.seed;
    let mut rng = Xoshiro256::derive(seed, 0x686f_6c64);
    let id_cues = build_cues(model, data.id_val()?)?;
    let (id_train, id_hold) = carve(&id_cues, settings.holdout_fraction, &mut rng);

    let noise = noise_set(data, settings, seed)?;
    let (noise_train, mut ood_hold) =
        carve(&build_cues(model, &noise)?, settings.holdout_fraction, &mut rng);
    let hard_train = match (&data.hard_calib, variant.use_hard_ood) {
        (Some(hard), true) => {
            let (t, h) = carve(&build_cues(model, hard)?, settings.holdout_fraction, &mut rng);
            ood_hold.extend(h);
            t
        }
        _ => Vec::new(),
    };
    let mix = OodMix { hard: &hard_train, noise: &noise_train, hard_fraction: variant.ood_mix_ratio };
    let cfg = TrainConfig { seed, ..settings.train.clone() };
    train_head_mixed(&id_train, mix, &id_hold, &ood_hold, &cfg)
}

fn labelled_probs(set: &FeatureSet) -> Result<Option<(Array2<f64>, Vec<usize>)>> {
    match (set.logits(), set.labels()) {
        (Some(l), Some(_)) => Ok(Some((softmax_rows(l), set.class_labels()?))),
        _ => Ok(None),
    }
}

pub fn evaluate_goen(
    model: &GaussianModel,
    head: &CalibrationHead,
    data: &PipelineData,
    settings: &Settings,
    variant_name: &str,
) -> Result<EvalReport> {
    let test = data.id_test()?;
    let id = match labelled_probs(test)? {
        Some((p, y)) => Some(IdEval::compute(p.view(), &y, settings.ece_bins)?),
        None => None,
    };
    let id_scores = head.forward_batch(&build_cues(model, test)?);
    let mut ood = Vec::with_capacity(data.ood_eval.len());
    for set in &data.ood_eval {
        let s = head.forward_batch(&build_cues(model, set)?);
        ood.push(DatasetEval { dataset: set.name().to_string(), eval: OodEval::compute(&id_scores, &s)? });
    }
    Ok(EvalReport::new(variant_name, "goen", settings.train.seed, id, ood))
}

#[derive(Debug, Clone)]
pub struct GoenRun {
    pub model: GaussianModel,
    pub head: CalibrationHead,
    pub history: TrainHistory,
    pub report: EvalReport,
}

pub fn run_goen_full(data: &PipelineData, settings: &Settings, variant: &Variant) -> Result<GoenRun> {
    settings.validate()?;
    data.check_leakage()?;
    let model = fit_stage(data, settings, variant)?;
    let (head, history) = calibrate_stage(&model, data, settings, variant)?;
    let report = evaluate_goen(&model, &head, data, settings, &variant.name)?;
    Ok(GoenRun { model, head, history, report })
}

pub fn run_goen(data: &PipelineData, settings: &Settings) -> Result<EvalReport> {
    Ok(run_goen_full(data, settings, &Variant::default_for(settings))?.report)
}

pub fn run_ablation(data: &PipelineData, settings: &Settings, variants: &[Variant]) -> Result<Vec<EvalReport>> {
    variants.iter().map(|v| Ok(run_goen_full(data, settings, v)?.report)).collect()
}

pub fn run_seeds(
    data: &PipelineData,
    settings: &Settings,
    variant: &Variant,
    seeds: &[u64],
) -> Result<(Vec<EvalReport>, SeedSummary)> {
    let reports = seeds
        .iter()
        .map(|&seed| {
            let s = Settings { train: TrainConfig { seed, ..settings.train.clone() }, ..settings.clone() };
            Ok(run_goen_full(data, &s, variant)?.report)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = SeedSummary::from_reports(&reports)?;
    Ok((reports, summary))
}

/// Post-hoc score rules; every rule maps higher scores to "more OOD".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreRule {
    MaxSoftmax,
    TemperatureScaled,
    MutualInformation,
    EnsembleVariance,
    Vacuity,
    Gate,
    Energy,
    Mahalanobis,
    Knn,
}

impl ScoreRule {
    pub const ALL: [ScoreRule; 9] = [
        ScoreRule::MaxSoftmax,
        ScoreRule::TemperatureScaled,
        ScoreRule::MutualInformation,
        ScoreRule::EnsembleVariance,
        ScoreRule::Vacuity,
        ScoreRule::Gate,
        ScoreRule::Energy,
        ScoreRule::Mahalanobis,
        ScoreRule::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreRule::MaxSoftmax => "max-softmax",
            ScoreRule::TemperatureScaled => "temperature",
            ScoreRule::MutualInformation => "mutual-information",
            ScoreRule::EnsembleVariance => "ensemble-variance",
            ScoreRule::Vacuity => "vacuity",
            ScoreRule::Gate => "gate",
            ScoreRule::Energy => "energy",
            ScoreRule::Mahalanobis => "mahalanobis",
            ScoreRule::Knn => "knn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ScoreRule::ALL.into_iter().find(|r| r.name() == name)
    }

    /// Rules that read a probability stack or gate weights instead of logits.
    pub fn needs_stack(self) -> bool {
        matches!(self, ScoreRule::MutualInformation | ScoreRule::EnsembleVariance | ScoreRule::Gate)
    }
}

fn logits_f64(set: &FeatureSet) -> Result<Array2<f64>> {
    Ok(set.require_logits()?.mapv(f64::from))
}

fn find<'a, T>(items: &'a [(String, T)], name: &str, rule: ScoreRule, what: &str) -> Result<&'a T> {
    items
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v)
        .ok_or_else(|| Error::MissingInput { rule: rule.name(), what: format!("{what} for `{name}`") })
}

/// Scores feature sets under the post-hoc rules, holding whatever each rule
/// needs (fitted temperature, Gaussian model, KNN reference).
pub struct BaselineScorer<'a> {
    data: &'a PipelineData,
    settings: &'a Settings,
    temperature: Option<f64>,
    model: Option<GaussianModel>,
    knn: Option<KnnReference>,
}

impl<'a> BaselineScorer<'a> {
    /// Prepares the shared state for `rules`: a temperature fitted on the ID
    /// validation set, a Gaussian model and a KNN reference on ID train.
    pub fn new(data: &'a PipelineData, settings: &'a Settings, rules: &[ScoreRule]) -> Result<Self> {
        settings.validate()?;
        let temperature = if rules.contains(&ScoreRule::TemperatureScaled) {
            let val = data.id_val()?;
            Some(fit_temperature(logits_f64(val)?.view(), &val.class_labels()?)?)
        } else {
            None
        };
        let model = if rules.contains(&ScoreRule::Mahalanobis) {
            Some(fit_gaussian(data.id_train()?, settings.epsilon)?)
        } else {
            None
        };
        let knn = if rules.contains(&ScoreRule::Knn) {
            Some(KnnReference::from_features(data.id_train()?)?)
        } else {
            None
        };
        Ok(Self { data, settings, temperature, model, knn })
    }

    pub fn temperature(&self) -> Option<f64> {
        self.temperature
    }

    /// Per-row scores of `rule` on `set`.
    pub fn scores(&self, rule: ScoreRule, set: &FeatureSet) -> Result<Vec<f64>> {
        Ok(self.score(rule, set)?.0)
    }

    /// Scores plus class probabilities when the rule comes with its own
    /// predictive distribution.
    fn score(&self, rule: ScoreRule, set: &FeatureSet) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
        let rows = |f: &dyn Fn(&[f64]) -> Result<f64>, logits: &Array2<f64>| -> Result<Vec<f64>> {
            logits.rows().into_iter().map(|r| f(&r.to_vec())).collect()
        };
        match rule {
            ScoreRule::MaxSoftmax => {
                let p = softmax_rows(set.require_logits()?);
                let s = p.rows().into_iter().map(|r| max_softmax_uncertainty(&r.to_vec())).collect::<Result<_>>()?;
                Ok((s, Some(p)))
            }
            ScoreRule::TemperatureScaled => {
                let t = self.temperature.ok_or(Error::MissingInput {
                    rule: rule.name(),
                    what: "a scorer prepared with this rule".into(),
                })?;
                let l = logits_f64(set)?;
                let mut p = Array2::<f64>::zeros(l.dim());
                for (mut out, row) in p.rows_mut().into_iter().zip(l.rows()) {
                    out.assign(&ndarray::Array1::from(temperature_scale(&row.to_vec(), t)?));
                }
                let s = p.rows().into_iter().map(|r| max_softmax_uncertainty(&r.to_vec())).collect::<Result<_>>()?;
                Ok((s, Some(p)))
            }
            ScoreRule::MutualInformation | ScoreRule::EnsembleVariance => {
                let stack = find(&self.data.prob_stacks, set.name(), rule, "a probability stack")?;
                if stack.shape()[1] != set.len() {
                    return Err(Error::DimensionMismatch { expected: set.len(), got: stack.shape()[1] });
                }
                let n = stack.shape()[1];
                let mut s = Vec::with_capacity(n);
                for i in 0..n {
                    let member_rows: ArrayView2<'_, f64> = stack.index_axis(Axis(1), i);
                    s.push(if rule == ScoreRule::MutualInformation {
                        mutual_information(member_rows)?
                    } else {
                        ensemble_variance(member_rows)?
                    });
                }
                let mean = stack.mean_axis(Axis(0)).expect("nonempty stack");
                Ok((s, Some(mean)))
            }
            ScoreRule::Vacuity => {
                let l = logits_f64(set)?;
                let mut p = Array2::<f64>::zeros(l.dim());
                let mut s = Vec::with_capacity(l.nrows());
                for (mut out, row) in p.rows_mut().into_iter().zip(l.rows()) {
                    let alphas = evidence_alphas(&row.to_vec());
                    let total: f64 = alphas.iter().sum();
                    out.iter_mut().zip(&alphas).for_each(|(o, a)| *o = a / total);
                    s.push(vacuity(&alphas)?);
                }
                Ok((s, Some(p)))
            }
            ScoreRule::Gate => {
                let g = find(&self.data.gate_weights, set.name(), rule, "gate weights")?;
                if g.nrows() != set.len() {
                    return Err(Error::DimensionMismatch { expected: set.len(), got: g.nrows() });
                }
                let s = g.rows().into_iter().map(|r| gate_uncertainty(&r.to_vec())).collect::<Result<_>>()?;
                Ok((s, None))
            }
            ScoreRule::Energy => Ok((rows(&|r| energy_score(r, 1.0), &logits_f64(set)?)?, None)),
            ScoreRule::Mahalanobis => {
                let model = self.model.as_ref().ok_or(Error::MissingInput {
                    rule: rule.name(),
                    what: "a scorer prepared with this rule".into(),
                })?;
                Ok((model.min_mahalanobis_rows(set)?, None))
            }
            ScoreRule::Knn => {
                let knn = self.knn.as_ref().ok_or(Error::MissingInput {
                    rule: rule.name(),
                    what: "a scorer prepared with this rule".into(),
                })?;
                Ok((knn.score_rows(set, self.settings.knn_k)?, None))
            }
        }
    }
}

/// One report per rule: OOD metrics for each evaluation set and, for rules
/// with a predictive distribution, ID metrics on the test set.
pub fn run_baseline_scores(
    data: &PipelineData,
    settings: &Settings,
    rules: &[ScoreRule],
) -> Result<Vec<EvalReport>> {
    let test = data.id_test()?;
    let ctx = BaselineScorer::new(data, settings, rules)?;

    let labels = test.labels().map(|_| test.class_labels()).transpose()?;
    let mut reports = Vec::with_capacity(rules.len());
    for &rule in rules {
        let (id_scores, probs) = ctx.score(rule, test)?;
        let id = match (probs, &labels) {
            (Some(p), Some(y)) => Some(IdEval::compute(p.view(), y, settings.ece_bins)?),
            _ => None,
        };
        let mut ood = Vec::with_capacity(data.ood_eval.len());
        for set in &data.ood_eval {
            let (s, _) = ctx.score(rule, set)?;
            ood.push(DatasetEval { dataset: set.name().to_string(), eval: OodEval::compute(&id_scores, &s)? });
        }
        reports.push(EvalReport::new(rule.name(), rule.name(), settings.train.seed, id, ood));
    }
    Ok(reports)
}
