//! TOML config file. Every key is optional; missing keys keep the built-in
//! default. Relative data paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use goen::pipeline::{DataPaths, Settings, Variant};
use goen::theory::Tolerances;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Seeds for the `seeds` subcommand.
    pub seeds: Option<Vec<u64>>,
    pub fit: Option<FitSection>,
    pub train: Option<TrainSection>,
    pub calibration: Option<CalibrationSection>,
    pub eval: Option<EvalSection>,
    pub ablation: Option<AblationSection>,
    pub theory: Option<TheorySection>,
    pub data: Option<DataSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub target_id: Option<f64>,
    pub target_ood: Option<f64>,
    pub early_stop_patience: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub ood_mix_ratio: Option<f64>,
    pub holdout_fraction: Option<f64>,
    pub noise_fallback_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub ece_bins: Option<usize>,
    pub knn_k: Option<usize>,
    /// Post-hoc rules reported next to GOEN by `eval`.
    pub baselines: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    /// `GOEN`, `NoiseOnly`, `Compact<alpha>` or `Mix<ratio>`.
    pub variants: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    pub conditioning_seeds: Option<u64>,
    pub conditioning_min_pass: Option<u64>,
    pub conditioning_spectrum_ratio: Option<f64>,
    pub min_maha_tau_min: Option<f64>,
    pub min_maha_auroc_gap_max: Option<f64>,
    pub bayes_mse_max: Option<f64>,
    pub bayes_train_samples: Option<usize>,
    pub separation_seeds: Option<u64>,
    pub separation_min_pass: Option<u64>,
    pub separation_drop_min: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id_train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id_val: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id_test: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard_calib: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_calib: Option<PathBuf>,
    #[serde(default)]
    pub ood_eval: Vec<PathBuf>,
    /// Name → probability-stack file, for the ensemble rules.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prob_stacks: BTreeMap<String, PathBuf>,
    /// Name → single-member stack of gate weights.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gate_weights: BTreeMap<String, PathBuf>,
}

impl DataSection {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.id_train, &mut self.id_val, &mut self.id_test, &mut self.hard_calib, &mut self.noise_calib]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.ood_eval.iter_mut().for_each(fix);
        self.prob_stacks.values_mut().for_each(fix);
        self.gate_weights.values_mut().for_each(fix);
    }

    pub fn paths(&self) -> DataPaths {
        DataPaths {
            id_train: self.id_train.clone(),
            id_val: self.id_val.clone(),
            id_test: self.id_test.clone(),
            hard_calib: self.hard_calib.clone(),
            noise_calib: self.noise_calib.clone(),
            ood_eval: self.ood_eval.clone(),
            prob_stacks: self.prob_stacks.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            gate_weights: self.gate_weights.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }
}

#[derive(Serialize)]
struct DataOnly<'a> {
    data: &'a DataSection,
}

/// A config holding only a `[data]` table.
pub fn data_only_toml(data: &DataSection) -> anyhow::Result<String> {
    Ok(toml::to_string(&DataOnly { data })?)
}

pub fn parse_variant(name: &str, settings: &Settings) -> anyhow::Result<Variant> {
    let number = |rest: &str| -> anyhow::Result<f64> {
        rest.parse::<f64>().with_context(|| format!("bad number in variant `{name}`"))
    };
    match name {
        "GOEN" => Ok(Variant::default_for(settings)),
        "NoiseOnly" => Ok(Variant::noise_only(settings)),
        _ => {
            if let Some(rest) = name.strip_prefix("Compact") {
                let alpha = number(rest)?;
                if !(0.0..1.0).contains(&alpha) {
                    bail!("variant `{name}`: compaction must be in [0, 1)");
                }
                Ok(Variant::compacted(settings, alpha))
            } else if let Some(rest) = name.strip_prefix("Mix") {
                let ratio = number(rest)?;
                if !(0.0..=1.0).contains(&ratio) {
                    bail!("variant `{name}`: mix ratio must be in [0, 1]");
                }
                Ok(Variant { name: name.to_string(), ood_mix_ratio: ratio, ..Variant::default_for(settings) })
            } else {
                bail!("unknown variant `{name}` (expected GOEN, NoiseOnly, Compact<alpha> or Mix<ratio>)")
            }
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(d) = cfg.data.as_mut() {
            d.resolve(base);
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> Settings {
        let mut s = Settings::default();
        if let Some(v) = self.seed {
            s.train.seed = v;
        }
        if let Some(f) = &self.fit {
            if let Some(v) = f.epsilon {
                s.epsilon = v;
            }
        }
        if let Some(t) = &self.train {
            let c = &mut s.train;
            c.learning_rate = t.learning_rate.unwrap_or(c.learning_rate);
            c.max_epochs = t.max_epochs.unwrap_or(c.max_epochs);
            c.batch_size = t.batch_size.unwrap_or(c.batch_size);
            c.target_id = t.target_id.unwrap_or(c.target_id);
            c.target_ood = t.target_ood.unwrap_or(c.target_ood);
            c.early_stop_patience = t.early_stop_patience.unwrap_or(c.early_stop_patience);
        }
        if let Some(c) = &self.calibration {
            s.ood_mix_ratio = c.ood_mix_ratio.unwrap_or(s.ood_mix_ratio);
            s.holdout_fraction = c.holdout_fraction.unwrap_or(s.holdout_fraction);
            s.noise_fallback_count = c.noise_fallback_count.unwrap_or(s.noise_fallback_count);
        }
        if let Some(e) = &self.eval {
            s.ece_bins = e.ece_bins.unwrap_or(s.ece_bins);
            s.knn_k = e.knn_k.unwrap_or(s.knn_k);
        }
        s
    }

    pub fn baselines(&self) -> Vec<String> {
        self.eval.as_ref().and_then(|e| e.baselines.clone()).unwrap_or_default()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..5).collect())
    }

    pub fn variants(&self, settings: &Settings) -> anyhow::Result<Vec<Variant>> {
        let names = self
            .ablation
            .as_ref()
            .and_then(|a| a.variants.clone())
            .unwrap_or_else(|| vec!["GOEN".into(), "NoiseOnly".into(), "Compact0.9".into()]);
        names.iter().map(|n| parse_variant(n, settings)).collect()
    }

    pub fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(s) = &self.theory {
            t.conditioning_seeds = s.conditioning_seeds.unwrap_or(t.conditioning_seeds);
            t.conditioning_min_pass = s.conditioning_min_pass.unwrap_or(t.conditioning_min_pass);
            t.conditioning_spectrum_ratio = s.conditioning_spectrum_ratio.unwrap_or(t.conditioning_spectrum_ratio);
            t.min_maha_tau_min = s.min_maha_tau_min.unwrap_or(t.min_maha_tau_min);
            t.min_maha_auroc_gap_max = s.min_maha_auroc_gap_max.unwrap_or(t.min_maha_auroc_gap_max);
            t.bayes_mse_max = s.bayes_mse_max.unwrap_or(t.bayes_mse_max);
            t.bayes_train_samples = s.bayes_train_samples.unwrap_or(t.bayes_train_samples);
            t.separation_seeds = s.separation_seeds.unwrap_or(t.separation_seeds);
            t.separation_min_pass = s.separation_min_pass.unwrap_or(t.separation_min_pass);
            t.separation_drop_min = s.separation_drop_min.unwrap_or(t.separation_drop_min);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/goen.example.toml");
        let cfg = ConfigFile::load(&path).unwrap();
        let mut expect = Settings::default();
        expect.train.seed = cfg.seed.unwrap();
        assert_eq!(cfg.settings(), expect);
        assert_eq!(cfg.tolerances(), Tolerances::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ConfigFile>("[train]\nlearning_rat = 0.1\n").is_err());
        assert!(toml::from_str::<ConfigFile>("bogus = 1\n").is_err());
    }

    #[test]
    fn relative_data_paths_follow_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "[data]\nid_train = \"a.feat\"\nood_eval = [\"/abs/b.feat\"]\n").unwrap();
        let cfg = ConfigFile::load(&path).unwrap();
        let d = cfg.data.unwrap();
        assert_eq!(d.id_train.unwrap(), dir.path().join("a.feat"));
        assert_eq!(d.ood_eval[0], PathBuf::from("/abs/b.feat"));
    }

    #[test]
    fn variant_names() {
        let s = Settings::default();
        assert!(!parse_variant("NoiseOnly", &s).unwrap().use_hard_ood);
        assert_eq!(parse_variant("Compact0.9", &s).unwrap().compact_alpha, 0.9);
        assert_eq!(parse_variant("Mix0.25", &s).unwrap().ood_mix_ratio, 0.25);
        assert!(parse_variant("Compact1.5", &s).is_err());
        assert!(parse_variant("Other", &s).is_err());
    }
}
