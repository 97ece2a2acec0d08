//! `goen` command-line front end.
//!
//! Settings resolve as built-in defaults, then the TOML config file
//! (`--config`), then command-line flags. The output directory can also be
//! set through `GOEN_OUT_DIR`, which sits between the config file and the
//! `--out-dir` flag.
//!
//! Exit codes: 0 success, 1 a theory check failed, 2 invalid input,
//! 3 calibration/evaluation leakage, 4 numeric failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use goen::feature_store::{
    load_feature_file, save_feature_file, FEATURE_MAGIC, PROBSTACK_MAGIC,
};
use goen::geometry::{condition_number, fit_gaussian, GaussianModel, MODEL_MAGIC};
use goen::head::{build_cues, CalibrationHead, HEAD_MAGIC};
use goen::pipeline::{
    calibrate_stage, check_path_leakage, evaluate_goen, run_ablation, run_baseline_scores,
    run_seeds, BaselineScorer, PipelineData, ScoreRule, Settings, Variant,
};
use goen::report::render_table;
use goen::synthetic::{build_scenario, ScenarioConfig};
use goen::theory::{run_check, Check};
use goen::Error;

use crate::config::{ConfigFile, DataSection};

#[derive(Parser, Debug)]
#[command(name = "goen", version, about = "Mahalanobis-based OOD detection on exported features")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides GOEN_OUT_DIR and the config file).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit class means and the tied covariance on labelled training features.
    Fit(FitArgs),
    /// Train the calibration head on ID validation and OOD calibration cues.
    Calibrate(CalibrateArgs),
    /// Write one OOD score per row of a feature file.
    Score(ScoreArgs),
    /// Evaluate a fitted model and head on ID test and OOD sets.
    Eval(EvalArgs),
    /// Run ablation variants on a shared seed.
    Ablate(AblateArgs),
    /// Repeat the full run over several seeds and aggregate mean and std.
    Seeds(SeedsArgs),
    /// Print the header of a feature, model, head or probability-stack file.
    Inspect(InspectArgs),
    /// Run the numerical theory checks.
    VerifyTheory(VerifyArgs),
    /// Write a synthetic scenario as feature files plus a matching config.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    target_id: Option<f64>,
    #[arg(long)]
    target_ood: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    ood_mix_ratio: Option<f64>,
    #[arg(long)]
    holdout_fraction: Option<f64>,
    #[arg(long)]
    ece_bins: Option<usize>,
    #[arg(long)]
    knn_k: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct DataFlags {
    #[arg(long)]
    id_train: Option<PathBuf>,
    #[arg(long)]
    id_val: Option<PathBuf>,
    #[arg(long)]
    id_test: Option<PathBuf>,
    /// Hard OOD calibration set.
    #[arg(long)]
    hard_calib: Option<PathBuf>,
    /// Noise OOD calibration set; generated from ID train when absent.
    #[arg(long)]
    noise_calib: Option<PathBuf>,
    /// OOD evaluation set (repeatable).
    #[arg(long = "ood")]
    ood_eval: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Model file to write (default: <out-dir>/model.bin).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Calibrate on noise only.
    #[arg(long)]
    no_hard_ood: bool,
    /// Head file to write (default: <out-dir>/head.bin).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    input: PathBuf,
    /// `goen` (needs --model and --head) or a post-hoc rule name.
    #[arg(long, default_value = "goen")]
    rule: String,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    head: Option<PathBuf>,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Score file to write (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Table,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    head: PathBuf,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Post-hoc rules to report next to GOEN (comma separated, or `all`).
    #[arg(long, value_delimiter = ',')]
    baselines: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
struct SeedsArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
struct InspectArgs {
    file: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run a single check: conditioning, min-mahalanobis, bayes-head, separation.
    #[arg(long)]
    only: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    conditioning_min_pass: Option<u64>,
    #[arg(long)]
    min_maha_tau_min: Option<f64>,
    #[arg(long)]
    min_maha_auroc_gap_max: Option<f64>,
    #[arg(long)]
    bayes_mse_max: Option<f64>,
    #[arg(long)]
    separation_min_pass: Option<u64>,
    #[arg(long)]
    separation_drop_min: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    within_std: Option<f64>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    val_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
}

/// A failure with its process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::SameFileForCalibAndEval(_)) => 3,
        Some(e) if e.is_numeric() => 4,
        _ => 2,
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: exit_code(&error), error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

struct Ctx {
    config: ConfigFile,
    out_dir: PathBuf,
}

fn run(cli: Cli) -> CmdResult {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("GOEN_OUT_DIR").map(PathBuf::from))
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("goen-out"));
    let ctx = Ctx { config, out_dir };
    match cli.command {
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Calibrate(a) => cmd_calibrate(&ctx, a),
        Command::Score(a) => cmd_score(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Ablate(a) => cmd_ablate(&ctx, a),
        Command::Seeds(a) => cmd_seeds(&ctx, a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::VerifyTheory(a) => cmd_verify(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn settings(ctx: &Ctx, flags: &TrainFlags) -> Result<Settings, Failure> {
    let mut s = ctx.config.settings();
    let t = &mut s.train;
    if let Some(v) = flags.seed {
        t.seed = v;
    }
    if let Some(v) = flags.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = flags.max_epochs {
        t.max_epochs = v;
    }
    if let Some(v) = flags.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = flags.target_id {
        t.target_id = v;
    }
    if let Some(v) = flags.target_ood {
        t.target_ood = v;
    }
    if let Some(v) = flags.patience {
        t.early_stop_patience = v;
    }
    if let Some(v) = flags.epsilon {
        s.epsilon = v;
    }
    if let Some(v) = flags.ood_mix_ratio {
        s.ood_mix_ratio = v;
    }
    if let Some(v) = flags.holdout_fraction {
        s.holdout_fraction = v;
    }
    if let Some(v) = flags.ece_bins {
        s.ece_bins = v;
    }
    if let Some(v) = flags.knn_k {
        s.knn_k = v;
    }
    s.validate()?;
    Ok(s)
}

fn data_section(ctx: &Ctx, flags: &DataFlags) -> DataSection {
    let mut d = ctx.config.data.clone().unwrap_or_default();
    let pick = |flag: &Option<PathBuf>, cfg: &mut Option<PathBuf>| {
        if flag.is_some() {
            *cfg = flag.clone();
        }
    };
    pick(&flags.id_train, &mut d.id_train);
    pick(&flags.id_val, &mut d.id_val);
    pick(&flags.id_test, &mut d.id_test);
    pick(&flags.hard_calib, &mut d.hard_calib);
    pick(&flags.noise_calib, &mut d.noise_calib);
    if !flags.ood_eval.is_empty() {
        d.ood_eval = flags.ood_eval.clone();
    }
    d
}

fn load_data(ctx: &Ctx, flags: &DataFlags) -> Result<PipelineData, Failure> {
    Ok(data_section(ctx, flags).paths().load()?)
}

fn cmd_fit(ctx: &Ctx, a: FitArgs) -> CmdResult {
    let train_path = a
        .train
        .or_else(|| ctx.config.data.as_ref().and_then(|d| d.id_train.clone()))
        .ok_or_else(|| anyhow::anyhow!("missing --train (labelled training features)"))?;
    let epsilon = a.epsilon.unwrap_or(ctx.config.settings().epsilon);
    let train = load_feature_file(&train_path)?;
    let model = fit_gaussian(&train, epsilon)?;
    let out = a.out.unwrap_or_else(|| ctx.out_dir.join("model.bin"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    model.save(&out)?;
    let kappa = condition_number(model.covariance())?;
    println!("model: {}", out.display());
    println!("classes: {}  dim: {}  epsilon: {:e}", model.num_classes(), model.dim(), model.epsilon());
    if let Some(counts) = model.class_counts() {
        let list: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
        println!("class counts: {}", list.join(" "));
    }
    println!("condition number: {kappa:.6e}");
    Ok(0)
}

fn cmd_calibrate(ctx: &Ctx, a: CalibrateArgs) -> CmdResult {
    let s = settings(ctx, &a.train)?;
    let data = load_data(ctx, &a.data)?;
    let model = GaussianModel::load(&a.model)?;
    let variant = if a.no_hard_ood { Variant::noise_only(&s) } else { Variant::default_for(&s) };
    let (head, history) = calibrate_stage(&model, &data, &s, &variant)?;
    let out = a.out.unwrap_or_else(|| ctx.out_dir.join("head.bin"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    head.save(&out)?;
    println!("head: {}", out.display());
    println!("epoch  train_loss  holdout_loss      gap");
    for e in &history.epochs {
        let tl = e.train_loss.map_or("—".to_string(), |v| format!("{v:.6}"));
        println!("{:>5}  {:>10}  {:>12.6}  {:>7.4}", e.epoch, tl, e.holdout_loss, e.gap);
    }
    println!("best epoch: {}", history.best_epoch);
    Ok(0)
}

fn parse_rules(names: &[String]) -> anyhow::Result<Vec<ScoreRule>> {
    if names.iter().any(|n| n == "all") {
        return Ok(ScoreRule::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            ScoreRule::from_name(n).ok_or_else(|| {
                let all: Vec<&str> = ScoreRule::ALL.iter().map(|r| r.name()).collect();
                anyhow::anyhow!("unknown score rule `{n}` (expected one of: {})", all.join(", "))
            })
        })
        .collect()
}

fn cmd_score(ctx: &Ctx, a: ScoreArgs) -> CmdResult {
    let set = load_feature_file(&a.input)?;
    let scores = if a.rule == "goen" {
        let (Some(m), Some(h)) = (&a.model, &a.head) else {
            return Err(anyhow::anyhow!("rule `goen` needs --model and --head").into());
        };
        let model = GaussianModel::load(m)?;
        let head = CalibrationHead::load(h)?;
        head.forward_batch(&build_cues(&model, &set)?)
    } else {
        let rules = parse_rules(std::slice::from_ref(&a.rule))?;
        let s = settings(ctx, &a.train)?;
        let mut data = load_data(ctx, &a.data)?;
        data.ood_eval.clear();
        let scorer = BaselineScorer::new(&data, &s, &rules)?;
        scorer.scores(rules[0], &set)?
    };
    let mut text = String::with_capacity(scores.len() * 12);
    for v in scores {
        text.push_str(&format!("{v}\n"));
    }
    match a.out {
        Some(p) => write_file(&p, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> CmdResult {
    let s = settings(ctx, &a.train)?;
    let section = data_section(ctx, &a.data);
    let paths = section.paths();
    let calib: Vec<&Path> =
        [&paths.hard_calib, &paths.noise_calib].into_iter().flatten().map(|p| p.as_path()).collect();
    check_path_leakage(&calib, &paths.ood_eval)?;
    let data = paths.load()?;
    let model = GaussianModel::load(&a.model)?;
    let head = CalibrationHead::load(&a.head)?;
    let report = evaluate_goen(&model, &head, &data, &s, "GOEN")?;
    ensure_dir(&ctx.out_dir)?;
    write_file(&ctx.out_dir.join("report.json"), &report.to_json())?;

    let names = if a.baselines.is_empty() { ctx.config.baselines() } else { a.baselines.clone() };
    let rules = parse_rules(&names)?;
    let mut reports = Vec::new();
    if !rules.is_empty() {
        reports = run_baseline_scores(&data, &s, &rules)?;
        let json = serde_json_array(&reports);
        write_file(&ctx.out_dir.join("baselines.json"), &json)?;
    }
    reports.push(report.clone());
    match a.format {
        Format::Json => print!("{}", report.to_json()),
        Format::Table => print!("{}", render_table(&reports)),
    }
    Ok(0)
}

fn serde_json_array<T: serde::Serialize>(items: &[T]) -> String {
    let mut s = serde_json::to_string_pretty(items).expect("reports serialise");
    s.push('\n');
    s
}

fn cmd_ablate(ctx: &Ctx, a: AblateArgs) -> CmdResult {
    let s = settings(ctx, &a.train)?;
    let data = load_data(ctx, &a.data)?;
    let variants = ctx.config.variants(&s)?;
    let reports = run_ablation(&data, &s, &variants)?;
    ensure_dir(&ctx.out_dir)?;
    write_file(&ctx.out_dir.join("ablation.json"), &serde_json_array(&reports))?;
    match a.format {
        Format::Json => print!("{}", serde_json_array(&reports)),
        Format::Table => print!("{}", render_table(&reports)),
    }
    Ok(0)
}

fn cmd_seeds(ctx: &Ctx, a: SeedsArgs) -> CmdResult {
    let s = settings(ctx, &a.train)?;
    let data = load_data(ctx, &a.data)?;
    let seeds = if a.seeds.is_empty() { ctx.config.seeds() } else { a.seeds.clone() };
    if seeds.is_empty() {
        return Err(anyhow::anyhow!("no seeds given (--seeds or `seeds` in the config)").into());
    }
    let (reports, summary) = run_seeds(&data, &s, &Variant::default_for(&s), &seeds)?;
    ensure_dir(&ctx.out_dir)?;
    write_file(&ctx.out_dir.join("seeds.json"), &summary.to_json())?;
    write_file(&ctx.out_dir.join("seed_reports.json"), &serde_json_array(&reports))?;
    match a.format {
        Format::Json => print!("{}", summary.to_json()),
        Format::Table => print!("{}", summary.render_table()),
    }
    Ok(0)
}

fn cmd_inspect(a: InspectArgs) -> CmdResult {
    let bytes = fs::read(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let magic = bytes.get(..8).unwrap_or(&[]);
    if magic == FEATURE_MAGIC {
        let set = load_feature_file(&a.file)?;
        println!("format: feature file");
        println!("rows: {}  dim: {}  classes: {}", set.len(), set.dim(), set.num_classes());
        println!("labels: {}  logits: {}", set.labels().is_some(), set.logits().is_some());
        if let Some(labels) = set.labels() {
            let mut counts = vec![0usize; set.num_classes()];
            let mut unlabeled = 0usize;
            for &y in labels {
                match usize::try_from(y) {
                    Ok(c) => counts[c] += 1,
                    Err(_) => unlabeled += 1,
                }
            }
            let list: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
            println!("class counts: {}  unlabeled: {unlabeled}", list.join(" "));
        }
    } else if magic == MODEL_MAGIC {
        let model = GaussianModel::load(&a.file)?;
        println!("format: gaussian model");
        println!("classes: {}  dim: {}  epsilon: {:e}", model.num_classes(), model.dim(), model.epsilon());
        println!("condition number: {:.6e}", condition_number(model.covariance())?);
    } else if magic == HEAD_MAGIC {
        let head = CalibrationHead::load(&a.file)?;
        println!("format: calibration head");
        println!("layers: 3-64-32-1  parameters: {}", head.params().len());
    } else if magic == PROBSTACK_MAGIC {
        let stack = goen::feature_store::load_prob_stack(&a.file)?;
        let (m, n, c) = stack.dim();
        println!("format: probability stack");
        println!("members: {m}  rows: {n}  classes: {c}");
    } else {
        return Err(Error::BadMagic { expected: "GOENFEAT, GOENMODL, GOENHEAD or GOENPROB" }.into());
    }
    Ok(0)
}

fn cmd_verify(ctx: &Ctx, a: VerifyArgs) -> CmdResult {
    let mut tol = ctx.config.tolerances();
    if let Some(v) = a.conditioning_min_pass {
        tol.conditioning_min_pass = v;
    }
    if let Some(v) = a.min_maha_tau_min {
        tol.min_maha_tau_min = v;
    }
    if let Some(v) = a.min_maha_auroc_gap_max {
        tol.min_maha_auroc_gap_max = v;
    }
    if let Some(v) = a.bayes_mse_max {
        tol.bayes_mse_max = v;
    }
    if let Some(v) = a.separation_min_pass {
        tol.separation_min_pass = v;
    }
    if let Some(v) = a.separation_drop_min {
        tol.separation_drop_min = v;
    }
    let checks: Vec<Check> = match &a.only {
        Some(name) => vec![Check::from_name(name).ok_or_else(|| {
            let all: Vec<&str> = Check::ALL.iter().map(|c| c.name()).collect();
            anyhow::anyhow!("unknown check `{name}` (expected one of: {})", all.join(", "))
        })?],
        None => Check::ALL.to_vec(),
    };
    let mut outcomes = Vec::new();
    for c in checks {
        outcomes.push(run_check(c, a.seed, &tol)?);
    }
    match a.format {
        Format::Json => {
            print!("{}", serde_json_array(&outcomes));
        }
        Format::Table => {
            for o in &outcomes {
                let stats: Vec<String> = o.stats.iter().map(|s| format!("{}={:.6}", s.name, s.value)).collect();
                println!(
                    "{} {:<16} {}  [{}]",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.check.name(),
                    o.summary,
                    stats.join(" ")
                );
            }
        }
    }
    Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 1 })
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> CmdResult {
    let mut cfg = ScenarioConfig { seed: a.seed, ..ScenarioConfig::default() };
    if let Some(v) = a.classes {
        cfg.num_classes = v;
    }
    if let Some(v) = a.dim {
        cfg.dim = v;
    }
    if let Some(v) = a.within_std {
        cfg.within_std = v;
    }
    if let Some(v) = a.train_per_class {
        cfg.train_per_class = v;
    }
    if let Some(v) = a.val_per_class {
        cfg.val_per_class = v;
    }
    if let Some(v) = a.test_per_class {
        cfg.test_per_class = v;
    }
    let scenario = build_scenario(&cfg)?;
    ensure_dir(&ctx.out_dir)?;
    for (stem, set) in scenario.named_sets() {
        let path = ctx.out_dir.join(format!("{stem}.feat"));
        save_feature_file(set, &path)?;
        println!("wrote {} ({} rows)", path.display(), set.len());
    }
    let data = DataSection {
        id_train: Some("id_train.feat".into()),
        id_val: Some("id_val.feat".into()),
        id_test: Some("id_test.feat".into()),
        hard_calib: Some("hard_calib.feat".into()),
        noise_calib: Some("noise_calib.feat".into()),
        ood_eval: vec!["sphere.feat".into(), "hard.feat".into(), "noise.feat".into()],
        ..DataSection::default()
    };
    let text = config::data_only_toml(&data)?;
    write_file(&ctx.out_dir.join("data.toml"), &text)?;
    println!("wrote {}", ctx.out_dir.join("data.toml").display());
    Ok(0)
}
