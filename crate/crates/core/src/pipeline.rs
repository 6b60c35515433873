//! Command implementations behind the `csda` binary.
//!
//! Every command writes into its own stage directory under the workdir. A
//! stage directory that already exists is an error, so earlier artifacts are
//! never modified. Each stage directory holds `config.toml` (the config file
//! verbatim) and `run.json` (command, seed override and resolved config).

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::augmentor::{build_augmented_dataset, load_augmented, write_augmented, GeneratedSample};
use crate::config::{EvalConfig, ExperimentConfig};
use crate::csgan::{load_checkpoint, train_csgan, CsGan, GanConfig};
use crate::data::{split_subject_disjoint, Calibration, Dataset, LabeledImage, SplitAssignment};
use crate::error::{config, CsdaError, Result};
use crate::evalkit::{
    evaluate_model, ranking_pool, run_cross_validation, severity_controllability, Controllability, CvReport,
    MetricsReport,
};
use crate::fsutil::{write_csv, write_json, write_new};
use crate::regressor::{load_regressor, save_regressor, train_regressor, Method};
use crate::stylespace::{linearity_residual, order_loss, StyleSet};

pub const DATA_DIR: &str = "data";
pub const GAN_DIR: &str = "gan";
pub const GAN_CHECKPOINT: &str = "csgan.json";
pub const ABLATION_DIR: &str = "gan_ablation";
pub const CV_DIR: &str = "cv";

/// Controllability is measured on this many (source, latent) pairs.
const CONTROL_PAIRS: usize = 50;
/// Linearity residual is averaged over this many fresh latents.
const RESIDUAL_LATENTS: usize = 64;

/// A parsed config together with the text it came from and the output root.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: ExperimentConfig,
    pub config_text: String,
    pub workdir: PathBuf,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct RunEcho<'a> {
    command: &'a str,
    seed_override: Option<u64>,
    config: &'a ExperimentConfig,
}

impl RunContext {
    pub fn new(config_text: String, workdir_override: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut config = ExperimentConfig::parse(&config_text)?;
        if let Some(s) = seed {
            config = config.with_seed(s);
        }
        let workdir = config.workdir(workdir_override)?;
        Ok(Self {
            config,
            config_text,
            workdir,
            seed,
        })
    }

    pub fn load(path: &Path, workdir_override: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CsdaError::Config(format!("{}: {e}", path.display())))?;
        Self::new(text, workdir_override, seed)
    }

    /// Create a fresh stage directory and echo the config into it.
    fn stage(&self, name: &str, command: &str) -> Result<PathBuf> {
        let dir = self.workdir.join(name);
        if dir.exists() {
            return Err(CsdaError::ArtifactExists(dir));
        }
        write_new(&dir.join("config.toml"), self.config_text.as_bytes())?;
        write_json(
            &dir.join("run.json"),
            &RunEcho {
                command,
                seed_override: self.seed,
                config: &self.config,
            },
        )?;
        Ok(dir)
    }

    fn eval(&self) -> Result<EvalConfig> {
        match &self.config.eval {
            Some(_) => self.config.eval().cloned(),
            None => Ok(EvalConfig::default()),
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        Dataset::load(&self.workdir.join(DATA_DIR))
    }

    pub fn load_gan(&self) -> Result<CsGan> {
        load_checkpoint(&self.workdir.join(GAN_DIR).join(GAN_CHECKPOINT)).map(|(m, _)| m)
    }
}

/// The single-split partition selected by `eval.fold`.
pub struct FoldImages<'a> {
    pub split: SplitAssignment,
    pub train: Vec<&'a LabeledImage>,
    pub val: Vec<&'a LabeledImage>,
    pub test: Vec<&'a LabeledImage>,
}

pub fn fold_images<'a>(dataset: &'a Dataset, eval: &EvalConfig) -> Result<FoldImages<'a>> {
    let f = eval.fractions;
    let split = split_subject_disjoint(&dataset.manifest, (f[0], f[1], f[2]), eval.fold, eval.seed)?;
    let (tr, va, te) = split.indices(&dataset.manifest);
    let pick = |idx: &[usize]| idx.iter().map(|&i| &dataset.images[i]).collect::<Vec<_>>();
    Ok(FoldImages {
        train: pick(&tr),
        val: pick(&va),
        test: pick(&te),
        split,
    })
}

fn owned(images: &[&LabeledImage]) -> Vec<LabeledImage> {
    images.iter().map(|im| (*im).clone()).collect()
}

pub fn augment_dir_name(epsilon: f64) -> String {
    format!("augment_eps{epsilon}")
}

pub fn train_dir_name(method: Method) -> String {
    format!("train_{method}")
}

pub fn evaluate_dir_name(method: Method) -> String {
    format!("evaluate_{method}")
}

/// `data gen`: synthesise the dataset, its manifest and the calibration table.
pub fn data_gen(ctx: &RunContext) -> Result<PathBuf> {
    let cfg = ctx.config.dataset()?;
    let dataset = Dataset::build(cfg)?;
    let calibration = Calibration::for_shape(cfg.image_size, cfg.levels())?;
    let dir = ctx.stage(DATA_DIR, "data gen")?;
    dataset.write(&dir, &calibration)?;
    log::info!("wrote {} images to {}", dataset.images.len(), dir.display());
    Ok(dir)
}

#[derive(Debug, Clone, Serialize)]
pub struct GanSummary {
    pub iterations: usize,
    pub lambda_order: f64,
    pub linearity_residual: f64,
    pub controllability: Controllability,
}

fn summarize_gan(model: &CsGan, cfg: &GanConfig, sources: &[&LabeledImage], cal: &Calibration) -> Result<GanSummary> {
    Ok(GanSummary {
        iterations: cfg.iterations,
        lambda_order: cfg.lambda_order,
        linearity_residual: model.mean_linearity_residual(RESIDUAL_LATENTS, crate::rng::derive_tagged(cfg.seed, "residual", 0))?,
        controllability: severity_controllability(model, sources, cal, 0.5, CONTROL_PAIRS, cfg.seed)?,
    })
}

/// `gan train`: fit the csGAN on the training split of `eval.fold`.
pub fn gan_train(ctx: &RunContext) -> Result<GanSummary> {
    let gan_cfg = ctx.config.gan()?.clone();
    let dataset = ctx.load_dataset()?;
    let fold = fold_images(&dataset, &ctx.eval()?)?;
    let dir = ctx.stage(GAN_DIR, "gan train")?;
    write_json(&dir.join("split.json"), &fold.split)?;
    let trained = train_csgan(&owned(&fold.train), dataset.info.levels, &gan_cfg, Some(&dir))?;
    let cal = Calibration::for_shape(dataset.info.image_size, dataset.info.levels)?;
    let summary = summarize_gan(&trained.model, &gan_cfg, &fold.val, &cal)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub without_order: GanSummary,
    pub with_order: GanSummary,
    pub residual_lower_with_order: bool,
}

/// `gan ablate-order`: train with λ_order = 0 and λ_order = 1 and compare linearity.
pub fn gan_ablate_order(ctx: &RunContext) -> Result<AblationReport> {
    let base = ctx.config.gan()?.clone();
    let dataset = ctx.load_dataset()?;
    let fold = fold_images(&dataset, &ctx.eval()?)?;
    let train = owned(&fold.train);
    let cal = Calibration::for_shape(dataset.info.image_size, dataset.info.levels)?;
    let dir = ctx.stage(ABLATION_DIR, "gan ablate-order")?;
    let run = |lambda: f64| -> Result<GanSummary> {
        let cfg = GanConfig {
            lambda_order: lambda,
            ..base.clone()
        };
        let trained = train_csgan(&train, dataset.info.levels, &cfg, Some(&dir.join(format!("order_{lambda}"))))?;
        summarize_gan(&trained.model, &cfg, &fold.val, &cal)
    };
    let without_order = run(0.0)?;
    let with_order = run(1.0)?;
    let report = AblationReport {
        residual_lower_with_order: with_order.linearity_residual < without_order.linearity_residual,
        without_order,
        with_order,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

/// `gan styles`: export the StyleSets of `count` fresh latents from the trained csGAN.
pub fn gan_styles(ctx: &RunContext, count: usize) -> Result<PathBuf> {
    let model = ctx.load_gan()?;
    let seed = ctx.config.gan.as_ref().map_or(0, |g| g.seed);
    let sets: Vec<StyleSet> = (0..count as u64)
        .map(|i| model.style_set(&crate::csgan::LatentCode::sample(model.arch.latent_dim, seed, i)))
        .collect();
    let dir = ctx.stage("gan_styles", "gan styles")?;
    let path = dir.join("styles.json");
    write_json(&path, &sets)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct AugmentSummary {
    pub epsilon: f64,
    pub num_latents: usize,
    pub samples: usize,
    pub dir: PathBuf,
}

/// `augment`: sweep the ε-grid over sampled latents and training-split sources.
pub fn augment(ctx: &RunContext) -> Result<AugmentSummary> {
    let cfg = ctx.config.augment()?.clone();
    let dataset = ctx.load_dataset()?;
    cfg.validate(dataset.info.levels)?;
    let model = ctx.load_gan()?;
    let fold = fold_images(&dataset, &ctx.eval()?)?;
    let samples = build_augmented_dataset(&model, &owned(&fold.train), &cfg)?;
    let dir = ctx.stage(&augment_dir_name(cfg.epsilon), "augment")?;
    write_augmented(&dir, &samples, dataset.info.levels, cfg.epsilon)?;
    Ok(AugmentSummary {
        epsilon: cfg.epsilon,
        num_latents: cfg.num_latents,
        samples: samples.len(),
        dir,
    })
}

fn generated_for(ctx: &RunContext, method: Method) -> Result<Vec<GeneratedSample>> {
    match method {
        Method::Cda(eps) => {
            let dir = ctx.workdir.join(augment_dir_name(eps));
            if !dir.exists() {
                return config(format!("{method} needs an augmented dataset; run `augment` with epsilon = {eps} first"));
            }
            load_augmented(&dir)
        }
        _ => Ok(Vec::new()),
    }
}

/// `train`: fit the regressor for `regressor.mode` on the fold's train/val split.
pub fn train(ctx: &RunContext) -> Result<PathBuf> {
    let cfg = ctx.config.regressor()?.clone();
    let dataset = ctx.load_dataset()?;
    let fold = fold_images(&dataset, &ctx.eval()?)?;
    let generated = generated_for(ctx, cfg.mode)?;
    let pool = ranking_pool(cfg.mode, &fold.train, &generated);
    let dir = ctx.stage(&train_dir_name(cfg.mode), "train")?;
    let trained = train_regressor(&fold.train, &pool, &fold.val, dataset.info.levels, &cfg, Some(&dir))?;
    let path = dir.join("model.json");
    save_regressor(&path, &trained, &cfg, dataset.info.levels)?;
    Ok(path)
}

#[derive(Serialize)]
struct OutputRow<'a> {
    image_id: &'a str,
    label: usize,
    output: f64,
    predicted: usize,
}

#[derive(Serialize)]
struct QuartileRow {
    level: usize,
    mayo: usize,
    q1: f64,
    median: f64,
    q3: f64,
}

/// `evaluate`: test-split metrics of the model trained for `regressor.mode`.
pub fn evaluate(ctx: &RunContext) -> Result<MetricsReport> {
    let method = ctx.config.regressor()?.mode;
    let dataset = ctx.load_dataset()?;
    let fold = fold_images(&dataset, &ctx.eval()?)?;
    let ck = load_regressor(&ctx.workdir.join(train_dir_name(method)).join("model.json"))?;
    let (outputs, report) = evaluate_model(&ck.model, &fold.test, dataset.info.levels)?;
    let dir = ctx.stage(&evaluate_dir_name(method), "evaluate")?;
    write_json(&dir.join("report.json"), &report)?;
    let rows: Vec<OutputRow> = fold
        .test
        .iter()
        .zip(&outputs)
        .map(|(im, &o)| OutputRow {
            image_id: &im.image_id,
            label: im.label,
            output: o,
            predicted: crate::evalkit::quantize_output(o, dataset.info.levels).unwrap_or(0),
        })
        .collect();
    write_csv(&dir.join("outputs.csv"), &rows)?;
    let quartiles: Vec<QuartileRow> = report
        .quartiles
        .iter()
        .enumerate()
        .filter_map(|(i, q)| {
            q.as_ref().map(|q| QuartileRow {
                level: i + 1,
                mayo: i,
                q1: q.q1,
                median: q.median,
                q3: q.q3,
            })
        })
        .collect();
    write_csv(&dir.join("quartiles.csv"), &quartiles)?;
    write_new(&dir.join("report.md"), render_metrics(method, &report).as_bytes())?;
    Ok(report)
}

fn render_metrics(method: Method, r: &MetricsReport) -> String {
    let mut s = format!(
        "# {} on the test split\n\nMacro precision {:.4}, recall {:.4}, F1 {:.4}.\n\n| Level | Precision | Recall | F1 | Support | Q1 | Median | Q3 |\n|---|---|---|---|---|---|---|---|\n",
        method.label(),
        r.macro_precision,
        r.macro_recall,
        r.macro_f1
    );
    for (c, q) in r.per_class.iter().zip(&r.quartiles) {
        let q = q.as_ref().map_or("- | - | -".to_string(), |q| format!("{:.3} | {:.3} | {:.3}", q.q1, q.median, q.q3));
        s.push_str(&format!(
            "| Mayo {} | {:.3} | {:.3} | {:.3} | {} | {q} |\n",
            c.level - 1,
            c.precision,
            c.recall,
            c.f1,
            c.support
        ));
    }
    s
}

/// `cv`: full cross-validation with method comparison. Fails (after writing
/// the report) when any fold failed.
pub fn cv(ctx: &RunContext) -> Result<CvReport> {
    ctx.config.eval()?;
    ctx.config.regressor()?;
    let dataset = ctx.load_dataset()?;
    let dir = ctx.stage(CV_DIR, "cv")?;
    let report = run_cross_validation(&dataset, &ctx.config, Some(&dir))?;
    if !report.all_ok {
        let failed = report.results.iter().filter(|r| !r.ok()).count();
        return Err(CsdaError::Domain(format!(
            "{failed} fold/method runs failed; see {}",
            dir.join("report.md").display()
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleDiagnostics {
    pub latent_id: u64,
    pub levels: usize,
    pub dim: usize,
    pub order_loss: f64,
    pub linearity_residual: f64,
}

/// `style`: order loss and linearity residual of StyleSets read from JSON
/// (a single set or an array of sets).
pub fn style_diagnostics(path: &Path) -> Result<Vec<StyleDiagnostics>> {
    let text = std::fs::read_to_string(path).map_err(|e| CsdaError::io(path, e))?;
    let sets: Vec<StyleSet> = match serde_json::from_str::<Vec<StyleSet>>(&text) {
        Ok(v) => v,
        Err(_) => vec![serde_json::from_str::<StyleSet>(&text).map_err(|e| CsdaError::load(path, e))?],
    };
    sets.iter()
        .map(|s| {
            s.validate()?;
            Ok(StyleDiagnostics {
                latent_id: s.latent_id,
                levels: s.levels(),
                dim: s.dim(),
                order_loss: order_loss(std::slice::from_ref(s))?,
                linearity_residual: linearity_residual(s)?,
            })
        })
        .collect()
}
