use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_outputs, paired_t_test, MetricsReport, TTest};
use crate::augmentor::{build_augmented_dataset, AugmentConfig, GeneratedSample};
use crate::config::ExperimentConfig;
use crate::csgan::{train_csgan, CsGan};
use crate::data::{split_subject_disjoint, Dataset, LabeledImage};
use crate::error::Result;
use crate::fsutil::{write_csv, write_json, write_new};
use crate::regressor::{save_regressor, train_regressor, Method, RankItem, RegressionModel, TrainedRegressor};
use crate::{parallel, rng};

/// Outcome of one method on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub method: Method,
    /// `None` on success, otherwise the failure message.
    pub error: Option<String>,
    pub metrics: Option<MetricsReport>,
    pub best_epoch: Option<usize>,
    pub lambda_rank: Option<f64>,
}

impl FoldResult {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

fn mean_sd(v: &[f64]) -> MeanSd {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanSd { mean, sd }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub label: String,
    pub folds_ok: usize,
    pub precision: Option<MeanSd>,
    pub recall: Option<MeanSd>,
    pub f1: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Method,
    pub b: Method,
    /// Paired t-test on per-fold macro-F1, `a − b`.
    pub test: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: ExperimentConfig,
    pub folds: Vec<usize>,
    pub results: Vec<FoldResult>,
    pub summary: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
    pub all_ok: bool,
}

impl CvReport {
    pub fn summary_for(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == m)
    }

    pub fn comparison(&self, a: Method, b: Method) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }

    /// Per-fold macro-F1 of `m`, in fold order; failed folds are skipped.
    pub fn fold_f1(&self, m: Method) -> Vec<f64> {
        self.results
            .iter()
            .filter(|r| r.method == m)
            .filter_map(|r| r.metrics.as_ref().map(|x| x.macro_f1))
            .collect()
    }
}

/// Ranking items for a method: none, the real training images, or generated images.
pub fn ranking_pool<'a>(method: Method, train: &[&'a LabeledImage], generated: &'a [GeneratedSample]) -> Vec<RankItem<'a>> {
    match method {
        Method::Baseline | Method::ClassicDa => Vec::new(),
        Method::CdaNoGan => train
            .iter()
            .map(|im| RankItem {
                pixels: &im.pixels,
                level: im.label as f64,
            })
            .collect(),
        Method::Cda(_) => generated
            .iter()
            .map(|g| RankItem {
                pixels: &g.pixels,
                level: g.y_prime,
            })
            .collect(),
    }
}

/// Raw outputs of `model` on `images`, then quantised metrics and quartiles.
pub fn evaluate_model(model: &RegressionModel, images: &[&LabeledImage], levels: usize) -> Result<(Vec<f64>, MetricsReport)> {
    let outputs = parallel::map_slice(images, |im| model.predict(&im.pixels));
    let truth: Vec<usize> = images.iter().map(|im| im.label).collect();
    let report = evaluate_outputs(&outputs, &truth, levels)?;
    Ok((outputs, report))
}

#[derive(Serialize)]
struct QuartileRow {
    fold: usize,
    method: String,
    level: usize,
    mayo: usize,
    q1: f64,
    median: f64,
    q3: f64,
}

#[derive(Serialize)]
struct CurveRow {
    fold: usize,
    method: String,
    epoch: usize,
    train_mse: f64,
    train_rank: Option<f64>,
    val_mse: f64,
    val_f1: f64,
}

#[derive(Default)]
struct PlotData {
    quartiles: Vec<QuartileRow>,
    curves: Vec<CurveRow>,
}

impl PlotData {
    fn add(&mut self, fold: usize, method: Method, metrics: &MetricsReport, trained: &TrainedRegressor) {
        for (i, q) in metrics.quartiles.iter().enumerate() {
            if let Some(q) = q {
                self.quartiles.push(QuartileRow {
                    fold,
                    method: method.to_string(),
                    level: i + 1,
                    mayo: i,
                    q1: q.q1,
                    median: q.median,
                    q3: q.q3,
                });
            }
        }
        for r in &trained.log {
            self.curves.push(CurveRow {
                fold,
                method: method.to_string(),
                epoch: r.epoch,
                train_mse: r.train_mse,
                train_rank: r.train_rank,
                val_mse: r.val_mse,
                val_f1: r.val_f1,
            });
        }
    }
}

fn failed(fold: usize, method: Method, msg: String) -> FoldResult {
    log::error!("fold {fold}, {method}: {msg}");
    FoldResult {
        fold,
        method,
        error: Some(msg),
        metrics: None,
        best_epoch: None,
        lambda_rank: None,
    }
}

/// Split, optionally train a csGAN and augment, train every method and test.
/// All methods of a fold share the split and the regressor initialisation seed.
fn run_fold(
    dataset: &Dataset,
    exp: &ExperimentConfig,
    fold: usize,
    out_dir: Option<&Path>,
    plots: &mut PlotData,
) -> Result<Vec<FoldResult>> {
    let eval = exp.eval()?;
    let levels = dataset.info.levels;
    let f = eval.fractions;
    let split = split_subject_disjoint(&dataset.manifest, (f[0], f[1], f[2]), fold, eval.seed)?;
    let (tr, va, te) = split.indices(&dataset.manifest);
    let pick = |idx: &[usize]| idx.iter().map(|&i| &dataset.images[i]).collect::<Vec<_>>();
    let (train, val, test) = (pick(&tr), pick(&va), pick(&te));
    let fold_dir = out_dir.map(|d| d.join(format!("fold{fold}")));
    if let Some(d) = &fold_dir {
        write_json(&d.join("split.json"), &split)?;
    }

    let epsilons: Vec<f64> = eval
        .methods
        .iter()
        .filter_map(|m| if let Method::Cda(e) = m { Some(*e) } else { None })
        .collect();
    let mut generated: BTreeMap<String, Vec<GeneratedSample>> = BTreeMap::new();
    if !epsilons.is_empty() {
        let mut gan_cfg = exp.gan()?.clone();
        gan_cfg.seed = rng::derive_tagged(gan_cfg.seed, "fold", fold as u64);
        let owned: Vec<LabeledImage> = train.iter().map(|im| (*im).clone()).collect();
        let gan = train_csgan(&owned, levels, &gan_cfg, fold_dir.as_ref().map(|d| d.join("gan")).as_deref())?;
        let model: CsGan = gan.model;
        let base = exp.augment.clone().unwrap_or_default();
        for &eps in &epsilons {
            let cfg = AugmentConfig {
                epsilon: eps,
                seed: rng::derive_tagged(base.seed, "fold", fold as u64),
                ..base.clone()
            };
            generated.insert(eps.to_string(), build_augmented_dataset(&model, &owned, &cfg)?);
        }
    }

    let reg_base = exp.regressor()?;
    let mut results = Vec::new();
    for &method in &eval.methods {
        let mut cfg = reg_base.clone();
        cfg.mode = method;
        cfg.seed = rng::derive_tagged(reg_base.seed, "fold", fold as u64);
        let gen_slice: &[GeneratedSample] = match method {
            Method::Cda(e) => &generated[&e.to_string()],
            _ => &[],
        };
        let pool = ranking_pool(method, &train, gen_slice);
        let method_dir = fold_dir.as_ref().map(|d| d.join(method.to_string()));
        let outcome = train_regressor(&train, &pool, &val, levels, &cfg, method_dir.as_deref()).and_then(|trained| {
            if let Some(d) = &method_dir {
                save_regressor(&d.join("model.json"), &trained, &cfg, levels)?;
            }
            let (_, metrics) = evaluate_model(&trained.model, &test, levels)?;
            Ok((trained, metrics))
        });
        results.push(match outcome {
            Ok((trained, metrics)) => {
                log::info!("fold {fold}, {method}: test macro-F1 {:.4}", metrics.macro_f1);
                plots.add(fold, method, &metrics, &trained);
                FoldResult {
                    fold,
                    method,
                    error: None,
                    metrics: Some(metrics),
                    best_epoch: Some(trained.best_epoch),
                    lambda_rank: method.uses_ranking().then_some(trained.lambda_rank),
                }
            }
            Err(e) => failed(fold, method, e.to_string()),
        });
    }
    Ok(results)
}

/// Cross-validation over folds `0..eval.folds`. A failing fold is recorded
/// in the report rather than aborting the run; check [`CvReport::all_ok`].
pub fn run_cross_validation(dataset: &Dataset, exp: &ExperimentConfig, out_dir: Option<&Path>) -> Result<CvReport> {
    let eval = exp.eval()?;
    exp.regressor()?;
    let folds: Vec<usize> = (0..eval.folds).collect();
    let mut plots = PlotData::default();
    let mut results = Vec::new();
    for &fold in &folds {
        match run_fold(dataset, exp, fold, out_dir, &mut plots) {
            Ok(r) => results.extend(r),
            Err(e) => {
                let msg = e.to_string();
                results.extend(eval.methods.iter().map(|&m| failed(fold, m, msg.clone())));
            }
        }
    }

    let summary: Vec<MethodSummary> = eval
        .methods
        .iter()
        .map(|&m| {
            let ok: Vec<&MetricsReport> =
                results.iter().filter(|r| r.method == m).filter_map(|r| r.metrics.as_ref()).collect();
            let stat = |f: fn(&MetricsReport) -> f64| {
                (!ok.is_empty()).then(|| mean_sd(&ok.iter().map(|r| f(r)).collect::<Vec<_>>()))
            };
            MethodSummary {
                method: m,
                label: m.label(),
                folds_ok: ok.len(),
                precision: stat(|r| r.macro_precision),
                recall: stat(|r| r.macro_recall),
                f1: stat(|r| r.macro_f1),
            }
        })
        .collect();

    let mut report = CvReport {
        config: exp.clone(),
        folds,
        all_ok: results.iter().all(FoldResult::ok),
        results,
        summary,
        comparisons: Vec::new(),
    };
    for (i, &a) in eval.methods.iter().enumerate() {
        for &b in &eval.methods[i + 1..] {
            let (fa, fb) = (report.fold_f1(a), report.fold_f1(b));
            if fa.len() == report.folds.len() && fb.len() == fa.len() && fa.len() >= 2 {
                report.comparisons.push(Comparison {
                    a,
                    b,
                    test: paired_t_test(&fa, &fb)?,
                });
            }
        }
    }

    if let Some(dir) = out_dir {
        write_json(&dir.join("report.json"), &report)?;
        write_new(&dir.join("report.md"), render_markdown(&report).as_bytes())?;
        write_csv(&dir.join("quartiles.csv"), &plots.quartiles)?;
        write_csv(&dir.join("loss_curves.csv"), &plots.curves)?;
    }
    Ok(report)
}

fn fmt_ms(v: &Option<MeanSd>) -> String {
    v.as_ref().map_or("failed".into(), |m| format!("{:.3} ± {:.3}", m.mean, m.sd))
}

fn fmt_t(t: f64) -> String {
    if t.is_infinite() {
        if t > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{t:.3}")
    }
}

/// Human-readable summary. `*` marks a macro-F1 significantly different
/// (paired t-test, p < 0.05) from the first listed method.
pub fn render_markdown(r: &CvReport) -> String {
    let mut s = String::new();
    let reference = r.summary.first().map(|m| m.method);
    let _ = writeln!(s, "# Cross-validation report\n");
    let _ = writeln!(s, "Folds: {:?}. All folds succeeded: {}.\n", r.folds, r.all_ok);
    let _ = writeln!(s, "| Method | Precision | Recall | F1 | Folds ok |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for m in &r.summary {
        let star = match reference {
            Some(ref_m) if ref_m != m.method => r
                .comparison(ref_m, m.method)
                .filter(|c| c.test.p < 0.05)
                .map_or("", |_| "*"),
            _ => "",
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {}{star} | {}/{} |",
            m.label,
            fmt_ms(&m.precision),
            fmt_ms(&m.recall),
            fmt_ms(&m.f1),
            m.folds_ok,
            r.folds.len()
        );
    }
    if let Some(ref_m) = reference {
        let _ = writeln!(s, "\n`*`: p < 0.05 in a paired t-test on per-fold macro-F1 against {}.", ref_m.label());
    }

    let _ = writeln!(s, "\n## Paired t-tests (macro-F1, a − b)\n");
    let _ = writeln!(s, "| a | b | t | p |");
    let _ = writeln!(s, "|---|---|---|---|");
    for c in &r.comparisons {
        let _ = writeln!(s, "| {} | {} | {} | {:.4} |", c.a.label(), c.b.label(), fmt_t(c.test.t), c.test.p);
    }

    let _ = writeln!(s, "\n## Per-fold macro-F1\n");
    let _ = writeln!(s, "| Fold | Method | Macro-F1 | Status |");
    let _ = writeln!(s, "|---|---|---|---|");
    for x in &r.results {
        let f1 = x.metrics.as_ref().map_or("-".into(), |m| format!("{:.4}", m.macro_f1));
        let status = x.error.as_deref().unwrap_or("ok");
        let _ = writeln!(s, "| {} | {} | {f1} | {status} |", x.fold, x.method.label());
    }

    let _ = writeln!(s, "\n## Per-class F1 (mean over successful folds)\n");
    let levels = r.results.iter().find_map(|x| x.metrics.as_ref()).map_or(0, |m| m.per_class.len());
    let header: Vec<String> = (0..levels).map(|l| format!("Mayo {l}")).collect();
    let _ = writeln!(s, "| Method | {} |", header.join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(levels));
    for m in &r.summary {
        let ok: Vec<&MetricsReport> =
            r.results.iter().filter(|x| x.method == m.method).filter_map(|x| x.metrics.as_ref()).collect();
        let cells: Vec<String> = (0..levels)
            .map(|l| {
                if ok.is_empty() {
                    "-".into()
                } else {
                    format!("{:.3}", ok.iter().map(|x| x.per_class[l].f1).sum::<f64>() / ok.len() as f64)
                }
            })
            .collect();
        let _ = writeln!(s, "| {} | {} |", m.label, cells.join(" | "));
    }
    s
}
