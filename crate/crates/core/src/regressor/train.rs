use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::losses::{combine_losses, listnet_topone_grad, listnet_topone_loss};
use super::model::{RegressionModel, RegressorArch};
use super::Method;
use crate::data::{classic_augment, oversample_balance, LabeledImage};
use crate::error::{config, domain, CsdaError, Result};
use crate::evalkit::evaluate_outputs;
use crate::fsutil::{read_json, write_csv, write_json};
use crate::nn::{Adam, AdamConfig, Tensor3};
use crate::{parallel, rng};

pub const TRAIN_LOG_HEADER: &str = "epoch,train_mse,train_rank,val_mse,val_f1";
const LIST_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda_rank: f64,
    /// Choose `lambda_rank` from `lambda_grid` by validation macro-F1.
    pub select_lambda: bool,
    pub lambda_grid: Vec<f64>,
    pub list_size: usize,
    /// Ranking lists added to each optimisation step.
    pub lists_per_step: usize,
    pub temperature: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub mode: Method,
    pub arch: RegressorArch,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_rank: 1.0,
            select_lambda: false,
            lambda_grid: vec![0.1, 0.5, 1.0, 2.0],
            list_size: 8,
            lists_per_step: 8,
            temperature: 1.0,
            lr: 1e-4,
            batch_size: 64,
            patience: 20,
            max_epochs: 200,
            mode: Method::Baseline,
            arch: RegressorArch::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas_ok = std::iter::once(&self.lambda_rank)
            .chain(&self.lambda_grid)
            .all(|l| l.is_finite() && *l >= 0.0);
        if !lambdas_ok || (self.select_lambda && self.lambda_grid.is_empty()) {
            return config("lambda_rank and lambda_grid must be finite, non-negative and non-empty");
        }
        if self.list_size < 2 {
            return config(format!("list_size must be at least 2, got {}", self.list_size));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) || !(self.lr > 0.0 && self.lr.is_finite()) {
            return config("temperature and lr must be positive");
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 || self.lists_per_step == 0 {
            return config("batch_size, patience, max_epochs and lists_per_step must be positive");
        }
        Ok(())
    }
}

/// An image with a (possibly real-valued) level, used only through ranking lists.
#[derive(Debug, Clone, Copy)]
pub struct RankItem<'a> {
    pub pixels: &'a Tensor3,
    pub level: f64,
}

/// Partition a seeded shuffle into lists of `k`, dropping the remainder.
/// A list holding a single distinct level is redrawn from the whole pool.
pub fn make_ranking_lists(levels: &[f64], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return config(format!("list size must be at least 2, got {k}"));
    }
    if levels.len() < k {
        return config(format!("{} ranking items cannot fill a list of {k}", levels.len()));
    }
    let distinct = |list: &[usize]| list.iter().any(|&i| levels[i] != levels[list[0]]);
    let mut r = rng::rng_for(seed, "ranking-lists", 0);
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.shuffle(&mut r);
    let mut lists: Vec<Vec<usize>> = order.chunks_exact(k).map(<[usize]>::to_vec).collect();
    for list in &mut lists {
        let mut tries = 0;
        while !distinct(list) {
            if tries == LIST_RETRIES {
                return config(format!("could not draw a list of {k} with two distinct levels in {LIST_RETRIES} tries"));
            }
            *list = sample(&mut r, levels.len(), k).into_vec();
            tries += 1;
        }
    }
    Ok(lists)
}

/// `mse(real) + λ · mean ListNet(lists)` evaluated with `model`.
pub fn combined_objective(
    model: &RegressionModel,
    real: &[(&Tensor3, f64)],
    lists: &[Vec<RankItem<'_>>],
    lambda_rank: f64,
    temperature: f64,
) -> Result<f64> {
    let mse = if real.is_empty() {
        None
    } else {
        let preds: Vec<f64> = real.iter().map(|(x, _)| model.predict(x)).collect();
        let labels: Vec<f64> = real.iter().map(|(_, y)| *y).collect();
        Some(super::mse_loss(&preds, &labels)?)
    };
    let rank = lists
        .iter()
        .map(|list| {
            let scores: Vec<f64> = list.iter().map(|it| model.predict(it.pixels)).collect();
            let targets: Vec<f64> = list.iter().map(|it| it.level).collect();
            listnet_topone_loss(&scores, &targets, temperature)
        })
        .collect::<Result<Vec<_>>>()?;
    combine_losses(mse, &rank, lambda_rank)
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Record an epoch's validation loss. Returns whether it is the new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        match self.best {
            Some((_, b)) if loss >= b => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, loss));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_mse: f64,
    /// Empty for methods without a ranking term.
    pub train_rank: Option<f64>,
    pub val_mse: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedRegressor {
    pub model: RegressionModel,
    pub log: Vec<EpochRow>,
    pub best_epoch: usize,
    pub lambda_rank: f64,
    /// `(λ, best validation macro-F1)` for every candidate when λ was selected.
    pub lambda_search: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressorCheckpoint {
    pub format: String,
    pub config: TrainConfig,
    pub levels: usize,
    pub lambda_rank: f64,
    pub best_epoch: usize,
    pub model: RegressionModel,
}

const CHECKPOINT_FORMAT: &str = "csda-regressor/1";

pub fn save_regressor(path: &Path, trained: &TrainedRegressor, cfg: &TrainConfig, levels: usize) -> Result<()> {
    write_json(
        path,
        &RegressorCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            config: cfg.clone(),
            levels,
            lambda_rank: trained.lambda_rank,
            best_epoch: trained.best_epoch,
            model: trained.model.clone(),
        },
    )
}

pub fn load_regressor(path: &Path) -> Result<RegressorCheckpoint> {
    let ck: RegressorCheckpoint = read_json(path)?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(CsdaError::load(path, format!("unexpected format {:?}", ck.format)));
    }
    let expected = RegressionModel::new(ck.model.arch, 0.0, 0).params.len();
    if ck.model.params.len() != expected || ck.model.params.iter().any(|v| !v.is_finite()) {
        return Err(CsdaError::load(path, "parameter block is malformed"));
    }
    Ok(ck)
}

/// Trains `f`, selecting `lambda_rank` on validation macro-F1 when configured.
/// With `log_dir`, each candidate's epoch log is written as CSV.
pub fn train_regressor(
    train: &[&LabeledImage],
    ranking: &[RankItem<'_>],
    val: &[&LabeledImage],
    levels: usize,
    cfg: &TrainConfig,
    log_dir: Option<&Path>,
) -> Result<TrainedRegressor> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return config("training and validation sets must be non-empty");
    }
    if cfg.mode.uses_ranking() && ranking.len() < cfg.list_size {
        return config(format!(
            "method {} needs at least {} ranking items, got {}",
            cfg.mode,
            cfg.list_size,
            ranking.len()
        ));
    }
    let candidates = if cfg.select_lambda && cfg.mode.uses_ranking() {
        cfg.lambda_grid.clone()
    } else {
        vec![cfg.lambda_rank]
    };
    let mut best: Option<TrainedRegressor> = None;
    let mut search = Vec::new();
    for &lambda in &candidates {
        let run = train_once(train, ranking, val, levels, cfg, lambda)?;
        if let Some(dir) = log_dir {
            let name = if candidates.len() == 1 {
                "train_log.csv".to_string()
            } else {
                format!("train_log_lambda_{lambda}.csv")
            };
            write_csv(&dir.join(name), &run.log)?;
        }
        let f1 = run.log[run.best_epoch - 1].val_f1;
        search.push((lambda, f1));
        let better = best.as_ref().is_none_or(|b| f1 > b.log[b.best_epoch - 1].val_f1);
        if better {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one candidate");
    if candidates.len() > 1 {
        best.lambda_search = search;
    }
    Ok(best)
}

fn train_once(
    train: &[&LabeledImage],
    ranking: &[RankItem<'_>],
    val: &[&LabeledImage],
    levels: usize,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<TrainedRegressor> {
    let first = &train[0].pixels;
    cfg.arch.validate(first.h)?;
    let use_rank = cfg.mode.uses_ranking() && lambda > 0.0;
    let classic = cfg.mode == Method::ClassicDa;
    let mean_label = train.iter().map(|im| im.label as f64).sum::<f64>() / train.len() as f64;
    let mut model = RegressionModel::new(cfg.arch, mean_label, rng::derive_tagged(cfg.seed, "regressor-init", 0));
    let n_params = model.params.len();
    let mut adam = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        n_params,
    );
    let rank_levels: Vec<f64> = ranking.iter().map(|r| r.level).collect();
    let val_labels: Vec<usize> = val.iter().map(|im| im.label).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params.clone();
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let epoch_seed = rng::derive_tagged(cfg.seed, "regressor-epoch", epoch as u64);
        let order = oversample_balance(train, |im| im.label, levels, epoch_seed)?;
        let (mut sum_mse, mut sum_rank, mut steps) = (0.0, 0.0, 0usize);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let step_seed = rng::derive(epoch_seed, step as u64);
            let real = parallel::map_range(batch.len(), |i| {
                let im = batch[i];
                let aug;
                let x = if classic {
                    aug = classic_augment(&im.pixels, rng::derive(step_seed, i as u64));
                    &aug
                } else {
                    &im.pixels
                };
                let (pred, cache) = model.forward(x);
                let err = pred - im.label as f64;
                let mut g = vec![0.0; n_params];
                model.backward(&cache, 2.0 * err / batch.len() as f64, &mut g);
                (err * err, g)
            });
            let mse = real.iter().map(|r| r.0).sum::<f64>() / batch.len() as f64;
            let mut grad = crate::nn::reduce_grads(real.into_iter().map(|r| r.1), n_params, 1.0);

            if use_rank {
                let lists = make_ranking_lists(&rank_levels, cfg.list_size, step_seed)?;
                let lists = &lists[..cfg.lists_per_step.min(lists.len())];
                let flat: Vec<usize> = lists.iter().flatten().copied().collect();
                let fwd = parallel::map_slice(&flat, |&i| model.forward(ranking[i].pixels));
                let mut dscore = vec![0.0; flat.len()];
                let mut rank_total = 0.0;
                for (li, list) in lists.iter().enumerate() {
                    let off = li * cfg.list_size;
                    let scores: Vec<f64> = fwd[off..off + list.len()].iter().map(|f| f.0).collect();
                    let (loss, g) = listnet_topone_grad(&scores, &list.iter().map(|&i| rank_levels[i]).collect::<Vec<_>>(), cfg.temperature)?;
                    rank_total += loss;
                    for (j, gj) in g.into_iter().enumerate() {
                        dscore[off + j] = lambda * gj / lists.len() as f64;
                    }
                }
                let parts = parallel::map_range(flat.len(), |j| {
                    let mut g = vec![0.0; n_params];
                    model.backward(&fwd[j].1, dscore[j], &mut g);
                    g
                });
                let rank_grad = crate::nn::reduce_grads(parts, n_params, 1.0);
                crate::nn::tensor::axpy(&mut grad, 1.0, &rank_grad);
                sum_rank += rank_total / lists.len() as f64;
            }
            if !mse.is_finite() || !sum_rank.is_finite() || grad.iter().any(|v| !v.is_finite()) {
                return Err(CsdaError::NonFinite {
                    step: epoch,
                    detail: format!("regressor loss diverged at epoch {epoch}, step {step} (mse {mse}, rank {sum_rank})"),
                    dump: None,
                });
            }
            adam.step(&mut model.params, &grad);
            sum_mse += mse;
            steps += 1;
        }

        let preds = parallel::map_slice(val, |im| model.predict(&im.pixels));
        let labels_f: Vec<f64> = val_labels.iter().map(|&l| l as f64).collect();
        let val_mse = super::mse_loss(&preds, &labels_f)?;
        if !val_mse.is_finite() {
            return domain(format!("validation loss is not finite at epoch {epoch}"));
        }
        let val_f1 = evaluate_outputs(&preds, &val_labels, levels)?.macro_f1;
        let row = EpochRow {
            epoch,
            train_mse: sum_mse / steps as f64,
            train_rank: use_rank.then(|| sum_rank / steps as f64),
            val_mse,
            val_f1,
        };
        log::debug!("epoch {epoch}: {row:?}");
        log.push(row);
        if stopper.observe(epoch, val_mse) {
            best_params.clone_from(&model.params);
        }
        if stopper.should_stop() {
            break;
        }
    }
    let (best_epoch, best_val) = stopper.best().expect("at least one epoch");
    log::info!(
        "{} (λ={lambda}): best epoch {best_epoch} of {}, val mse {best_val:.4}, val F1 {:.4}",
        cfg.mode,
        log.len(),
        log[best_epoch - 1].val_f1
    );
    model.params = best_params;
    Ok(TrainedRegressor {
        model,
        log,
        best_epoch,
        lambda_rank: lambda,
        lambda_search: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_list_examples() {
        let levels: Vec<f64> = (0..16).map(|i| (i % 4 + 1) as f64).collect();
        let lists = make_ranking_lists(&levels, 8, 3).unwrap();
        assert_eq!(lists.len(), 2);
        let mut all: Vec<usize> = lists.concat();
        all.sort_unstable();
        assert_eq!(all, (0..16).collect::<Vec<_>>());
        assert_eq!(make_ranking_lists(&levels, 8, 3).unwrap(), lists);
        assert!(make_ranking_lists(&[2.0; 16], 8, 0).unwrap_err().is_config());
        assert!(make_ranking_lists(&levels[..5], 8, 0).unwrap_err().is_config());
    }

    #[test]
    fn skewed_pools_still_yield_valid_lists() {
        let mut levels = vec![1.0; 200];
        levels[7] = 2.0;
        levels[150] = 3.0;
        for list in make_ranking_lists(&levels, 8, 1).unwrap() {
            assert!(list.iter().any(|&i| levels[i] != levels[list[0]]));
        }
    }

    #[test]
    fn early_stopping_semantics() {
        let mut s = EarlyStopping::new(1);
        assert!(s.observe(1, 1.0));
        assert!(!s.should_stop());
        assert!(!s.observe(2, 1.5));
        assert!(s.should_stop());
        assert_eq!(s.best(), Some((1, 1.0)));

        let mut s = EarlyStopping::new(3);
        for (e, v) in [(1, 3.0), (2, 2.0), (3, 2.0), (4, 1.0), (5, 1.1), (6, 1.2)] {
            s.observe(e, v);
        }
        assert_eq!((s.best(), s.should_stop()), (Some((4, 1.0)), false));
        s.observe(7, 1.0);
        assert!(s.should_stop());
    }
}
