use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::losses::{
    adversarial_loss, cycle_loss, diversity_loss, mean_abs_diff, style_reconstruction_loss, Side,
};
use super::{save_checkpoint, CsGan, GanConfig};
use crate::data::LabeledImage;
use crate::error::{config, CsdaError, Result};
use crate::fsutil::{create_dir, write_csv, write_json};
use crate::nn::ops::{sigmoid, softplus};
use crate::nn::{reduce_grads, Adam, AdamConfig, Tensor3};
use crate::stylespace::{order_loss, order_loss_flat_grad, StyleSet};
use crate::{parallel, rng};

pub const LOSS_LOG_HEADER: &str = "iter,adv_d,adv_g,sty,ds,cyc,order";

/// One element of a training batch: a real image at `level`, a target level
/// different from it, and two latent codes.
#[derive(Debug, Clone, Serialize)]
pub struct GanSample {
    pub image_index: usize,
    pub level: usize,
    pub target: usize,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub adv: f64,
    pub sty: f64,
    pub ds: f64,
    pub cyc: f64,
    pub order: f64,
}

impl LossWeights {
    pub fn from_config(cfg: &GanConfig, iter: usize) -> Self {
        Self {
            adv: 1.0,
            sty: cfg.lambda_sty,
            ds: cfg.lambda_ds_at(iter),
            cyc: cfg.lambda_cyc,
            order: cfg.lambda_order,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GeneratorLosses {
    pub adv_g: f64,
    pub sty: f64,
    pub ds: f64,
    pub cyc: f64,
    pub order: f64,
}

impl GeneratorLosses {
    pub fn total(&self, w: &LossWeights) -> f64 {
        w.adv * self.adv_g + w.sty * self.sty + w.ds * self.ds + w.cyc * self.cyc + w.order * self.order
    }

    fn is_finite(&self) -> bool {
        [self.adv_g, self.sty, self.ds, self.cyc, self.order].iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorGrads {
    pub mapping: Vec<f64>,
    pub generator: Vec<f64>,
    pub encoder: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRow {
    pub iter: usize,
    pub adv_d: f64,
    pub adv_g: f64,
    pub sty: f64,
    pub ds: f64,
    pub cyc: f64,
    pub order: f64,
}

fn level_block(flat: &[f64], level: usize, d: usize) -> &[f64] {
    &flat[(level - 1) * d..level * d]
}

fn add_block(dst: &mut [f64], level: usize, d: usize, src: &[f64]) {
    for (a, b) in dst[(level - 1) * d..level * d].iter_mut().zip(src) {
        *a += b;
    }
}

/// `weight * d/da mean|a − b|`.
fn l1_grad(a: &[f64], b: &[f64], weight: f64) -> Vec<f64> {
    let n = a.len() as f64;
    a.iter().zip(b).map(|(x, y)| weight * (x - y).signum() / n).collect()
}

/// Discriminator loss of one sample and its gradient with respect to D's parameters.
pub fn discriminator_step(model: &CsGan, x: &Tensor3, s: &GanSample) -> (f64, Vec<f64>) {
    let d = model.arch.style_dim;
    let styles = model.mapping.styles(&s.z1);
    let fake = model.generator.generate(x, level_block(&styles, s.target, d));
    let disc = &model.discriminator.0;
    let (real_all, real_cache) = disc.forward(x);
    let (fake_all, fake_cache) = disc.forward(&fake);
    let (lr, lf) = (real_all[s.level - 1], fake_all[s.target - 1]);
    let loss = adversarial_loss(lr, lf, Side::Discriminator);
    let mut g = vec![0.0; disc.params.len()];
    disc.backward_head(&real_cache, s.level, &[-sigmoid(-lr)], Some(&mut g), false);
    disc.backward_head(&fake_cache, s.target, &[sigmoid(lf)], Some(&mut g), false);
    (loss, g)
}

/// Reference evaluation of [`discriminator_step`]'s loss.
pub fn discriminator_objective(model: &CsGan, x: &Tensor3, s: &GanSample) -> f64 {
    let d = model.arch.style_dim;
    let styles = model.mapping.styles(&s.z1);
    let fake = model.generator.generate(x, level_block(&styles, s.target, d));
    adversarial_loss(
        model.discriminator.logit(x, s.level),
        model.discriminator.logit(&fake, s.target),
        Side::Discriminator,
    )
}

/// Generator-side losses of one sample and the gradient of their weighted
/// sum with respect to F, G and E.
///
/// Every term's value is computed; terms with zero weight skip their backward pass.
pub fn generator_step(model: &CsGan, x: &Tensor3, s: &GanSample, w: &LossWeights) -> (GeneratorLosses, GeneratorGrads) {
    let levels = model.arch.levels;
    let d = model.arch.style_dim;
    let (f_net, g_net, e_net, d_net) = (&model.mapping, &model.generator, &model.encoder.0, &model.discriminator.0);
    let mut grads = GeneratorGrads {
        mapping: vec![0.0; f_net.params.len()],
        generator: vec![0.0; g_net.params.len()],
        encoder: vec![0.0; e_net.params.len()],
    };
    let mut losses = GeneratorLosses::default();

    let (flat1, map1) = f_net.forward(&s.z1);
    let (flat2, map2) = f_net.forward(&s.z2);
    let s1 = level_block(&flat1, s.target, d).to_vec();
    let s2 = level_block(&flat2, s.target, d).to_vec();
    let mut dflat1 = vec![0.0; flat1.len()];
    let mut dflat2 = vec![0.0; flat2.len()];

    let (fake1, gen1) = g_net.forward(x, &s1);
    let mut dfake1 = fake1.zeros_like();

    // adversarial
    let (logits, dcache) = d_net.forward(&fake1);
    let l = logits[s.target - 1];
    losses.adv_g = softplus(-l);
    if w.adv != 0.0 {
        let dx = d_net
            .backward_head(&dcache, s.target, &[-w.adv * sigmoid(-l)], None, true)
            .expect("input gradient");
        dfake1.add_assign(&dx);
    }

    // style reconstruction
    let (est_all, ecache) = e_net.forward(&fake1);
    let est = e_net.head(&est_all, s.target);
    losses.sty = mean_abs_diff(est, &s1);
    if w.sty != 0.0 {
        let dest = l1_grad(est, &s1, w.sty);
        let dx = e_net
            .backward_head(&ecache, s.target, &dest, Some(&mut grads.encoder), true)
            .expect("input gradient");
        dfake1.add_assign(&dx);
        let neg: Vec<f64> = dest.iter().map(|v| -v).collect();
        add_block(&mut dflat1, s.target, d, &neg);
    }

    // diversity
    let (fake2, gen2) = g_net.forward(x, &s2);
    losses.ds = -mean_abs_diff(&fake1.data, &fake2.data);
    if w.ds != 0.0 {
        let dpos = l1_grad(&fake1.data, &fake2.data, -w.ds);
        let dneg: Vec<f64> = dpos.iter().map(|v| -v).collect();
        crate::nn::tensor::axpy(&mut dfake1.data, 1.0, &dpos);
        let dfake2 = Tensor3::from_vec(fake2.c, fake2.h, fake2.w, dneg);
        let (_, ds2) = g_net.backward(&gen2, &dfake2, Some(&mut grads.generator), false);
        add_block(&mut dflat2, s.target, d, &ds2);
    }

    // cycle consistency, with the way back styled by E(x, y)
    let (back_all, bcache) = e_net.forward(x);
    let s_back = e_net.head(&back_all, s.level).to_vec();
    let (rec, gen_rec) = g_net.forward(&fake1, &s_back);
    losses.cyc = mean_abs_diff(&rec.data, &x.data);
    if w.cyc != 0.0 {
        let drec = Tensor3::from_vec(rec.c, rec.h, rec.w, l1_grad(&rec.data, &x.data, w.cyc));
        let (dx, dsb) = g_net.backward(&gen_rec, &drec, Some(&mut grads.generator), true);
        dfake1.add_assign(&dx.expect("input gradient"));
        e_net.backward_head(&bcache, s.level, &dsb, Some(&mut grads.encoder), false);
    }

    // order loss; only F sees it
    let (ord, dord) = order_loss_flat_grad(&flat1, levels, w.order);
    losses.order = ord;
    if w.order != 0.0 {
        crate::nn::tensor::axpy(&mut dflat1, 1.0, &dord);
    }

    let (_, ds1) = g_net.backward(&gen1, &dfake1, Some(&mut grads.generator), false);
    add_block(&mut dflat1, s.target, d, &ds1);
    f_net.backward(&map1, &dflat1, Some(&mut grads.mapping));
    f_net.backward(&map2, &dflat2, Some(&mut grads.mapping));
    (losses, grads)
}

/// Reference evaluation of [`generator_step`]'s weighted objective, built from the loss definitions.
pub fn generator_objective(model: &CsGan, x: &Tensor3, s: &GanSample, w: &LossWeights) -> f64 {
    let levels = model.arch.levels;
    let d = model.arch.style_dim;
    let flat1 = model.mapping.styles(&s.z1);
    let flat2 = model.mapping.styles(&s.z2);
    let s1 = level_block(&flat1, s.target, d);
    let s2 = level_block(&flat2, s.target, d);
    let fake = model.generator.generate(x, s1);
    let losses = GeneratorLosses {
        adv_g: adversarial_loss(0.0, model.discriminator.logit(&fake, s.target), Side::Generator),
        sty: style_reconstruction_loss(&model.encoder, &fake, s.target, s1),
        ds: diversity_loss(&model.generator, x, s1, s2),
        cyc: cycle_loss(&model.generator, x, s1, &model.encoder.encode(x, s.level)),
        order: order_loss(&[StyleSet::from_flat(&flat1, levels, 0)]).expect("at least 3 levels"),
    };
    losses.total(w)
}

fn sample_batch(images_by_level: &[Vec<usize>], cfg: &GanConfig, latent_dim: usize, iter: usize) -> Vec<GanSample> {
    let levels = images_by_level.len();
    let mut r = rng::rng_for(cfg.seed, "gan-batch", iter as u64);
    (0..cfg.batch_size)
        .map(|_| {
            let level = r.random_range(1..=levels);
            let members = &images_by_level[level - 1];
            let image_index = members[r.random_range(0..members.len())];
            let mut target = r.random_range(1..levels);
            if target >= level {
                target += 1;
            }
            let mut normal = || -> Vec<f64> { (0..latent_dim).map(|_| StandardNormal.sample(&mut r)).collect() };
            let z1 = normal();
            let z2 = normal();
            GanSample {
                image_index,
                level,
                target,
                z1,
                z2,
            }
        })
        .collect()
}

pub struct TrainedGan {
    pub model: CsGan,
    pub log: Vec<LossRow>,
}

#[derive(Serialize)]
struct NonFiniteDump<'a> {
    iteration: usize,
    phase: &'a str,
    image_ids: Vec<&'a str>,
    samples: &'a [GanSample],
    adv_d: Vec<f64>,
    generator_losses: Vec<GeneratorLosses>,
}

/// Alternating D / (G, F, E) optimisation.
///
/// Real batches draw a level uniformly and then an image of that level, so
/// every discriminator head sees real images despite class imbalance. When
/// `out_dir` is given, checkpoints, the loss log and the final model are
/// written there.
pub fn train_csgan(images: &[LabeledImage], levels: usize, cfg: &GanConfig, out_dir: Option<&Path>) -> Result<TrainedGan> {
    cfg.validate()?;
    let first = images.first().ok_or_else(|| CsdaError::Config("no training images".into()))?;
    let arch = cfg.arch(first.pixels.h, levels);
    arch.validate()?;
    let mut by_level = vec![Vec::new(); levels];
    for (i, im) in images.iter().enumerate() {
        if im.label == 0 || im.label > levels {
            return config(format!("label {} outside 1..={levels}", im.label));
        }
        if im.pixels.shape() != (3, arch.image_size, arch.image_size) {
            return config(format!("image {} has shape {:?}", im.image_id, im.pixels.shape()));
        }
        by_level[im.label - 1].push(i);
    }
    if let Some(l) = by_level.iter().position(Vec::is_empty) {
        return config(format!("no training images at level {}", l + 1));
    }
    if let Some(dir) = out_dir {
        create_dir(&dir.join("checkpoints"))?;
    }

    let mut model = CsGan::new(arch, cfg.seed);
    let adam = |lr: f64, n: usize| {
        Adam::new(
            AdamConfig {
                lr,
                beta1: cfg.beta1,
                beta2: cfg.beta2,
                eps: 1e-8,
            },
            n,
        )
    };
    let mut opt_d = adam(cfg.lr, model.discriminator.0.params.len());
    let mut opt_g = adam(cfg.lr, model.generator.params.len());
    let mut opt_e = adam(cfg.lr, model.encoder.0.params.len());
    let mut opt_f = adam(cfg.f_lr, model.mapping.params.len());
    let inv_b = 1.0 / cfg.batch_size as f64;
    let mut log = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let batch = sample_batch(&by_level, cfg, arch.latent_dim, iter);

        let d_parts = parallel::map_slice(&batch, |s| discriminator_step(&model, &images[s.image_index].pixels, s));
        let adv_d: Vec<f64> = d_parts.iter().map(|p| p.0).collect();
        let n_d = model.discriminator.0.params.len();
        let grad_d = reduce_grads(d_parts.into_iter().map(|p| p.1), n_d, inv_b);
        if adv_d.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(out_dir, iter, "discriminator", images, &batch, adv_d, Vec::new()));
        }
        opt_d.step(&mut model.discriminator.0.params, &grad_d);

        let weights = LossWeights::from_config(cfg, iter);
        let g_parts = parallel::map_slice(&batch, |s| generator_step(&model, &images[s.image_index].pixels, s, &weights));
        let g_losses: Vec<GeneratorLosses> = g_parts.iter().map(|p| p.0).collect();
        if g_losses.iter().any(|l| !l.is_finite()) {
            return Err(non_finite(out_dir, iter, "generator", images, &batch, adv_d, g_losses));
        }
        let mut gf = vec![0.0; model.mapping.params.len()];
        let mut gg = vec![0.0; model.generator.params.len()];
        let mut ge = vec![0.0; model.encoder.0.params.len()];
        for (_, part) in g_parts {
            crate::nn::tensor::axpy(&mut gf, inv_b, &part.mapping);
            crate::nn::tensor::axpy(&mut gg, inv_b, &part.generator);
            crate::nn::tensor::axpy(&mut ge, inv_b, &part.encoder);
        }
        opt_f.step(&mut model.mapping.params, &gf);
        opt_g.step(&mut model.generator.params, &gg);
        opt_e.step(&mut model.encoder.0.params, &ge);

        let mean = |f: &dyn Fn(&GeneratorLosses) -> f64| g_losses.iter().map(f).sum::<f64>() * inv_b;
        let row = LossRow {
            iter,
            adv_d: adv_d.iter().sum::<f64>() * inv_b,
            adv_g: mean(&|l| l.adv_g),
            sty: mean(&|l| l.sty),
            ds: mean(&|l| l.ds),
            cyc: mean(&|l| l.cyc),
            order: mean(&|l| l.order),
        };
        if iter % 250 == 0 || iter + 1 == cfg.iterations {
            log::info!(
                "gan iter {iter}: adv_d {:.4} adv_g {:.4} sty {:.4} ds {:.4} cyc {:.4} order {:.4}",
                row.adv_d,
                row.adv_g,
                row.sty,
                row.ds,
                row.cyc,
                row.order
            );
        }
        log.push(row);

        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 && iter + 1 < cfg.iterations {
                save_checkpoint(
                    &dir.join("checkpoints").join(format!("iter_{:06}.json", iter + 1)),
                    &model,
                    cfg,
                    iter + 1,
                )?;
            }
        }
    }

    if let Some(dir) = out_dir {
        save_checkpoint(&dir.join("csgan.json"), &model, cfg, cfg.iterations)?;
        write_csv(&dir.join("loss_log.csv"), &log)?;
    }
    Ok(TrainedGan { model, log })
}

fn non_finite(
    out_dir: Option<&Path>,
    iteration: usize,
    phase: &str,
    images: &[LabeledImage],
    batch: &[GanSample],
    adv_d: Vec<f64>,
    generator_losses: Vec<GeneratorLosses>,
) -> CsdaError {
    let dump = NonFiniteDump {
        iteration,
        phase,
        image_ids: batch.iter().map(|s| images[s.image_index].image_id.as_str()).collect(),
        samples: batch,
        adv_d,
        generator_losses,
    };
    let detail = format!(
        "{phase} loss diverged; batch images {:?}",
        dump.image_ids
    );
    let path = out_dir.map(|d| d.join(format!("nonfinite_iter_{iteration:06}.json")));
    let written = path.filter(|p| write_json(p, &dump).is_ok());
    log::error!("{detail}");
    CsdaError::NonFinite {
        step: iteration,
        detail,
        dump: written,
    }
}
