use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csda_core::csgan::{generator_step, ArchConfig, CsGan, GanSample, LatentCode, LossWeights};
use csda_core::data::{synthetic_pixels, Dataset, DatasetConfig};
use csda_core::parallel::{self, set_parallelism, Parallelism};
use csda_core::regressor::{RegressionModel, RegressorArch};
use std::hint::black_box;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("rayon", Parallelism::Rayon)];

fn gan_batch(c: &mut Criterion) {
    let model = CsGan::new(ArchConfig::default(), 0);
    let x = synthetic_pixels(2.5, 1, 64, 4).unwrap();
    let batch: Vec<GanSample> = (0..8)
        .map(|i| GanSample {
            image_index: 0,
            level: 1 + i % 4,
            target: 1 + (i + 1) % 4,
            z1: LatentCode::sample(8, 0, i as u64).z,
            z2: LatentCode::sample(8, 1, i as u64).z,
        })
        .collect();
    let w = LossWeights {
        adv: 1.0,
        sty: 1.0,
        ds: 1.0,
        cyc: 1.0,
        order: 1.0,
    };
    let mut group = c.benchmark_group("gan_generator_batch8");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_parallelism(mode);
            b.iter(|| parallel::map_slice(&batch, |s| black_box(generator_step(&model, &x, s, &w))))
        });
    }
    group.finish();
}

fn regressor_forward(c: &mut Criterion) {
    let model = RegressionModel::new(RegressorArch::default(), 2.0, 0);
    let images: Vec<_> = (0..64).map(|i| synthetic_pixels(1.0 + (i % 7) as f64 * 0.5, i, 64, 4).unwrap()).collect();
    let mut group = c.benchmark_group("regressor_forward_batch64");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_parallelism(mode);
            b.iter(|| parallel::map_slice(&images, |x| black_box(model.predict(x))))
        });
    }
    group.finish();
}

fn dataset_build(c: &mut Criterion) {
    let cfg = DatasetConfig {
        counts: vec![40, 30, 20, 10],
        subjects: 10,
        image_size: 64,
        seed: 0,
    };
    let mut group = c.benchmark_group("dataset_build_100");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_parallelism(mode);
            b.iter(|| black_box(Dataset::build(&cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, gan_batch, regressor_forward, dataset_build);
criterion_main!(benches);
