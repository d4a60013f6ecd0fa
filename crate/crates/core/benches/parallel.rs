use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use editflow::alignment::align_worst_case;
use editflow::model::PredictionCache;
use editflow::paths::sample_zt;
use editflow::sampler::run_many;
use editflow::toy::ToyPreset;
use editflow::training::{loss_and_grad, Example};
use editflow::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [
    ("parallel", Exec::Parallel),
    ("sequential", Exec::Sequential),
];

fn toy_batch(preset: &ToyPreset, size: usize) -> Vec<Example> {
    let words = preset.words().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..size)
        .map(|_| {
            let pair = align_worst_case(&words[rng.gen_range(0..16)], &words[rng.gen_range(0..16)])
                .unwrap();
            let t = rng.gen_range(0.0..0.999);
            sample_zt(&pair, t, &preset.train.scheduler, &mut rng)
                .unwrap()
                .into()
        })
        .collect()
}

fn loss(c: &mut Criterion) {
    let preset = ToyPreset::new(0);
    let params = preset.init_params().unwrap();
    let batch = toy_batch(&preset, 512);
    let mut group = c.benchmark_group("loss_and_grad_512");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| loss_and_grad(black_box(&params), &batch, exec).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let preset = ToyPreset::new(0);
    let cache = PredictionCache::new(&preset.init_params().unwrap(), Exec::Parallel).unwrap();
    let words = preset.words().unwrap();
    let cfg = preset.sampler(1);
    let mut group = c.benchmark_group("gillespie_2000_runs");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                run_many(
                    &cache,
                    None,
                    &|i| words[i % 16].clone(),
                    &cfg,
                    2000,
                    0,
                    false,
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, loss, sampling);
criterion_main!(benches);
