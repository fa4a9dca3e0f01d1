use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use hrnet_core::model::{hrnet_forward, ArchConfig, ModelParams};
use hrnet_core::{Backend, Eager, Padding, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Arc::new(Tensor::<f32>::uniform([1, 32, 64, 64], 0.0, 1.0, &mut rng));
    let w = Arc::new(Tensor::<f32>::uniform([32, 32, 3, 3], -0.1, 0.1, &mut rng));
    let b = Arc::new(Tensor::<f32>::zeros([32, 1, 1, 1]));
    c.bench_function("conv2d 32->32 3x3 64x64", |bench| {
        bench.iter(|| {
            let mut e = Eager::new();
            black_box(e.conv2d(&x, &w, &b, 1, Padding::Reflect).unwrap())
        })
    });
}

fn forward(c: &mut Criterion) {
    let params = ModelParams::<f32>::init(&ArchConfig::desk(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rgb = Tensor::<f32>::uniform([1, 3, 64, 64], 0.0, 1.0, &mut rng);
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    group.bench_function("desk 64x64", |bench| bench.iter(|| black_box(hrnet_forward(&rgb, &params).unwrap())));
    group.finish();
}

criterion_group!(benches, conv, forward);
criterion_main!(benches);
