use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use qpolar::polarize::{sample_path, synthesize_all, SynthesisParams};
use qpolar::sim::OutputSampler;
use qpolar::{gn_multiply, transform_minus, transform_plus, ScDecoder};
use qpolar_bench::{fig1_channel, fig1_construction, wide_channel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform");
    let small = fig1_channel();
    group.bench_function("minus_r2", |b| {
        b.iter(|| transform_minus(black_box(&small)).unwrap())
    });
    group.bench_function("plus_r2", |b| {
        b.iter(|| transform_plus(black_box(&small)).unwrap())
    });
    let wide = wide_channel();
    group.sample_size(20);
    group.bench_function("minus_r6", |b| {
        b.iter(|| transform_minus(black_box(&wide)).unwrap())
    });
    group.finish();
}

fn bench_synthesis(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthesize");
    group.sample_size(10);
    let w = fig1_channel();
    let params = SynthesisParams::default();
    group.bench_function("fig1_depth8", |b| {
        b.iter(|| synthesize_all(black_box(&w), 8, &params).unwrap())
    });
    group.bench_function("fig1_path_depth16", |b| {
        b.iter(|| sample_path(black_box(&w), 16, 1, 0, &params).unwrap())
    });
    group.finish();
}

fn bench_encoder(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u: Vec<usize> = (0..4096).map(|_| rng.random_range(0..4)).collect();
    c.bench_function("gn_multiply_n4096_q4", |b| {
        b.iter(|| gn_multiply(black_box(&u), 2).unwrap())
    });
}

fn bench_decoder(c: &mut Criterion) {
    let (w, construction) = fig1_construction(8);
    let sampler = OutputSampler::new(&w);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    c.bench_function("sc_decode_n256_q4", |b| {
        b.iter_batched(
            || {
                let bits: Vec<u8> = (0..construction.rate_bits())
                    .map(|_| rng.random_range(0..2u8))
                    .collect();
                let (_, x) = qpolar::encode(&construction, &bits).unwrap();
                x.iter().map(|&sym| sampler.sample(sym, &mut rng)).collect::<Vec<_>>()
            },
            |y| {
                let mut dec = ScDecoder::new_unchecked(&w, &construction);
                dec.decode(black_box(&y)).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_transforms,
    bench_synthesis,
    bench_encoder,
    bench_decoder
);
criterion_main!(benches);
