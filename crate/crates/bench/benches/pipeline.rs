//! Throughput of the filterbank and of the full dereverberation chain on one
//! second of two-channel audio.

use std::hint::black_box;

use cdr_core::coherence::{tdoa_from_doa, DEFAULT_SOUND_SPEED};
use cdr_core::enhancement::DEFAULT_MIC_DISTANCE;
use cdr_core::simulator::white_noise;
use cdr_core::{dereverberate, CdrMethod, Estimator, Filterbank, FilterbankConfig, PostfilterConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const SECOND: usize = 16000;

fn filterbank(c: &mut Criterion) {
    let fb = Filterbank::new(FilterbankConfig::default()).unwrap();
    let x = white_noise(SECOND, 0);
    let spec = fb.analyze(&x).unwrap();
    let mut group = c.benchmark_group("filterbank");
    group.throughput(Throughput::Elements(SECOND as u64));
    group.bench_function("analyze", |b| b.iter(|| fb.analyze(black_box(&x)).unwrap()));
    group.bench_function("synthesize", |b| b.iter(|| fb.synthesize(black_box(&spec)).unwrap()));
    group.finish();
}

fn dereverb(c: &mut Criterion) {
    let x1 = white_noise(SECOND, 1);
    let x2 = white_noise(SECOND, 2);
    let fb_cfg = FilterbankConfig::default();
    let tdoa = tdoa_from_doa(30f64.to_radians(), DEFAULT_MIC_DISTANCE, DEFAULT_SOUND_SPEED);
    let mut group = c.benchmark_group("dereverberate");
    group.throughput(Throughput::Elements(SECOND as u64));
    group.sample_size(20);
    for est in [Estimator::Prop3, Estimator::Prop2, Estimator::Jeub] {
        let method = CdrMethod::new(est, est.requires_tdoa().then_some(tdoa)).unwrap();
        let cfg = PostfilterConfig::with_method(method);
        group.bench_with_input(BenchmarkId::from_parameter(est.id()), &cfg, |b, cfg| {
            b.iter(|| dereverberate(black_box(&x1), black_box(&x2), cfg, &fb_cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, filterbank, dereverb);
criterion_main!(benches);
