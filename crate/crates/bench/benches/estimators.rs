//! Per-bin cost of each CDR estimator on a full spectrum of coherence values.

use std::hint::black_box;

use cdr_core::coherence::{mix_coherence, model_diffuse, model_plane_wave, tdoa_from_doa, DEFAULT_SOUND_SPEED};
use cdr_core::enhancement::DEFAULT_MIC_DISTANCE;
use cdr_core::filterbank::FilterbankConfig;
use cdr_core::Estimator;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn estimators(c: &mut Criterion) {
    let freqs = FilterbankConfig::default().frequencies();
    let tdoa = tdoa_from_doa(30f64.to_radians(), DEFAULT_MIC_DISTANCE, DEFAULT_SOUND_SPEED);
    let gamma_s = model_plane_wave(tdoa, &freqs);
    let gamma_n = model_diffuse(DEFAULT_MIC_DISTANCE, &freqs, DEFAULT_SOUND_SPEED);
    let gamma_x: Vec<_> = gamma_s
        .iter()
        .zip(&gamma_n)
        .enumerate()
        .map(|(k, (&s, &n))| mix_coherence(10f64.powf((k % 41) as f64 / 10.0 - 2.0), s, n))
        .collect();
    let mut group = c.benchmark_group("estimator_spectrum");
    group.throughput(Throughput::Elements(freqs.len() as u64));
    for est in Estimator::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(est.id()), &est, |b, &est| {
            b.iter(|| {
                let mut acc = 0.0;
                for k in 0..freqs.len() {
                    acc += est.evaluate(black_box(gamma_x[k]), gamma_s[k], gamma_n[k]).unwrap_or(0.0);
                }
                acc
            })
        });
    }
    group.finish();
}

criterion_group!(benches, estimators);
criterion_main!(benches);
