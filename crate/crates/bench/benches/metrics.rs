use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use urbanscope::harness::jsd;
use urbanscope::swft::{compute_weights, flag_anomalies, LossRecord, DEFAULT_RATIO_QUANTILE};

fn metrics(c: &mut Criterion) {
    let p: Vec<f64> = (0..21).map(|i| (i * 7 % 5) as f64).collect();
    let q: Vec<f64> = (0..21).map(|i| (i % 3 + 1) as f64).collect();
    c.bench_function("jsd/21_bins", |b| b.iter(|| jsd(black_box(&p), black_box(&q)).unwrap()));

    let records: Vec<LossRecord> = (0..86_543)
        .map(|i| {
            let base = 1.0 + (i % 97) as f64 / 50.0;
            LossRecord { id: format!("s{i}"), base_loss: base, warm_loss: base * (0.4 + (i % 13) as f64 / 30.0) }
        })
        .collect();
    c.bench_function("swft/weights_86k", |b| b.iter(|| compute_weights(black_box(&records)).unwrap()));
    c.bench_function("swft/anomalies_86k", |b| b.iter(|| flag_anomalies(black_box(&records), DEFAULT_RATIO_QUANTILE).unwrap()));
}

criterion_group!(benches, metrics);
criterion_main!(benches);
