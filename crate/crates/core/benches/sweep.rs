use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gmviterbi::bound::build_product_trellis_with;
use gmviterbi::harness::{channel_at_snr, simulate_point};
use gmviterbi::{ChannelParams, Execution, ExperimentConfig, RhoMode, SignalMap, Trellis};

fn config(ar: Vec<f64>) -> ExperimentConfig {
    let ch = ChannelParams::new(
        1,
        ar,
        SignalMap::Linear {
            weights: vec![2.0, 1.0],
            scale: 1.0,
        },
        vec![1.0, 2.0, 3.0, 4.0],
    )
    .unwrap();
    ExperimentConfig::new(ch)
}

fn modes() -> Vec<(&'static str, Execution)> {
    vec![
        ("sequential", Execution::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Execution::Parallel),
    ]
}

fn product_trellis(c: &mut Criterion) {
    let mut group = c.benchmark_group("product_trellis_16_states");
    let cfg = config(vec![0.1, 0.3, 0.5]);
    let params = channel_at_snr(&cfg, 20.0).unwrap();
    let trellis = Trellis::new(&params);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_product_trellis_with(black_box(&trellis), RhoMode::Optimized, exec))
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo_8_states");
    group.sample_size(10);
    let mut cfg = config(vec![0.1, 0.5]);
    cfg.workers = 4;
    cfg.block_bits = 50_000;
    cfg.payload_bits = 200_000;
    cfg.min_error_events = u64::MAX;
    let params = channel_at_snr(&cfg, 17.0).unwrap();
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate_point(black_box(&params), &cfg, 0, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, product_trellis, monte_carlo);
criterion_main!(benches);
