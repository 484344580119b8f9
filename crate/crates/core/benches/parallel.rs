//! Sequential vs parallel hot loops. Inside one build the sequential side is a
//! one-thread rayon pool; with `--no-default-features` every loop is a plain
//! iterator, which can be compared through saved baselines.

use aqedc_core::aqedc::{kl_gamma, CodeBasis, OperatorSource};
use aqedc_core::magnon::{magnon_scaling_experiment, Representation};
use aqedc_core::noise::{exhaustive_pauli_channel, haar_code_state, monte_carlo_detect, SupportMode};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn workloads() -> Vec<(&'static str, Box<dyn Fn() + Send + Sync>)> {
    let basis = CodeBasis::from_magnon(64, &[0, 2], Representation::Transfer).unwrap();
    let channel = exhaustive_pauli_channel(32, 1, SupportMode::Arbitrary, true).unwrap();
    let small = CodeBasis::from_magnon(32, &[0, 2], Representation::Transfer).unwrap();
    let c = haar_code_state(2, 0);
    vec![
        (
            "kl_gamma_n64_d2",
            Box::new(move || {
                kl_gamma(&basis, 2, OperatorSource::Sampled { count: 64, seed: 1 }).unwrap();
            }),
        ),
        (
            "monte_carlo_n32",
            Box::new(move || {
                monte_carlo_detect(&small, &channel, &c, 20_000, 3).unwrap();
            }),
        ),
        (
            "magnon_scan_0_2",
            Box::new(|| {
                magnon_scaling_experiment(0, 2, 2, &[32, 64, 128, 256], 1).unwrap();
            }),
        ),
    ]
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("hot_loops");
    group.sample_size(10);
    for (name, work) in workloads() {
        #[cfg(feature = "parallel")]
        {
            let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            group.bench_function(BenchmarkId::new("sequential", name), |b| {
                b.iter(|| single.install(&work))
            });
            group.bench_function(BenchmarkId::new("parallel", name), |b| b.iter(&work));
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_function(BenchmarkId::new("fallback", name), |b| b.iter(&work));
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
