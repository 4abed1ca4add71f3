//! Parallel-vs-sequential benchmarks for the data-parallel hot loops:
//! bootstrap rating fits, Spearman matrices, synthetic generation, and
//! multiple imputation.
//!
//! With the default `parallel` feature the suite compares the rayon path
//! against the same call pinned to a single-thread pool; build with
//! `--no-default-features` to measure the true sequential fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use audit_core::impute::impute_missing;
use audit_core::judgment::{build_sample_matrix, JudgmentSet};
use audit_core::ranking::{bootstrap_ratings, BtOptions};
use audit_core::stats::spearman_matrix;
use audit_core::synth::{generate, SyntheticConfig};

fn bench_set() -> JudgmentSet {
    let config = SyntheticConfig {
        transitive_quality: Some((0..7).map(|m| 0.3 * m as f64).collect()),
        noise_sigma: 0.7,
        ..SyntheticConfig::separable(5, 120, 7, 99)
    };
    generate(&config).unwrap().0
}

fn sparse_set() -> JudgmentSet {
    let config = SyntheticConfig {
        missing_rate: 0.1,
        noise_sigma: 0.7,
        ..SyntheticConfig::separable(5, 120, 7, 55)
    };
    generate(&config).unwrap().0
}

/// Run `f` both on the default pool and pinned to one thread, so one
/// criterion report carries the comparison.
fn compare<F: Fn() + Sync>(c: &mut Criterion, group: &str, f: F) {
    let mut g = c.benchmark_group(group);
    #[cfg(feature = "parallel")]
    {
        g.bench_function("parallel", |b| b.iter(&f));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        g.bench_function("single_thread", |b| b.iter(|| pool.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function("sequential", |b| b.iter(&f));
    g.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let set = bench_set();
    compare(c, "bootstrap_ratings_50", || {
        black_box(
            bootstrap_ratings(&set, "model-00", 50, 7, &BtOptions::default()).unwrap(),
        );
    });
}

fn bench_spearman(c: &mut Criterion) {
    let set = bench_set();
    let sample = build_sample_matrix(&set).unwrap();
    compare(c, "spearman_matrix_720x5", || {
        black_box(spearman_matrix(&sample.factors).unwrap());
    });
}

fn bench_generate(c: &mut Criterion) {
    let config = SyntheticConfig::separable(5, 400, 6, 3);
    compare(c, "generate_2000", || {
        black_box(generate(&config).unwrap());
    });
}

fn bench_impute(c: &mut Criterion) {
    let set = sparse_set();
    compare(c, "impute_5x720", || {
        black_box(impute_missing(&set, 5, 1).unwrap());
    });
}

criterion_group!(
    benches,
    bench_bootstrap,
    bench_spearman,
    bench_generate,
    bench_impute
);
criterion_main!(benches);
