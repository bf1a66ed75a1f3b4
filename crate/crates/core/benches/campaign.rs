//! Sequential vs rayon: the 2018 scripted campaign and schedule sweeps.
//!
//! `cargo bench -p fomcsim-core`. With `--no-default-features` the
//! "parallel" rows fall back to the sequential path.

use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fomcsim_core::campaign::run_campaign;
use fomcsim_core::config::RunConfig;
use fomcsim_core::engine::schedule::{schedule_stats, schedule_stats_sequential};

fn campaign(c: &mut Criterion) {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/2018/campaign.toml");
    let out = tempfile::tempdir().unwrap();
    let mut config = RunConfig::load(&fixtures).unwrap();
    config.output_dir = out.path().to_path_buf();
    let mut group = c.benchmark_group("campaign_8_meetings");
    group.sample_size(10);
    for threads in [1, 2, 4, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| black_box(run_campaign(&config, t).unwrap()))
        });
    }
    group.finish();
}

fn schedules(c: &mut Criterion) {
    let mut group = c.benchmark_group("schedule_stats_5x3");
    for seeds in [1_000u64, 10_000] {
        group.bench_with_input(BenchmarkId::new("sequential", seeds), &seeds, |b, &n| {
            b.iter(|| black_box(schedule_stats_sequential(0..n, 5, 3, true)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", seeds), &seeds, |b, &n| {
            b.iter(|| black_box(schedule_stats(0..n, 5, 3, true)))
        });
    }
    group.finish();
}

criterion_group!(benches, campaign, schedules);
criterion_main!(benches);
