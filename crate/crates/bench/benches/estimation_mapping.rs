use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Vector3;
use std::hint::black_box;

use wavenav_core::bki::{decomposed_kernel, sparse_kernel, MapVariant};
use wavenav_core::config::RunConfig;
use wavenav_core::disturbance::{DisturbanceTable, WaveSchedule};
use wavenav_core::pipeline;
use wavenav_core::sim::PathSpec;
use wavenav_core::ukf::{predict, update_dvl, SigmaParams};

fn short_run() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenario.path = PathSpec::straight(4.0, 0.2);
    cfg.scenario.waves = WaveSchedule::default();
    cfg
}

fn filter_steps(c: &mut Criterion) {
    let cfg = short_run();
    let belief = pipeline::initial_belief(&cfg).unwrap();
    let noise = cfg.process_noise();
    let params = SigmaParams::default();
    let r = cfg.estimator.sensors.dvl_cov();
    let profile = DisturbanceTable::wave_tank().rows[0].profile();
    let z = Vector3::new(0.2, 0.0, 0.0);
    c.bench_function("ukf predict", |b| {
        b.iter(|| predict(black_box(&belief), 0.02, &noise, &params).unwrap())
    });
    c.bench_function("ukf dvl update", |b| {
        b.iter(|| update_dvl(black_box(&belief), &z, &r, &profile, &params).unwrap())
    });
}

fn kernels(c: &mut Criterion) {
    let l = Vector3::new(0.15, 0.15, 0.06);
    let d = Vector3::new(0.03, -0.05, 0.01);
    c.bench_function("sparse kernel", |b| {
        b.iter(|| sparse_kernel(black_box(0.07), 0.15, 0.9))
    });
    c.bench_function("decomposed kernel", |b| {
        b.iter(|| decomposed_kernel(black_box(&d), &l, 0.9))
    });
}

fn estimation_and_mapping(c: &mut Criterion) {
    let cfg = short_run();
    let sim = pipeline::simulate(&cfg).unwrap();
    let run = pipeline::estimate(&cfg, &sim.samples).unwrap();
    let mut g = c.benchmark_group("short run");
    g.sample_size(10);
    g.bench_function("estimate", |b| {
        b.iter(|| pipeline::estimate(&cfg, black_box(&sim.samples)).unwrap())
    });
    for variant in [MapVariant::Csm, MapVariant::Bki, MapVariant::AdaptiveBki] {
        let mut cfg = cfg.clone();
        cfg.mapping.variant = variant;
        g.bench_function(format!("map {variant:?}"), |b| {
            b.iter(|| pipeline::build(&cfg, black_box(&run.beliefs), &sim.samples).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, filter_steps, kernels, estimation_and_mapping);
criterion_main!(benches);
