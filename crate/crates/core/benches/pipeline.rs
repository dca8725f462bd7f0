//! Benchmarks comparing single-worker and multi-worker execution of the
//! data-parallel stages. With `--no-default-features` both columns run the
//! sequential path.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fieldmosaic_core::exec;
use fieldmosaic_core::geo::GeoTransform;
use fieldmosaic_core::refine::{morphological_refine, RefineParams};
use fieldmosaic_core::rng::Lcg64;
use fieldmosaic_core::synth::{generate_landscape, perturb_oracle, OracleNoise, SynthParams};
use fieldmosaic_core::tile::build_tile_plan;
use fieldmosaic_core::vectorize::trace_polygons;
use fieldmosaic_core::Mask;

fn landscape_2048() -> fieldmosaic_core::synth::SyntheticLandscape {
    let transform = GeoTransform::new(500_000.0, 5_600_000.0, 10.0, 10.0).unwrap();
    generate_landscape(
        17,
        &SynthParams {
            width: 2048,
            height: 2048,
            n_sites: 800,
            non_field_fraction: 0.1,
            transform,
            crs_epsg: 32635,
        },
    )
    .unwrap()
}

fn bench_refine_batch(c: &mut Criterion) {
    let params = RefineParams::default();
    let mut rng = Lcg64::new(3);
    let masks: Vec<Mask> = (0..2000)
        .map(|_| Mask::from_fn(64, 64, |_, _| rng.next_bool(0.6)))
        .collect();

    let mut group = c.benchmark_group("refine_batch_2000x64x64");
    for workers in [1usize, 0] {
        let name = if workers == 1 { "sequential" } else { "parallel" };
        group.bench_function(name, |b| {
            b.iter(|| {
                exec::with_workers(workers, || {
                    exec::map_indexed(&masks, |_, m| {
                        black_box(morphological_refine(m, &params)).area()
                    })
                })
            })
        });
    }
    group.finish();
}

fn bench_trace_labels(c: &mut Criterion) {
    let land = landscape_2048();

    let mut group = c.benchmark_group("trace_2048_800_fields");
    group.sample_size(10);
    for workers in [1usize, 0] {
        let name = if workers == 1 { "sequential" } else { "parallel" };
        group.bench_function(name, |b| {
            b.iter(|| {
                exec::with_workers(workers, || black_box(trace_polygons(&land.labels).unwrap()))
            })
        });
    }
    group.finish();
}

fn bench_oracle_tiles(c: &mut Criterion) {
    let land = landscape_2048();
    let plan = build_tile_plan(2048, 2048, 512, 128).unwrap();
    let noise = OracleNoise { merge_prob: 0.2, drop_prob: 0.0, jitter_px: 1 };

    let mut group = c.benchmark_group("oracle_25_tiles");
    group.sample_size(10);
    for workers in [1usize, 0] {
        let name = if workers == 1 { "sequential" } else { "parallel" };
        group.bench_function(name, |b| {
            b.iter(|| {
                exec::with_workers(workers, || {
                    black_box(perturb_oracle(&land.labels, &plan, noise, 9).unwrap()).len()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_refine_batch, bench_trace_labels, bench_oracle_tiles);
criterion_main!(benches);
