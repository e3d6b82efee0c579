use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use modmirror::floquet::{sideband_spectrum, Truncation};
use modmirror::lindblad::{steady_sidebands, DephasingModel};
use modmirror::scene::TWO_PI;
use modmirror::sweep::map_sequential;
use modmirror::{mhz_to_angular, DriveConfig, EmitterParams, ModulationConfig, Scene, WaveguideArray};

fn scene() -> Scene {
    let e = EmitterParams::new(mhz_to_angular(6000.0), mhz_to_angular(4.4), mhz_to_angular(4.1))
        .with_modulation(mhz_to_angular(30.0), 0.0);
    Scene::new(
        WaveguideArray::new(vec![e, e], PI / 2.0),
        DriveConfig::new(mhz_to_angular(6000.0), mhz_to_angular(0.5)),
        ModulationConfig::new(mhz_to_angular(20.0)),
    )
}

fn floquet_cell(s: &Scene, idx: usize) -> f64 {
    let alpha = TWO_PI * (idx / 32) as f64 / 16.0;
    let det = mhz_to_angular(-60.0 + 120.0 * (idx % 32) as f64 / 31.0);
    let sp = sideband_spectrum(&s.with_mod_phase(1, alpha).with_detuning(det), Truncation::Fixed(12)).unwrap();
    sp.t(-1).norm_sqr()
}

fn lindblad_cell(s: &Scene, idx: usize) -> f64 {
    let det = mhz_to_angular(-20.0 + 40.0 * idx as f64 / 7.0);
    steady_sidebands(&s.with_mod_phase(1, PI).with_detuning(det), 1, DephasingModel::PureDephasing)
        .unwrap()
        .r(-1)
        .norm_sqr()
}

fn bench(c: &mut Criterion) {
    let s = scene();
    let mut g = c.benchmark_group("floquet_map_16x32");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| black_box(map_sequential(512, |i| floquet_cell(&s, i)))));
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| {
        b.iter(|| black_box(modmirror::sweep::map_parallel(512, |i| floquet_cell(&s, i))))
    });
    g.finish();

    let mut g = c.benchmark_group("lindblad_cut_8");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| black_box(map_sequential(8, |i| lindblad_cell(&s, i)))));
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| {
        b.iter(|| black_box(modmirror::sweep::map_parallel(8, |i| lindblad_cell(&s, i))))
    });
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
