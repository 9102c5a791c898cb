use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use thw::dynamics::{evolve, EvolveOptions, FieldState};
use thw::grid::{Grid, Sector};
use thw::linop::{LinearizedOperators, Which};
use thw::solver::{solve_weinstein, WeinsteinOptions};
use thw::{ModelParams, WaveProfile};

fn params(n: usize) -> ModelParams {
    ModelParams::new(n, 0.5, 9.0, 3.0).unwrap()
}

fn wave(n: usize, grid: std::sync::Arc<Grid>) -> WaveProfile {
    let p = params(n);
    solve_weinstein(grid, &p, &WeinsteinOptions::default()).unwrap().rescale_to_physical(&p).unwrap()
}

fn laplacian(c: &mut Criterion) {
    let mut g = c.benchmark_group("laplacian");
    for (label, grid) in [
        ("periodic_1d_1024", Grid::periodic(1, 1024, 24.0).unwrap()),
        ("periodic_2d_128", Grid::periodic(2, 128, 24.0).unwrap()),
        ("radial_3d_192", Grid::radial_spectral(3, 192, 20.0).unwrap()),
    ] {
        let f: Vec<f64> = grid.radii().iter().map(|r| (-r * r).exp()).collect();
        g.bench_function(label, |b| b.iter(|| grid.laplacian(black_box(&f))));
    }
    g.finish();
}

fn weinstein(c: &mut Criterion) {
    let mut g = c.benchmark_group("weinstein");
    g.sample_size(10);
    g.bench_function("periodic_1d_512", |b| b.iter(|| wave(1, Grid::periodic(1, 512, 20.0).unwrap())));
    g.bench_function("radial_3d_192", |b| b.iter(|| wave(3, Grid::radial_spectral(3, 192, 20.0).unwrap())));
    g.finish();
}

fn split_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("split_step");
    g.sample_size(10);
    let opts = EvolveOptions { t_end: 0.01, dt: 1e-3, sample_every: 0.01, ..EvolveOptions::default() };
    for (label, n, grid) in [
        ("periodic_1d_1024", 1, Grid::periodic(1, 1024, 24.0).unwrap()),
        ("graded_3d", 3, Grid::radial_graded(3, 20.0, 2e-5, 0.02).unwrap()),
    ] {
        let w = wave(n, grid);
        let s = FieldState::from_wave(&w).unwrap();
        g.bench_function(label, |b| b.iter(|| evolve(&mut s.clone(), &opts).unwrap()));
    }
    g.finish();
}

fn dense_eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense_eigen");
    g.sample_size(10);
    let w = wave(3, Grid::radial_spectral(3, 192, 20.0).unwrap());
    let ops = LinearizedOperators::new(&w);
    g.bench_function("l_plus_radial_3d_192", |b| {
        b.iter(|| ops.spectrum(Which::Plus, Sector::Angular(0), 4, None).unwrap())
    });
    g.finish();
}

criterion_group!(benches, laplacian, weinstein, split_step, dense_eigen);
criterion_main!(benches);
