//! Hot kernels. Run once with `--no-default-features` to record the
//! sequential baseline, then with default features to compare.

use std::hint::black_box;

use aasampling::estimation::{
    default_half_width, empirical_pcf, empirical_power_spectrum, monte_carlo_error_spectrum,
    predict_error_spectrum, TargetFunction,
};
use aasampling::imaging::{render, RenderConfig};
use aasampling::pointset::{generate_poisson_process, generate_random, Point};
use aasampling::radial::{hankel_transform, HankelMatrix, RadialFunction, RadialGrid, RadialSpectrum};
use criterion::{criterion_group, criterion_main, Criterion};

fn sets(count: usize, n: usize) -> Vec<Vec<Point>> {
    (0..count as u64).map(|s| generate_random(n, s).unwrap().into_points()).collect()
}

fn hankel(c: &mut Criterion) {
    let nu = RadialGrid::with_max(0.01, 10.0).unwrap();
    let r = RadialGrid::with_max(0.01, 20.0).unwrap();
    let f = RadialFunction::from_fn(nu, |x| (-x * x).exp());
    c.bench_function("hankel_transform 1001x2001", |b| b.iter(|| hankel_transform(black_box(&f), &r).unwrap()));
    c.bench_function("hankel_matrix 1001x2001", |b| b.iter(|| HankelMatrix::new(black_box(&nu), &r)));
}

fn estimators(c: &mut Criterion) {
    let data = sets(4, 1024);
    let refs: Vec<&[Point]> = data.iter().map(|s| s.as_slice()).collect();
    let m = default_half_width(1024);
    c.bench_function("power_spectrum 4x1024", |b| {
        b.iter(|| empirical_power_spectrum(black_box(&refs), m).unwrap())
    });
    let r = RadialGrid::with_max(0.01, 16.0).unwrap();
    c.bench_function("pcf 4x1024", |b| b.iter(|| empirical_pcf(black_box(&refs), &r, 0.1).unwrap()));
}

fn error_spectra(c: &mut Criterion) {
    let lambda = 1024.0;
    let m = default_half_width(1024);
    let spec = RadialSpectrum::step(RadialGrid::with_max(0.02, 10.0).unwrap(), 0.5);
    let gauss = TargetFunction::gaussian_blob(0.1).unwrap();
    c.bench_function("predict gaussian", |b| {
        b.iter(|| predict_error_spectrum(black_box(&spec), &gauss, lambda, m).unwrap())
    });
    let cos = TargetFunction::cosine(0.35, lambda).unwrap();
    c.bench_function("monte_carlo 16x1024", |b| {
        b.iter(|| {
            monte_carlo_error_spectrum(|i| generate_poisson_process(lambda, 1, i as u64), 16, &cos, lambda, m)
                .unwrap()
        })
    });
}

fn rendering(c: &mut Criterion) {
    let w = 128;
    let pts = generate_random(2 * w * w, 3).unwrap().into_points();
    let cfg = RenderConfig::new(TargetFunction::zone_plate_for_width(w).unwrap(), 2, w);
    c.bench_function("render zoneplate 128 2spp", |b| b.iter(|| render(black_box(&pts), &cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = hankel, estimators, error_spectra, rendering
}
criterion_main!(benches);
