use aasampling::estimation::*;
use aasampling::imaging::*;
use aasampling::pointset::*;
use aasampling::{RadialGrid, RadialSpectrum};
use proptest::prelude::*;

const LAMBDA: f64 = 256.0;
const M: usize = 24;

fn target_strategy() -> impl Strategy<Value = TargetFunction> {
    prop_oneof![
        (0.1f64..1.2).prop_map(|nu| TargetFunction::cosine(nu, LAMBDA).unwrap()),
        (0.1f64..1.2).prop_map(|nu| TargetFunction::stripes(nu, LAMBDA).unwrap()),
        (0.03f64..0.25).prop_map(|s| TargetFunction::gaussian_blob(s).unwrap()),
    ]
}

fn spectrum_strategy() -> impl Strategy<Value = RadialSpectrum> {
    // P in [0, 3] on a short grid; F = P - 1
    proptest::collection::vec(0.0f64..3.0, 40).prop_map(|p| {
        let grid = RadialGrid::new(0.05, p.len()).unwrap();
        RadialSpectrum::new(grid, p.iter().map(|v| v - 1.0).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn error_is_bounded_by_peak(spec in spectrum_strategy(), target in target_strategy()) {
        let m = spec.power().into_iter().fold(1.0f64, f64::max);
        let e = predict_error_spectrum(&spec, &target, LAMBDA, M).unwrap();
        let bound = m / LAMBDA * target.energy();
        for v in e.spectrum.values() {
            prop_assert!(*v <= bound * (1.0 + 1e-12) + 1e-15, "{v} > {bound}");
            prop_assert!(*v >= -1e-15);
        }
    }

    #[test]
    fn step_never_exceeds_random(nu0 in 0.2f64..1.0, target in target_strategy()) {
        let grid = RadialGrid::with_max(0.02, 4.0).unwrap();
        let rnd = predict_error_spectrum(&RadialSpectrum::white(grid), &target, LAMBDA, M).unwrap();
        let stp = predict_error_spectrum(&RadialSpectrum::step(grid, nu0), &target, LAMBDA, M).unwrap();
        for (a, b) in stp.spectrum.values().iter().zip(rnd.spectrum.values()) {
            prop_assert!(*a <= *b + 1e-15);
        }
    }

    #[test]
    fn monte_carlo_spectrum_is_conjugate_symmetric(seed in 0u64..1000, target in target_strategy()) {
        let e = monte_carlo_error_spectrum(
            |i| generate_poisson_process(LAMBDA, seed, i as u64), 3, &target, LAMBDA, 10).unwrap();
        for (k1, k2, v) in e.spectrum.iter() {
            prop_assert_eq!(v, e.spectrum.get(-k1, -k2));
        }
    }

    #[test]
    fn band_energy_ignores_cyclic_shifts(seed in 0u64..1000, dx in 0usize..16, dy in 0usize..16) {
        let w = 16;
        let target = TargetFunction::gaussian_blob(0.15).unwrap();
        let cfg = RenderConfig::new(target.clone(), 1, w);
        let img = render(generate_random(w * w, seed).unwrap().points(), &cfg).unwrap();
        let reference = reference_image(&target, w, cfg.filter_sigma_px).unwrap();
        let shift = |im: &Image| {
            let mut out = vec![0.0; w * w];
            for y in 0..w {
                for x in 0..w {
                    out[((y + dy) % w) * w + (x + dx) % w] = im.get(x, y);
                }
            }
            Image::new(w, out).unwrap()
        };
        for (lo, hi) in [(0.0, 0.2), (0.2, 0.5)] {
            let a = band_energy(&img, &reference, lo, hi).unwrap();
            let b = band_energy(&shift(&img), &shift(&reference), lo, hi).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{a} vs {b}");
        }
    }
}

#[test]
fn band_limited_target_has_no_error_under_step() {
    let grid = RadialGrid::with_max(0.01, 4.0).unwrap();
    // 3 cycles at lambda 256 is nu_c = 0.1875; step at 0.8 leaves |k| <= 9 clean
    let target = TargetFunction::cosine(0.1875, LAMBDA).unwrap();
    let e = predict_error_spectrum(&RadialSpectrum::step(grid, 0.8), &target, LAMBDA, M).unwrap();
    for (k1, k2, v) in e.spectrum.iter() {
        if ((k1 * k1 + k2 * k2) as f64).sqrt() + 3.0 <= 0.8 * 16.0 - 0.5 {
            assert!(v.abs() <= 1e-12, "E({k1}, {k2}) = {v}");
        }
    }
}

#[test]
fn integration_variance_matches_monte_carlo() {
    let target = TargetFunction::stripes(0.3, LAMBDA).unwrap();
    let predicted = integration_variance(&RadialSpectrum::white(RadialGrid::with_max(0.05, 4.0).unwrap()), &target, LAMBDA).unwrap();
    let exact = target.coefficient(0, 0).re;
    let runs = 1000;
    let sq: Vec<f64> = (0..runs)
        .map(|i| {
            let pts = generate_poisson_process(LAMBDA, 8, i).unwrap();
            (pts.iter().map(|p| target.eval(*p)).sum::<f64>() / LAMBDA - exact).powi(2)
        })
        .collect();
    let var = sq.iter().sum::<f64>() / runs as f64;
    let se = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (runs * (runs - 1)) as f64).sqrt();
    assert!((var - predicted).abs() <= 3.0 * se, "mc {var} predicted {predicted} se {se}");
}

#[test]
fn unbiased_render_averages_to_the_reference() {
    let w = 16;
    let target = TargetFunction::gaussian_blob(0.2).unwrap();
    let cfg = RenderConfig::new(target.clone(), 1, w);
    let reference = reference_image(&target, w, cfg.filter_sigma_px).unwrap();
    let runs = 200;
    let mut sum = vec![0.0; w * w];
    let mut sq = vec![0.0; w * w];
    for seed in 0..runs {
        let img = render(generate_random(w * w, 1000 + seed).unwrap().points(), &cfg).unwrap();
        for (i, v) in img.pixels.iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    let n = runs as f64;
    let mut outside = 0;
    for i in 0..w * w {
        let mean = sum[i] / n;
        let se = ((sq[i] / n - mean * mean) * n / (n - 1.0) / n).sqrt();
        if (mean - reference.pixels[i]).abs() > 3.0 * se {
            outside += 1;
        }
    }
    // about 0.3% of 256 pixels exceed 3 standard errors by chance
    assert!(outside <= 6, "{outside} pixels outside 3 SE");
}
