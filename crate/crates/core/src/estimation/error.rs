use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fourier::{exponential_sums, fft2, fft_index};
use super::{accumulate, Binning, RadialProfile, Spectrum2D, TargetFunction};
use crate::error::{Error, Result};
use crate::pointset::Point;
use crate::radial::RadialSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Predicted,
    MonteCarlo,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Predicted => "predicted",
            ErrorKind::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSpectrum2D {
    pub spectrum: Spectrum2D,
    pub kind: ErrorKind,
}

/// Direct sums are used while `window * support` stays below this.
const DIRECT_LIMIT: usize = 50_000_000;

/// `E(k) = (1/λ) Σ_q P_t(q) (F(|k - q| / √λ) + 1)` with `λ = n_points`.
///
/// The `+1` part sums to `‖t‖²` by Parseval, so only the support of `F`
/// (the spectrum grid) has to be visited.
pub fn predict_error_spectrum(
    spectrum: &RadialSpectrum,
    target: &TargetFunction,
    n_points: f64,
    m: usize,
) -> Result<ErrorSpectrum2D> {
    if !(n_points > 0.0) {
        return Err(Error::InvalidInput(format!("intensity must be positive, got {n_points}")));
    }
    if let Some(h) = dense_half(target) {
        if m as i64 >= h {
            return Err(Error::InvalidInput(format!(
                "window half-width {m} exceeds the target's dense grid ({h})"
            )));
        }
    }
    let sq = n_points.sqrt();
    let reach = (spectrum.grid().max() * sq).ceil() as i64 + 1;
    let support = target.power_support(m as i64 + reach);
    let energy = target.energy();
    let side = 2 * m + 1;
    let f_at = |d1: i64, d2: i64| spectrum.f.interpolate(((d1 * d1 + d2 * d2) as f64).sqrt() / sq, 0.0);
    let direct = |k1: i64, k2: i64| -> f64 {
        let mut s = energy;
        for &(q1, q2, p) in &support {
            s += p * f_at(k1 - q1, k2 - q2);
        }
        (s / n_points).max(0.0)
    };
    let mi = m as i64;
    let mut values = if side * side * support.len() <= DIRECT_LIMIT {
        let rows = crate::par::map_range(side, |i| {
            let k1 = i as i64 - mi;
            (0..side).map(|j| direct(k1, j as i64 - mi)).collect::<Vec<_>>()
        });
        rows.concat()
    } else {
        convolve(&support, &f_at, energy, n_points, mi, reach)
    };
    // the DC entry always comes from the direct sum so it agrees with
    // `integration_variance` exactly
    values[mi as usize * side + mi as usize] = direct(0, 0);
    let mut s = Spectrum2D::new(m, values)?;
    s.symmetrize();
    Ok(ErrorSpectrum2D {
        spectrum: s,
        kind: ErrorKind::Predicted,
    })
}

fn dense_half(target: &TargetFunction) -> Option<i64> {
    target.is_dense().then(|| {
        let s = target.power_support(i64::MAX / 4);
        s.iter().map(|p| p.0.abs().max(p.1.abs())).max().unwrap_or(0) + 1
    })
}

/// FFT evaluation of the support sum for dense targets.
fn convolve(
    support: &[(i64, i64, f64)],
    f_at: &dyn Fn(i64, i64) -> f64,
    energy: f64,
    lambda: f64,
    m: i64,
    reach: i64,
) -> Vec<f64> {
    let rq = support.iter().map(|p| p.0.abs().max(p.1.abs())).max().unwrap_or(0);
    let rk = (rq + m).min(reach);
    let l = ((rq + rk + m + 1) as usize * 2).next_power_of_two();
    let mut a = vec![Complex64::new(0.0, 0.0); l * l];
    for &(q1, q2, p) in support {
        a[fft_index(q1, l) * l + fft_index(q2, l)] = Complex64::new(p, 0.0);
    }
    let mut b = vec![Complex64::new(0.0, 0.0); l * l];
    for d1 in -rk..=rk {
        for d2 in -rk..=rk {
            b[fft_index(d1, l) * l + fft_index(d2, l)] = Complex64::new(f_at(d1, d2), 0.0);
        }
    }
    fft2(&mut a, l, false);
    fft2(&mut b, l, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft2(&mut a, l, true);
    let norm = 1.0 / (l * l) as f64;
    let side = (2 * m + 1) as usize;
    let mut out = Vec::with_capacity(side * side);
    for k1 in -m..=m {
        for k2 in -m..=m {
            let c = a[fft_index(k1, l) * l + fft_index(k2, l)].re * norm;
            out.push(((energy + c) / lambda).max(0.0));
        }
    }
    out
}

/// `E(k) = mean over realizations of |Σ_j t(x_j) e^{-2πi k·x_j} / λ - T(k)|²`.
/// `source(i)` produces realization `i`.
pub fn monte_carlo_error_spectrum<S>(
    source: S,
    realizations: usize,
    target: &TargetFunction,
    lambda: f64,
    m: usize,
) -> Result<ErrorSpectrum2D>
where
    S: Fn(usize) -> Result<Vec<Point>> + Sync,
{
    Ok(monte_carlo(&source, realizations, target, lambda, m, None)?.0)
}

/// Like [`monte_carlo_error_spectrum`], plus a radial profile (normalized
/// by `λ`) whose standard errors come from the spread of per-realization
/// bin means, so correlations between nearby frequencies are accounted for.
pub fn monte_carlo_error_profile<S>(
    source: S,
    realizations: usize,
    target: &TargetFunction,
    lambda: f64,
    m: usize,
    bin_width: f64,
) -> Result<(ErrorSpectrum2D, RadialProfile)>
where
    S: Fn(usize) -> Result<Vec<Point>> + Sync,
{
    let binning = Binning::new(m, lambda, bin_width)?;
    let (e, p) = monte_carlo(&source, realizations, target, lambda, m, Some(&binning))?;
    Ok((e, p.expect("profile requested")))
}

fn monte_carlo(
    source: &(dyn Fn(usize) -> Result<Vec<Point>> + Sync),
    realizations: usize,
    target: &TargetFunction,
    lambda: f64,
    m: usize,
    binning: Option<&Binning>,
) -> Result<(ErrorSpectrum2D, Option<RadialProfile>)> {
    if realizations < 2 {
        return Err(Error::InvalidInput("at least 2 realizations are required".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("intensity must be positive, got {lambda}")));
    }
    let mi = m as i64;
    let side = 2 * m + 1;
    let len = side * side;
    let truth: Vec<Complex64> = (0..len)
        .map(|i| target.coefficient((i / side) as i64 - mi, (i % side) as i64 - mi))
        .collect();
    let extra = binning.map_or(0, |b| b.counts.len());
    let (mut mean, mut var) = accumulate(realizations, len + extra, |r| {
        let pts = source(r)?;
        let w: Vec<f64> = pts.iter().map(|p| target.eval(*p)).collect();
        let s = exponential_sums(&pts, Some(&w), m);
        let mut e: Vec<f64> = s.iter().zip(&truth).map(|(s, t)| (s / lambda - t).norm_sqr()).collect();
        if let Some(b) = binning {
            let bm = b.means(&e);
            e.extend(bm);
        }
        Ok(e)
    })?;
    let profile = binning.map(|b| {
        let bm = mean.split_off(len);
        let bv = var.as_mut().map(|v| v.split_off(len)).expect("at least 2 realizations");
        let stderr: Vec<f64> = bv.iter().map(|v| (v / realizations as f64).sqrt()).collect();
        b.profile(&bm, &stderr, realizations)
    });
    let mut s = Spectrum2D::new(m, mean)?.with_statistics(var, realizations);
    s.symmetrize();
    Ok((
        ErrorSpectrum2D {
            spectrum: s,
            kind: ErrorKind::MonteCarlo,
        },
        profile,
    ))
}

/// Monte-Carlo error over fixed sets; `λ` is the common set size.
pub fn monte_carlo_from_sets(sets: &[&[Point]], target: &TargetFunction, m: usize) -> Result<ErrorSpectrum2D> {
    let n = sets.first().map_or(0, |s| s.len());
    if n == 0 || sets.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("point sets must be nonempty and of equal size".into()));
    }
    monte_carlo_error_spectrum(|i| Ok(sets[i].to_vec()), sets.len(), target, n as f64, m)
}

/// Multiplies by `|K(k)|²` for a Gaussian reconstruction kernel of std
/// `sigma_px` pixels on a `width_px` image: `K(k) = exp(-2π² (σ/W)² |k|²)`.
pub fn filtered_error(err: &ErrorSpectrum2D, sigma_px: f64, width_px: usize) -> Result<ErrorSpectrum2D> {
    if !(sigma_px >= 0.0) || width_px == 0 {
        return Err(Error::InvalidInput(format!(
            "filter sigma {sigma_px} and width {width_px} must be positive"
        )));
    }
    let s = sigma_px / width_px as f64;
    let c = 4.0 * PI * PI * s * s;
    let spec = &err.spectrum;
    let gain: Vec<f64> = spec
        .iter()
        .map(|(k1, k2, _)| (-c * (k1 * k1 + k2 * k2) as f64).exp())
        .collect();
    let values = spec.values().iter().zip(&gain).map(|(v, g)| v * g).collect();
    let variance = spec
        .variance()
        .map(|var| var.iter().zip(&gain).map(|(v, g)| v * g * g).collect());
    let out = Spectrum2D::new(spec.half_width(), values)?.with_statistics(variance, spec.realizations());
    Ok(ErrorSpectrum2D {
        spectrum: out,
        kind: err.kind,
    })
}

/// Variance of `(1/λ) Σ_j t(x_j)`: the DC value of the predicted error.
pub fn integration_variance(spectrum: &RadialSpectrum, target: &TargetFunction, n_points: f64) -> Result<f64> {
    Ok(predict_error_spectrum(spectrum, target, n_points, 0)?.spectrum.dc())
}
