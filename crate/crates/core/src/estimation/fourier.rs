//! Exponential sums over point sets and small FFT helpers.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::pointset::Point;

/// `S(k) = Σ_j w_j exp(-2πi k·x_j)` for `|k1|, |k2| <= m`, row-major in
/// `k1` (x frequency) then `k2`.
///
/// The double sum factors into per-axis tables, so the whole window is one
/// real matrix product `[Re A; Im A] · [Re B, Im B]`.
pub fn exponential_sums(points: &[Point], weights: Option<&[f64]>, m: usize) -> Vec<Complex64> {
    let k = 2 * m + 1;
    let n = points.len();
    if n == 0 {
        return vec![Complex64::new(0.0, 0.0); k * k];
    }
    // a: 2k x n (cos rows, then -sin rows), weighted
    // b: n x 2k (cos cols, then -sin cols)
    let mut a = vec![0.0; 2 * k * n];
    let mut b = vec![0.0; n * 2 * k];
    for (j, p) in points.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[j]);
        for f in 0..k {
            let freq = f as f64 - m as f64;
            let (sx, cx) = (2.0 * std::f64::consts::PI * freq * p[0]).sin_cos();
            a[f * n + j] = w * cx;
            a[(k + f) * n + j] = -w * sx;
            let (sy, cy) = (2.0 * std::f64::consts::PI * freq * p[1]).sin_cos();
            b[j * 2 * k + f] = cy;
            b[j * 2 * k + k + f] = -sy;
        }
    }
    let mut c = vec![0.0; 4 * k * k];
    // SAFETY: the slices have exactly the dimensions passed with row-major
    // strides.
    unsafe {
        matrixmultiply::dgemm(
            2 * k,
            n,
            2 * k,
            1.0,
            a.as_ptr(),
            n as isize,
            1,
            b.as_ptr(),
            2 * k as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            2 * k as isize,
            1,
        );
    }
    let at = |r: usize, col: usize| c[r * 2 * k + col];
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let re = at(i, j) - at(k + i, k + j);
            let im = at(i, k + j) + at(k + i, j);
            out.push(Complex64::new(re, im));
        }
    }
    out
}

/// In-place 2D FFT of a row-major `n x n` array (unnormalized).
pub fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n);
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft.process(data);
    transpose(data, n);
    fft.process(data);
    transpose(data, n);
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Index of frequency `k` in an FFT of length `n`.
#[inline]
pub fn fft_index(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let pts = [[0.1, 0.7], [0.33, 0.2], [0.9, 0.95]];
        let w = [1.0, -0.5, 2.0];
        let m = 3;
        let s = exponential_sums(&pts, Some(&w), m);
        for k1 in -3i64..=3 {
            for k2 in -3i64..=3 {
                let mut direct = Complex64::new(0.0, 0.0);
                for (p, wj) in pts.iter().zip(w) {
                    let ph = -2.0 * std::f64::consts::PI * (k1 as f64 * p[0] + k2 as f64 * p[1]);
                    direct += Complex64::from_polar(wj, ph);
                }
                let got = s[((k1 + 3) * 7 + k2 + 3) as usize];
                assert!((got - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fft2_round_trip() {
        let n = 8;
        let orig: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut d = orig.clone();
        fft2(&mut d, n, false);
        fft2(&mut d, n, true);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a / (n * n) as f64 - b).norm() < 1e-12);
        }
    }
}
