//! Test functions on the unit torus and their Fourier coefficients.

use std::f64::consts::PI;
use std::fmt;

use rustfft::num_complex::Complex64;

use super::fourier::{fft2, fft_index};
use crate::error::{Error, Result};
use crate::pointset::Point;

/// Smallest dense grid used for targets without closed-form coefficients.
pub const DENSE_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    Constant { value: f64 },
    /// `cos(2π f y)` with `f = round(√λ ν_c)`.
    Cosine { nu_c: f64 },
    /// Square wave in `y` with values 0 and 1 and the same frequency rule.
    Stripes { nu_c: f64 },
    /// Periodized Gaussian of std `sigma` centered in the torus.
    GaussianBlob { sigma: f64 },
    /// `(1 + cos(α |x|²)) / 2` with the origin at the `(0, 0)` corner.
    ZonePlate { alpha: f64 },
}

impl TargetKind {
    pub fn name(&self) -> &'static str {
        match self {
            TargetKind::Constant { .. } => "constant",
            TargetKind::Cosine { .. } => "cosine",
            TargetKind::Stripes { .. } => "stripes",
            TargetKind::GaussianBlob { .. } => "gaussian",
            TargetKind::ZonePlate { .. } => "zoneplate",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TargetKind::Constant { value } => write!(f, "constant({value})"),
            TargetKind::Cosine { nu_c } => write!(f, "cosine({nu_c})"),
            TargetKind::Stripes { nu_c } => write!(f, "stripes({nu_c})"),
            TargetKind::GaussianBlob { sigma } => write!(f, "gaussian({sigma})"),
            TargetKind::ZonePlate { alpha } => write!(f, "zoneplate({alpha})"),
        }
    }
}

/// Dense coefficients `T(k)` for `|k1|, |k2| < size / 2`, FFT ordering.
#[derive(Debug, Clone)]
struct Dense {
    size: usize,
    coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct TargetFunction {
    kind: TargetKind,
    /// Integer frequency of cosine and stripes targets.
    frequency: i64,
    dense: Option<Dense>,
}

impl TargetFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidInput("constant target must be finite".into()));
        }
        Ok(Self::analytic(TargetKind::Constant { value }, 0))
    }

    /// Cosine at normalized frequency `nu_c` for intensity `lambda`. The
    /// absolute frequency is rounded to an integer so the target is periodic
    /// on the torus.
    pub fn cosine(nu_c: f64, lambda: f64) -> Result<Self> {
        let f = Self::snap(nu_c, lambda)?;
        Ok(Self::analytic(TargetKind::Cosine { nu_c }, f))
    }

    pub fn stripes(nu_c: f64, lambda: f64) -> Result<Self> {
        let f = Self::snap(nu_c, lambda)?;
        if f == 0 {
            return Err(Error::InvalidInput(format!(
                "stripes frequency {nu_c} rounds to zero cycles"
            )));
        }
        Ok(Self::analytic(TargetKind::Stripes { nu_c }, f))
    }

    pub fn gaussian_blob(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 0.25) {
            return Err(Error::InvalidInput(format!(
                "gaussian sigma must be in (0, 0.25], got {sigma}"
            )));
        }
        Ok(Self::analytic(TargetKind::GaussianBlob { sigma }, 0))
    }

    /// Zone plate with coefficients from a dense grid of at least `grid`
    /// samples per axis.
    pub fn zone_plate(alpha: f64, grid: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("zone plate alpha must be positive, got {alpha}")));
        }
        let mut t = Self::analytic(TargetKind::ZonePlate { alpha }, 0);
        let size = grid.max(DENSE_GRID).next_power_of_two();
        t.dense = Some(dense_coefficients(&t, size));
        Ok(t)
    }

    /// Zone plate whose instantaneous frequency at the far corner is 1.5x the
    /// Nyquist rate of a `width`-pixel image.
    pub fn zone_plate_for_width(width: usize) -> Result<Self> {
        let alpha = 1.5 * PI * width as f64 / (2.0 * 2f64.sqrt());
        Self::zone_plate(alpha, 2 * width)
    }

    fn analytic(kind: TargetKind, frequency: i64) -> Self {
        Self {
            kind,
            frequency,
            dense: None,
        }
    }

    fn snap(nu_c: f64, lambda: f64) -> Result<i64> {
        if !(nu_c >= 0.0 && nu_c.is_finite()) || !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid frequency {nu_c} or intensity {lambda}"
            )));
        }
        Ok((nu_c * lambda.sqrt()).round() as i64)
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    /// Absolute integer frequency (cycles per unit) of periodic targets.
    pub fn frequency(&self) -> i64 {
        self.frequency
    }

    pub fn eval(&self, x: Point) -> f64 {
        match self.kind {
            TargetKind::Constant { value } => value,
            TargetKind::Cosine { .. } => (2.0 * PI * self.frequency as f64 * x[1]).cos(),
            TargetKind::Stripes { .. } => {
                let c = (2.0 * PI * self.frequency as f64 * x[1]).cos();
                if c > 0.0 {
                    1.0
                } else if c < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            TargetKind::GaussianBlob { sigma } => {
                let s2 = 2.0 * sigma * sigma;
                let mut sum = 0.0;
                for ix in -1..=1 {
                    for iy in -1..=1 {
                        let dx = x[0] - 0.5 + ix as f64;
                        let dy = x[1] - 0.5 + iy as f64;
                        sum += (-(dx * dx + dy * dy) / s2).exp();
                    }
                }
                sum
            }
            TargetKind::ZonePlate { alpha } => 0.5 * (1.0 + (alpha * (x[0] * x[0] + x[1] * x[1])).cos()),
        }
    }

    /// `T(k) = ∫ t(x) exp(-2πi k·x) dx` on the torus.
    pub fn coefficient(&self, k1: i64, k2: i64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let f = self.frequency;
        match self.kind {
            TargetKind::Constant { value } => {
                if k1 == 0 && k2 == 0 {
                    Complex64::new(value, 0.0)
                } else {
                    zero
                }
            }
            TargetKind::Cosine { .. } => {
                if k1 != 0 {
                    zero
                } else if f == 0 {
                    Complex64::new(if k2 == 0 { 1.0 } else { 0.0 }, 0.0)
                } else if k2.abs() == f {
                    Complex64::new(0.5, 0.0)
                } else {
                    zero
                }
            }
            TargetKind::Stripes { .. } => {
                if k1 != 0 {
                    return zero;
                }
                if k2 == 0 {
                    return Complex64::new(0.5, 0.0);
                }
                if k2 % f != 0 {
                    return zero;
                }
                let m = (k2 / f).abs();
                if m % 2 == 0 {
                    return zero;
                }
                let sign = if (m - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign / (PI * m as f64), 0.0)
            }
            TargetKind::GaussianBlob { sigma } => {
                let k2n = (k1 * k1 + k2 * k2) as f64;
                let mag = 2.0 * PI * sigma * sigma * (-2.0 * PI * PI * sigma * sigma * k2n).exp();
                // centered at (1/2, 1/2): phase exp(-πi(k1 + k2))
                if (k1 + k2) % 2 == 0 {
                    Complex64::new(mag, 0.0)
                } else {
                    Complex64::new(-mag, 0.0)
                }
            }
            TargetKind::ZonePlate { .. } => {
                let d = self.dense.as_ref().expect("zone plate has dense coefficients");
                let h = (d.size / 2) as i64;
                if k1.abs() >= h || k2.abs() >= h {
                    zero
                } else {
                    d.coeffs[fft_index(k1, d.size) * d.size + fft_index(k2, d.size)]
                }
            }
        }
    }

    /// `‖t‖² = Σ_k |T(k)|²` (Parseval).
    pub fn energy(&self) -> f64 {
        match self.kind {
            TargetKind::Constant { value } => value * value,
            TargetKind::Cosine { .. } => {
                if self.frequency == 0 {
                    1.0
                } else {
                    0.5
                }
            }
            TargetKind::Stripes { .. } => 0.5,
            // torus energy of the periodized blob, slightly above π σ²
            TargetKind::GaussianBlob { .. } => self.power_support(i64::MAX / 4).iter().map(|p| p.2).sum(),
            TargetKind::ZonePlate { .. } => {
                let d = self.dense.as_ref().expect("zone plate has dense coefficients");
                d.coeffs.iter().map(|c| c.norm_sqr()).sum()
            }
        }
    }

    /// Nonzero `P_t(q) = |T(q)|²` with `|q1|, |q2| <= radius`.
    pub fn power_support(&self, radius: i64) -> Vec<(i64, i64, f64)> {
        let mut out = Vec::new();
        let f = self.frequency;
        match self.kind {
            TargetKind::Constant { value } => {
                if value != 0.0 {
                    out.push((0, 0, value * value));
                }
            }
            TargetKind::Cosine { .. } => {
                if f == 0 {
                    out.push((0, 0, 1.0));
                } else if f <= radius {
                    out.push((0, -f, 0.25));
                    out.push((0, f, 0.25));
                }
            }
            TargetKind::Stripes { .. } => {
                out.push((0, 0, 0.25));
                let mut m = 1;
                while m * f <= radius {
                    let p = self.coefficient(0, m * f).norm_sqr();
                    out.push((0, -m * f, p));
                    out.push((0, m * f, p));
                    m += 2;
                }
            }
            TargetKind::GaussianBlob { sigma } => {
                // |T|² relative to the peak drops below 1e-20 beyond this
                let cut = ((20.0 * 10f64.ln()) / (4.0 * PI * PI * sigma * sigma)).sqrt();
                let r = radius.min(cut.ceil() as i64);
                for k1 in -r..=r {
                    for k2 in -r..=r {
                        let p = self.coefficient(k1, k2).norm_sqr();
                        if p > 0.0 {
                            out.push((k1, k2, p));
                        }
                    }
                }
            }
            TargetKind::ZonePlate { .. } => {
                let h = (self.dense.as_ref().map_or(0, |d| d.size) / 2) as i64;
                let r = radius.min(h - 1);
                for k1 in -r..=r {
                    for k2 in -r..=r {
                        let p = self.coefficient(k1, k2).norm_sqr();
                        if p > 0.0 {
                            out.push((k1, k2, p));
                        }
                    }
                }
            }
        }
        out
    }

    /// True when coefficients beyond `power_support` are exactly zero or
    /// analytically accounted for.
    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }
}

fn dense_coefficients(t: &TargetFunction, size: usize) -> Dense {
    let mut data: Vec<Complex64> = (0..size * size)
        .map(|idx| {
            let (i, j) = (idx / size, idx % size);
            let x = [i as f64 / size as f64, j as f64 / size as f64];
            Complex64::new(t.eval(x), 0.0)
        })
        .collect();
    fft2(&mut data, size, false);
    let norm = 1.0 / (size * size) as f64;
    for c in &mut data {
        *c *= norm;
    }
    // keep the symmetric window |k| < size/2 only
    let h = (size / 2) as i64;
    for k1 in -h..h {
        for k2 in -h..h {
            if k1 == -h || k2 == -h {
                data[fft_index(k1, size) * size + fft_index(k2, size)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Dense { size, coeffs: data }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_coefficient(t: &TargetFunction, k1: i64, k2: i64, n: usize) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let x = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                let ph = -2.0 * PI * (k1 as f64 * x[0] + k2 as f64 * x[1]);
                s += Complex64::from_polar(t.eval(x), ph);
            }
        }
        s / (n * n) as f64
    }

    #[test]
    fn analytic_coefficients_match_quadrature() {
        let targets = [
            TargetFunction::cosine(0.35, 1024.0).unwrap(),
            TargetFunction::gaussian_blob(0.1).unwrap(),
            TargetFunction::constant(0.7).unwrap(),
        ];
        for t in &targets {
            for (k1, k2) in [(0, 0), (0, 11), (0, -11), (1, 2), (3, -1), (5, 0)] {
                let a = t.coefficient(k1, k2);
                let b = numeric_coefficient(t, k1, k2, 256);
                assert!((a - b).norm() < 1e-9, "{:?} {k1} {k2}: {a} vs {b}", t.kind());
            }
        }
    }

    #[test]
    fn stripes_harmonics() {
        let t = TargetFunction::stripes(0.25, 1024.0).unwrap();
        assert_eq!(t.frequency(), 8);
        // midpoint sampling avoids the jump locations
        for (k2, want) in [(0, 0.5), (8, 1.0 / PI), (24, -1.0 / (3.0 * PI)), (16, 0.0), (5, 0.0)] {
            let b = numeric_coefficient(&t, 0, k2, 512);
            assert!((t.coefficient(0, k2).re - want).abs() < 1e-12);
            assert!((b.re - want).abs() < 2e-3, "{k2}: {b}");
        }
        let support: f64 = t.power_support(100_000).iter().map(|p| p.2).sum();
        assert!((support - t.energy()).abs() < 1e-4);
    }

    #[test]
    fn eval_examples() {
        let z = TargetFunction::zone_plate_for_width(128).unwrap();
        assert_eq!(z.eval([0.0, 0.0]), 1.0);
        let c = TargetFunction::cosine(0.3, 128.0 * 128.0).unwrap();
        assert_eq!(c.eval([0.37, 0.0]), 1.0);
        // period of 2 pixels at 1 spp on a 128 image
        let s = TargetFunction::stripes(0.5, 128.0 * 128.0).unwrap();
        assert_eq!(s.frequency(), 64);
        let px = 1.0 / 128.0;
        for i in 0..16 {
            let y = (i as f64 + 0.25) * px;
            assert_eq!(s.eval([0.0, y]), s.eval([0.0, y + 2.0 * px]));
        }
        assert_ne!(s.eval([0.0, 0.25 * px]), s.eval([0.0, 1.25 * px]));
    }

    #[test]
    fn conjugate_symmetry_and_parseval() {
        let z = TargetFunction::zone_plate(60.0, 256).unwrap();
        for (k1, k2) in [(1, 2), (17, -40), (0, 99)] {
            let a = z.coefficient(k1, k2);
            let b = z.coefficient(-k1, -k2).conj();
            assert!((a - b).norm() < 1e-12);
        }
        let g = TargetFunction::gaussian_blob(0.1).unwrap();
        assert!((g.energy() / (PI * 0.01) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TargetFunction::gaussian_blob(0.0).is_err());
        assert!(TargetFunction::cosine(-1.0, 100.0).is_err());
        assert!(TargetFunction::stripes(0.01, 100.0).is_err());
        assert!(TargetFunction::zone_plate(-1.0, 64).is_err());
    }
}
