//! Reconstruction of sampled test images and frequency-band metrics.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimation::fourier::fft2;
use crate::estimation::TargetFunction;
use crate::par;
use crate::pointset::{toroidal_distance_sq, Point};

pub const DEFAULT_FILTER_SIGMA_PX: f64 = 0.5;
/// Reference images integrate each pixel with this many samples per axis.
const REFERENCE_SUBSAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by `λ ∫k`.
    Unbiased,
    /// Divide by the local sum of kernel weights.
    WeightSum,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::Unbiased => "unbiased",
            Normalization::WeightSum => "weightsum",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(Normalization::Unbiased),
            "weightsum" | "weight-sum" => Ok(Normalization::WeightSum),
            _ => Err(Error::InvalidInput(format!("unknown normalization '{s}'"))),
        }
    }
}

/// Square image with pixel centers at `((i + 0.5) / W, (j + 0.5) / W)`;
/// `i` is the column (x) and rows are stored top to bottom by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, pixels: Vec<f64>) -> Result<Self> {
        if width < 8 {
            return Err(Error::InvalidInput(format!("image width must be at least 8, got {width}")));
        }
        if pixels.len() != width * width {
            return Err(Error::InvalidInput(format!(
                "{} pixels for width {width}",
                pixels.len()
            )));
        }
        Ok(Self { width, pixels })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct RenderConfig {
    pub target: TargetFunction,
    pub spp: usize,
    pub width: usize,
    pub filter_sigma_px: f64,
    pub normalization: Normalization,
}

impl RenderConfig {
    pub fn new(target: TargetFunction, spp: usize, width: usize) -> Self {
        Self {
            target,
            spp,
            width,
            filter_sigma_px: DEFAULT_FILTER_SIGMA_PX,
            normalization: Normalization::Unbiased,
        }
    }

    pub fn intensity(&self) -> f64 {
        (self.spp * self.width * self.width) as f64
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.width < 8 {
            return Err(Error::InvalidInput(format!("image width must be at least 8, got {}", self.width)));
        }
        if self.spp == 0 || !(self.filter_sigma_px > 0.0) {
            return Err(Error::InvalidInput("spp and filter sigma must be positive".into()));
        }
        let want = self.spp * self.width * self.width;
        if n_points != want {
            return Err(Error::InvalidInput(format!(
                "point set has {n_points} points, spp {} at width {} needs {want}",
                self.spp, self.width
            )));
        }
        Ok(())
    }
}

/// Truncated Gaussian over 3x3 pixels, in absolute torus units.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    /// `1 / (2 s²)` with `s = σ_px / W`.
    inv2s2: f64,
    /// `∫k` over the support.
    integral: f64,
}

impl Kernel {
    fn new(sigma_px: f64, width: usize) -> Self {
        let s = sigma_px / width as f64;
        let half = 1.5 / (sigma_px * 2f64.sqrt());
        Self {
            inv2s2: 1.0 / (2.0 * s * s),
            integral: 2.0 * PI * s * s * libm::erf(half).powi(2),
        }
    }

    #[inline]
    fn eval(&self, dx: f64, dy: f64) -> f64 {
        (-(dx * dx + dy * dy) * self.inv2s2).exp()
    }
}

#[inline]
fn wrapped(d: f64) -> f64 {
    d - d.round()
}

/// `Σ_j k(c - x_j) t(x_j) / Z` at every pixel center, gathering samples from
/// the 3x3 neighboring pixels on the torus. With `WeightSum`, a pixel whose
/// neighborhood holds no sample takes the target value of the nearest sample.
pub fn render(points: &[Point], config: &RenderConfig) -> Result<Image> {
    config.validate(points.len())?;
    let w = config.width;
    let kernel = Kernel::new(config.filter_sigma_px, w);
    // bucket samples by pixel
    let pix = |x: f64| ((x * w as f64) as usize).min(w - 1);
    let mut start = vec![0usize; w * w + 1];
    for p in points {
        start[pix(p[1]) * w + pix(p[0]) + 1] += 1;
    }
    for c in 0..w * w {
        start[c + 1] += start[c];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; points.len()];
    for (i, p) in points.iter().enumerate() {
        let c = pix(p[1]) * w + pix(p[0]);
        order[fill[c]] = i;
        fill[c] += 1;
    }
    let values: Vec<f64> = points.iter().map(|p| config.target.eval(*p)).collect();
    let z_unbiased = config.intensity() * kernel.integral;
    let rows = par::map_range(w, |j| {
        let cy = (j as f64 + 0.5) / w as f64;
        (0..w)
            .map(|i| {
                let cx = (i as f64 + 0.5) / w as f64;
                let (mut num, mut den) = (0.0, 0.0);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for dj in [w - 1, 0, 1] {
                    let row = (j + dj) % w;
                    for di in [w - 1, 0, 1] {
                        let c = row * w + (i + di) % w;
                        for &s in &order[start[c]..start[c + 1]] {
                            let p = points[s];
                            let k = kernel.eval(wrapped(cx - p[0]), wrapped(cy - p[1]));
                            num += k * values[s];
                            den += k;
                            lo = lo.min(values[s]);
                            hi = hi.max(values[s]);
                        }
                    }
                }
                match config.normalization {
                    Normalization::Unbiased => num / z_unbiased,
                    // a weighted mean of equal values is that value, without rounding
                    Normalization::WeightSum if den > 0.0 && lo == hi => lo,
                    Normalization::WeightSum if den > 0.0 => num / den,
                    Normalization::WeightSum => {
                        nearest(points, &order, &start, w, i, j).map_or(0.0, |s| values[s])
                    }
                }
            })
            .collect::<Vec<_>>()
    });
    Image::new(w, rows.concat())
}

/// Index of the sample closest to the center of pixel `(i, j)`, searching
/// rings of pixels outward. Used where no sample carries kernel weight.
fn nearest(points: &[Point], order: &[usize], start: &[usize], w: usize, i: usize, j: usize) -> Option<usize> {
    let c = [(i as f64 + 0.5) / w as f64, (j as f64 + 0.5) / w as f64];
    let mut best: Option<(f64, usize)> = None;
    let mut found_ring = None;
    for ring in 0..=w / 2 {
        // A hit in ring d can still be beaten from ring d + 1.
        if found_ring.is_some_and(|d| ring > d + 1) {
            break;
        }
        let r = ring as isize;
        for dj in -r..=r {
            for di in -r..=r {
                if dj.abs() != r && di.abs() != r {
                    continue;
                }
                let row = (j as isize + dj).rem_euclid(w as isize) as usize;
                let col = (i as isize + di).rem_euclid(w as isize) as usize;
                let cell = row * w + col;
                for &s in &order[start[cell]..start[cell + 1]] {
                    let d = toroidal_distance_sq(c, points[s]);
                    if best.is_none_or(|(bd, bs)| d < bd || (d == bd && s < bs)) {
                        best = Some((d, s));
                    }
                }
            }
        }
        if best.is_some() && found_ring.is_none() {
            found_ring = Some(ring);
        }
    }
    best.map(|(_, s)| s)
}

/// Expected unbiased render `(k ∗ t)(c) / ∫k`, by midpoint quadrature over
/// the kernel support.
pub fn reference_image(target: &TargetFunction, width: usize, filter_sigma_px: f64) -> Result<Image> {
    if width < 8 || !(filter_sigma_px > 0.0) {
        return Err(Error::InvalidInput("invalid reference image parameters".into()));
    }
    let kernel = Kernel::new(filter_sigma_px, width);
    let q = REFERENCE_SUBSAMPLES;
    let span = 3 * q;
    let h = 1.0 / (q * width) as f64;
    // offsets of the quadrature nodes relative to the pixel center
    let offs: Vec<f64> = (0..span).map(|a| (a as f64 + 0.5) * h - 1.5 / width as f64).collect();
    let weights: Vec<f64> = offs
        .iter()
        .flat_map(|dy| offs.iter().map(move |dx| (*dx, *dy)))
        .map(|(dx, dy)| kernel.eval(dx, dy))
        .collect();
    let wsum: f64 = weights.iter().sum();
    let rows = par::map_range(width, |j| {
        let cy = (j as f64 + 0.5) / width as f64;
        (0..width)
            .map(|i| {
                let cx = (i as f64 + 0.5) / width as f64;
                let mut s = 0.0;
                for (b, dy) in offs.iter().enumerate() {
                    let y = (cy + dy).rem_euclid(1.0);
                    for (a, dx) in offs.iter().enumerate() {
                        let x = (cx + dx).rem_euclid(1.0);
                        s += weights[b * span + a] * target.eval([x, y]);
                    }
                }
                s / wsum
            })
            .collect::<Vec<_>>()
    });
    Image::new(width, rows.concat())
}

/// `|DFT(image - reference)|²` on the FFT grid, divided by `W⁴`, so the
/// values sum to the mean squared pixel difference.
fn difference_power(image: &Image, reference: &Image) -> Result<Vec<f64>> {
    if image.width != reference.width {
        return Err(Error::InvalidInput("images differ in size".into()));
    }
    let w = image.width;
    let mut d: Vec<Complex64> = (0..w * w)
        .map(|idx| {
            // transpose so the first FFT axis is x
            let (x, y) = (idx / w, idx % w);
            Complex64::new(image.get(x, y) - reference.get(x, y), 0.0)
        })
        .collect();
    fft2(&mut d, w, false);
    let norm = 1.0 / (w as f64).powi(4);
    Ok(d.iter().map(|c| c.norm_sqr() * norm).collect())
}

/// Frequencies `(power, |f|)` with `|f|` in cycles per pixel.
fn band_entries(power: &[f64], w: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for (idx, p) in power.iter().enumerate() {
        let k1 = signed(idx / w, w);
        let k2 = signed(idx % w, w);
        let f = ((k1 * k1 + k2 * k2) as f64).sqrt() / w as f64;
        if f >= lo && f <= hi {
            out.push(*p);
        }
    }
    out
}

fn signed(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn check_band(lo: f64, hi: f64) -> Result<()> {
    if !(lo >= 0.0 && hi > lo && hi <= 0.5 * 2f64.sqrt()) {
        return Err(Error::InvalidInput(format!(
            "band [{lo}, {hi}] must lie in [0, √2/2] cycles per pixel"
        )));
    }
    Ok(())
}

/// Energy of `image - reference` in the annulus `lo <= |f| <= hi` (cycles per
/// pixel; Nyquist is 0.5), normalized by pixel count.
pub fn band_energy(image: &Image, reference: &Image, lo: f64, hi: f64) -> Result<f64> {
    check_band(lo, hi)?;
    let p = difference_power(image, reference)?;
    Ok(band_entries(&p, image.width, lo, hi).iter().sum())
}

/// Mean difference power per ring of width `1 / W` cycles per pixel, rings
/// `0..=W/2`.
fn ring_profile(power: &[f64], w: usize) -> Vec<f64> {
    let rings = w / 2 + 1;
    let mut sum = vec![0.0; rings];
    let mut count = vec![0usize; rings];
    for (idx, p) in power.iter().enumerate() {
        let k1 = signed(idx / w, w);
        let k2 = signed(idx % w, w);
        let r = ((k1 * k1 + k2 * k2) as f64).sqrt().round() as usize;
        if r < rings {
            sum[r] += p;
            count[r] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, c)| s / *c as f64).collect()
}

/// Strongest ring of the radially averaged difference spectrum inside the
/// band, relative to the median ring up to Nyquist. Broadband noise shaped
/// by the reconstruction filter stays near or below 1; aliasing of
/// structured content concentrates energy in a few rings.
pub fn coherent_peak(image: &Image, reference: &Image, lo: f64, hi: f64) -> Result<f64> {
    check_band(lo, hi)?;
    let p = difference_power(image, reference)?;
    let w = image.width;
    let rings = ring_profile(&p, w);
    let in_band: Vec<f64> = rings
        .iter()
        .enumerate()
        .filter(|(r, _)| {
            let f = *r as f64 / w as f64;
            f >= lo && f <= hi
        })
        .map(|(_, v)| *v)
        .collect();
    if in_band.is_empty() {
        return Err(Error::InvalidInput("band contains no frequencies".into()));
    }
    let mut all = rings.clone();
    all.sort_by(f64::total_cmp);
    let median = all[all.len() / 2];
    let max = in_band.iter().cloned().fold(0.0, f64::max);
    Ok(if median > 0.0 {
        max / median
    } else if max > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}
