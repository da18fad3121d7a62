//! Empirical estimators and error spectra on integer frequency grids.
//!
//! Frequencies `k = (k1, k2)` are integers (cycles per unit torus length);
//! `k1` is the x frequency. A window of half-width `M` holds `|k1|, |k2| <= M`.

mod error;
pub mod fourier;
mod pcf;
mod spectrum;
mod target;

pub use error::{
    filtered_error, integration_variance, monte_carlo_error_profile, monte_carlo_error_spectrum,
    monte_carlo_from_sets,
    predict_error_spectrum, ErrorKind, ErrorSpectrum2D,
};
pub use pcf::{empirical_pcf, pair_histogram, smoothed_pcf, PairHistogram, DEFAULT_PCF_SIGMA};
pub use spectrum::{default_half_width, empirical_power_spectrum, radial_spectrum_from_profile};
pub use target::{TargetFunction, TargetKind, DENSE_GRID};

use crate::error::{Error, Result};

/// Default bin width of radial profiles in normalized frequency.
pub const DEFAULT_BIN_WIDTH: f64 = 0.02;

/// Values on the `(2M+1)²` integer frequency window. The DC entry is stored
/// at `(0, 0)` like any other and excluded from radial profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    half_width: usize,
    values: Vec<f64>,
    /// Per-frequency sample variance across realizations.
    variance: Option<Vec<f64>>,
    realizations: usize,
}

impl Spectrum2D {
    pub fn new(half_width: usize, values: Vec<f64>) -> Result<Self> {
        let side = 2 * half_width + 1;
        if values.len() != side * side {
            return Err(Error::InvalidInput(format!(
                "{} values for a window of side {side}",
                values.len()
            )));
        }
        Ok(Self {
            half_width,
            values,
            variance: None,
            realizations: 1,
        })
    }

    pub(crate) fn with_statistics(mut self, variance: Option<Vec<f64>>, realizations: usize) -> Self {
        self.variance = variance;
        self.realizations = realizations;
        self
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    #[inline]
    pub fn index(&self, k1: i64, k2: i64) -> usize {
        let m = self.half_width as i64;
        debug_assert!(k1.abs() <= m && k2.abs() <= m);
        ((k1 + m) as usize) * self.side() + (k2 + m) as usize
    }

    pub fn get(&self, k1: i64, k2: i64) -> f64 {
        self.values[self.index(k1, k2)]
    }

    pub fn dc(&self) -> f64 {
        self.get(0, 0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn variance(&self) -> Option<&[f64]> {
        self.variance.as_deref()
    }

    pub fn realizations(&self) -> usize {
        self.realizations
    }

    /// `(k1, k2, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let m = self.half_width as i64;
        let side = self.side();
        self.values.iter().enumerate().map(move |(i, v)| {
            ((i / side) as i64 - m, (i % side) as i64 - m, *v)
        })
    }

    /// Forces `value(k) == value(-k)` bit for bit by averaging each pair.
    pub(crate) fn symmetrize(&mut self) {
        let n = self.values.len();
        fn sym(v: &mut [f64], n: usize) {
            for i in 0..n / 2 {
                let j = n - 1 - i;
                let avg = 0.5 * (v[i] + v[j]);
                v[i] = avg;
                v[j] = avg;
            }
        }
        // index of -k is the mirror index in the row-major window
        sym(&mut self.values, n);
        if let Some(var) = &mut self.variance {
            sym(var, n);
        }
    }
}

/// One bin of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBin {
    /// Bin center in normalized frequency.
    pub nu: f64,
    pub value: f64,
    pub stderr: f64,
    /// Number of frequencies averaged.
    pub count: usize,
}

impl ProfileBin {
    /// Frequencies times realizations.
    pub fn samples(&self, realizations: usize) -> usize {
        self.count * realizations
    }
}

/// Radial average of a 2D spectrum; empty bins are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub bin_width: f64,
    pub bins: Vec<Option<ProfileBin>>,
    pub realizations: usize,
}

impl RadialProfile {
    pub fn present(&self) -> impl Iterator<Item = &ProfileBin> {
        self.bins.iter().flatten()
    }

    /// Mean of bin values with centers in `[lo, hi]`.
    pub fn mean_over(&self, lo: f64, hi: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .present()
            .filter(|b| b.nu >= lo && b.nu <= hi)
            .map(|b| b.value)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Assignment of window frequencies to annuli of normalized frequency.
#[derive(Debug, Clone)]
pub(crate) struct Binning {
    pub bin_width: f64,
    /// Bin per window entry; `None` for DC.
    pub bin: Vec<Option<usize>>,
    pub counts: Vec<usize>,
}

impl Binning {
    pub fn new(half_width: usize, n_points_for_norm: f64, bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) || !(n_points_for_norm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bin width {bin_width} and normalization {n_points_for_norm} must be positive"
            )));
        }
        let scale = 1.0 / n_points_for_norm.sqrt();
        let m = half_width as i64;
        let nbins = ((m as f64 * 2f64.sqrt() * scale) / bin_width).floor() as usize + 1;
        let mut counts = vec![0; nbins];
        let mut bin = Vec::with_capacity(((2 * m + 1) * (2 * m + 1)) as usize);
        for k1 in -m..=m {
            for k2 in -m..=m {
                if k1 == 0 && k2 == 0 {
                    bin.push(None);
                    continue;
                }
                let nu = ((k1 * k1 + k2 * k2) as f64).sqrt() * scale;
                let b = ((nu / bin_width) as usize).min(nbins - 1);
                counts[b] += 1;
                bin.push(Some(b));
            }
        }
        Ok(Self { bin_width, bin, counts })
    }

    pub fn means(&self, values: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.counts.len()];
        for (b, v) in self.bin.iter().zip(values) {
            if let Some(b) = b {
                sum[*b] += v;
            }
        }
        sum.iter()
            .zip(&self.counts)
            .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
            .collect()
    }

    pub fn profile(&self, means: &[f64], stderr: &[f64], realizations: usize) -> RadialProfile {
        let bins = (0..self.counts.len())
            .map(|b| {
                (self.counts[b] > 0).then(|| ProfileBin {
                    nu: (b as f64 + 0.5) * self.bin_width,
                    value: means[b],
                    stderr: stderr[b],
                    count: self.counts[b],
                })
            })
            .collect();
        RadialProfile {
            bin_width: self.bin_width,
            bins,
            realizations,
        }
    }
}

/// Averages `spec` over annuli of normalized frequency `|k| / √n`. The DC
/// entry is excluded. Standard errors treat frequencies as independent and
/// are zero when the spectrum has no per-frequency variance.
pub fn radial_average(spec: &Spectrum2D, n_points_for_norm: f64, bin_width: f64) -> Result<RadialProfile> {
    let binning = Binning::new(spec.half_width, n_points_for_norm, bin_width)?;
    let means = binning.means(&spec.values);
    let r = spec.realizations.max(1) as f64;
    let stderr = match &spec.variance {
        Some(var) => binning
            .means(var)
            .iter()
            .zip(&binning.counts)
            .map(|(v, c)| (v / (r * (*c).max(1) as f64)).sqrt())
            .collect(),
        None => vec![0.0; means.len()],
    };
    Ok(binning.profile(&means, &stderr, spec.realizations))
}

/// Mean and sample variance per entry over `count` vectors produced by `f`,
/// reduced in index order so the result does not depend on thread count.
pub(crate) fn accumulate<F>(count: usize, len: usize, f: F) -> Result<(Vec<f64>, Option<Vec<f64>>)>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let chunk = 16;
    let mut sum = vec![0.0; len];
    let mut sq = vec![0.0; len];
    let mut start = 0;
    while start < count {
        let end = (start + chunk).min(count);
        let batch = crate::par::map_range(end - start, |i| f(start + i));
        for v in batch {
            let v = v?;
            for ((s, q), x) in sum.iter_mut().zip(sq.iter_mut()).zip(v) {
                *s += x;
                *q += x * x;
            }
        }
        start = end;
    }
    let n = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let variance = (count >= 2).then(|| {
        sq.iter()
            .zip(&mean)
            .map(|(q, m)| ((q - n * m * m) / (n - 1.0)).max(0.0))
            .collect()
    });
    Ok((mean, variance))
}
