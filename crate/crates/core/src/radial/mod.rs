//! Radial functions on uniform grids and the d = 2 Hankel transform.
//!
//! The transform uses the kernel `2π J0(2π s t) t dt`, which makes it its own
//! inverse: a radially symmetric function and its 2D Fourier transform are
//! mapped onto each other by the same operator.

pub mod bessel;

use std::f64::consts::PI;

use crate::par;
use crate::{Error, Result};

pub use bessel::{bessel_j, j0, j1};

/// Uniform grid `0, h, 2h, ..., (count - 1) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    spacing: f64,
    count: usize,
}

impl RadialGrid {
    pub fn new(spacing: f64, count: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes, got {count}"
            )));
        }
        Ok(Self { spacing, count })
    }

    /// Grid covering `[0, max]`; `max` is rounded to the nearest node.
    pub fn with_max(spacing: f64, max: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "grid extent must be positive, got {max}"
            )));
        }
        Self::new(spacing, (max / spacing).round() as usize + 1)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub fn max(&self) -> f64 {
        self.coord(self.count - 1)
    }

    pub fn coords(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.coord(i))
    }

    /// Trapezoidal weights: `h/2` at both ends, `h` inside.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.spacing; self.count];
        w[0] *= 0.5;
        w[self.count - 1] *= 0.5;
        w
    }

    /// Same grid with half the spacing over the same extent.
    pub fn refined(&self) -> Self {
        Self {
            spacing: self.spacing * 0.5,
            count: 2 * self.count - 1,
        }
    }

    /// Index of the first node with coordinate `>= x` (with a relative
    /// tolerance of `1e-9` spacings so that exact multiples are not lost to
    /// rounding).
    pub fn first_at_or_above(&self, x: f64) -> usize {
        let t = x / self.spacing - 1e-9;
        if t <= 0.0 {
            0
        } else {
            (t.ceil() as usize).min(self.count)
        }
    }
}

/// Values sampled on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.coords().map(f).collect();
        Self { grid, values }
    }

    /// Linear interpolation; `outside` is returned beyond the last node.
    pub fn interpolate(&self, x: f64, outside: f64) -> f64 {
        let t = x / self.grid.spacing;
        if t < 0.0 {
            return self.values[0];
        }
        let i = t.floor() as usize;
        if i + 1 >= self.values.len() {
            return if i + 1 == self.values.len() && t == i as f64 {
                self.values[i]
            } else {
                outside
            };
        }
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Root mean square of `self - other` over common nodes.
    pub fn rms_difference(&self, other: &RadialFunction) -> f64 {
        let n = self.values.len().min(other.values.len());
        let s: f64 = (0..n)
            .map(|i| (self.values[i] - other.values[i]).powi(2))
            .sum();
        (s / n as f64).sqrt()
    }
}

/// `F(ν)` with `P(ν) = F(ν) + 1`; the Dirac component at the origin is not
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    pub f: RadialFunction,
}

impl RadialSpectrum {
    pub fn new(grid: RadialGrid, f_values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            f: RadialFunction::new(grid, f_values)?,
        })
    }

    /// `F ≡ 0`, the spectrum of uniform random sampling.
    pub fn white(grid: RadialGrid) -> Self {
        Self {
            f: RadialFunction::new(grid, vec![0.0; grid.len()]).expect("sizes match"),
        }
    }

    /// Step blue noise: `P = 0` below `nu0`, `P = 1` above. Each node holds
    /// the average of `F` over its cell `[ν_i - h/2, ν_i + h/2]`, so a node
    /// sitting on the jump gets `-1/2` and the quadrature sees the jump at
    /// `nu0` rather than half a cell later.
    pub fn step(grid: RadialGrid, nu0: f64) -> Self {
        let h = grid.spacing();
        let values = grid
            .coords()
            .map(|nu| -((nu0 - (nu - 0.5 * h)) / h).clamp(0.0, 1.0))
            .collect();
        Self {
            f: RadialFunction { grid, values },
        }
    }

    pub fn grid(&self) -> RadialGrid {
        self.f.grid
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f.values
    }

    pub fn power(&self) -> Vec<f64> {
        self.f.values.iter().map(|f| f + 1.0).collect()
    }

    /// `P(ν)` by linear interpolation of `F`; `F = 0` beyond the grid.
    pub fn power_at(&self, nu: f64) -> f64 {
        self.f.interpolate(nu, 0.0) + 1.0
    }

    /// `g = 1 + H[F]` on `r_grid`.
    pub fn to_pcf(&self, r_grid: &RadialGrid) -> Result<PairCorrelation> {
        let mut g = hankel_transform(&self.f, r_grid)?;
        for v in &mut g.values {
            *v += 1.0;
        }
        Ok(PairCorrelation { g })
    }
}

/// Pair correlation function `g(r)` in normalized distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub g: RadialFunction,
}

impl PairCorrelation {
    pub fn new(grid: RadialGrid, g_values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            g: RadialFunction::new(grid, g_values)?,
        })
    }

    pub fn grid(&self) -> RadialGrid {
        self.g.grid
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g.values
    }

    /// `F = H[g - 1]` on `nu_grid`.
    pub fn to_spectrum(&self, nu_grid: &RadialGrid) -> Result<RadialSpectrum> {
        let u = RadialFunction {
            grid: self.g.grid,
            values: self.g.values.iter().map(|g| g - 1.0).collect(),
        };
        Ok(RadialSpectrum {
            f: hankel_transform(&u, nu_grid)?,
        })
    }

    /// Mean of `|g - 1|` over the last 10% of the grid.
    pub fn tail_deviation(&self) -> f64 {
        let n = self.g.values.len();
        let start = n - (n / 10).max(1);
        let tail = &self.g.values[start..];
        tail.iter().map(|g| (g - 1.0).abs()).sum::<f64>() / tail.len() as f64
    }
}

/// Endpoint correction for the node at `t = 0`. The integrand `2π t f(t) J0`
/// has slope `2π f(0)` there, which plain trapezoid misses by `h²/12` of it
/// (Euler-Maclaurin); left alone this is a constant offset at every output
/// radius.
fn origin_weight(grid: &RadialGrid) -> f64 {
    2.0 * PI * grid.spacing() * grid.spacing() / 12.0
}

/// Dense trapezoidal discretization of the Hankel transform from one grid to
/// another. Row `j` holds `2π w_i t_i J0(2π s_j t_i)`, plus the origin
/// correction in column 0.
#[derive(Debug, Clone)]
pub struct HankelMatrix {
    input: RadialGrid,
    output: RadialGrid,
    // row-major, output.len() x input.len()
    data: Vec<f64>,
}

impl HankelMatrix {
    pub fn new(input: &RadialGrid, output: &RadialGrid) -> Self {
        let cols = input.len();
        let weights = input.trapezoid_weights();
        let scale: Vec<f64> = (0..cols)
            .map(|i| 2.0 * PI * weights[i] * input.coord(i))
            .collect();
        let rows = par::map_range(output.len(), |j| {
            let s = output.coord(j);
            (0..cols)
                .map(|i| {
                    if i == 0 {
                        origin_weight(input)
                    } else {
                        scale[i] * j0(2.0 * PI * s * input.coord(i))
                    }
                })
                .collect::<Vec<f64>>()
        });
        Self {
            input: *input,
            output: *output,
            data: rows.concat(),
        }
    }

    pub fn input_grid(&self) -> RadialGrid {
        self.input
    }

    pub fn output_grid(&self) -> RadialGrid {
        self.output
    }

    pub fn rows(&self) -> usize {
        self.output.len()
    }

    pub fn cols(&self) -> usize {
        self.input.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let c = self.cols();
        &self.data[j * c..(j + 1) * c]
    }

    /// Row-major matrix entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.cols());
        (0..self.rows())
            .map(|j| {
                self.row(j)
                    .iter()
                    .zip(values)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }
}

/// `out(s_j) = 2π Σ_i w_i in(t_i) J0(2π s_j t_i) t_i` with trapezoidal `w_i`
/// and the same origin correction as [`HankelMatrix`].
pub fn hankel_transform(input: &RadialFunction, target: &RadialGrid) -> Result<RadialFunction> {
    if input.values.is_empty() {
        return Err(Error::InvalidInput("empty radial function".into()));
    }
    if let Some(bad) = input.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite input value {bad}")));
    }
    let weights = input.grid.trapezoid_weights();
    let scaled: Vec<(f64, f64)> = (0..input.values.len())
        .filter_map(|i| {
            let t = input.grid.coord(i);
            let a = 2.0 * PI * weights[i] * t * input.values[i];
            (a != 0.0).then_some((t, a))
        })
        .collect();
    let origin = origin_weight(&input.grid) * input.values[0];
    let values = par::map_range(target.len(), |j| {
        let s = 2.0 * PI * target.coord(j);
        origin + scaled.iter().map(|&(t, a)| a * j0(s * t)).sum::<f64>()
    });
    RadialFunction::new(*target, values)
}

/// `g(r) = 1 - (ν0 / r) J1(2π ν0 r)`, the PCF of the ideal step spectrum,
/// with the `r = 0` limit `1 - π ν0²`.
pub fn closed_form_step_pcf(nu0: f64, r_grid: &RadialGrid) -> Result<PairCorrelation> {
    if !(nu0 > 0.0) {
        return Err(Error::InvalidInput(format!("nu0 must be positive, got {nu0}")));
    }
    let g = RadialFunction::from_fn(*r_grid, |r| {
        let x = 2.0 * PI * nu0 * r;
        1.0 - 2.0 * PI * nu0 * nu0 * bessel::j1_over_x(x)
    });
    Ok(PairCorrelation { g })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(width: f64) -> impl Fn(f64) -> f64 {
        move |x: f64| (-PI * (x / width).powi(2)).exp()
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::new(0.0, 10).is_err());
        assert!(RadialGrid::new(-0.1, 10).is_err());
        assert!(RadialGrid::new(0.1, 1).is_err());
        let g = RadialGrid::with_max(0.01, 10.0).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.coord(0), 0.0);
        assert_eq!(g.coord(7), 7.0 * 0.01);
        assert_eq!(g.first_at_or_above(0.5), 50);
        assert_eq!(g.first_at_or_above(0.505), 51);
        assert_eq!(g.first_at_or_above(0.0), 0);
    }

    #[test]
    fn empty_input_rejected() {
        let grid = RadialGrid::new(0.1, 2).unwrap();
        let f = RadialFunction {
            grid,
            values: vec![],
        };
        assert!(hankel_transform(&f, &grid).is_err());
        let f = RadialFunction {
            grid,
            values: vec![1.0, f64::NAN],
        };
        assert!(hankel_transform(&f, &grid).is_err());
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = RadialGrid::with_max(0.05, 5.0).unwrap();
        let f = RadialFunction::from_fn(grid, |_| 0.0);
        let out = hankel_transform(&f, &grid).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_is_self_dual() {
        let nu = RadialGrid::with_max(0.01, 10.0).unwrap();
        let r = RadialGrid::with_max(0.01, 5.0).unwrap();
        let f = RadialFunction::from_fn(nu, gaussian(1.0));
        let out = hankel_transform(&f, &r).unwrap();
        let err = r
            .coords()
            .zip(&out.values)
            .map(|(x, v)| (v - gaussian(1.0)(x)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "max error {err}");
    }

    #[test]
    fn matrix_matches_direct_transform() {
        let a = RadialGrid::with_max(0.05, 6.0).unwrap();
        let b = RadialGrid::with_max(0.07, 4.0).unwrap();
        let f = RadialFunction::from_fn(a, |x| (-x).exp() * (3.0 * x).cos());
        let h = HankelMatrix::new(&a, &b);
        let direct = hankel_transform(&f, &b).unwrap();
        for (u, v) in h.apply(&f.values).iter().zip(&direct.values) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn step_pcf_closed_form_values() {
        let grid = RadialGrid::new(0.01, 3).unwrap();
        let g = closed_form_step_pcf((1.0 / PI).sqrt(), &grid).unwrap();
        assert!(g.g_values()[0].abs() < 1e-14);
        let g = closed_form_step_pcf(0.4, &grid).unwrap();
        assert!((g.g_values()[0] - (1.0 - 0.16 * PI)).abs() < 1e-14);
        assert!((g.g_values()[0] - 0.4973).abs() < 1e-4);
        let far = RadialGrid::with_max(0.5, 400.0).unwrap();
        let g = closed_form_step_pcf(0.5642, &far).unwrap();
        assert!((g.g_values().last().unwrap() - 1.0).abs() < 1e-3);
        assert!(closed_form_step_pcf(0.0, &grid).is_err());
    }

    #[test]
    fn interpolation() {
        let grid = RadialGrid::new(0.5, 3).unwrap();
        let f = RadialFunction::new(grid, vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(f.interpolate(0.25, 9.0), 0.5);
        assert_eq!(f.interpolate(0.75, 9.0), 2.0);
        assert_eq!(f.interpolate(1.0, 9.0), 3.0);
        assert_eq!(f.interpolate(1.2, 9.0), 9.0);
    }
}
