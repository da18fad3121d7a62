//! Kernel-smoothed pair correlation estimator.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pointset::{toroidal_distance_sq, Point};
use crate::radial::{PairCorrelation, RadialGrid};

/// Default smoothing of the estimator in normalized distance.
pub const DEFAULT_PCF_SIGMA: f64 = 0.1;

/// Histogram of normalized pair distances (ordered pairs, so each unordered
/// pair counts twice) within the half-box radius.
#[derive(Debug, Clone)]
pub struct PairHistogram {
    pub bin_width: f64,
    pub counts: Vec<f64>,
}

impl PairHistogram {
    /// Bin center of bin `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_width
    }
}

/// Counts pairs with normalized distance below `r_cut` (clamped to the
/// half-box radius `√N / 2`).
pub fn pair_histogram(points: &[Point], r_cut: f64, bin_width: f64) -> PairHistogram {
    let n = points.len();
    let scale = (n as f64).sqrt();
    let r_cut = r_cut.min(0.5 * scale);
    let bins = (r_cut / bin_width).ceil() as usize + 1;
    let d_cut = r_cut / scale;
    let cells = ((1.0 / d_cut).floor() as usize).clamp(1, 1024);
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    let cell_of = |x: f64| ((x * cells as f64) as usize).min(cells - 1);
    for (i, p) in points.iter().enumerate() {
        grid[cell_of(p[0]) * cells + cell_of(p[1])].push(i);
    }
    let reach = if cells < 3 { 0 } else { 1 };
    let d2_cut = d_cut * d_cut;
    let rows: Vec<Vec<f64>> = crate::par::map_range(n, |i| {
        let mut counts = vec![0.0; bins];
        let p = points[i];
        let (cx, cy) = (cell_of(p[0]) as i64, cell_of(p[1]) as i64);
        let visit = |cell: usize, counts: &mut Vec<f64>| {
            for &j in &grid[cell] {
                if j == i {
                    continue;
                }
                let d2 = toroidal_distance_sq(p, points[j]);
                if d2 < d2_cut {
                    let b = (d2.sqrt() * scale / bin_width) as usize;
                    counts[b.min(bins - 1)] += 1.0;
                }
            }
        };
        if reach == 0 {
            for cell in 0..cells * cells {
                visit(cell, &mut counts);
            }
        } else {
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let gx = (cx + dx).rem_euclid(cells as i64) as usize;
                    let gy = (cy + dy).rem_euclid(cells as i64) as usize;
                    visit(gx * cells + gy, &mut counts);
                }
            }
        }
        counts
    });
    let mut counts = vec![0.0; bins];
    for row in rows {
        for (c, r) in counts.iter_mut().zip(row) {
            *c += r;
        }
    }
    PairHistogram { bin_width, counts }
}

/// `ĝ(r) = Σ_{j≠k} k_σ(r - √N d_jk) / (2π r N)` on `r_grid`, from one or
/// more sets of equal size (averaged).
pub fn empirical_pcf(
    sets: &[&[Point]],
    r_grid: &RadialGrid,
    sigma: f64,
) -> Result<PairCorrelation> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no point sets given".into()));
    }
    let n = sets[0].len();
    if n < 2 {
        return Err(Error::InvalidInput("pair correlation needs at least 2 points".into()));
    }
    if sets.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("point sets differ in size".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!("smoothing sigma must be positive, got {sigma}")));
    }
    let bin_width = (sigma / 20.0).min(r_grid.spacing() / 2.0);
    let r_cut = r_grid.max() + 6.0 * sigma;
    let mut hist: Option<PairHistogram> = None;
    for s in sets {
        let h = pair_histogram(s, r_cut, bin_width);
        match &mut hist {
            None => hist = Some(h),
            Some(acc) => {
                for (a, b) in acc.counts.iter_mut().zip(h.counts) {
                    *a += b;
                }
            }
        }
    }
    let hist = hist.expect("at least one set");
    let norm = 1.0 / (sets.len() as f64 * n as f64 * 2.0 * PI);
    Ok(PairCorrelation::new(*r_grid, smooth(&hist, r_grid, sigma, norm))?)
}

/// Kernel sum over histogram bins divided by `r`; the `r = 0` node copies
/// the first positive node.
fn smooth(hist: &PairHistogram, r_grid: &RadialGrid, sigma: f64, norm: f64) -> Vec<f64> {
    let c = 1.0 / (sigma * (2.0 * PI).sqrt());
    let reach = 6.0 * sigma;
    let mut g: Vec<f64> = r_grid
        .coords()
        .map(|r| {
            if r == 0.0 {
                return 0.0;
            }
            let lo = ((r - reach) / hist.bin_width).floor().max(0.0) as usize;
            let hi = (((r + reach) / hist.bin_width).ceil() as usize).min(hist.counts.len());
            let mut s = 0.0;
            for b in lo..hi {
                let cnt = hist.counts[b];
                if cnt != 0.0 {
                    let u = (r - hist.center(b)) / sigma;
                    s += cnt * (-0.5 * u * u).exp();
                }
            }
            s * c * norm / r
        })
        .collect();
    if g.len() > 1 {
        g[0] = g[1];
    }
    g
}

/// The expectation of the estimator for a process with PCF `g`:
/// `(1/r) ∫ k_σ(r - s) s g(s) ds`. Used to compare targets with estimates at
/// equal resolution.
pub fn smoothed_pcf(target: &PairCorrelation, sigma: f64) -> PairCorrelation {
    let grid = target.grid();
    let h = grid.spacing();
    let w = grid.trapezoid_weights();
    let c = 1.0 / (sigma * (2.0 * PI).sqrt());
    let gv = target.g_values();
    let mut out: Vec<f64> = grid
        .coords()
        .map(|r| {
            if r == 0.0 {
                return 0.0;
            }
            let mut s = 0.0;
            for (i, s_i) in grid.coords().enumerate() {
                let u = (r - s_i) / sigma;
                if u.abs() < 8.0 {
                    s += w[i] * (-0.5 * u * u).exp() * s_i * gv[i];
                }
            }
            // continue the trapezoid rule past the grid end with g = 1
            if r + 8.0 * sigma > grid.max() {
                let u = (r - grid.max()) / sigma;
                s += 0.5 * h * (-0.5 * u * u).exp() * grid.max() * gv[gv.len() - 1];
                let mut t = grid.max() + h;
                while t < r + 8.0 * sigma {
                    let u = (r - t) / sigma;
                    s += h * (-0.5 * u * u).exp() * t;
                    t += h;
                }
            }
            s * c / r
        })
        .collect();
    if out.len() > 1 {
        out[0] = out[1];
    }
    PairCorrelation::new(grid, out).expect("same grid")
}
