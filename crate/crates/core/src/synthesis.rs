//! Point sets whose pair correlation matches a target.
//!
//! Gradient descent on `E = Σ_j w_j (ĝ(r_j) - g̃(r_j))²`, where `ĝ` is the
//! kernel-smoothed PCF of the current points and `g̃` the target smoothed by
//! the same kernel (the estimator's expectation under the target).

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimation::{fourier::exponential_sums, smoothed_pcf};
use crate::par;
use crate::pointset::{generate_dart_throwing, stream_rng, toroidal_delta, wrap, Point, PointSet};
use crate::radial::PairCorrelation;

pub const DEFAULT_SMOOTHING: f64 = 0.25;
pub const DEFAULT_STEP: f64 = 0.02;
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Normalized dart-throwing radius used for warm starts.
const WARM_START_RADIUS: f64 = 0.6;
const MAX_FIT_RADIUS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Random,
    DartThrowing,
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub n_points: usize,
    pub target: PairCorrelation,
    /// Kernel std in normalized distance.
    pub smoothing_sigma: f64,
    /// Largest per-iteration move in normalized distance.
    pub step_size: f64,
    pub max_iterations: usize,
    /// Converged once the largest accepted move is below this (absolute).
    pub convergence_tol: f64,
    pub seed: u64,
    pub init: Init,
    /// Largest fitted distance; chosen from the target when `None`.
    pub fit_radius: Option<f64>,
}

impl SynthesisConfig {
    pub fn new(n_points: usize, target: PairCorrelation, seed: u64) -> Self {
        Self {
            n_points,
            target,
            smoothing_sigma: DEFAULT_SMOOTHING,
            step_size: DEFAULT_STEP,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            convergence_tol: DEFAULT_TOLERANCE,
            seed,
            init: Init::Random,
            fit_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 16 {
            return Err(Error::InvalidInput(format!("need at least 16 points, got {}", self.n_points)));
        }
        if !(self.smoothing_sigma > 0.0) {
            return Err(Error::InvalidInput("smoothing sigma must be positive".into()));
        }
        if !(self.step_size > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidInput("step size and tolerance must be positive".into()));
        }
        let min = self.target.g_values().iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min >= -1e-2) {
            return Err(Error::InvalidInput(format!("target PCF is negative (min {min:.3e})")));
        }
        if self.target.g_values().iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput("target PCF has non-finite values".into()));
        }
        Ok(())
    }

    fn resolved_fit_radius(&self) -> f64 {
        let half_box = 0.5 * (self.n_points as f64).sqrt() - 4.0 * self.smoothing_sigma;
        let r = self.fit_radius.unwrap_or_else(|| {
            let grid = self.target.grid();
            let last = self
                .target
                .g_values()
                .iter()
                .rposition(|g| (g - 1.0).abs() > 0.01)
                .map_or(0.0, |i| grid.coord(i));
            (last + 1.0).clamp(2.0, MAX_FIT_RADIUS)
        });
        r.min(self.target.grid().max()).min(half_box)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisReport {
    pub initial_energy: f64,
    pub energy: f64,
    pub iterations: usize,
    /// False when `max_iterations` ran out first.
    pub converged: bool,
    /// Mean empirical `P(k)` over `0 < |k| / √N <= 0.5`.
    pub low_frequency_power: f64,
    pub fit_radius: f64,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub points: PointSet,
    pub report: SynthesisReport,
}

/// Synthesizes one set from stream 0 of `config.seed`.
pub fn synthesize(config: &SynthesisConfig) -> Result<Synthesis> {
    synthesize_stream(config, 0)
}

/// `count` independent sets from streams `0..count`.
pub fn synthesize_many(config: &SynthesisConfig, count: usize) -> Result<Vec<Synthesis>> {
    config.validate()?;
    let runs = par::map_range(count, |i| synthesize_stream(config, i as u64));
    runs.into_iter().collect()
}

pub fn synthesize_stream(config: &SynthesisConfig, stream: u64) -> Result<Synthesis> {
    config.validate()?;
    let n = config.n_points;
    let mut pts = match config.init {
        Init::Random => {
            let mut rng = stream_rng(config.seed, stream);
            (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
        }
        Init::DartThrowing => {
            let d = WARM_START_RADIUS / (n as f64).sqrt();
            let seed = config.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            generate_dart_throwing(n, d, seed, crate::pointset::DEFAULT_MAX_ATTEMPTS)?.into_points()
        }
    };
    let m = Matcher::new(config);
    let (mut energy, mut residual) = m.energy(&pts);
    let initial_energy = energy;
    let scale = (n as f64).sqrt();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let step = config.step_size * 0.95f64.powi((iterations / 100) as i32) / scale;
        let grad = m.gradient(&pts, &residual);
        let gmax = grad.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
        if gmax == 0.0 {
            converged = true;
            break;
        }
        let mut mv = step;
        let mut accepted = false;
        while mv >= config.convergence_tol {
            let trial: Vec<Point> = pts
                .iter()
                .zip(&grad)
                .map(|(p, g)| [wrap(p[0] - mv * g[0] / gmax), wrap(p[1] - mv * g[1] / gmax)])
                .collect();
            let (e, r) = m.energy(&trial);
            if e <= energy {
                pts = trial;
                energy = e;
                residual = r;
                accepted = true;
                break;
            }
            mv *= 0.5;
        }
        if !accepted || mv < config.convergence_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("synthesis stopped after {iterations} iterations without converging");
    }
    let low_frequency_power = low_frequency_power(&pts);
    Ok(Synthesis {
        points: PointSet::new(pts, Some(config.seed))?,
        report: SynthesisReport {
            initial_energy,
            energy,
            iterations,
            converged,
            low_frequency_power,
            fit_radius: m.fit_radius,
        },
    })
}

fn low_frequency_power(pts: &[Point]) -> f64 {
    let n = pts.len() as f64;
    let m = (0.5 * n.sqrt()).floor() as i64;
    if m == 0 {
        return 0.0;
    }
    let s = exponential_sums(pts, None, m as usize);
    let side = 2 * m + 1;
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, v) in s.iter().enumerate() {
        let k1 = i as i64 / side - m;
        let k2 = i as i64 % side - m;
        let k2n = k1 * k1 + k2 * k2;
        if k2n > 0 && k2n <= m * m {
            sum += v.norm_sqr() / n;
            count += 1;
        }
    }
    sum / count as f64
}

/// Precomputed fit nodes and kernel constants.
struct Matcher {
    n: usize,
    scale: f64,
    sigma: f64,
    fit_radius: f64,
    /// Fit node radii, weights and smoothed target values.
    nodes: Vec<(f64, f64, f64)>,
    bin_width: f64,
    nbins: usize,
    cutoff: f64,
}

impl Matcher {
    fn new(c: &SynthesisConfig) -> Self {
        let n = c.n_points;
        let scale = (n as f64).sqrt();
        let sigma = c.smoothing_sigma;
        let fit_radius = c.resolved_fit_radius();
        let clamped = PairCorrelation::new(
            c.target.grid(),
            c.target.g_values().iter().map(|g| g.max(0.0)).collect(),
        )
        .expect("same grid");
        let smooth = smoothed_pcf(&clamped, sigma);
        let grid = smooth.grid();
        let h = grid.spacing();
        let nodes = grid
            .coords()
            .zip(smooth.g_values())
            .filter(|(r, _)| *r > 0.0 && *r <= fit_radius)
            .map(|(r, g)| (r, h, *g))
            .collect();
        let cutoff = fit_radius + 5.0 * sigma;
        let bin_width = sigma / 20.0;
        Self {
            n,
            scale,
            sigma,
            fit_radius,
            nodes,
            bin_width,
            nbins: (cutoff / bin_width).ceil() as usize + 1,
            cutoff,
        }
    }

    fn kernel(&self, u: f64) -> f64 {
        (-0.5 * u * u / (self.sigma * self.sigma)).exp() / (self.sigma * (2.0 * PI).sqrt())
    }

    /// Energy and per-node residual `ĝ - g̃`.
    fn energy(&self, pts: &[Point]) -> (f64, Vec<f64>) {
        let counts = self.histogram(pts);
        let reach = 6.0 * self.sigma;
        let mut e = 0.0;
        let residual = self
            .nodes
            .iter()
            .map(|&(r, w, target)| {
                let lo = ((r - reach) / self.bin_width).floor().max(0.0) as usize;
                let hi = (((r + reach) / self.bin_width).ceil() as usize).min(self.nbins);
                let mut s = 0.0;
                for (b, &c) in counts.iter().enumerate().take(hi).skip(lo) {
                    if c != 0 {
                        s += c as f64 * self.kernel(r - (b as f64 + 0.5) * self.bin_width);
                    }
                }
                // unordered counts, so twice the sum over ordered pairs
                let g = 2.0 * s / (2.0 * PI * r * self.n as f64);
                let d = g - target;
                e += w * d * d;
                d
            })
            .collect();
        (e, residual)
    }

    fn histogram(&self, pts: &[Point]) -> Vec<u64> {
        let cells = CellGrid::new(pts, self.cutoff / self.scale);
        let cut2 = (self.cutoff / self.scale).powi(2);
        let chunk = 64;
        let parts = par::map_range(pts.len().div_ceil(chunk), |c| {
            let mut counts = vec![0u64; self.nbins];
            for i in c * chunk..((c + 1) * chunk).min(pts.len()) {
                cells.for_neighbors(pts, i, |k, _, d2| {
                    if k > i && d2 < cut2 {
                        let b = (d2.sqrt() * self.scale / self.bin_width) as usize;
                        counts[b.min(self.nbins - 1)] += 1;
                    }
                });
            }
            counts
        });
        let mut counts = vec![0u64; self.nbins];
        for p in parts {
            for (a, b) in counts.iter_mut().zip(p) {
                *a += b;
            }
        }
        counts
    }

    /// `dE/dx_i`.
    fn gradient(&self, pts: &[Point], residual: &[f64]) -> Vec<[f64; 2]> {
        // dE/ds for a pair at normalized distance s, tabulated on bin centers
        let reach = 6.0 * self.sigma;
        let s2 = self.sigma * self.sigma;
        let table: Vec<f64> = (0..self.nbins)
            .map(|b| {
                let s = (b as f64 + 0.5) * self.bin_width;
                let mut acc = 0.0;
                for (&(r, w, _), &d) in self.nodes.iter().zip(residual) {
                    let u = r - s;
                    if u.abs() < reach {
                        // ∂ĝ(r)/∂s = 2 k(r - s) (r - s) / σ² / (2π r N)
                        let dg = 2.0 * self.kernel(u) * u / s2 / (2.0 * PI * r * self.n as f64);
                        acc += 2.0 * w * d * dg;
                    }
                }
                acc
            })
            .collect();
        let phi = |s: f64| {
            let t = s / self.bin_width - 0.5;
            if t <= 0.0 {
                return table[0];
            }
            let i = t.floor() as usize;
            if i + 1 >= table.len() {
                return 0.0;
            }
            let f = t - i as f64;
            table[i] * (1.0 - f) + table[i + 1] * f
        };
        let cells = CellGrid::new(pts, self.cutoff / self.scale);
        let cut2 = (self.cutoff / self.scale).powi(2);
        par::map_range(pts.len(), |i| {
            let mut g = [0.0, 0.0];
            cells.for_neighbors(pts, i, |k, delta, d2| {
                if k != i && d2 < cut2 && d2 > 0.0 {
                    let d = d2.sqrt();
                    // dE/dd = √N φ(s); d(d)/dx_i = delta / d
                    let f = self.scale * phi(d * self.scale) / d;
                    g[0] += f * delta[0];
                    g[1] += f * delta[1];
                }
            });
            g
        })
    }
}

/// Uniform cell lists on the torus with cells at most half the cutoff.
struct CellGrid {
    cells: usize,
    reach: i64,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl CellGrid {
    fn new(pts: &[Point], cutoff: f64) -> Self {
        let cells = ((2.0 / cutoff).floor() as usize).clamp(1, 1024);
        let reach = if cells < 5 { -1 } else { 2 };
        let cell = |p: &Point| {
            let cx = ((p[0] * cells as f64) as usize).min(cells - 1);
            let cy = ((p[1] * cells as f64) as usize).min(cells - 1);
            cx * cells + cy
        };
        let mut start = vec![0usize; cells * cells + 1];
        for p in pts {
            start[cell(p) + 1] += 1;
        }
        for c in 0..cells * cells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut items = vec![0; pts.len()];
        for (i, p) in pts.iter().enumerate() {
            let c = cell(p);
            items[fill[c]] = i;
            fill[c] += 1;
        }
        Self {
            cells,
            reach,
            start,
            items,
        }
    }

    /// Calls `f(k, x_i - x_k, |x_i - x_k|²)` for candidate neighbors `k`
    /// (including `i` itself), in a fixed order.
    fn for_neighbors(&self, pts: &[Point], i: usize, mut f: impl FnMut(usize, [f64; 2], f64)) {
        let p = pts[i];
        let mut visit = |c: usize| {
            for &k in &self.items[self.start[c]..self.start[c + 1]] {
                let q = pts[k];
                let d = [toroidal_delta(p[0], q[0]), toroidal_delta(p[1], q[1])];
                f(k, d, d[0] * d[0] + d[1] * d[1]);
            }
        };
        if self.reach < 0 {
            for c in 0..self.cells * self.cells {
                visit(c);
            }
            return;
        }
        let n = self.cells as i64;
        let cx = ((p[0] * n as f64) as i64).min(n - 1);
        let cy = ((p[1] * n as f64) as i64).min(n - 1);
        for dx in -self.reach..=self.reach {
            for dy in -self.reach..=self.reach {
                let gx = (cx + dx).rem_euclid(n) as usize;
                let gy = (cy + dy).rem_euclid(n) as usize;
                visit(gx * self.cells + gy);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{closed_form_step_pcf, RadialGrid};

    fn flat(max: f64) -> PairCorrelation {
        let grid = RadialGrid::with_max(0.02, max).unwrap();
        PairCorrelation::new(grid, vec![1.0; grid.len()]).unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SynthesisConfig::new(8, flat(4.0), 1).validate().is_err());
        let grid = RadialGrid::with_max(0.02, 4.0).unwrap();
        let neg = PairCorrelation::new(grid, vec![-0.5; grid.len()]).unwrap();
        assert!(SynthesisConfig::new(64, neg, 1).validate().is_err());
        let mut c = SynthesisConfig::new(64, flat(4.0), 1);
        c.smoothing_sigma = 0.0;
        assert!(c.validate().is_err());
    }

    /// Energy with exact pair distances instead of histogram bins.
    fn exact_energy(m: &Matcher, pts: &[Point]) -> f64 {
        let mut e = 0.0;
        for &(r, w, target) in &m.nodes {
            let mut s = 0.0;
            for i in 0..pts.len() {
                for k in 0..pts.len() {
                    if i != k {
                        let d = crate::pointset::toroidal_distance(pts[i], pts[k]) * m.scale;
                        if d < m.cutoff {
                            s += m.kernel(r - d);
                        }
                    }
                }
            }
            let g = s / (2.0 * PI * r * m.n as f64);
            e += w * (g - target).powi(2);
        }
        e
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let grid = RadialGrid::with_max(0.02, 8.0).unwrap();
        let target = closed_form_step_pcf(0.5, &grid).unwrap();
        let mut c = SynthesisConfig::new(64, target, 3);
        c.fit_radius = Some(3.0);
        let m = Matcher::new(&c);
        let mut rng = stream_rng(5, 0);
        let pts: Vec<Point> = (0..64).map(|_| [rng.random(), rng.random()]).collect();
        let (_, res) = m.energy(&pts);
        let grad = m.gradient(&pts, &res);
        let gmax = grad.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
        let h = 1e-6;
        for i in [0, 17, 40] {
            for axis in 0..2 {
                let mut a = pts.clone();
                let mut b = pts.clone();
                a[i][axis] = wrap(a[i][axis] + h);
                b[i][axis] = wrap(b[i][axis] - h);
                let fd = (exact_energy(&m, &a) - exact_energy(&m, &b)) / (2.0 * h);
                let g = grad[i][axis];
                // residuals come from binned distances, forces from exact ones
                assert!((fd - g).abs() < 0.02 * gmax, "{i} {axis}: {fd} vs {g}");
            }
        }
    }

    #[test]
    fn energy_decreases_and_is_deterministic() {
        let grid = RadialGrid::with_max(0.02, 10.0).unwrap();
        let target = closed_form_step_pcf(0.5, &grid).unwrap();
        let mut c = SynthesisConfig::new(256, target, 11);
        c.max_iterations = 100;
        let a = synthesize(&c).unwrap();
        let b = synthesize(&c).unwrap();
        assert!(a.report.energy < 0.5 * a.report.initial_energy);
        assert_eq!(a.points.points(), b.points.points());
        assert!(a.points.points().iter().all(|p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])));
    }

    #[test]
    fn flat_target_barely_moves_random_points() {
        let mut c = SynthesisConfig::new(1024, flat(10.0), 2);
        c.max_iterations = 50;
        let s = synthesize(&c).unwrap();
        let mut rng = stream_rng(2, 0);
        let init: Vec<Point> = (0..1024).map(|_| [rng.random(), rng.random()]).collect();
        let max_move = s
            .points
            .points()
            .iter()
            .zip(&init)
            .map(|(a, b)| crate::pointset::toroidal_distance(*a, *b))
            .fold(0.0, f64::max);
        assert!(max_move * 32.0 < 1.5, "moved {max_move}");
        assert!(s.report.energy <= s.report.initial_energy);
    }
}
