//! Point sets on the unit torus `[0, 1)²` and baseline generators.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`; independent
//! realizations of one experiment use the same seed on different streams
//! (see [`stream_rng`]), so every set can be regenerated on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::{Error, Result};

pub type Point = [f64; 2];

/// Largest possible toroidal distance on the unit torus.
pub const MAX_TORUS_DISTANCE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Default number of consecutive rejections before dart throwing gives up.
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
    seed: Option<u64>,
}

impl PointSet {
    pub fn new(points: Vec<Point>, seed: Option<u64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("a point set needs at least one point".into()));
        }
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| !p.iter().all(|c| (0.0..1.0).contains(c)))
        {
            return Err(Error::InvalidInput(format!(
                "point {i} = ({}, {}) is outside [0, 1)²",
                p[0], p[1]
            )));
        }
        Ok(Self { points, seed })
    }

    /// Wraps arbitrary coordinates onto the torus first.
    pub fn from_wrapped(points: impl IntoIterator<Item = Point>, seed: Option<u64>) -> Result<Self> {
        Self::new(
            points.into_iter().map(|[x, y]| [wrap(x), wrap(y)]).collect(),
            seed,
        )
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `λ = N` on the unit-area torus.
    pub fn intensity(&self) -> f64 {
        self.points.len() as f64
    }

    /// Exhaustive minimum pairwise toroidal distance (`inf` for one point).
    pub fn min_pairwise_distance(&self) -> f64 {
        let p = &self.points;
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                best = best.min(toroidal_distance_sq(p[i], p[j]));
            }
        }
        best.sqrt()
    }
}

/// Maps `x` into `[0, 1)`.
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Signed per-axis difference `a - b` reduced to `[-0.5, 0.5]`.
#[inline]
pub fn toroidal_delta(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

#[inline]
pub fn toroidal_distance_sq(a: Point, b: Point) -> f64 {
    let dx = toroidal_delta(a[0], b[0]);
    let dy = toroidal_delta(a[1], b[1]);
    dx * dx + dy * dy
}

#[inline]
pub fn toroidal_distance(a: Point, b: Point) -> f64 {
    toroidal_distance_sq(a, b).sqrt()
}

/// Generator for realization `stream` of an experiment seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_point(rng: &mut impl Rng) -> Point {
    [rng.random::<f64>(), rng.random::<f64>()]
}

/// `n` i.i.d. uniform points.
pub fn generate_random(n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    PointSet::new((0..n).map(|_| uniform_point(&mut rng)).collect(), Some(seed))
}

/// Homogeneous Poisson process of the given intensity: a Poisson number of
/// uniform points. Unlike [`generate_random`] the count fluctuates, which
/// is what makes `U ≡ 0` exact at every frequency including the origin.
pub fn generate_poisson_process(intensity: f64, seed: u64, stream: u64) -> Result<Vec<Point>> {
    let dist = Poisson::new(intensity)
        .map_err(|e| Error::InvalidInput(format!("intensity {intensity}: {e}")))?;
    let mut rng = stream_rng(seed, stream);
    let count = dist.sample(&mut rng) as usize;
    Ok((0..count).map(|_| uniform_point(&mut rng)).collect())
}

/// `√n × √n` lattice with a half-cell offset.
pub fn generate_regular(n: usize) -> Result<PointSet> {
    let side = (n as f64).sqrt().round() as usize;
    if n == 0 || side * side != n {
        return Err(Error::InvalidInput(format!("{n} is not a positive perfect square")));
    }
    let cell = 1.0 / side as f64;
    let points = (0..side)
        .flat_map(|i| (0..side).map(move |j| [(i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell]))
        .collect();
    PointSet::new(points, None)
}

/// One uniform point in each cell of the `√n × √n` lattice.
pub fn generate_jittered(n: usize, seed: u64) -> Result<PointSet> {
    let regular = generate_regular(n)?;
    let cell = 1.0 / (n as f64).sqrt();
    let mut rng = stream_rng(seed, 0);
    let points = regular
        .points()
        .iter()
        .map(|p| {
            let [dx, dy] = uniform_point(&mut rng);
            [
                wrap(p[0] + (dx - 0.5) * cell),
                wrap(p[1] + (dy - 0.5) * cell),
            ]
        })
        .collect();
    PointSet::new(points, Some(seed))
}

/// Random sequential placement with a toroidal minimum distance.
///
/// Fails with [`Error::Saturated`] after `max_attempts` consecutive rejected
/// candidates.
pub fn generate_dart_throwing(
    n: usize,
    min_dist: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(min_dist >= 0.0) || !min_dist.is_finite() {
        return Err(Error::InvalidInput(format!(
            "minimum distance must be non-negative, got {min_dist}"
        )));
    }
    if n >= 2 && min_dist > MAX_TORUS_DISTANCE {
        return Err(Error::InvalidInput(format!(
            "minimum distance {min_dist} exceeds the largest toroidal distance"
        )));
    }
    if min_dist == 0.0 {
        return generate_random(n, seed);
    }

    // cells of side min_dist/√2 hold at most one point; capped for tiny radii
    let cells = ((std::f64::consts::SQRT_2 / min_dist).floor() as usize).clamp(1, 2048);
    let cell = 1.0 / cells as f64;
    let reach = (min_dist / cell).ceil() as isize;
    let span = (2 * reach + 1).min(cells as isize);
    let mut grid: Vec<Vec<u32>> = vec![Vec::new(); cells * cells];
    let cell_of = |c: f64| ((c * cells as f64) as usize).min(cells - 1);
    let d2 = min_dist * min_dist;

    let mut rng = stream_rng(seed, 0);
    let mut points: Vec<Point> = Vec::with_capacity(n);
    let mut misses = 0;
    while points.len() < n {
        let p = uniform_point(&mut rng);
        let (cx, cy) = (cell_of(p[0]) as isize, cell_of(p[1]) as isize);
        let start = if span < 2 * reach + 1 { 0 } else { -reach };
        let mut ok = true;
        'scan: for di in 0..span {
            let gx = (cx + start + di).rem_euclid(cells as isize) as usize;
            for dj in 0..span {
                let gy = (cy + start + dj).rem_euclid(cells as isize) as usize;
                for &k in &grid[gx * cells + gy] {
                    if toroidal_distance_sq(p, points[k as usize]) < d2 {
                        ok = false;
                        break 'scan;
                    }
                }
            }
        }
        if ok {
            grid[cell_of(p[0]) * cells + cell_of(p[1])].push(points.len() as u32);
            points.push(p);
            misses = 0;
        } else {
            misses += 1;
            if misses >= max_attempts {
                return Err(Error::Saturated {
                    placed: points.len(),
                    requested: n,
                });
            }
        }
    }
    PointSet::new(points, Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn random_is_deterministic() {
        let a = generate_random(4096, 11).unwrap();
        let b = generate_random(4096, 11).unwrap();
        let c = generate_random(4096, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(generate_random(1, 3).unwrap().len(), 1);
    }

    #[test]
    fn streams_differ() {
        let a = generate_poisson_process(100.0, 5, 0).unwrap();
        let b = generate_poisson_process(100.0, 5, 1).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, generate_poisson_process(100.0, 5, 0).unwrap());
    }

    #[test]
    fn regular_lattice() {
        let p = generate_regular(4).unwrap();
        assert_eq!(
            p.points(),
            &[[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]
        );
        assert_eq!(generate_regular(16384).unwrap().len(), 16384);
        assert!(generate_regular(15).is_err());
    }

    #[test]
    fn jittered_stays_in_cells() {
        let p = generate_jittered(64, 2).unwrap();
        for (q, r) in p.points().iter().zip(generate_regular(64).unwrap().points()) {
            assert!(toroidal_distance(*q, *r) <= 0.5f64.sqrt() / 8.0 + 1e-12);
        }
    }

    #[test]
    fn dart_throwing_respects_radius() {
        let r = 0.7 / 32.0;
        let p = generate_dart_throwing(1024, r, 9, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(p.len(), 1024);
        assert!(p.min_pairwise_distance() >= r);
    }

    #[test]
    fn dart_throwing_limits() {
        assert!(generate_dart_throwing(2, 0.8, 1, DEFAULT_MAX_ATTEMPTS).is_err());
        assert_eq!(
            generate_dart_throwing(50, 0.0, 4, 10).unwrap(),
            generate_random(50, 4).unwrap()
        );
        match generate_dart_throwing(1024, 1.2 / 32.0, 1, 200) {
            Err(Error::Saturated { requested, .. }) => assert_eq!(requested, 1024),
            other => panic!("expected saturation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_points_off_torus() {
        assert!(PointSet::new(vec![[1.0, 0.5]], None).is_err());
        assert!(PointSet::new(vec![], None).is_err());
        let p = PointSet::from_wrapped([[1.25, -0.25]], None).unwrap();
        assert_eq!(p.points()[0], [0.25, 0.75]);
    }

    fn pt() -> impl Strategy<Value = Point> {
        (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| [x, y])
    }

    proptest! {
        #[test]
        fn metric_axioms(a in pt(), b in pt(), c in pt()) {
            let ab = toroidal_distance(a, b);
            prop_assert_eq!(ab, toroidal_distance(b, a));
            prop_assert!(ab <= MAX_TORUS_DISTANCE + 1e-12);
            prop_assert!(ab <= toroidal_distance(a, c) + toroidal_distance(c, b) + 1e-12);
        }

        #[test]
        fn wrap_lands_in_unit_interval(x in -1e6..1e6f64) {
            let y = wrap(x);
            prop_assert!((0.0..1.0).contains(&y));
            prop_assert!(((x - y) - (x - y).round()).abs() < 1e-6);
        }

        #[test]
        fn translation_invariance(a in pt(), b in pt(), s in pt()) {
            let shift = |p: Point| [wrap(p[0] + s[0]), wrap(p[1] + s[1])];
            let d0 = toroidal_distance(a, b);
            let d1 = toroidal_distance(shift(a), shift(b));
            prop_assert!((d0 - d1).abs() < 1e-12);
        }
    }
}
