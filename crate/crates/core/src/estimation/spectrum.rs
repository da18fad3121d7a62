use super::fourier::exponential_sums;
use super::{accumulate, RadialProfile, Spectrum2D};
use crate::error::{Error, Result};
use crate::pointset::Point;
use crate::radial::{RadialGrid, RadialSpectrum};

/// `ceil(3 √N)`: normalized frequencies up to 3 along the axes.
pub fn default_half_width(n: usize) -> usize {
    (3.0 * (n as f64).sqrt()).ceil() as usize
}

/// `P(k) = |Σ_j exp(-2πi k·x_j)|² / N` averaged over sets of equal size.
pub fn empirical_power_spectrum(sets: &[&[Point]], m: usize) -> Result<Spectrum2D> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no point sets given".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("frequency half-width must be at least 1".into()));
    }
    let n = sets[0].len();
    if n == 0 || sets.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("point sets must be nonempty and of equal size".into()));
    }
    let side = 2 * m + 1;
    let (mean, var) = accumulate(sets.len(), side * side, |i| {
        Ok(exponential_sums(sets[i], None, m)
            .iter()
            .map(|s| s.norm_sqr() / n as f64)
            .collect())
    })?;
    let mut s = Spectrum2D::new(m, mean)?.with_statistics(var, sets.len());
    s.symmetrize();
    Ok(s)
}

/// Radial spectrum on nodes `i · bin_width` interpolated from a measured
/// profile. The `ν = 0` node gets `f_at_zero` (`-1` for fixed-size sets,
/// whose sample count has no variance). Nodes past the last present bin are
/// `0`.
pub fn radial_spectrum_from_profile(profile: &RadialProfile, f_at_zero: f64) -> Result<RadialSpectrum> {
    let pts: Vec<(f64, f64)> = profile.present().map(|b| (b.nu, b.value - 1.0)).collect();
    if pts.is_empty() {
        return Err(Error::InvalidInput("profile has no bins".into()));
    }
    let bw = profile.bin_width;
    let last = pts.last().expect("nonempty").0;
    let count = (last / bw).floor() as usize + 1;
    let grid = RadialGrid::new(bw, count.max(2))?;
    let mut j = 0;
    let values = grid
        .coords()
        .map(|nu| {
            if nu == 0.0 {
                return f_at_zero;
            }
            while j + 1 < pts.len() && pts[j + 1].0 < nu {
                j += 1;
            }
            let (x0, y0) = pts[j];
            if nu <= x0 || j + 1 == pts.len() {
                return y0;
            }
            let (x1, y1) = pts[j + 1];
            y0 + (y1 - y0) * (nu - x0) / (x1 - x0)
        })
        .collect();
    RadialSpectrum::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::radial_average;
    use crate::pointset::{generate_random, generate_regular};

    #[test]
    fn single_point_is_flat() {
        let s = empirical_power_spectrum(&[&[[0.3, 0.81]]], 5).unwrap();
        assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn lattice_harmonics() {
        let pts = generate_regular(64).unwrap();
        let s = empirical_power_spectrum(&[pts.points()], 16).unwrap();
        for (k1, k2, v) in s.iter() {
            let on = k1 % 8 == 0 && k2 % 8 == 0;
            if on {
                assert!((v - 64.0).abs() < 1e-9, "{k1} {k2} {v}");
            } else {
                assert!(v < 1e-9, "{k1} {k2} {v}");
            }
        }
        let p = radial_average(&s, 64.0, 0.02).unwrap();
        let spike = p
            .present()
            .filter(|b| b.nu < 1.3)
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap();
        assert!((spike.nu - 1.0).abs() <= 0.011, "{}", spike.nu);
    }

    #[test]
    fn random_sets_are_flat() {
        let sets: Vec<_> = (0..10).map(|s| generate_random(1024, s).unwrap()).collect();
        let refs: Vec<&[Point]> = sets.iter().map(|s| s.points()).collect();
        let s = empirical_power_spectrum(&refs, default_half_width(1024)).unwrap();
        let p = radial_average(&s, 1024.0, 0.1).unwrap();
        for b in p.present().filter(|b| b.nu >= 0.1 && b.nu <= 3.0) {
            assert!((b.value - 1.0).abs() < 0.05 + 3.0 * b.stderr, "{} {} {}", b.nu, b.value, b.stderr);
        }
        let m = p.mean_over(0.1, 3.0).unwrap();
        assert!((m - 1.0).abs() < 0.05);
    }
}
