//! Parsing of target (`cosine:0.35`) and pattern (`dart:0.7`) names.

use aasampling::estimation::TargetFunction;
use aasampling::pointset::{
    generate_dart_throwing, generate_jittered, generate_poisson_process, generate_random,
    generate_regular, Point, DEFAULT_MAX_ATTEMPTS,
};
use anyhow::{bail, Context, Result};

fn split(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((a, b)) => (a.trim(), Some(b.trim())),
        None => (s.trim(), None),
    }
}

fn number(name: &str, arg: Option<&str>, default: Option<f64>) -> Result<f64> {
    match (arg, default) {
        (Some(a), _) => a.parse().with_context(|| format!("bad parameter '{a}' for {name}")),
        (None, Some(d)) => Ok(d),
        (None, None) => bail!("{name} needs a parameter, e.g. {name}:0.35"),
    }
}

/// `constant[:v]`, `cosine:nu_c`, `stripes:nu_c`, `gaussian[:sigma]`,
/// `zoneplate[:W]`. Frequencies are normalized and snapped for intensity
/// `lambda`; the zone plate defaults to `width` pixels.
pub fn parse_target(s: &str, lambda: f64, width: usize) -> Result<TargetFunction> {
    let (name, arg) = split(s);
    let t = match name {
        "constant" => TargetFunction::constant(number(name, arg, Some(1.0))?)?,
        "cosine" => TargetFunction::cosine(number(name, arg, None)?, lambda)?,
        "stripes" => TargetFunction::stripes(number(name, arg, None)?, lambda)?,
        "gaussian" => TargetFunction::gaussian_blob(number(name, arg, Some(0.1))?)?,
        "zoneplate" => {
            let w = match arg {
                Some(a) => a.parse().with_context(|| format!("bad zone plate width '{a}'"))?,
                None => width,
            };
            TargetFunction::zone_plate_for_width(w)?
        }
        other => bail!("unknown target '{other}' (constant, cosine, stripes, gaussian, zoneplate)"),
    };
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    Random,
    Poisson,
    Jittered,
    Regular,
    /// Normalized minimum distance.
    Dart(f64),
}

impl Pattern {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = split(s);
        Ok(match name {
            "random" => Pattern::Random,
            "poisson" => Pattern::Poisson,
            "jittered" => Pattern::Jittered,
            "regular" => Pattern::Regular,
            "dart" => Pattern::Dart(number(name, arg, Some(0.6))?),
            other => bail!("unknown pattern '{other}' (random, poisson, jittered, regular, dart[:r])"),
        })
    }

    /// Realization `stream` of `n` points (expected count for `poisson`).
    pub fn generate(self, n: usize, seed: u64, stream: u64) -> Result<Vec<Point>> {
        let s = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let pts = match self {
            Pattern::Random => generate_random(n, s)?.into_points(),
            Pattern::Poisson => generate_poisson_process(n as f64, seed, stream)?,
            Pattern::Jittered => generate_jittered(n, s)?.into_points(),
            Pattern::Regular => generate_regular(n)?.into_points(),
            Pattern::Dart(r) => {
                generate_dart_throwing(n, r / (n as f64).sqrt(), s, DEFAULT_MAX_ATTEMPTS)?.into_points()
            }
        };
        Ok(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_parse() {
        assert!(parse_target("cosine:0.35", 1024.0, 64).is_ok());
        assert!(parse_target("cosine", 1024.0, 64).is_err());
        assert!(parse_target("gaussian", 1024.0, 64).is_ok());
        assert!(parse_target("zoneplate:32", 1024.0, 64).is_ok());
        assert!(parse_target("square", 1024.0, 64).is_err());
    }

    #[test]
    fn patterns_parse() {
        assert_eq!(Pattern::parse("dart:0.5").unwrap(), Pattern::Dart(0.5));
        assert_eq!(Pattern::parse("random").unwrap(), Pattern::Random);
        assert!(Pattern::parse("halton").is_err());
    }
}
