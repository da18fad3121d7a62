//! Plain-text and PGM file formats.
//!
//! * radial CSV: header `coord,value`, one row per grid node. Spectra store
//!   `P = F + 1`, pair correlations store `g`.
//! * 2D CSV: header `k1,k2,value`.
//! * profile CSV: header `nu,value,stderr`; absent bins are skipped.
//! * metadata: `key = value` lines.
//! * point sets: `N 2`, then `x y` per line.
//! * images: binary PGM (P5), maxval 255.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::{RadialProfile, Spectrum2D};
use crate::pointset::{Point, PointSet};
use crate::radial::{PairCorrelation, RadialFunction, RadialGrid, RadialSpectrum};

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn lines(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

pub fn write_radial_csv(path: &Path, f: &RadialFunction) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::from("coord,value\n");
    for (x, v) in f.grid.coords().zip(&f.values) {
        body.push_str(&format!("{x:.15e},{v:.15e}\n"));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Reads a radial CSV and checks the coordinates form a uniform grid from 0.
pub fn read_radial_csv(path: &Path) -> Result<RadialFunction> {
    let lines = lines(path)?;
    let mut rows = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("coord")) {
            continue;
        }
        let mut it = line.split(',');
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(path, i + 1, "expected two columns"));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, i + 1, format!("invalid number '{s}'")))
        };
        rows.push((parse(a)?, parse(b)?, i + 1));
    }
    if rows.len() < 2 {
        return Err(Error::parse(path, lines.len(), "need at least two rows"));
    }
    let spacing = rows[1].0 - rows[0].0;
    let grid = RadialGrid::new(spacing, rows.len()).map_err(|e| Error::parse(path, rows[1].2, e.to_string()))?;
    for (j, (x, _, line)) in rows.iter().enumerate() {
        if (x - grid.coord(j)).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(Error::parse(path, *line, format!("coordinate {x} breaks the uniform grid")));
        }
    }
    RadialFunction::new(grid, rows.into_iter().map(|r| r.1).collect())
}

pub fn write_spectrum_csv(path: &Path, s: &RadialSpectrum) -> Result<()> {
    let p = RadialFunction::new(s.grid(), s.power())?;
    write_radial_csv(path, &p)
}

pub fn read_spectrum_csv(path: &Path) -> Result<RadialSpectrum> {
    let p = read_radial_csv(path)?;
    RadialSpectrum::new(p.grid, p.values.iter().map(|v| v - 1.0).collect())
}

pub fn write_pcf_csv(path: &Path, g: &PairCorrelation) -> Result<()> {
    write_radial_csv(path, &g.g)
}

pub fn read_pcf_csv(path: &Path) -> Result<PairCorrelation> {
    let g = read_radial_csv(path)?;
    Ok(PairCorrelation { g })
}

pub fn write_spectrum2d_csv(path: &Path, s: &Spectrum2D) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::from("k1,k2,value\n");
    for (k1, k2, v) in s.iter() {
        body.push_str(&format!("{k1},{k2},{v:.15e}\n"));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn write_profile_csv(path: &Path, p: &RadialProfile) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::from("nu,value,stderr\n");
    for b in p.present() {
        body.push_str(&format!("{:.15e},{:.15e},{:.15e}\n", b.nu, b.value, b.stderr));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m = Metadata::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(path, i + 1, "expected 'key = value'"));
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(path, i + 1, "empty key"));
            }
            m.set(k, v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

pub fn write_points(path: &Path, set: &PointSet) -> Result<()> {
    let mut w = create(path)?;
    let mut body = format!("{} 2\n", set.len());
    for p in set.points() {
        body.push_str(&format!("{:.17e} {:.17e}\n", p[0], p[1]));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    let lines = lines(path)?;
    let mut it = lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((hl, header)) = it.next() else {
        return Err(Error::parse(path, 1, "empty file"));
    };
    let mut h = header.split_whitespace();
    let n = match (h.next().map(str::parse::<usize>), h.next(), h.next()) {
        (Some(Ok(n)), Some("2"), None) if n > 0 => n,
        _ => return Err(Error::parse(path, hl + 1, "expected header 'N 2'")),
    };
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    for (i, line) in it {
        let mut f = line.split_whitespace().map(str::parse::<f64>);
        let (Some(Ok(x)), Some(Ok(y)), None) = (f.next(), f.next(), f.next()) else {
            return Err(Error::parse(path, i + 1, "expected 'x y'"));
        };
        if !((0.0..1.0).contains(&x) && (0.0..1.0).contains(&y)) {
            return Err(Error::parse(path, i + 1, format!("point ({x}, {y}) outside [0,1)²")));
        }
        pts.push([x, y]);
    }
    if pts.len() != n {
        return Err(Error::parse(
            path,
            lines.len(),
            format!("header announces {n} points, found {}", pts.len()),
        ));
    }
    PointSet::new(pts, None)
}

/// `round(255 · clamp(v, 0, 1))` with halves rounded up.
pub fn quantize(v: f64) -> u8 {
    let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (255.0 * c + 0.5).floor() as u8
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|v| quantize(*v)));
    out
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::InvalidInput(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    fs::write(path, encode_pgm(width, height, pixels)).map_err(|e| Error::io(path, e))
}

/// Width, height and raw bytes of a binary PGM with maxval 255.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, 1, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    let bad = || Error::parse(path, 1, "expected a binary PGM with maxval 255");
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let payload = data.get(pos..).unwrap_or(&[]);
    if payload.len() != w * h {
        return Err(Error::parse(
            path,
            1,
            format!("payload has {} bytes, expected {}", payload.len(), w * h),
        ));
    }
    Ok((w, h, payload.to_vec()))
}

/// Unclamped pixel values, `x,y,value` per line.
pub fn write_pixels_csv(path: &Path, width: usize, pixels: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::from("x,y,value\n");
    for (i, v) in pixels.iter().enumerate() {
        body.push_str(&format!("{},{},{v:.15e}\n", i % width, i / width));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}
