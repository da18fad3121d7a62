use aasampling::estimation::{empirical_power_spectrum, radial_average};
use aasampling::io::*;
use aasampling::pointset::{generate_random, PointSet};
use aasampling::{RadialGrid, RadialSpectrum};

#[test]
fn points_survive_a_round_trip_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pts");
    let set = generate_random(500, 3).unwrap();
    write_points(&path, &set).unwrap();
    let back = read_points(&path).unwrap();
    assert_eq!(back.points(), set.points());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("500 2\n"));
}

#[test]
fn point_reader_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("count.pts", "3 2\n0.1 0.2\n0.3 0.4\n"),
        ("dims.pts", "1 3\n0.1 0.2 0.3\n"),
        ("range.pts", "1 2\n1.5 0.2\n"),
        ("text.pts", "1 2\n0.1 abc\n"),
    ];
    for (name, body) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        assert!(read_points(&path).is_err(), "{name} accepted");
    }
}

#[test]
fn spectrum_csv_stores_power() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let grid = RadialGrid::with_max(0.05, 2.0).unwrap();
    let spec = RadialSpectrum::step(grid, 0.6);
    write_spectrum_csv(&path, &spec).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("coord,value"));
    let back = read_spectrum_csv(&path).unwrap();
    assert_eq!(back.grid(), grid);
    for (a, b) in back.f_values().iter().zip(spec.f_values()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn non_uniform_radial_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "coord,value\n0,1\n0.1,1\n0.25,1\n").unwrap();
    assert!(read_radial_csv(&path).is_err());
}

#[test]
fn pgm_header_and_payload() {
    let pixels: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
    let bytes = encode_pgm(8, 8, &pixels);
    assert!(bytes.starts_with(b"P5\n8 8\n255\n"));
    assert_eq!(bytes.len(), "P5\n8 8\n255\n".len() + 64);
    assert_eq!(*bytes.last().unwrap(), 255);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pgm");
    write_pgm(&path, 8, 8, &pixels).unwrap();
    let (w, h, data) = read_pgm(&path).unwrap();
    assert_eq!((w, h), (8, 8));
    assert_eq!(data, pixels.iter().map(|v| quantize(*v)).collect::<Vec<_>>());
    assert_eq!(quantize(-0.5), 0);
    assert_eq!(quantize(2.0), 255);
}

#[test]
fn metadata_keeps_order_and_comments_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    std::fs::write(&path, "# run\nnu0 = 0.5\n\nenergy = tv\nnu0 = 0.7\n").unwrap();
    let m = Metadata::read(&path).unwrap();
    assert_eq!(m.get("nu0"), Some("0.7"));
    assert_eq!(m.to_text(), "nu0 = 0.7\nenergy = tv\n");
    std::fs::write(&path, "novalue\n").unwrap();
    assert!(Metadata::read(&path).is_err());
}

#[test]
fn profile_and_spectrum_csv_headers() {
    let set: PointSet = generate_random(64, 1).unwrap();
    let spec = empirical_power_spectrum(&[set.points()], 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p2 = dir.path().join("s2.csv");
    write_spectrum2d_csv(&p2, &spec).unwrap();
    let text = std::fs::read_to_string(&p2).unwrap();
    assert_eq!(text.lines().next(), Some("k1,k2,value"));
    assert_eq!(text.lines().count(), 1 + 17 * 17);
    let prof = radial_average(&spec, 64.0, 0.1).unwrap();
    let pp = dir.path().join("p.csv");
    write_profile_csv(&pp, &prof).unwrap();
    assert_eq!(std::fs::read_to_string(&pp).unwrap().lines().next(), Some("nu,value,stderr"));
}
