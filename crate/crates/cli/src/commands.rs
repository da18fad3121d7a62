use std::fs;
use std::path::{Path, PathBuf};

use aasampling::estimation::{
    default_half_width, empirical_pcf, empirical_power_spectrum, filtered_error, integration_variance,
    predict_error_spectrum, radial_average, DEFAULT_BIN_WIDTH, DEFAULT_PCF_SIGMA,
};
use aasampling::imaging::{band_energy, coherent_peak, reference_image, render, Normalization, RenderConfig};
use aasampling::io::{self, Metadata};
use aasampling::pointset::{Point, PointSet};
use aasampling::synthesis::{
    synthesize_many, Init, SynthesisConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_SMOOTHING, DEFAULT_STEP,
    DEFAULT_TOLERANCE,
};
use aasampling::variational::{
    feasible_region, min_m0, solve, EnergyKind, Grids, LowFreqMode, SolveStatus, SpectrumProblem,
};
use aasampling::{RadialGrid, RadialSpectrum};
use anyhow::{bail, Context, Result};

use crate::params::{Bound, Params};
use crate::spec::{parse_target, Pattern};
use crate::{Command, Common, GridArgs, ProblemArgs};

const EXIT_INFEASIBLE: u8 = 2;

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Optimize {
            nu0,
            m0,
            problem,
            common,
        } => optimize(nu0, m0, problem, common),
        Command::MinM0 {
            nu0,
            tol,
            problem,
            common,
        } => cmd_min_m0(nu0, tol, problem, common),
        Command::FeasibleRegion {
            nu0_range,
            tol,
            problem,
            common,
        } => region(nu0_range, tol, problem, common),
        c @ Command::Synthesize { .. } => synthesize(c),
        c @ Command::Analyze { .. } => analyze(c),
        c @ Command::PredictError { .. } => predict_error(c),
        c @ Command::Render { .. } => cmd_render(c),
        c @ Command::Variance { .. } => variance(c),
    }
}

fn out_dir(p: &mut Params, common: &Common) -> Result<PathBuf> {
    let dir: String = p.value("out", common.out.as_ref().map(|d| d.display().to_string()), "out".into())?;
    Ok(PathBuf::from(dir))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn grids(p: &mut Params, g: &GridArgs) -> Result<Grids> {
    let nu_spacing = p.value("nu-spacing", g.nu_spacing, 0.01)?;
    let nu_max = p.value("nu-max", g.nu_max, 10.0)?;
    let r_spacing = p.value("r-spacing", g.r_spacing, 0.01)?;
    let r_max = p.value("r-max", g.r_max, 20.0)?;
    Ok(Grids::uniform(nu_spacing, nu_max, r_spacing, r_max)?)
}

/// Problem fields shared by optimize, min-m0 and feasible-region.
fn problem(p: &mut Params, nu0: f64, a: &ProblemArgs) -> Result<SpectrumProblem> {
    let e0 = p.value("e0", a.e0, 0.0)?;
    let energy: EnergyKind = p.value::<String>("energy", a.energy.clone(), "tv".into())?.parse()?;
    let mode: LowFreqMode = p
        .value::<String>("low-freq-mode", a.low_freq_mode.clone(), "pointwise".into())?
        .parse()?;
    let g = grids(p, &a.grid)?;
    Ok(SpectrumProblem::new(nu0, e0, energy, g).with_low_freq_mode(mode))
}

fn grid_metadata(meta: &mut Metadata, g: &Grids) {
    meta.set("nu_spacing", g.nu.spacing())
        .set("nu_max", g.nu.max())
        .set("r_spacing", g.r.spacing())
        .set("r_max", g.r.max());
}

fn optimize(nu0: Option<f64>, m0: Option<Bound>, a: ProblemArgs, common: Common) -> Result<u8> {
    let mut p = Params::load("optimize", common.config.as_deref())?;
    let nu0 = p.required("nu0", nu0)?;
    let m0 = p.value("m0", m0, Bound(None))?;
    let problem = problem(&mut p, nu0, &a)?.with_m0(m0.0);
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;
    problem.validate()?;

    let report = solve(&problem)?;
    let mut meta = Metadata::new();
    meta.set("nu0", nu0)
        .set("e0", problem.e0)
        .set("m0", m0)
        .set("energy", problem.energy.name())
        .set("low_freq_mode", problem.low_freq_mode.name());
    grid_metadata(&mut meta, &problem.grids);
    meta.set("status", report.status.name())
        .set("objective", format!("{:.12e}", report.objective))
        .set("peak_m", format!("{:.12e}", report.peak_m))
        .set("iterations", report.iterations)
        .set("max_violation", format!("{:.3e}", report.max_violation));

    create_dir(&dir)?;
    let mut outputs = vec!["spectrum_meta.txt".to_string()];
    if let Some(spec) = &report.spectrum {
        io::write_spectrum_csv(&dir.join("spectrum.csv"), spec)?;
        io::write_pcf_csv(&dir.join("pcf.csv"), &spec.to_pcf(&problem.grids.r)?)?;
        outputs.splice(0..0, ["spectrum.csv".to_string(), "pcf.csv".to_string()]);
    }
    meta.write(&dir.join("spectrum_meta.txt"))?;
    p.write_manifest(&dir, &outputs)?;

    println!("status = {}", report.status.name());
    match report.status {
        SolveStatus::Optimal => {
            println!("objective = {:.6e}", report.objective);
            println!("peak_m = {:.6}", report.peak_m);
            Ok(0)
        }
        SolveStatus::Infeasible => Ok(EXIT_INFEASIBLE),
        SolveStatus::NumericalFailure => bail!("solver did not converge"),
    }
}

fn cmd_min_m0(nu0: Option<f64>, tol: Option<f64>, a: ProblemArgs, common: Common) -> Result<u8> {
    let mut p = Params::load("min-m0", common.config.as_deref())?;
    let nu0 = p.required("nu0", nu0)?;
    let tol = p.value("tol", tol, 0.01)?;
    let problem = problem(&mut p, nu0, &a)?;
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;
    problem.validate()?;
    check_tolerance(tol)?;

    let result = min_m0(&problem, tol)?;
    let value = Bound(result.value);
    let mut meta = Metadata::new();
    meta.set("nu0", nu0)
        .set("e0", problem.e0)
        .set("energy", problem.energy.name())
        .set("tol", tol)
        .set("min_m0", value)
        .set("probes", result.trace.len());
    create_dir(&dir)?;
    meta.write(&dir.join("min_m0.txt"))?;
    p.write_manifest(&dir, &["min_m0.txt".into()])?;
    match result.value {
        Some(v) => {
            println!("min_m0 = {v:.4}");
            Ok(0)
        }
        None => {
            println!("min_m0 = inf (infeasible at the upper bound)");
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn check_tolerance(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        bail!("--tol must lie in (0, 1), got {tol}");
    }
    Ok(())
}

fn region(range: Option<crate::params::Range>, tol: Option<f64>, a: ProblemArgs, common: Common) -> Result<u8> {
    let mut p = Params::load("feasible-region", common.config.as_deref())?;
    let range = p.required("nu0-range", range)?;
    let tol = p.value("tol", tol, 0.01)?;
    let values = range.values();
    let template = problem(&mut p, values[0], &a)?;
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;
    check_tolerance(tol)?;
    for &nu0 in &values {
        SpectrumProblem { nu0, ..template.clone() }.validate()?;
    }

    let rows = feasible_region(&template, &values, tol);
    let mut csv = String::from("nu0,min_m0\n");
    for row in &rows {
        let m = row.min_m0.as_ref().map_err(|e| anyhow::anyhow!("nu0 = {}: {e}", row.nu0))?;
        let v = Bound(m.value);
        csv.push_str(&format!("{},{}\n", row.nu0, v));
        println!("{:<8} {}", row.nu0, v);
    }
    create_dir(&dir)?;
    fs::write(dir.join("region.csv"), csv).context("writing region.csv")?;
    p.write_manifest(&dir, &["region.csv".into()])?;
    Ok(0)
}

fn synthesize(c: Command) -> Result<u8> {
    let Command::Synthesize {
        spectrum,
        pcf,
        points,
        sets,
        seed,
        smoothing,
        step,
        max_iterations,
        tolerance,
        init,
        fit_radius,
        r_spacing,
        r_max,
        common,
    } = c
    else {
        unreachable!()
    };
    let mut p = Params::load("synthesize", common.config.as_deref())?;
    let spectrum = p.get("spectrum", spectrum.map(|s| s.display().to_string()))?;
    let pcf_path = p.get("pcf", pcf.map(|s| s.display().to_string()))?;
    let n = p.value("points", points, 4096usize)?;
    let count = p.value("sets", sets, 10usize)?;
    let seed = p.value("seed", seed, 0u64)?;
    let smoothing = p.value("smoothing", smoothing, DEFAULT_SMOOTHING)?;
    let step = p.value("step", step, DEFAULT_STEP)?;
    let max_iterations = p.value("max-iterations", max_iterations, DEFAULT_MAX_ITERATIONS)?;
    let tolerance = p.value("tolerance", tolerance, DEFAULT_TOLERANCE)?;
    let init = match p.value::<String>("init", init, "random".into())?.as_str() {
        "random" => Init::Random,
        "dart" => Init::DartThrowing,
        other => bail!("unknown --init '{other}' (random, dart)"),
    };
    let fit_radius = p.get("fit-radius", fit_radius)?;
    let r_spacing = p.value("r-spacing", r_spacing, 0.01)?;
    let r_max = p.value("r-max", r_max, 20.0)?;
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;

    let target = match (spectrum, pcf_path) {
        (Some(s), None) => io::read_spectrum_csv(Path::new(&s))?.to_pcf(&RadialGrid::with_max(r_spacing, r_max)?)?,
        (None, Some(g)) => io::read_pcf_csv(Path::new(&g))?,
        _ => bail!("give exactly one of --spectrum or --pcf"),
    };
    if count == 0 {
        bail!("--sets must be at least 1");
    }
    let config = SynthesisConfig {
        smoothing_sigma: smoothing,
        step_size: step,
        max_iterations,
        convergence_tol: tolerance,
        init,
        fit_radius,
        ..SynthesisConfig::new(n, target, seed)
    };
    config.validate()?;

    let runs = synthesize_many(&config, count)?;
    create_dir(&dir)?;
    let mut outputs = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let name = format!("set_{i:03}.pts");
        io::write_points(&dir.join(&name), &run.points)?;
        let r = &run.report;
        let mut meta = Metadata::new();
        meta.set("set", i)
            .set("stream", i)
            .set("initial_energy", format!("{:.6e}", r.initial_energy))
            .set("energy", format!("{:.6e}", r.energy))
            .set("iterations", r.iterations)
            .set("converged", r.converged)
            .set("low_frequency_power", format!("{:.6e}", r.low_frequency_power))
            .set("fit_radius", r.fit_radius);
        let report = format!("set_{i:03}_report.txt");
        meta.write(&dir.join(&report))?;
        println!(
            "{name}: energy {:.3e} -> {:.3e} in {} iterations{}",
            r.initial_energy,
            r.energy,
            r.iterations,
            if r.converged { "" } else { " (not converged)" }
        );
        outputs.push(name);
        outputs.push(report);
    }
    p.write_manifest(&dir, &outputs)?;
    Ok(0)
}

fn load_sets(path: &Path) -> Result<Vec<PointSet>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut f: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pts"))
            .collect();
        f.sort();
        f
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        bail!("no *.pts files in {}", path.display());
    }
    let sets = files.iter().map(|f| io::read_points(f)).collect::<aasampling::Result<Vec<_>>>()?;
    if sets.iter().any(|s| s.len() != sets[0].len()) {
        bail!("point sets differ in size");
    }
    Ok(sets)
}

fn analyze(c: Command) -> Result<u8> {
    let Command::Analyze {
        points,
        bin_width,
        half_width,
        pcf_sigma,
        r_spacing,
        r_max,
        spectrum,
        common,
    } = c
    else {
        unreachable!()
    };
    let mut p = Params::load("analyze", common.config.as_deref())?;
    let input: String = p.required("points", points.map(|s| s.display().to_string()))?;
    let bw = p.value("bin-width", bin_width, DEFAULT_BIN_WIDTH)?;
    let half_width = p.get("half-width", half_width)?;
    let sigma = p.value("pcf-sigma", pcf_sigma, DEFAULT_PCF_SIGMA)?;
    let r_spacing = p.value("r-spacing", r_spacing, 0.01)?;
    let r_max = p.get("r-max", r_max)?;
    let reference = p.get("spectrum", spectrum.map(|s| s.display().to_string()))?;
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;

    let sets = load_sets(Path::new(&input))?;
    let n = sets[0].len();
    let m = half_width.unwrap_or_else(|| default_half_width(n));
    let r_max = r_max.unwrap_or(((n as f64).sqrt() / 2.0).floor());
    p.note("half-width", m);
    p.note("r-max", r_max);
    p.note("sets", sets.len());
    let reference = reference.map(|r| io::read_spectrum_csv(Path::new(&r))).transpose()?;
    let r_grid = RadialGrid::with_max(r_spacing, r_max)?;

    let refs: Vec<&[Point]> = sets.iter().map(|s| s.points()).collect();
    let power = empirical_power_spectrum(&refs, m)?;
    let profile = radial_average(&power, n as f64, bw)?;
    let pcf = empirical_pcf(&refs, &r_grid, sigma)?;

    create_dir(&dir)?;
    io::write_profile_csv(&dir.join("power_radial.csv"), &profile)?;
    io::write_pcf_csv(&dir.join("pcf.csv"), &pcf)?;
    let mut outputs = vec!["power_radial.csv".to_string(), "pcf.csv".to_string()];
    let mut summary = Metadata::new();
    summary.set("sets", sets.len()).set("points", n);
    if let Some(low) = profile.mean_over(0.1, 0.6) {
        summary.set("mean_power_0.1_0.6", format!("{low:.6}"));
    }
    if let Some(spec) = &reference {
        let (mut se, mut count) = (0.0, 0usize);
        for b in profile.present().filter(|b| (0.1..=3.0).contains(&b.nu)) {
            se += (b.value - spec.power_at(b.nu)).powi(2);
            count += 1;
        }
        summary.set("rms_vs_reference_0.1_3", format!("{:.6}", (se / count.max(1) as f64).sqrt()));
    }
    summary.write(&dir.join("summary.txt"))?;
    print!("{}", summary.to_text());
    outputs.push("summary.txt".into());
    p.write_manifest(&dir, &outputs)?;
    Ok(0)
}

fn read_spectrum_or_white(path: Option<String>) -> Result<RadialSpectrum> {
    Ok(match path {
        Some(s) => io::read_spectrum_csv(Path::new(&s))?,
        None => RadialSpectrum::white(RadialGrid::with_max(0.01, 10.0)?),
    })
}

fn predict_error(c: Command) -> Result<u8> {
    let Command::PredictError {
        spectrum,
        target,
        points,
        half_width,
        bin_width,
        filter_sigma_px,
        width,
        common,
    } = c
    else {
        unreachable!()
    };
    let mut p = Params::load("predict-error", common.config.as_deref())?;
    let spectrum = p.get("spectrum", spectrum.map(|s| s.display().to_string()))?;
    let target: String = p.required("target", target)?;
    let n = p.value("points", points, 4096usize)?;
    let m = p.value("half-width", half_width, default_half_width(n))?;
    let bw = p.value("bin-width", bin_width, DEFAULT_BIN_WIDTH)?;
    let filter = p.get("filter-sigma-px", filter_sigma_px)?;
    let width = p.value("width", width, (n as f64).sqrt().round() as usize)?;
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;

    let lambda = n as f64;
    let target = parse_target(&target, lambda, width)?;
    let spec = read_spectrum_or_white(spectrum)?;
    let mut err = predict_error_spectrum(&spec, &target, lambda, m)?;
    if let Some(s) = filter {
        err = filtered_error(&err, s, width)?;
    }
    let profile = radial_average(&err.spectrum, lambda, bw)?;

    create_dir(&dir)?;
    io::write_spectrum2d_csv(&dir.join("error2d.csv"), &err.spectrum)?;
    io::write_profile_csv(&dir.join("error_radial.csv"), &profile)?;
    let mut summary = Metadata::new();
    summary
        .set("target", target.kind())
        .set("energy", format!("{:.12e}", target.energy()))
        .set("dc_error", format!("{:.12e}", err.spectrum.dc()))
        .set("total_error", format!("{:.12e}", err.spectrum.values().iter().sum::<f64>()));
    summary.write(&dir.join("summary.txt"))?;
    print!("{}", summary.to_text());
    p.write_manifest(&dir, &["error2d.csv".into(), "error_radial.csv".into(), "summary.txt".into()])?;
    Ok(0)
}

fn cmd_render(c: Command) -> Result<u8> {
    let Command::Render {
        image,
        pattern,
        points_file,
        spp,
        width,
        seed,
        filter_sigma_px,
        normalization,
        reference,
        csv,
        common,
    } = c
    else {
        unreachable!()
    };
    let mut p = Params::load("render", common.config.as_deref())?;
    let image: String = p.value("image", image, "zoneplate".into())?;
    let points_file = p.get("points-file", points_file.map(|s| s.display().to_string()))?;
    let pattern = match (p.get("pattern", pattern)?, &points_file) {
        (Some(_), Some(_)) => bail!("give either --pattern or --points-file"),
        (pat, None) => {
            let pat = pat.unwrap_or_else(|| "random".into());
            p.note("pattern", &pat);
            Some(Pattern::parse(&pat)?)
        }
        (None, Some(_)) => None,
    };
    let spp = p.value("spp", spp, 2usize)?;
    let width = p.value("width", width, 512usize)?;
    let seed = p.value("seed", seed, 0u64)?;
    let sigma = p.value("filter-sigma-px", filter_sigma_px, aasampling::imaging::DEFAULT_FILTER_SIGMA_PX)?;
    let norm: Normalization = p.value::<String>("normalization", normalization, "unbiased".into())?.parse()?;
    let reference = p.value("reference", Some(reference).filter(|r| *r), false)?;
    let csv = p.value("csv", Some(csv).filter(|c| *c), false)?;
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;

    let n = spp * width * width;
    let target = parse_target(&image, n as f64, width)?;
    let config = RenderConfig {
        filter_sigma_px: sigma,
        normalization: norm,
        ..RenderConfig::new(target.clone(), spp, width)
    };
    let points = match (&pattern, &points_file) {
        (Some(pat), _) => {
            config.validate(n)?;
            pat.generate(n, seed, 0)?
        }
        (None, Some(f)) => io::read_points(Path::new(f))?.into_points(),
        (None, None) => unreachable!(),
    };
    config.validate(points.len())?;

    let img = render(&points, &config)?;
    let refimg = reference_image(&target, width, sigma)?;
    // Normalized frequency nu maps to nu * sqrt(spp) cycles per pixel.
    let scale = (spp as f64).sqrt();
    let low_hi = (0.5 * 0.8 * scale).min(0.5);
    let mut report = Metadata::new();
    report
        .set("band_energy_low", format!("{:.6e}", band_energy(&img, &refimg, 0.0, low_hi)?))
        .set("band_low_cycles_per_pixel", format!("0:{low_hi}"))
        .set("band_energy_high", format!("{:.6e}", band_energy(&img, &refimg, 0.25, 0.5)?))
        .set("band_energy_total", format!("{:.6e}", band_energy(&img, &refimg, 0.0, 0.5f64.sqrt())?))
        .set("coherent_peak_high", format!("{:.4}", coherent_peak(&img, &refimg, 0.25, 0.5)?));

    create_dir(&dir)?;
    io::write_pgm(&dir.join("image.pgm"), width, width, &img.pixels)?;
    let mut outputs = vec!["image.pgm".to_string()];
    if reference {
        io::write_pgm(&dir.join("reference.pgm"), width, width, &refimg.pixels)?;
        outputs.push("reference.pgm".into());
    }
    if csv {
        io::write_pixels_csv(&dir.join("image.csv"), width, &img.pixels)?;
        outputs.push("image.csv".into());
    }
    report.write(&dir.join("band_energy.txt"))?;
    outputs.push("band_energy.txt".into());
    print!("{}", report.to_text());
    p.write_manifest(&dir, &outputs)?;
    Ok(0)
}

fn variance(c: Command) -> Result<u8> {
    let Command::Variance {
        spectrum,
        target,
        points,
        monte_carlo,
        pattern,
        seed,
        common,
    } = c
    else {
        unreachable!()
    };
    let mut p = Params::load("variance", common.config.as_deref())?;
    let spectrum = p.get("spectrum", spectrum.map(|s| s.display().to_string()))?;
    let target: String = p.required("target", target)?;
    let n = p.value("points", points, 4096usize)?;
    let runs = p.value("monte-carlo", monte_carlo, 0usize)?;
    let pattern = Pattern::parse(&p.value::<String>("pattern", pattern, "poisson".into())?)?;
    let seed = p.value("seed", seed, 0u64)?;
    let dir = out_dir(&mut p, &common)?;
    p.finish()?;
    if runs == 1 {
        bail!("--monte-carlo needs at least 2 realizations");
    }

    let lambda = n as f64;
    let target = parse_target(&target, lambda, (lambda.sqrt().round()) as usize)?;
    let spec = read_spectrum_or_white(spectrum)?;
    let predicted = integration_variance(&spec, &target, lambda)?;
    let mut report = Metadata::new();
    report.set("predicted_variance", format!("{predicted:.12e}"));
    if runs > 0 {
        let exact = target.coefficient(0, 0).re;
        let estimates = aasampling::par::map_range(runs, |i| {
            pattern
                .generate(n, seed, i as u64)
                .map(|pts| pts.iter().map(|x| target.eval(*x)).sum::<f64>() / lambda)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let sq: Vec<f64> = estimates.iter().map(|v| (v - exact).powi(2)).collect();
        let var = sq.iter().sum::<f64>() / runs as f64;
        let se = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (runs * (runs - 1)) as f64).sqrt();
        report
            .set("monte_carlo_variance", format!("{var:.12e}"))
            .set("monte_carlo_stderr", format!("{se:.6e}"))
            .set("z", format!("{:.3}", (var - predicted) / se));
    }
    create_dir(&dir)?;
    report.write(&dir.join("variance.txt"))?;
    print!("{}", report.to_text());
    p.write_manifest(&dir, &["variance.txt".into()])?;
    Ok(0)
}
