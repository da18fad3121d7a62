mod commands;
mod params;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use params::{Bound, Range};

/// Realizable anti-aliasing sampling spectra: optimization, synthesis and
/// error analysis.
#[derive(Parser, Debug)]
#[command(name = "aasampling", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// [default: 0.01]
    #[arg(long)]
    pub nu_spacing: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    pub nu_max: Option<f64>,
    /// [default: 0.01]
    #[arg(long)]
    pub r_spacing: Option<f64>,
    /// [default: 20]
    #[arg(long)]
    pub r_max: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// Low-frequency plateau ceiling [default: 0]
    #[arg(long)]
    pub e0: Option<f64>,
    /// tv, osc, dirichlet or laplacian [default: tv]
    #[arg(long)]
    pub energy: Option<String>,
    /// pointwise or integral [default: pointwise]
    #[arg(long)]
    pub low_freq_mode: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Optimize a radial spectrum; writes spectrum.csv, pcf.csv and metadata.
    Optimize {
        #[arg(long)]
        nu0: Option<f64>,
        /// Peak bound, a number or `inf` [default: inf]
        #[arg(long)]
        m0: Option<Bound>,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Smallest feasible peak bound at one nu0.
    MinM0 {
        #[arg(long)]
        nu0: Option<f64>,
        /// Bisection tolerance [default: 0.01]
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: Common,
    },
    /// min-m0 over a range of nu0 values; writes region.csv.
    FeasibleRegion {
        /// start:stop:step, inclusive
        #[arg(long)]
        nu0_range: Option<Range>,
        /// [default: 0.01]
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize point sets matching a spectrum or PCF.
    Synthesize {
        /// Spectrum CSV (`nu,P`)
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// PCF CSV (`r,g`), alternative to --spectrum
        #[arg(long)]
        pcf: Option<PathBuf>,
        /// Points per set [default: 4096]
        #[arg(long)]
        points: Option<usize>,
        /// Number of sets [default: 10]
        #[arg(long)]
        sets: Option<usize>,
        /// [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// PCF estimator sigma [default: 0.25]
        #[arg(long)]
        smoothing: Option<f64>,
        /// [default: 0.02]
        #[arg(long)]
        step: Option<f64>,
        /// [default: 2000]
        #[arg(long)]
        max_iterations: Option<usize>,
        /// [default: 1e-4]
        #[arg(long)]
        tolerance: Option<f64>,
        /// random or dart [default: random]
        #[arg(long)]
        init: Option<String>,
        /// Fixed matching radius (normalized) instead of the automatic one
        #[arg(long)]
        fit_radius: Option<f64>,
        /// r grid for converting --spectrum [default: 0.01]
        #[arg(long)]
        r_spacing: Option<f64>,
        /// [default: 20]
        #[arg(long)]
        r_max: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Radial power spectrum and PCF of point-set files.
    Analyze {
        /// A point-set file or a directory of `*.pts` files
        #[arg(long)]
        points: Option<PathBuf>,
        /// [default: 0.02]
        #[arg(long)]
        bin_width: Option<f64>,
        /// Periodogram half-width in integer frequencies [default: ceil(3 sqrt N)]
        #[arg(long)]
        half_width: Option<usize>,
        /// PCF kernel sigma (normalized) [default: 0.1]
        #[arg(long)]
        pcf_sigma: Option<f64>,
        /// [default: 0.01]
        #[arg(long)]
        r_spacing: Option<f64>,
        /// [default: floor(sqrt N / 2)]
        #[arg(long)]
        r_max: Option<f64>,
        /// Reference spectrum CSV; reports the RMS deviation over nu in [0.1, 3]
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Predicted error spectrum of a sampling spectrum for a target.
    PredictError {
        /// Spectrum CSV [default: white, i.e. random sampling]
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// constant[:v], cosine:nu, stripes:nu, gaussian[:sigma], zoneplate[:W]
        #[arg(long)]
        target: Option<String>,
        /// Number of points (intensity) [default: 4096]
        #[arg(long)]
        points: Option<usize>,
        /// [default: ceil(3 sqrt N)]
        #[arg(long)]
        half_width: Option<usize>,
        /// [default: 0.02]
        #[arg(long)]
        bin_width: Option<f64>,
        /// Apply a Gaussian pixel filter of this sigma (pixels)
        #[arg(long)]
        filter_sigma_px: Option<f64>,
        /// Image width for --filter-sigma-px and zoneplate [default: sqrt N]
        #[arg(long)]
        width: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Render a test image from a sampling pattern.
    Render {
        /// constant[:v], cosine:nu, stripes:nu, gaussian[:sigma], zoneplate [default: zoneplate]
        #[arg(long)]
        image: Option<String>,
        /// random, jittered, regular or dart[:r] [default: random]
        #[arg(long)]
        pattern: Option<String>,
        /// Point-set file to use instead of --pattern
        #[arg(long)]
        points_file: Option<PathBuf>,
        /// [default: 2]
        #[arg(long)]
        spp: Option<usize>,
        /// [default: 512]
        #[arg(long)]
        width: Option<usize>,
        /// [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// [default: 0.5]
        #[arg(long)]
        filter_sigma_px: Option<f64>,
        /// unbiased or weightsum [default: unbiased]
        #[arg(long)]
        normalization: Option<String>,
        /// Also write reference.pgm
        #[arg(long)]
        reference: bool,
        /// Also write unclamped pixel values as image.csv
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Integration variance (DC error) with an optional Monte-Carlo check.
    Variance {
        /// Spectrum CSV [default: white]
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        /// [default: 4096]
        #[arg(long)]
        points: Option<usize>,
        /// Monte-Carlo realizations, 0 to skip [default: 0]
        #[arg(long)]
        monte_carlo: Option<usize>,
        /// Pattern for the Monte-Carlo check [default: poisson]
        #[arg(long)]
        pattern: Option<String>,
        /// [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
