//! Realizable spectrum design as a finite LP/QP.
//!
//! Unknowns are the samples `F_i = F(ν_i)` on the frequency grid. The
//! realizability conditions `F + 1 >= 0` and `H[F] + 1 >= 0` become linear
//! inequalities (the second through the dense Hankel matrix onto the distance
//! grid), as do the low-frequency ceiling `e0` and the peak bound `m0`.

use std::fmt;
use std::str::FromStr;

use crate::par;
use crate::radial::{HankelMatrix, RadialGrid, RadialSpectrum};
use crate::solver::{self, Constraints, Settings, SymmetricSparse, Termination};
use crate::{Error, Result, SOLVER_EPS};

/// Upper end of the `m0` bisection bracket.
pub const M0_UPPER: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnergyKind {
    TotalVariation,
    Oscillation,
    Dirichlet,
    Laplacian,
}

impl EnergyKind {
    pub const ALL: [EnergyKind; 4] = [
        EnergyKind::TotalVariation,
        EnergyKind::Oscillation,
        EnergyKind::Dirichlet,
        EnergyKind::Laplacian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergyKind::TotalVariation => "tv",
            EnergyKind::Oscillation => "osc",
            EnergyKind::Dirichlet => "dirichlet",
            EnergyKind::Laplacian => "laplacian",
        }
    }

    pub fn is_linear(self) -> bool {
        self == EnergyKind::TotalVariation
    }
}

impl fmt::Display for EnergyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnergyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tv" | "total-variation" => Ok(EnergyKind::TotalVariation),
            "osc" | "oscillation" => Ok(EnergyKind::Oscillation),
            "dirichlet" => Ok(EnergyKind::Dirichlet),
            "laplacian" => Ok(EnergyKind::Laplacian),
            other => Err(Error::InvalidInput(format!("unknown energy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LowFreqMode {
    /// `P(ν_i) <= e0` at every node below `ν0`.
    #[default]
    Pointwise,
    /// Only the mean of `P` over `[0, ν0]` is bounded. Admits spikes.
    Integral,
}

impl LowFreqMode {
    pub fn name(self) -> &'static str {
        match self {
            LowFreqMode::Pointwise => "pointwise",
            LowFreqMode::Integral => "integral",
        }
    }
}

impl FromStr for LowFreqMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pointwise" => Ok(LowFreqMode::Pointwise),
            "integral" => Ok(LowFreqMode::Integral),
            other => Err(Error::InvalidInput(format!(
                "unknown low-frequency mode '{other}'"
            ))),
        }
    }
}

/// Frequency and distance grids for one family of solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grids {
    pub nu: RadialGrid,
    pub r: RadialGrid,
}

impl Grids {
    /// ν in [0, 10] and r in [0, 20], both with spacing 0.01.
    pub fn production() -> Self {
        Self::uniform(0.01, 10.0, 0.01, 20.0).expect("valid grid")
    }

    /// Coarser grids (0.02, r_max 16) for quick runs and tests.
    pub fn desk() -> Self {
        Self::uniform(0.02, 10.0, 0.02, 16.0).expect("valid grid")
    }

    pub fn uniform(nu_spacing: f64, nu_max: f64, r_spacing: f64, r_max: f64) -> Result<Self> {
        Ok(Self {
            nu: RadialGrid::with_max(nu_spacing, nu_max)?,
            r: RadialGrid::with_max(r_spacing, r_max)?,
        })
    }

    pub fn hankel(&self) -> HankelMatrix {
        HankelMatrix::new(&self.nu, &self.r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumProblem {
    pub nu0: f64,
    pub e0: f64,
    /// `None` leaves the peak unbounded.
    pub m0: Option<f64>,
    pub energy: EnergyKind,
    pub grids: Grids,
    pub low_freq_mode: LowFreqMode,
}

impl SpectrumProblem {
    pub fn new(nu0: f64, e0: f64, energy: EnergyKind, grids: Grids) -> Self {
        Self {
            nu0,
            e0,
            m0: None,
            energy,
            grids,
            low_freq_mode: LowFreqMode::Pointwise,
        }
    }

    pub fn with_m0(mut self, m0: Option<f64>) -> Self {
        self.m0 = m0;
        self
    }

    pub fn with_low_freq_mode(mut self, mode: LowFreqMode) -> Self {
        self.low_freq_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.nu0 > 0.0) || !self.nu0.is_finite() {
            return bad(format!("nu0 must be positive, got {}", self.nu0));
        }
        if self.nu0 >= self.grids.nu.max() {
            return bad(format!(
                "nu0 = {} is not below the grid maximum {}",
                self.nu0,
                self.grids.nu.max()
            ));
        }
        if !(self.e0 >= 0.0) || !self.e0.is_finite() {
            return bad(format!("e0 must be non-negative, got {}", self.e0));
        }
        if let Some(m0) = self.m0 {
            if !(m0 >= 1.0) || !m0.is_finite() {
                return bad(format!("m0 must be at least 1, got {m0}"));
            }
            if self.e0 > m0 {
                return bad(format!("e0 = {} exceeds m0 = {m0}", self.e0));
            }
        }
        Ok(())
    }

    /// Index of the first node with `ν_i >= ν0`.
    pub fn cutoff_index(&self) -> usize {
        self.grids.nu.first_at_or_above(self.nu0)
    }
}

/// Finite problem `min ½xᵀQx + cᵀx s.t. Gx <= h`.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub constraints: Constraints,
    /// Scaled by `objective_scale`.
    pub quadratic: SymmetricSparse,
    pub linear: Vec<f64>,
    pub objective_scale: f64,
    pub low_freq_rows: usize,
}

impl Assembly {
    pub fn n_spectrum_vars(&self) -> usize {
        self.constraints.n_primary
    }

    pub fn n_aux(&self) -> usize {
        self.constraints.n_aux
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.n_rows()
    }
}

pub fn assemble(problem: &SpectrumProblem) -> Result<Assembly> {
    assemble_with(problem, &problem.grids.hankel())
}

pub fn assemble_with(problem: &SpectrumProblem, hankel: &HankelMatrix) -> Result<Assembly> {
    let mut a = feasibility_constraints(problem, hankel)?;
    let n = a.constraints.n_primary;
    let h = problem.grids.nu.spacing();
    let i0 = problem.cutoff_index();
    let mut q = SymmetricSparse::new(n);
    let mut linear = vec![0.0; n];

    match problem.energy {
        EnergyKind::TotalVariation => {
            let n_aux = n.saturating_sub(1).saturating_sub(i0);
            a.constraints.n_aux = n_aux;
            for k in 0..n_aux {
                let i = i0 + k;
                let d = n + k;
                a.constraints
                    .push_sparse(vec![(i + 1, 1.0), (i, -1.0), (d, -1.0)], 0.0);
                a.constraints
                    .push_sparse(vec![(i + 1, -1.0), (i, 1.0), (d, -1.0)], 0.0);
            }
            linear.resize(n + n_aux, 1.0);
        }
        EnergyKind::Oscillation => {
            for (i, w) in high_band_weights(&problem.grids.nu, i0) {
                q.add(i, i, 2.0 * w);
            }
        }
        // the smoothness energies see the transition into ν0 as well; TV
        // and oscillation start at the first node at or above ν0
        EnergyKind::Dirichlet => {
            for i in i0.saturating_sub(1)..n.saturating_sub(1) {
                let c = 2.0 / h;
                q.add(i, i, c);
                q.add(i + 1, i + 1, c);
                q.add(i, i + 1, -c);
            }
        }
        EnergyKind::Laplacian => {
            let c = 2.0 / (h * h * h);
            for i in i0.max(1)..n.saturating_sub(1) {
                let stencil = [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)];
                for &(p, a) in &stencil {
                    for &(r, b) in &stencil {
                        if p <= r {
                            q.add(p, r, c * a * b);
                        }
                    }
                }
            }
        }
    }

    let scale = 1.0 / q.max_abs().max(1.0);
    for e in &mut q.entries {
        e.2 *= scale;
    }
    a.quadratic = q;
    a.linear = linear;
    a.objective_scale = scale;
    Ok(a)
}

/// Constraint set without the energy (and without its auxiliaries).
pub fn feasibility_constraints(
    problem: &SpectrumProblem,
    hankel: &HankelMatrix,
) -> Result<Assembly> {
    problem.validate()?;
    let nu = problem.grids.nu;
    if hankel.input_grid() != nu || hankel.output_grid() != problem.grids.r {
        return Err(Error::InvalidInput(
            "Hankel matrix was built for different grids".into(),
        ));
    }
    let n = nu.len();
    let i0 = problem.cutoff_index();
    let mut g = Constraints::new(n, 0);

    // (b) -(H F)_j <= 1
    g.dense = hankel.as_slice().iter().map(|v| -v).collect();
    g.dense_rhs = vec![1.0; hankel.rows()];

    // (a) -F_i <= 1
    for i in 0..n {
        g.push_sparse(vec![(i, -1.0)], 1.0);
    }

    // (c) low-frequency ceiling
    let before = g.sparse.len();
    match problem.low_freq_mode {
        LowFreqMode::Pointwise => {
            for i in 0..i0 {
                g.push_sparse(vec![(i, 1.0)], problem.e0 - 1.0);
            }
        }
        LowFreqMode::Integral => {
            let last = low_band_last_node(&nu, problem.nu0);
            if last == 0 {
                g.push_sparse(vec![(0, 1.0)], problem.e0 - 1.0);
            } else {
                let h = nu.spacing();
                let total = h * last as f64;
                let coeffs = (0..=last)
                    .map(|i| {
                        let w = if i == 0 || i == last { h / 2.0 } else { h };
                        (i, w / total)
                    })
                    .collect();
                g.push_sparse(coeffs, problem.e0 - 1.0);
            }
        }
    }
    let low_freq_rows = g.sparse.len() - before;

    // (d) |F_i| <= m0 - 1 above ν0
    if let Some(m0) = problem.m0 {
        for i in i0..n {
            g.push_sparse(vec![(i, 1.0)], m0 - 1.0);
            g.push_sparse(vec![(i, -1.0)], m0 - 1.0);
        }
    }

    Ok(Assembly {
        constraints: g,
        quadratic: SymmetricSparse::new(n),
        linear: vec![0.0; n],
        objective_scale: 1.0,
        low_freq_rows,
    })
}

fn low_band_last_node(nu: &RadialGrid, nu0: f64) -> usize {
    let t = nu0 / nu.spacing() + 1e-9;
    (t.floor() as usize).min(nu.len() - 1)
}

fn high_band_weights(nu: &RadialGrid, i0: usize) -> Vec<(usize, f64)> {
    let n = nu.len();
    let h = nu.spacing();
    (i0..n)
        .map(|i| {
            let w = if i == i0 || i == n - 1 { h / 2.0 } else { h };
            (i, w)
        })
        .collect()
}

/// Energy functional evaluated on `F` (unscaled units).
pub fn energy_value(kind: EnergyKind, f: &[f64], nu: &RadialGrid, nu0: f64) -> f64 {
    let n = f.len();
    let h = nu.spacing();
    let i0 = nu.first_at_or_above(nu0);
    match kind {
        EnergyKind::TotalVariation => (i0..n.saturating_sub(1))
            .map(|i| (f[i + 1] - f[i]).abs())
            .sum(),
        EnergyKind::Oscillation => high_band_weights(nu, i0)
            .into_iter()
            .map(|(i, w)| w * f[i] * f[i])
            .sum(),
        EnergyKind::Dirichlet => (i0.saturating_sub(1)..n.saturating_sub(1))
            .map(|i| (f[i + 1] - f[i]).powi(2) / h)
            .sum(),
        EnergyKind::Laplacian => (i0.max(1)..n.saturating_sub(1))
            .map(|i| (f[i + 1] - 2.0 * f[i] + f[i - 1]).powi(2) / (h * h * h))
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub spectrum: Option<RadialSpectrum>,
    pub objective: f64,
    /// `max P` over `ν >= ν0`.
    pub peak_m: f64,
    pub iterations: usize,
    /// Largest constraint violation of the returned spectrum.
    pub max_violation: f64,
}

pub fn solve(problem: &SpectrumProblem) -> Result<SolveReport> {
    solve_with(problem, &problem.grids.hankel())
}

pub fn solve_with(problem: &SpectrumProblem, hankel: &HankelMatrix) -> Result<SolveReport> {
    let a = assemble_with(problem, hankel)?;
    let settings = Settings::default();
    let sol = solver::solve_qp(&a.quadratic, &a.linear, &a.constraints, &settings)?;
    let n = a.n_spectrum_vars();
    let mut iterations = sol.iterations;

    if sol.termination == Termination::Optimal {
        let violation = a.constraints.max_violation(&sol.x).max(0.0);
        if violation <= SOLVER_EPS {
            let f = sol.x[..n].to_vec();
            let i0 = problem.cutoff_index();
            let peak_m = f[i0..].iter().fold(f64::NEG_INFINITY, |m, v| m.max(v + 1.0));
            let objective = energy_value(problem.energy, &f, &problem.grids.nu, problem.nu0);
            return Ok(SolveReport {
                status: SolveStatus::Optimal,
                spectrum: Some(RadialSpectrum::new(problem.grids.nu, f)?),
                objective,
                peak_m,
                iterations,
                max_violation: violation,
            });
        }
    }

    let probe = feasibility_margin_with(problem, hankel)?;
    iterations += probe.iterations;
    let status = match probe.margin {
        Some(t) if t > SOLVER_EPS => SolveStatus::Infeasible,
        _ => SolveStatus::NumericalFailure,
    };
    log::debug!(
        "nu0={} e0={} m0={:?}: {:?} after {:?} (margin {:?})",
        problem.nu0,
        problem.e0,
        problem.m0,
        status,
        sol.termination,
        probe.margin
    );
    Ok(SolveReport {
        status,
        spectrum: None,
        objective: f64::NAN,
        peak_m: f64::NAN,
        iterations,
        max_violation: f64::NAN,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Margin {
    /// Smallest uniform relaxation `t` making every constraint hold
    /// (`<= 0` iff feasible); `None` if the auxiliary LP failed.
    pub margin: Option<f64>,
    pub iterations: usize,
}

pub fn feasibility_margin_with(problem: &SpectrumProblem, hankel: &HankelMatrix) -> Result<Margin> {
    let a = feasibility_constraints(problem, hankel)?;
    let (margin, iterations) = solver::infeasibility_margin(&a.constraints, &Settings::default())?;
    Ok(Margin { margin, iterations })
}

/// Feasibility of the constraint set alone (no energy).
pub fn is_feasible_with(problem: &SpectrumProblem, hankel: &HankelMatrix) -> Result<bool> {
    match feasibility_margin_with(problem, hankel)?.margin {
        Some(t) => Ok(t <= SOLVER_EPS),
        None => Err(Error::Solver(format!(
            "feasibility probe failed at nu0 = {}, m0 = {:?}",
            problem.nu0, problem.m0
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct MinM0 {
    /// `None` when even `m0 = 20` is infeasible.
    pub value: Option<f64>,
    /// Probed `(m0, feasible)` pairs in evaluation order.
    pub trace: Vec<(f64, bool)>,
}

impl MinM0 {
    pub fn infeasible_at_bound(&self) -> bool {
        self.value.is_none()
    }
}

/// Smallest `m0` in `[1, 20]` (to `tolerance`) for which the constraints of
/// `template` are feasible. `template.m0` is ignored.
pub fn min_m0(template: &SpectrumProblem, tolerance: f64) -> Result<MinM0> {
    min_m0_with(template, tolerance, &template.grids.hankel())
}

pub fn min_m0_with(
    template: &SpectrumProblem,
    tolerance: f64,
    hankel: &HankelMatrix,
) -> Result<MinM0> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if !(template.nu0 > 0.0 && template.nu0 < 1.0) {
        return Err(Error::InvalidInput(format!(
            "nu0 must lie in (0, 1), got {}",
            template.nu0
        )));
    }
    let mut trace = Vec::new();
    let mut probe = |m0: f64| -> Result<bool> {
        let p = template.clone().with_m0(Some(m0.max(template.e0)));
        let ok = is_feasible_with(&p, hankel)?;
        trace.push((m0, ok));
        Ok(ok)
    };

    let value = if probe(1.0)? {
        Some(1.0)
    } else if !probe(M0_UPPER)? {
        None
    } else {
        let (mut lo, mut hi) = (1.0, M0_UPPER);
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };
    check_monotone(&trace)?;
    Ok(MinM0 { value, trace })
}

fn check_monotone(trace: &[(f64, bool)]) -> Result<()> {
    let lowest_feasible = trace
        .iter()
        .filter(|t| t.1)
        .map(|t| t.0)
        .fold(f64::INFINITY, f64::min);
    match trace.iter().find(|t| !t.1 && t.0 > lowest_feasible) {
        Some(&(m, _)) => Err(Error::Solver(format!(
            "feasibility not monotone: m0 = {lowest_feasible} feasible but {m} is not"
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct RegionRow {
    pub nu0: f64,
    pub min_m0: std::result::Result<MinM0, String>,
}

/// `min_m0` for each `ν0`, sharing one Hankel matrix; per-row failures are
/// kept in the table.
pub fn feasible_region(
    template: &SpectrumProblem,
    nu0_values: &[f64],
    tolerance: f64,
) -> Vec<RegionRow> {
    let hankel = template.grids.hankel();
    par::map_slice(nu0_values, |&nu0| {
        let p = SpectrumProblem {
            nu0,
            ..template.clone()
        };
        RegionRow {
            nu0,
            min_m0: min_m0_with(&p, tolerance, &hankel).map_err(|e| e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grids() -> Grids {
        Grids::uniform(0.05, 6.0, 0.05, 8.0).unwrap()
    }

    #[test]
    fn energy_names_round_trip() {
        for e in EnergyKind::ALL {
            assert_eq!(e.name().parse::<EnergyKind>().unwrap(), e);
        }
        assert!("smooth".parse::<EnergyKind>().is_err());
    }

    #[test]
    fn counts_for_tv_problem() {
        let grids = Grids::uniform(0.01, 10.0, 0.02, 4.0).unwrap();
        let p = SpectrumProblem::new(0.5, 0.0, EnergyKind::TotalVariation, grids);
        let a = assemble(&p).unwrap();
        assert_eq!(a.n_spectrum_vars(), 1001);
        assert_eq!(a.n_aux(), 950);
        assert_eq!(a.low_freq_rows, 50);
        assert!(a.n_rows() >= 1001 + grids.r.len() + 50);
    }

    #[test]
    fn integral_mode_has_one_row() {
        let p = SpectrumProblem::new(0.5, 0.0, EnergyKind::TotalVariation, small_grids())
            .with_low_freq_mode(LowFreqMode::Integral);
        assert_eq!(assemble(&p).unwrap().low_freq_rows, 1);
    }

    #[test]
    fn oscillation_matrix_is_trapezoid_diagonal() {
        let p = SpectrumProblem::new(0.5, 0.0, EnergyKind::Oscillation, small_grids());
        let a = assemble(&p).unwrap();
        assert!(a.quadratic.is_diagonal());
        let h = 0.05;
        let i0 = p.cutoff_index();
        let n = a.n_spectrum_vars();
        let diag = |i: usize| {
            a.quadratic
                .entries
                .iter()
                .find(|e| e.0 == i)
                .map(|e| e.2 / a.objective_scale)
        };
        assert!(diag(i0 - 1).is_none());
        assert!((diag(i0).unwrap() - h).abs() < 1e-12);
        assert!((diag(i0 + 1).unwrap() - 2.0 * h).abs() < 1e-12);
        assert!((diag(n - 1).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn quadratic_forms_match_energy_values() {
        let grids = small_grids();
        let f: Vec<f64> = grids.nu.coords().map(|v| (3.0 * v).sin() * (-v).exp()).collect();
        for kind in [
            EnergyKind::Oscillation,
            EnergyKind::Dirichlet,
            EnergyKind::Laplacian,
        ] {
            let p = SpectrumProblem::new(0.4, 0.0, kind, grids);
            let a = assemble(&p).unwrap();
            let qf = 0.5 * a.quadratic.quadratic_form(&f) / a.objective_scale;
            let direct = energy_value(kind, &f, &grids.nu, 0.4);
            assert!((qf - direct).abs() < 1e-9 * direct.max(1.0), "{kind}: {qf} vs {direct}");
        }
    }

    #[test]
    fn rejects_bad_problems() {
        let g = small_grids();
        assert!(assemble(&SpectrumProblem::new(0.0, 0.0, EnergyKind::Oscillation, g)).is_err());
        assert!(assemble(&SpectrumProblem::new(7.0, 0.0, EnergyKind::Oscillation, g)).is_err());
        assert!(assemble(&SpectrumProblem::new(0.5, -0.1, EnergyKind::Oscillation, g)).is_err());
        let p = SpectrumProblem::new(0.5, 1.5, EnergyKind::Oscillation, g).with_m0(Some(1.2));
        assert!(assemble(&p).is_err());
    }

    #[test]
    fn white_noise_is_optimal_when_unconstrained() {
        for kind in EnergyKind::ALL {
            let p = SpectrumProblem::new(0.5, 1.0, kind, small_grids());
            let r = solve(&p).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal, "{kind}");
            assert!(r.objective.abs() < 1e-6, "{kind}: {}", r.objective);
            // only the oscillation energy pins F itself; the others are
            // blind to constants (and the Laplacian to linear trends)
            if kind == EnergyKind::Oscillation {
                let f = r.spectrum.unwrap();
                let high = &f.f_values()[p.cutoff_index()..];
                assert!(high.iter().all(|v| v.abs() < 1e-3));
            }
        }
    }

    #[test]
    fn infeasible_when_peak_is_pinned_beyond_step_limit() {
        let p = SpectrumProblem::new(0.9, 0.0, EnergyKind::TotalVariation, small_grids())
            .with_m0(Some(1.01));
        let r = solve(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.spectrum.is_none());
    }

    #[test]
    fn monotone_check_flags_inversions() {
        assert!(check_monotone(&[(1.0, false), (20.0, true), (10.0, true)]).is_ok());
        assert!(check_monotone(&[(1.0, false), (20.0, true), (10.0, false), (5.0, true)]).is_err());
    }
}
