//! Primal-dual interior-point method for convex QPs in inequality form
//!
//! ```text
//! minimize   ½ xᵀ Q x + cᵀ x
//! subject to G x <= h
//! ```
//!
//! The variables are split into `n_primary` dense variables followed by
//! `n_aux` separable auxiliaries. `G` is a dense block over the primary
//! variables stacked on top of sparse rows; every sparse row may touch at
//! most one auxiliary and `Q` never touches them. The auxiliary block of the
//! normal matrix is then diagonal and is eliminated by a Schur complement, so
//! each Newton step costs one dense Cholesky of size `n_primary`.
//!
//! Mehrotra predictor-corrector steps from an infeasible start.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }
}

/// `G x <= h` with a dense leading block.
#[derive(Debug, Clone)]
pub struct Constraints {
    pub n_primary: usize,
    pub n_aux: usize,
    /// Row-major `dense_rhs.len() x n_primary`.
    pub dense: Vec<f64>,
    pub dense_rhs: Vec<f64>,
    pub sparse: Vec<SparseRow>,
}

impl Constraints {
    pub fn new(n_primary: usize, n_aux: usize) -> Self {
        Self {
            n_primary,
            n_aux,
            dense: Vec::new(),
            dense_rhs: Vec::new(),
            sparse: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_primary + self.n_aux
    }

    pub fn n_dense(&self) -> usize {
        self.dense_rhs.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_dense() + self.sparse.len()
    }

    pub fn push_dense(&mut self, row: &[f64], rhs: f64) {
        assert_eq!(row.len(), self.n_primary);
        self.dense.extend_from_slice(row);
        self.dense_rhs.push(rhs);
    }

    pub fn push_sparse(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.sparse.push(SparseRow::new(coeffs, rhs));
    }

    fn validate(&self) -> Result<()> {
        if self.dense.len() != self.n_dense() * self.n_primary {
            return Err(Error::Solver("dense block has wrong size".into()));
        }
        for (k, row) in self.sparse.iter().enumerate() {
            let mut aux = 0;
            for &(j, _) in &row.coeffs {
                if j >= self.n_vars() {
                    return Err(Error::Solver(format!("row {k} references variable {j}")));
                }
                if j >= self.n_primary {
                    aux += 1;
                }
            }
            if aux > 1 {
                return Err(Error::Solver(format!(
                    "sparse row {k} couples {aux} auxiliary variables"
                )));
            }
        }
        Ok(())
    }

    /// `G x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let np = self.n_primary;
        let mut out = Vec::with_capacity(self.n_rows());
        for row in self.dense.chunks_exact(np.max(1)).take(self.n_dense()) {
            out.push(dot(row, &x[..np]));
        }
        for row in &self.sparse {
            out.push(row.coeffs.iter().map(|&(j, a)| a * x[j]).sum());
        }
        out
    }

    /// `Gᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let np = self.n_primary;
        let mut out = vec![0.0; self.n_vars()];
        for (row, &yi) in self.dense.chunks_exact(np.max(1)).zip(y) {
            if yi != 0.0 {
                for (o, a) in out[..np].iter_mut().zip(row) {
                    *o += a * yi;
                }
            }
        }
        for (row, &yi) in self.sparse.iter().zip(&y[self.n_dense()..]) {
            for &(j, a) in &row.coeffs {
                out[j] += a * yi;
            }
        }
        out
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.dense_rhs
            .iter()
            .copied()
            .chain(self.sparse.iter().map(|r| r.rhs))
            .collect()
    }

    /// Largest violation `max(G x - h)` (negative when strictly feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(self.rhs())
            .map(|(g, h)| g - h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Relaxation `G x - t <= h, t >= -1` with objective `min t`; the
    /// original set is non-empty iff the optimum is `<= 0`. `t` becomes the
    /// last primary variable.
    pub fn uniform_relaxation(&self) -> (Constraints, Vec<f64>) {
        let np = self.n_primary + 1;
        let t = self.n_primary;
        let shift = |j: usize| if j >= self.n_primary { j + 1 } else { j };
        let mut out = Constraints::new(np, self.n_aux);
        let mut row = vec![0.0; np];
        for (src, &rhs) in self
            .dense
            .chunks_exact(self.n_primary.max(1))
            .zip(&self.dense_rhs)
        {
            row[..self.n_primary].copy_from_slice(src);
            row[t] = -1.0;
            out.push_dense(&row, rhs);
        }
        for r in &self.sparse {
            let mut coeffs: Vec<(usize, f64)> =
                r.coeffs.iter().map(|&(j, a)| (shift(j), a)).collect();
            coeffs.push((t, -1.0));
            out.push_sparse(coeffs, r.rhs);
        }
        out.push_sparse(vec![(t, -1.0)], 1.0);
        let mut c = vec![0.0; out.n_vars()];
        c[t] = 1.0;
        (out, c)
    }
}

/// Symmetric matrix over the primary variables; each `(i, j, v)` with
/// `i <= j` stands for both `Q[i][j]` and `Q[j][i]`.
#[derive(Debug, Clone, Default)]
pub struct SymmetricSparse {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymmetricSparse {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((a, b, v));
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
            if i != j {
                out[j] += v * x[i];
            }
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        dot(x, &y)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.2.abs()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|&(i, j, _)| i == j)
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub max_iterations: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub gap_tol: f64,
    /// Iterates with `|z|` beyond this are treated as diverging (typical of
    /// infeasible instances).
    pub divergence_limit: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            gap_tol: 1e-9,
            divergence_limit: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Optimal,
    MaxIterations,
    Diverged,
    NumericalError,
    /// Detected during presolve.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub termination: Termination,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.termination == Termination::Optimal
    }
}

/// Linear program `min cᵀx s.t. G x <= h`.
pub fn solve_lp(c: &[f64], g: &Constraints, settings: &Settings) -> Result<Solution> {
    solve_qp(&SymmetricSparse::new(g.n_primary), c, g, settings)
}

/// Convex QP `min ½ xᵀQx + cᵀx s.t. G x <= h`; `Q` must be positive
/// semidefinite and restricted to the primary variables.
pub fn solve_qp(
    q: &SymmetricSparse,
    c: &[f64],
    g: &Constraints,
    settings: &Settings,
) -> Result<Solution> {
    g.validate()?;
    if c.len() != g.n_vars() {
        return Err(Error::Solver(format!(
            "objective has {} entries for {} variables",
            c.len(),
            g.n_vars()
        )));
    }
    if q.entries.iter().any(|&(_, j, _)| j >= g.n_primary) {
        return Err(Error::Solver("quadratic term touches auxiliaries".into()));
    }
    let reduced = match presolve(q, c, g) {
        Presolve::Unchanged => return Ipm::new(q, c, g).run(settings),
        Presolve::Infeasible(_) => {
            return Ok(Solution {
                termination: Termination::Infeasible,
                x: vec![f64::NAN; g.n_vars()],
                z: vec![0.0; g.n_rows()],
                objective: f64::NAN,
                iterations: 0,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                gap: f64::INFINITY,
            })
        }
        Presolve::Reduced(r) => r,
    };
    let inner = if reduced.g.n_vars() == 0 || reduced.g.n_rows() == 0 {
        Solution {
            termination: if reduced.g.n_vars() == 0 {
                Termination::Optimal
            } else {
                // free variables without rows: bounded only if c vanishes
                Termination::NumericalError
            },
            x: vec![0.0; reduced.g.n_vars()],
            z: Vec::new(),
            objective: 0.0,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
        }
    } else {
        Ipm::new(&reduced.q, &reduced.c, &reduced.g).run(settings)?
    };
    let mut x = reduced.fixed.clone();
    for (old, new) in reduced.map.iter().enumerate() {
        if let Some(k) = new {
            x[old] = inner.x[*k];
        }
    }
    let mut z = vec![0.0; g.n_rows()];
    for (k, &row) in reduced.kept_rows.iter().enumerate() {
        z[row] = inner.z[k];
    }
    let objective = 0.5 * q.quadratic_form(&x[..g.n_primary]) + dot(c, &x);
    Ok(Solution {
        x,
        z,
        objective,
        ..inner
    })
}

/// Smallest uniform slack `t` such that `G x <= h + t` is solvable, after
/// removing fixed variables (`t <= 0` iff feasible). `None` if the auxiliary
/// LP did not converge.
pub fn infeasibility_margin(g: &Constraints, settings: &Settings) -> Result<(Option<f64>, usize)> {
    g.validate()?;
    let empty = SymmetricSparse::new(g.n_primary);
    let zeros = vec![0.0; g.n_vars()];
    let reduced;
    let target = match presolve(&empty, &zeros, g) {
        Presolve::Unchanged => g,
        Presolve::Infeasible(v) => return Ok((Some(v), 0)),
        Presolve::Reduced(r) => {
            reduced = r;
            &reduced.g
        }
    };
    if target.n_rows() == 0 {
        return Ok((Some(-1.0), 0));
    }
    let (relaxed, c) = target.uniform_relaxation();
    let sol = solve_lp(&c, &relaxed, settings)?;
    Ok((sol.is_optimal().then_some(sol.objective), sol.iterations))
}

enum Presolve {
    Unchanged,
    /// Carries the violation of an emptied row (or of a crossed bound).
    Infeasible(f64),
    Reduced(Reduced),
}

struct Reduced {
    g: Constraints,
    q: SymmetricSparse,
    c: Vec<f64>,
    /// Original variable to reduced variable (`None` when fixed).
    map: Vec<Option<usize>>,
    /// Original-length vector holding the fixed values.
    fixed: Vec<f64>,
    kept_rows: Vec<usize>,
}

/// Removes primary variables whose singleton rows pin them to one value.
/// Opposing bound pairs leave the multipliers non-unique, which stalls the
/// interior-point iteration.
fn presolve(q: &SymmetricSparse, c: &[f64], g: &Constraints) -> Presolve {
    let np = g.n_primary;
    let mut lo = vec![f64::NEG_INFINITY; np];
    let mut hi = vec![f64::INFINITY; np];
    for row in &g.sparse {
        if let [(j, a)] = row.coeffs[..] {
            if j < np && a != 0.0 {
                let b = row.rhs / a;
                if a > 0.0 {
                    hi[j] = hi[j].min(b);
                } else {
                    lo[j] = lo[j].max(b);
                }
            }
        }
    }
    let mut fixed = vec![0.0; g.n_vars()];
    let mut is_fixed = vec![false; np];
    for j in 0..np {
        if !lo[j].is_finite() || !hi[j].is_finite() {
            continue;
        }
        let scale = 1.0 + lo[j].abs().min(hi[j].abs());
        if hi[j] < lo[j] - 1e-9 * scale {
            return Presolve::Infeasible(0.5 * (lo[j] - hi[j]));
        }
        if hi[j] - lo[j] <= 1e-12 * scale {
            is_fixed[j] = true;
            fixed[j] = 0.5 * (lo[j] + hi[j]);
        }
    }
    if !is_fixed.iter().any(|&f| f) {
        return Presolve::Unchanged;
    }

    let mut map = vec![None; g.n_vars()];
    let mut next = 0;
    for j in 0..g.n_vars() {
        if j >= np || !is_fixed[j] {
            map[j] = Some(next);
            next += 1;
        }
    }
    let new_np = map[..np].iter().filter(|m| m.is_some()).count();
    let mut out = Constraints::new(new_np, g.n_aux);
    let mut kept_rows = Vec::new();
    let empty_row_ok = |rhs: f64| rhs >= -1e-9;

    let mut buf = vec![0.0; new_np];
    for (i, (row, &rhs)) in g
        .dense
        .chunks_exact(np.max(1))
        .zip(&g.dense_rhs)
        .enumerate()
    {
        let mut b = rhs;
        for j in 0..np {
            match map[j] {
                Some(k) => buf[k] = row[j],
                None => b -= row[j] * fixed[j],
            }
        }
        if new_np == 0 {
            if !empty_row_ok(b) {
                return Presolve::Infeasible(-b);
            }
            continue;
        }
        out.push_dense(&buf, b);
        kept_rows.push(i);
    }
    let mut sparse_kept = Vec::new();
    for (i, row) in g.sparse.iter().enumerate() {
        let mut b = row.rhs;
        let mut coeffs = Vec::with_capacity(row.coeffs.len());
        for &(j, a) in &row.coeffs {
            match map[j] {
                Some(k) => coeffs.push((k, a)),
                None => b -= a * fixed[j],
            }
        }
        if coeffs.is_empty() {
            if !empty_row_ok(b) {
                return Presolve::Infeasible(-b);
            }
            continue;
        }
        out.push_sparse(coeffs, b);
        sparse_kept.push(g.n_dense() + i);
    }
    kept_rows.extend(sparse_kept);

    let mut c_new = vec![0.0; out.n_vars()];
    for (j, &cj) in c.iter().enumerate() {
        if let Some(k) = map[j] {
            c_new[k] += cj;
        }
    }
    let mut q_new = SymmetricSparse::new(new_np);
    for &(i, j, v) in &q.entries {
        match (map[i], map[j]) {
            (Some(a), Some(b)) => q_new.add(a, b, v),
            (Some(a), None) => c_new[a] += v * fixed[j],
            (None, Some(b)) => c_new[b] += v * fixed[i],
            (None, None) => {}
        }
    }
    Presolve::Reduced(Reduced {
        g: out,
        q: q_new,
        c: c_new,
        map,
        fixed,
        kept_rows,
    })
}

struct Ipm<'a> {
    q: &'a SymmetricSparse,
    c: &'a [f64],
    g: &'a Constraints,
    h: Vec<f64>,
}

struct Factor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    // per auxiliary: diagonal entry and coupling to primaries
    aux_diag: Vec<f64>,
    aux_coupling: Vec<Vec<(usize, f64)>>,
}

impl<'a> Ipm<'a> {
    fn new(q: &'a SymmetricSparse, c: &'a [f64], g: &'a Constraints) -> Self {
        Self {
            q,
            c,
            g,
            h: g.rhs(),
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self.q.quadratic_form(&x[..self.g.n_primary]) + dot(self.c, x)
    }

    fn run(&self, settings: &Settings) -> Result<Solution> {
        let n = self.g.n_vars();
        let m = self.g.n_rows();
        let h_norm = inf_norm(&self.h);
        let c_norm = inf_norm(self.c);

        let mut x = vec![0.0; n];
        let gx = self.g.apply(&x);
        let mut s: Vec<f64> = self
            .h
            .iter()
            .zip(&gx)
            .map(|(h, g)| (h - g).max(1.0))
            .collect();
        let mut z = vec![1.0; m];

        // reduced-precision fallback for when rounding stalls the endgame
        let mut acceptable: Option<Solution> = None;
        let finish = |sol: Solution, acceptable: Option<Solution>| match acceptable {
            Some(a) => Ok(Solution {
                termination: Termination::Optimal,
                ..a
            }),
            None => Ok(sol),
        };
        for iter in 0..=settings.max_iterations {
            let gx = self.g.apply(&x);
            let r_p: Vec<f64> = (0..m).map(|i| gx[i] + s[i] - self.h[i]).collect();
            let mut r_d = self.g.apply_transpose(&z);
            self.q.apply(&x[..self.g.n_primary], &mut r_d[..self.g.n_primary]);
            for (r, ci) in r_d.iter_mut().zip(self.c) {
                *r += ci;
            }
            let gap = dot(&s, &z);
            let mu = gap / m as f64;
            let pres = inf_norm(&r_p) / (1.0 + h_norm);
            let dres = inf_norm(&r_d) / (1.0 + c_norm);
            let obj = self.objective(&x);

            let snapshot = |term: Termination, it: usize| Solution {
                termination: term,
                x: x.clone(),
                z: z.clone(),
                objective: obj,
                iterations: it,
                primal_residual: pres,
                dual_residual: dres,
                gap,
            };

            if pres <= settings.primal_tol
                && dres <= settings.dual_tol
                && gap <= settings.gap_tol * (1.0 + obj.abs())
            {
                return Ok(snapshot(Termination::Optimal, iter));
            }
            let rel_gap = gap / (1.0 + obj.abs());
            if pres <= 1e3 * settings.primal_tol
                && dres <= 1e3 * settings.dual_tol
                && rel_gap <= 1e3 * settings.gap_tol
                && acceptable.as_ref().is_none_or(|a| dres <= a.dual_residual)
            {
                acceptable = Some(snapshot(Termination::Optimal, iter));
            }
            if acceptable.is_some() && rel_gap <= 1e-13 {
                return finish(snapshot(Termination::NumericalError, iter), acceptable);
            }
            if !gap.is_finite() || inf_norm(&z) > settings.divergence_limit {
                return finish(snapshot(Termination::Diverged, iter), acceptable);
            }
            if iter == settings.max_iterations {
                return finish(snapshot(Termination::MaxIterations, iter), acceptable);
            }

            let w: Vec<f64> = (0..m).map(|i| z[i] / s[i]).collect();
            let factor = match self.factor(&w) {
                Some(f) => f,
                None => return finish(snapshot(Termination::NumericalError, iter), acceptable),
            };

            // predictor
            let rc_aff: Vec<f64> = (0..m).map(|i| s[i] * z[i]).collect();
            let (_, ds_a, dz_a) = self.direction(&factor, &w, &s, &r_p, &r_d, &rc_aff);
            let alpha_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a)).min(1.0);
            let mu_aff = (0..m)
                .map(|i| (s[i] + alpha_aff * ds_a[i]) * (z[i] + alpha_aff * dz_a[i]))
                .sum::<f64>()
                / m as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let rc: Vec<f64> = (0..m)
                .map(|i| s[i] * z[i] + ds_a[i] * dz_a[i] - sigma * mu)
                .collect();
            let (dx, ds, dz) = self.direction(&factor, &w, &s, &r_p, &r_d, &rc);
            let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
            if !(alpha > 0.0) || !alpha.is_finite() {
                return finish(snapshot(Termination::NumericalError, iter), acceptable);
            }
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += alpha * d;
            }
            for i in 0..m {
                s[i] = (s[i] + alpha * ds[i]).max(1e-300);
                z[i] = (z[i] + alpha * dz[i]).max(1e-300);
            }
        }
        unreachable!("the last iteration always returns")
    }

    /// Newton direction for complementarity target `rc`:
    /// `(Q + GᵀWG) dx = -r_d - Gᵀ(W r_p - rc / s)`.
    fn direction(
        &self,
        f: &Factor,
        w: &[f64],
        s: &[f64],
        r_p: &[f64],
        r_d: &[f64],
        rc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = w.len();
        let tmp: Vec<f64> = (0..m).map(|i| w[i] * r_p[i] - rc[i] / s[i]).collect();
        let gt = self.g.apply_transpose(&tmp);
        let rhs: Vec<f64> = (0..r_d.len()).map(|j| -r_d[j] - gt[j]).collect();
        let mut dx = self.solve_normal(f, &rhs);
        // the normal matrix loses accuracy as W spreads; refine against the
        // exact operator
        for _ in 0..3 {
            let res = self.normal_residual(w, &rhs, &dx);
            if inf_norm(&res) <= 1e-14 * (1.0 + inf_norm(&rhs)) {
                break;
            }
            let corr = self.solve_normal(f, &res);
            for (d, c) in dx.iter_mut().zip(&corr) {
                *d += c;
            }
        }
        let gdx = self.g.apply(&dx);
        let ds: Vec<f64> = (0..m).map(|i| -r_p[i] - gdx[i]).collect();
        let dz: Vec<f64> = (0..m)
            .map(|i| w[i] * (gdx[i] + r_p[i]) - rc[i] / s[i])
            .collect();
        (dx, ds, dz)
    }

    /// `rhs - (Q + GᵀWG) dx`.
    fn normal_residual(&self, w: &[f64], rhs: &[f64], dx: &[f64]) -> Vec<f64> {
        let gdx: Vec<f64> = self
            .g
            .apply(dx)
            .iter()
            .zip(w)
            .map(|(v, wi)| v * wi)
            .collect();
        let mut out = self.g.apply_transpose(&gdx);
        let np = self.g.n_primary;
        self.q.apply(&dx[..np], &mut out[..np]);
        for (o, r) in out.iter_mut().zip(rhs) {
            *o = r - *o;
        }
        out
    }

    fn factor(&self, w: &[f64]) -> Option<Factor> {
        let g = self.g;
        let np = g.n_primary;
        let md = g.n_dense();
        let mut mpp = vec![0.0; np * np];

        if md > 0 && np > 0 {
            // B = sqrt(W) D, then BᵀB
            let mut b = g.dense.clone();
            for (row, wi) in b.chunks_exact_mut(np).zip(w) {
                let sw = wi.sqrt();
                row.iter_mut().for_each(|v| *v *= sw);
            }
            unsafe {
                matrixmultiply::dgemm(
                    np,
                    md,
                    np,
                    1.0,
                    b.as_ptr(),
                    1,
                    np as isize,
                    b.as_ptr(),
                    np as isize,
                    1,
                    0.0,
                    mpp.as_mut_ptr(),
                    np as isize,
                    1,
                );
            }
        }
        for &(i, j, v) in &self.q.entries {
            mpp[i * np + j] += v;
            if i != j {
                mpp[j * np + i] += v;
            }
        }

        let mut aux_diag = vec![0.0; g.n_aux];
        let mut aux_coupling: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.n_aux];
        for (row, &wi) in g.sparse.iter().zip(&w[md..]) {
            let aux = row.coeffs.iter().find(|(j, _)| *j >= np).copied();
            for &(a, va) in &row.coeffs {
                if a >= np {
                    continue;
                }
                for &(b, vb) in &row.coeffs {
                    if b < np {
                        mpp[a * np + b] += wi * va * vb;
                    }
                }
            }
            if let Some((k, vk)) = aux {
                let k = k - np;
                aux_diag[k] += wi * vk * vk;
                for &(a, va) in &row.coeffs {
                    if a < np {
                        aux_coupling[k].push((a, wi * va * vk));
                    }
                }
            }
        }
        for (k, list) in aux_coupling.iter_mut().enumerate() {
            merge_duplicates(list);
            let d = aux_diag[k];
            if !(d > 0.0) {
                return None;
            }
            for &(a, va) in list.iter() {
                for &(b, vb) in list.iter() {
                    mpp[a * np + b] -= va * vb / d;
                }
            }
        }

        let diag_max = (0..np).map(|i| mpp[i * np + i].abs()).fold(0.0, f64::max);
        let mut reg = 1e-13 * diag_max.max(1.0);
        for _ in 0..6 {
            let mut mat = DMatrix::from_row_slice(np, np, &mpp);
            for i in 0..np {
                mat[(i, i)] += reg;
            }
            if let Some(chol) = mat.cholesky() {
                return Some(Factor {
                    chol,
                    aux_diag,
                    aux_coupling,
                });
            }
            reg *= 100.0;
        }
        None
    }

    fn solve_normal(&self, f: &Factor, rhs: &[f64]) -> Vec<f64> {
        let np = self.g.n_primary;
        let mut rp = rhs[..np].to_vec();
        let ra = &rhs[np..];
        for (k, list) in f.aux_coupling.iter().enumerate() {
            let t = ra[k] / f.aux_diag[k];
            for &(a, v) in list {
                rp[a] -= v * t;
            }
        }
        let dp = f.chol.solve(&DVector::from_vec(rp));
        let mut out = dp.as_slice().to_vec();
        out.reserve(ra.len());
        for (k, list) in f.aux_coupling.iter().enumerate() {
            let coupled: f64 = list.iter().map(|&(a, v)| v * dp[a]).sum();
            out.push((ra[k] - coupled) / f.aux_diag[k]);
        }
        out
    }
}

fn merge_duplicates(list: &mut Vec<(usize, f64)>) {
    list.sort_by_key(|e| e.0);
    list.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_constraints(n: usize, lo: f64, hi: f64) -> Constraints {
        let mut g = Constraints::new(n, 0);
        for j in 0..n {
            g.push_sparse(vec![(j, 1.0)], hi);
            g.push_sparse(vec![(j, -1.0)], -lo);
        }
        g
    }

    #[test]
    fn small_lp() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 → (1.6, 1.2)
        let mut g = Constraints::new(2, 0);
        g.push_dense(&[1.0, 2.0], 4.0);
        g.push_dense(&[3.0, 1.0], 6.0);
        g.push_sparse(vec![(0, -1.0)], 0.0);
        g.push_sparse(vec![(1, -1.0)], 0.0);
        let sol = solve_lp(&[-1.0, -1.0], &g, &Settings::default()).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.x[0] - 1.6).abs() < 1e-7);
        assert!((sol.x[1] - 1.2).abs() < 1e-7);
        assert!((sol.objective + 2.8).abs() < 1e-7);
    }

    #[test]
    fn box_qp_projects() {
        // min ½|x - p|² over the unit box = clamp(p)
        let p = [1.7f64, -0.3, 0.4];
        let mut q = SymmetricSparse::new(3);
        for j in 0..3 {
            q.add(j, j, 1.0);
        }
        let c: Vec<f64> = p.iter().map(|v| -v).collect();
        let sol = solve_qp(&q, &c, &box_constraints(3, 0.0, 1.0), &Settings::default()).unwrap();
        assert!(sol.is_optimal());
        for (x, pi) in sol.x.iter().zip(p) {
            assert!((x - pi.clamp(0.0, 1.0)).abs() < 1e-7);
        }
    }

    #[test]
    fn l1_with_auxiliaries() {
        // min |x0 - 3| + |x1 + 1| via auxiliaries d0, d1; optimum 0 at (3, -1)
        // with x bounded to [-2, 2], optimum is (2, -1) with value 1
        let mut g = Constraints::new(2, 2);
        for (j, target) in [(0usize, 3.0), (1, -1.0)] {
            g.push_sparse(vec![(j, 1.0), (2 + j, -1.0)], target);
            g.push_sparse(vec![(j, -1.0), (2 + j, -1.0)], -target);
        }
        for j in 0..2 {
            g.push_sparse(vec![(j, 1.0)], 2.0);
            g.push_sparse(vec![(j, -1.0)], 2.0);
        }
        let sol = solve_lp(&[0.0, 0.0, 1.0, 1.0], &g, &Settings::default()).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective - 1.0).abs() < 1e-7);
        assert!((sol.x[0] - 2.0).abs() < 1e-6);
        assert!((sol.x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_coupled_auxiliaries() {
        let mut g = Constraints::new(1, 2);
        g.push_sparse(vec![(1, 1.0), (2, 1.0)], 0.0);
        assert!(solve_lp(&[0.0; 3], &g, &Settings::default()).is_err());
    }

    #[test]
    fn infeasible_problem_does_not_report_optimal() {
        let mut g = Constraints::new(1, 0);
        g.push_sparse(vec![(0, 1.0)], -1.0);
        g.push_sparse(vec![(0, -1.0)], -1.0);
        let sol = solve_lp(&[0.0], &g, &Settings::default()).unwrap();
        assert!(!sol.is_optimal());
        let (relaxed, c) = g.uniform_relaxation();
        let sol = solve_lp(&c, &relaxed, &Settings::default()).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn relaxation_of_feasible_set_is_nonpositive() {
        let g = box_constraints(4, -1.0, 1.0);
        let (relaxed, c) = g.uniform_relaxation();
        let sol = solve_lp(&c, &relaxed, &Settings::default()).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective + 1.0).abs() < 1e-7);
    }
}
