//! Finite-volume discretization on the polar grid and Newton solvers.
//!
//! Each cell equation is `−∮ ∂_n v = ∫_cell source`. The angular flux uses the
//! standard 5-point stencil, the pole needs no closure because the innermost
//! cell has a degenerate inner face, and the outer face flux uses the
//! one-sided quadratic derivative through the two outermost rings and the
//! Dirichlet value `v = 0` at `r = 1`. The discrete divergence identity
//! `Σ sources = −Σ_j ∂_ν v_j Δθ` therefore holds up to the Newton residual.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::banded::{BandedLu, BandedMatrix};
use super::grid::PolarGrid;
use super::problem::{Nonlinearity, ProblemSpec};
use crate::conformal::PotentialField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub allow_extreme_alpha: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            allow_extreme_alpha: false,
        }
    }
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Converged solution of one component on the disk.
#[derive(Debug, Clone)]
pub struct DiskSolution {
    pub grid: Arc<PolarGrid>,
    pub problem: Arc<ProblemSpec>,
    pub component: usize,
    /// Node values, row-major `(n_r, n_θ)`; `v = 0` on `r = 1` is implicit.
    pub values: Vec<f64>,
    /// `∂_ν v(θ_j)` on the boundary circle.
    pub boundary_derivative: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub sup_norm: f64,
}

impl DiskSolution {
    /// Value at the centre, taken as the mean over the innermost ring.
    pub fn center_value(&self) -> f64 {
        let n = self.grid.n_theta;
        self.values[..n].iter().sum::<f64>() / n as f64
    }

    /// Writes `r, theta, v` for every node.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "theta", "v"])?;
        for i in 0..self.grid.n_r {
            for j in 0..self.grid.n_theta {
                w.write_record(&[
                    format!("{:.17e}", self.grid.radii[i]),
                    format!("{:.17e}", self.grid.theta(j)),
                    format!("{:.17e}", self.values[self.grid.index(i, j)]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rebuilds a solution from exported node values and re-evaluates its residual.
    pub fn from_values(grid: Arc<PolarGrid>, problem: Arc<ProblemSpec>, values: Vec<f64>, tol: f64) -> Result<Self> {
        if problem.n_components() != 1 {
            return Err(Error::UnsupportedProblem("stored solutions are scalar".into()));
        }
        if values.len() != grid.n_cells() {
            return Err(Error::GridMismatch("stored values do not match grid".into()));
        }
        let lap = FvLaplacian::new(&grid, 1);
        let src = build_source(&problem, &grid)?;
        let mut s = vec![0.0; values.len()];
        src.eval(&values, &mut s, None);
        let f = lap.residual(&values, &s);
        let residual = lap.norm(&values, &f, &s);
        Ok(finish_solution(&lap, grid, problem, 0, values, residual, tol, 0))
    }
}

/// Coefficients of the integrated operator `−Δ` on the grid.
pub(crate) struct FvLaplacian {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_comp: usize,
    inner: Vec<f64>,
    outer: Vec<f64>,
    ang: Vec<f64>,
    /// `∂_r v(1) = d0 v_{n−2} + d1 v_{n−1}`.
    pub d0: f64,
    pub d1: f64,
    dtheta: f64,
    /// Cell areas per ring.
    pub area: Vec<f64>,
}

impl FvLaplacian {
    pub fn new(grid: &PolarGrid, n_comp: usize) -> Self {
        let n = grid.n_r;
        let r = &grid.radii;
        let f = &grid.faces;
        let dth = grid.dtheta();
        let mut inner = vec![0.0; n];
        let mut outer = vec![0.0; n];
        let mut ang = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                inner[i] = dth * f[i] / (r[i] - r[i - 1]);
            }
            if i + 1 < n {
                outer[i] = dth * f[i + 1] / (r[i + 1] - r[i]);
            }
            ang[i] = (f[i + 1] - f[i]) / r[i] / dth;
        }
        let (x0, x1, x2) = (r[n - 2], r[n - 1], 1.0);
        let d0 = (x2 - x1) / ((x0 - x1) * (x0 - x2));
        let d1 = (x2 - x0) / ((x1 - x0) * (x1 - x2));
        let area = grid.area_moments().iter().map(|m| m * dth).collect();
        Self {
            n_r: n,
            n_theta: grid.n_theta,
            n_comp,
            inner,
            outer,
            ang,
            d0,
            d1,
            dtheta: dth,
            area,
        }
    }

    fn dim(&self) -> usize {
        self.n_r * self.n_theta * self.n_comp
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.n_theta + j) * self.n_comp + c
    }

    /// Stencil entries `(i', j', coefficient)` of row `(i, j)`.
    fn stencil(&self, i: usize, j: usize) -> [(usize, usize, f64); 6] {
        let nt = self.n_theta;
        let jp = (j + 1) % nt;
        let jm = (j + nt - 1) % nt;
        let mut diag = self.inner[i] + self.outer[i] + 2.0 * self.ang[i];
        let mut prev = -self.inner[i];
        if i + 1 == self.n_r {
            diag -= self.dtheta * self.d1;
            prev -= self.dtheta * self.d0;
        }
        [
            (i, j, diag),
            (i, jp, -self.ang[i]),
            (i, jm, -self.ang[i]),
            (i.saturating_sub(1), j, if i > 0 { prev } else { 0.0 }),
            ((i + 1).min(self.n_r - 1), j, if i + 1 < self.n_r { -self.outer[i] } else { 0.0 }),
            (i, j, 0.0),
        ]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.n_r {
            for j in 0..self.n_theta {
                for (ii, jj, c) in self.stencil(i, j) {
                    if c != 0.0 {
                        for k in 0..self.n_comp {
                            out[self.idx(i, j, k)] += c * v[self.idx(ii, jj, k)];
                        }
                    }
                }
            }
        }
        out
    }

    pub fn residual(&self, v: &[f64], source: &[f64]) -> Vec<f64> {
        let mut f = self.apply(v);
        for (fi, si) in f.iter_mut().zip(source) {
            *fi -= si;
        }
        f
    }

    /// Row-wise relative max norm
    /// `max |F_k| / (area_k + Σ_l |L_kl v_l| + |S_k|)`: a residual per unit area
    /// for small solutions and a backward error relative to the size of the
    /// balanced terms otherwise, so that rounding never dominates on fine grids.
    pub fn norm(&self, v: &[f64], f: &[f64], source: &[f64]) -> f64 {
        let mut scale = vec![0.0; v.len()];
        for i in 0..self.n_r {
            for j in 0..self.n_theta {
                for (ii, jj, c) in self.stencil(i, j) {
                    if c != 0.0 {
                        for k in 0..self.n_comp {
                            scale[self.idx(i, j, k)] += (c * v[self.idx(ii, jj, k)]).abs();
                        }
                    }
                }
            }
        }
        let mut worst = 0.0f64;
        for (k, (fi, si)) in f.iter().zip(source).enumerate() {
            let a = self.area[k / (self.n_theta * self.n_comp)];
            let r = fi.abs() / (a + scale[k] + si.abs());
            if !r.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(r);
        }
        worst
    }

    /// Jacobian `L − dS` where `dS` holds `N×N` blocks per cell.
    pub fn jacobian(&self, ds: &[f64]) -> BandedMatrix {
        let nc = self.n_comp;
        let bw = self.n_theta * nc;
        let mut m = BandedMatrix::zeros(self.dim(), bw, bw);
        for i in 0..self.n_r {
            for j in 0..self.n_theta {
                for (ii, jj, c) in self.stencil(i, j) {
                    if c != 0.0 {
                        for k in 0..nc {
                            m.add(self.idx(i, j, k), self.idx(ii, jj, k), c);
                        }
                    }
                }
                let cell = i * self.n_theta + j;
                for a in 0..nc {
                    for b in 0..nc {
                        let v = ds[cell * nc * nc + a * nc + b];
                        if v != 0.0 {
                            m.add(self.idx(i, j, a), self.idx(i, j, b), -v);
                        }
                    }
                }
            }
        }
        m
    }

    /// `∂_ν v_c(θ_j)` from stacked values.
    pub fn boundary_derivative(&self, v: &[f64], c: usize) -> Vec<f64> {
        let n = self.n_r;
        (0..self.n_theta)
            .map(|j| self.d0 * v[self.idx(n - 2, j, c)] + self.d1 * v[self.idx(n - 1, j, c)])
            .collect()
    }
}

/// Integrated source terms and their cell Jacobian blocks.
pub(crate) trait Source {
    fn n_comp(&self) -> usize;
    /// Fills `s` with integrated sources and, if requested, `ds` with `N×N` blocks.
    fn eval(&self, v: &[f64], s: &mut [f64], ds: Option<&mut [f64]>);
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum ScalarKind {
    Exp,
    Power(f64),
    General(Nonlinearity),
}

/// `S = μ c(cell) g(v)` for a scalar nonlinearity `g`.
pub(crate) struct ScalarSource {
    pub kind: ScalarKind,
    pub coeff: Vec<f64>,
    pub scale: f64,
}

impl ScalarSource {
    pub fn g(&self, v: f64) -> (f64, f64) {
        match self.kind {
            ScalarKind::Exp => {
                let e = v.exp();
                (e, e)
            }
            ScalarKind::Power(p) => {
                let a = v.abs();
                let q = a.powf(p - 1.0);
                (q * v, p * q)
            }
            ScalarKind::General(f) => (f.df(v), f.d2f(v)),
        }
    }

    /// Unscaled `c g(v)`.
    pub fn base(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.coeff).map(|(x, c)| c * self.g(*x).0).collect()
    }
}

impl Source for ScalarSource {
    fn n_comp(&self) -> usize {
        1
    }

    fn eval(&self, v: &[f64], s: &mut [f64], ds: Option<&mut [f64]>) {
        match ds {
            Some(ds) => {
                for k in 0..v.len() {
                    let (g, dg) = self.g(v[k]);
                    s[k] = self.scale * self.coeff[k] * g;
                    ds[k] = self.scale * self.coeff[k] * dg;
                }
            }
            None => {
                for k in 0..v.len() {
                    s[k] = self.scale * self.coeff[k] * self.g(v[k]).0;
                }
            }
        }
    }
}

pub(crate) struct SystemSource {
    a: Vec<Vec<f64>>,
    /// `λ_j K̃_j m^{(α_j)} Δθ` per cell, per component.
    coeff: Vec<Vec<f64>>,
}

impl Source for SystemSource {
    fn n_comp(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, v: &[f64], s: &mut [f64], mut ds: Option<&mut [f64]>) {
        let n = self.a.len();
        let cells = v.len() / n;
        let mut e = vec![0.0; n];
        for cell in 0..cells {
            for j in 0..n {
                e[j] = self.coeff[j][cell] * v[cell * n + j].exp();
            }
            for i in 0..n {
                s[cell * n + i] = (0..n).map(|j| self.a[i][j] * e[j]).sum();
                if let Some(ds) = ds.as_deref_mut() {
                    for j in 0..n {
                        ds[cell * n * n + i * n + j] = self.a[i][j] * e[j];
                    }
                }
            }
        }
    }
}

fn field_coeff(k: &PotentialField, grid: &PolarGrid, alpha: f64) -> Result<Vec<f64>> {
    if !k.matches(grid) {
        return Err(Error::GridMismatch("potential field sampled on a different grid".into()));
    }
    let m = grid.moments_for(alpha);
    let dth = grid.dtheta();
    Ok(k.interior()
        .iter()
        .enumerate()
        .map(|(idx, v)| v * m[idx / grid.n_theta] * dth)
        .collect())
}

pub(crate) fn build_source(problem: &ProblemSpec, grid: &PolarGrid) -> Result<Box<dyn Source>> {
    Ok(match problem {
        ProblemSpec::Liouville { lambda, alpha, k } => Box::new(ScalarSource {
            kind: ScalarKind::Exp,
            coeff: field_coeff(k, grid, *alpha)?,
            scale: *lambda,
        }),
        ProblemSpec::Henon { p, alpha, k } => Box::new(ScalarSource {
            kind: ScalarKind::Power(*p),
            coeff: field_coeff(k, grid, *alpha)?,
            scale: 1.0,
        }),
        ProblemSpec::General { w, f } => Box::new(ScalarSource {
            kind: ScalarKind::General(*f),
            coeff: field_coeff(w, grid, 0.0)?,
            scale: 1.0,
        }),
        ProblemSpec::System { a, lambdas, alphas, ks } => {
            let mut coeff = Vec::new();
            for ((l, al), k) in lambdas.iter().zip(alphas).zip(ks) {
                coeff.push(field_coeff(k, grid, *al)?.iter().map(|c| c * l).collect());
            }
            Box::new(SystemSource { a: a.clone(), coeff })
        }
    })
}

fn factor(lap: &FvLaplacian, ds: &[f64]) -> Result<BandedLu> {
    lap.jacobian(ds).factor()
}

/// Damped Newton iteration on `L v − S(v) = 0`. Returns `(v, residual, iterations)`.
pub(crate) fn newton(
    lap: &FvLaplacian,
    src: &dyn Source,
    mut v: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = v.len();
    let nc = src.n_comp();
    let mut s = vec![0.0; n];
    let mut ds = vec![0.0; n * nc];
    let mut history = Vec::new();
    src.eval(&v, &mut s, Some(&mut ds));
    let mut f = lap.residual(&v, &s);
    let mut res = lap.norm(&v, &f, &s);
    let mut polishing = false;
    for it in 0..=opts.max_iter {
        history.push(res);
        if res < opts.tol {
            // One extra step once converged: the tolerance sits well above
            // rounding, and leftover algebraic error shows up in integrals.
            if polishing || res < 1e-3 * opts.tol {
                return Ok((v, res, it));
            }
            polishing = true;
        }
        if it == opts.max_iter || !res.is_finite() {
            break;
        }
        let lu = factor(lap, &ds)?;
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        let delta = lu.solve(&neg);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            src.eval(&trial, &mut s, Some(&mut ds));
            let ft = lap.residual(&trial, &s);
            let rt = lap.norm(&trial, &ft, &s);
            if rt < res || (step < 1.0 / 1024.0 && !polishing) {
                v = trial;
                f = ft;
                res = rt;
                break;
            }
            if polishing && step < 1.0 / 1024.0 {
                return Ok((v, res, it));
            }
            step *= 0.5;
        }
    }
    Err(Error::NewtonDiverged {
        iterations: history.len().saturating_sub(1),
        residual: res,
        history,
    })
}

/// Newton on the bordered system `L v − μ B(v) = 0`, `mean(v on ring 0) = target`
/// with unknowns `(v, μ)`. Returns `(v, μ, residual, iterations)`.
pub(crate) fn newton_bordered(
    lap: &FvLaplacian,
    src: &mut ScalarSource,
    mut v: Vec<f64>,
    mut mu: f64,
    target: f64,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, f64, f64, usize)> {
    let n = v.len();
    let nt = lap.n_theta;
    let center = |v: &[f64]| v[..nt].iter().sum::<f64>() / nt as f64;
    let mut s = vec![0.0; n];
    let mut ds = vec![0.0; n];
    let mut history = Vec::new();
    let eval = |src: &mut ScalarSource, v: &[f64], mu: f64, s: &mut [f64], ds: &mut [f64]| {
        src.scale = mu;
        src.eval(v, s, Some(ds));
    };
    eval(src, &v, mu, &mut s, &mut ds);
    let mut f = lap.residual(&v, &s);
    let mut res = lap.norm(&v, &f, &s).max((center(&v) - target).abs());
    let mut polishing = false;
    for it in 0..=opts.max_iter {
        history.push(res);
        if res < opts.tol {
            if polishing || res < 1e-3 * opts.tol {
                src.scale = mu;
                return Ok((v, mu, res, it));
            }
            polishing = true;
        }
        if it == opts.max_iter || !res.is_finite() {
            break;
        }
        let lu = factor(lap, &ds)?;
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        let a = lu.solve(&neg);
        let b = lu.solve(&src.base(&v));
        let cb = center(&b);
        if cb == 0.0 || !cb.is_finite() {
            return Err(Error::SingularMatrix);
        }
        let dmu = (target - center(&v) - center(&a)) / cb;
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = v
                .iter()
                .zip(a.iter().zip(&b))
                .map(|(x, (ai, bi))| x + step * (ai + dmu * bi))
                .collect();
            let mu_t = mu + step * dmu;
            eval(src, &trial, mu_t, &mut s, &mut ds);
            let ft = lap.residual(&trial, &s);
            let rt = lap.norm(&trial, &ft, &s).max((center(&trial) - target).abs());
            if rt < res || (step < 1.0 / 1024.0 && !polishing) {
                v = trial;
                mu = mu_t;
                f = ft;
                res = rt;
                break;
            }
            if polishing && step < 1.0 / 1024.0 {
                src.scale = mu;
                return Ok((v, mu, res, it));
            }
            step *= 0.5;
        }
    }
    Err(Error::NewtonDiverged {
        iterations: history.len().saturating_sub(1),
        residual: res,
        history,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_solution(
    lap: &FvLaplacian,
    grid: Arc<PolarGrid>,
    problem: Arc<ProblemSpec>,
    component: usize,
    values: Vec<f64>,
    residual: f64,
    tol: f64,
    iterations: usize,
) -> DiskSolution {
    let nc = lap.n_comp;
    let comp: Vec<f64> = if nc == 1 {
        values
    } else {
        values.iter().skip(component).step_by(nc).copied().collect()
    };
    let single = FvLaplacian::new(&grid, 1);
    let boundary_derivative = single.boundary_derivative(&comp, 0);
    let sup_norm = comp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    DiskSolution {
        grid,
        problem,
        component,
        values: comp,
        boundary_derivative,
        residual,
        tolerance: tol,
        converged: residual < tol,
        iterations,
        sup_norm,
    }
}

fn radial_profile(grid: &PolarGrid, alpha: f64) -> Vec<f64> {
    let e = 2.0 + 2.0 * alpha;
    grid.sample(|r, _| 1.0 - r.powf(e))
}

/// Positive Hénon solution by a ramp in `p` on the normalized problem
/// `−Δw = μ|y|^{2α}K̃ w^p`, `w(0) = 1`, rescaled by `v = μ^{1/(p−1)} w`.
pub(crate) struct HenonTracker {
    pub w: Vec<f64>,
    pub mu: f64,
    pub p: f64,
}

impl HenonTracker {
    pub fn start(grid: &PolarGrid, alpha: f64, k: &PotentialField, p0: f64) -> Self {
        let e = 2.0 + 2.0 * alpha;
        let k0 = k.interior()[..grid.n_theta].iter().sum::<f64>() / grid.n_theta as f64;
        Self {
            w: radial_profile(grid, alpha),
            mu: e * e / k0,
            p: p0,
        }
    }

    /// Advances to `p_target` in geometric steps of at most 25 %.
    pub fn advance(
        &mut self,
        lap: &FvLaplacian,
        coeff: &[f64],
        p_target: f64,
        opts: &NewtonOptions,
    ) -> Result<()> {
        let mut p = self.p;
        let mut first = true;
        loop {
            let next = if first { p } else { (p * 1.25).min(p_target) };
            first = false;
            let mut src = ScalarSource {
                kind: ScalarKind::Power(next),
                coeff: coeff.to_vec(),
                scale: self.mu,
            };
            let (w, mu, _, _) = newton_bordered(lap, &mut src, self.w.clone(), self.mu, 1.0, opts)?;
            self.w = w;
            self.mu = mu;
            self.p = next;
            p = next;
            if next >= p_target {
                return Ok(());
            }
        }
    }

    pub fn rescaled(&self) -> Vec<f64> {
        let c = self.mu.powf(1.0 / (self.p - 1.0));
        self.w.iter().map(|w| c * w).collect()
    }
}

/// Picard iteration `v ← L⁻¹ S(v)` from a small positive profile.
fn picard(lap: &FvLaplacian, src: &dyn Source, grid: &PolarGrid) -> Result<Vec<f64>> {
    let lu = factor(lap, &vec![0.0; lap.dim()])?;
    let mut v: Vec<f64> = radial_profile(grid, 0.0).iter().map(|x| 1e-3 * x).collect();
    let mut s = vec![0.0; v.len()];
    for _ in 0..400 {
        src.eval(&v, &mut s, None);
        let next = lu.solve(&s);
        let change = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = next.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        v = next;
        if !scale.is_finite() {
            break;
        }
        if change <= 1e-9 * (1.0 + scale) {
            break;
        }
    }
    Ok(v)
}

/// Solves a scalar problem with Newton's method.
///
/// Without an initial guess: zero for Liouville, a `p`-ramp for Hénon, and a
/// Picard warm start for general nonlinearities.
pub fn solve_newton(
    problem: Arc<ProblemSpec>,
    grid: Arc<PolarGrid>,
    initial_guess: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<DiskSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    problem.validate(opts.allow_extreme_alpha)?;
    if let ProblemSpec::System { .. } = *problem {
        return Err(Error::UnsupportedProblem("systems are solved with solve_system".into()));
    }
    let lap = FvLaplacian::new(&grid, 1);
    let src = build_source(&problem, &grid)?;
    let guess = match (initial_guess, problem.as_ref()) {
        (Some(g), _) => {
            if g.len() != grid.n_cells() {
                return Err(Error::GridMismatch("initial guess length".into()));
            }
            g.to_vec()
        }
        (None, ProblemSpec::Henon { p, alpha, k }) => {
            let coeff = field_coeff(k, &grid, *alpha)?;
            let mut tracker = HenonTracker::start(&grid, *alpha, k, p.min(1.5));
            tracker.advance(&lap, &coeff, *p, opts)?;
            tracker.rescaled()
        }
        (None, ProblemSpec::General { .. }) => picard(&lap, src.as_ref(), &grid)?,
        (None, _) => vec![0.0; grid.n_cells()],
    };
    let (v, res, iters) = newton(&lap, src.as_ref(), guess, opts)?;
    if let ProblemSpec::Henon { .. } = *problem {
        let min = v.iter().fold(f64::INFINITY, |m, x| m.min(*x));
        if !(min > 0.0) {
            return Err(Error::PositivityLost(min));
        }
    }
    Ok(finish_solution(&lap, grid, problem, 0, v, res, opts.tol, iters))
}

/// Coupled Newton for Liouville systems; one solution per component.
pub fn solve_system(
    problem: Arc<ProblemSpec>,
    grid: Arc<PolarGrid>,
    initial_guess: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<Vec<DiskSolution>> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    let nc = match problem.as_ref() {
        ProblemSpec::System { lambdas, .. } => lambdas.len(),
        _ => return Err(Error::UnsupportedProblem("solve_system needs a system problem".into())),
    };
    problem.validate(opts.allow_extreme_alpha)?;
    let lap = FvLaplacian::new(&grid, nc);
    let src = build_source(&problem, &grid)?;
    let guess = match initial_guess {
        Some(g) if g.len() == lap.dim() => g.to_vec(),
        Some(_) => return Err(Error::GridMismatch("initial guess length".into())),
        None => vec![0.0; lap.dim()],
    };
    let (v, res, iters) = newton(&lap, src.as_ref(), guess, opts)?;
    Ok((0..nc)
        .map(|c| finish_solution(&lap, grid.clone(), problem.clone(), c, v.clone(), res, opts.tol, iters))
        .collect())
}

/// Solves the linear problem `−Δv = f`, `v = 0` on `r = 1`, with the cell
/// source `f(r_i, θ_j)·area`.
pub fn solve_poisson(grid: &PolarGrid, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let lap = FvLaplacian::new(grid, 1);
    let lu = factor(&lap, &vec![0.0; lap.dim()])?;
    let mut rhs = grid.sample(f);
    for (k, v) in rhs.iter_mut().enumerate() {
        *v *= lap.area[k / grid.n_theta];
    }
    Ok(lu.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::grid::build_grid;

    fn disk_problem(grid: &PolarGrid, lambda: f64) -> Arc<ProblemSpec> {
        Arc::new(ProblemSpec::Liouville {
            lambda,
            alpha: 0.0,
            k: Arc::new(PotentialField::constant(grid, 1.0).unwrap()),
        })
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let g = Arc::new(build_grid(32, 16, 0.0, 1.0).unwrap());
        let sol = solve_newton(disk_problem(&g, 0.0), g, None, &NewtonOptions::default()).unwrap();
        assert!(sol.sup_norm == 0.0);
        assert!(sol.converged);
    }

    #[test]
    fn manufactured_solution_second_order() {
        // w = (1 − r²) r cos θ, −Δw = 8 r cos θ
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let g = build_grid(n, n, 0.0, 1.0).unwrap();
            let v = solve_poisson(&g, |r, t| 8.0 * r * t.cos()).unwrap();
            let exact = g.sample(|r, t| (1.0 - r * r) * r * t.cos());
            let e = v.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            errs.push(e);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}, errors {errs:?}");
        }
    }

    #[test]
    fn discrete_divergence_identity_is_exact() {
        let g = Arc::new(build_grid(64, 32, 0.0, 1.3).unwrap());
        let sol = solve_newton(disk_problem(&g, 1.0), g.clone(), None, &NewtonOptions::default()).unwrap();
        let src: f64 = {
            let lap = FvLaplacian::new(&g, 1);
            let s = build_source(&sol.problem, &g).unwrap();
            let mut out = vec![0.0; g.n_cells()];
            s.eval(&sol.values, &mut out, None);
            let _ = lap;
            out.iter().sum()
        };
        let flux: f64 = sol.boundary_derivative.iter().sum::<f64>() * g.dtheta();
        assert!((src + flux).abs() < 1e-9 * src, "source {src}, flux {flux}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = build_grid(16, 16, 0.3, 1.0).unwrap();
        let k = PotentialField::from_fn(&g, crate::conformal::FieldSign::Positive, |r, t| 1.0 + 0.3 * r * t.cos()).unwrap();
        let problem = ProblemSpec::Liouville { lambda: 1.3, alpha: 0.3, k: Arc::new(k) };
        let lap = FvLaplacian::new(&g, 1);
        let src = build_source(&problem, &g).unwrap();
        let v: Vec<f64> = g.sample(|r, t| (1.0 - r * r) * (1.0 + 0.2 * (2.0 * t).sin()));
        let mut s = vec![0.0; v.len()];
        let mut ds = vec![0.0; v.len()];
        src.eval(&v, &mut s, Some(&mut ds));
        let jac = lap.jacobian(&ds);
        let f0 = lap.residual(&v, &s);
        for col in [0usize, 17, 100, 255] {
            let mut vp = v.clone();
            let h = 1e-7;
            vp[col] += h;
            src.eval(&vp, &mut s, None);
            let f1 = lap.residual(&vp, &s);
            for row in 0..v.len() {
                let fd = (f1[row] - f0[row]) / h;
                assert!((fd - jac.get(row, col)).abs() < 1e-5, "({row},{col}) fd {fd} jac {}", jac.get(row, col));
            }
        }
    }

    #[test]
    fn system_reduces_to_scalar() {
        let g = Arc::new(build_grid(32, 16, 0.0, 1.0).unwrap());
        let k = Arc::new(PotentialField::constant(&g, 1.0).unwrap());
        let sys = Arc::new(ProblemSpec::System {
            a: vec![vec![2.0]],
            lambdas: vec![0.75],
            alphas: vec![0.0],
            ks: vec![k.clone()],
        });
        let opts = NewtonOptions::default();
        let a = solve_system(sys, g.clone(), None, &opts).unwrap();
        let b = solve_newton(disk_problem(&g, 1.5), g, None, &opts).unwrap();
        let diff = a[0].values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-10, "diff {diff}");
    }

    #[test]
    fn singular_system_rejected() {
        let g = Arc::new(build_grid(16, 16, 0.0, 1.0).unwrap());
        let k = Arc::new(PotentialField::constant(&g, 1.0).unwrap());
        let sys = Arc::new(ProblemSpec::System {
            a: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            lambdas: vec![0.1, 0.1],
            alphas: vec![0.0, 0.0],
            ks: vec![k.clone(), k],
        });
        assert!(matches!(
            solve_system(sys, g, None, &NewtonOptions::default()),
            Err(Error::SingularMatrix)
        ));
    }
}
