//! Both sides of the Pohozaev identity on the unit disk, masses and boundary flux.
//!
//! For `−Δv = ∂_v G(y, v)` with `v = 0` on `∂𝔻`,
//! `½∫_{∂𝔻}(∂_ν v)² = 2∫_𝔻 G + ∫_𝔻 ∇_y G·y − ∫_{∂𝔻} G`.
//! Area integrals use the solver's cell quadrature, boundary integrals the
//! trapezoidal rule on the grid angles.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::disk::grid::integrate_with;
use crate::disk::{DiskSolution, PolarGrid, ProblemSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PohozaevReport {
    pub lhs: f64,
    pub rhs_area: f64,
    pub rhs_radial: f64,
    pub rhs_boundary: f64,
    /// `|lhs − (rhs_area + rhs_radial − rhs_boundary)|`.
    pub residual: f64,
    pub mass: f64,
    pub flux: f64,
    pub holder_gap: f64,
    /// Integral of the right-hand side; equals `−flux` up to the solver residual.
    pub source_integral: f64,
}

impl PohozaevReport {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.lhs.abs().max(f64::MIN_POSITIVE)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentTerms {
    pub rhs_area: f64,
    pub rhs_radial: f64,
    pub rhs_boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemPohozaevReport {
    /// `½ Σ a^{ij} ∫ ∂_ν v_i ∂_ν v_j`.
    pub lhs: f64,
    pub components: Vec<ComponentTerms>,
    pub residual: f64,
    pub masses: Vec<f64>,
    pub fluxes: Vec<f64>,
}

impl SystemPohozaevReport {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.lhs.abs().max(f64::MIN_POSITIVE)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn require_converged(solution: &DiskSolution) -> Result<()> {
    if solution.converged {
        Ok(())
    } else {
        Err(Error::NotConverged)
    }
}

fn boundary_sum(values: &[f64], grid: &PolarGrid) -> f64 {
    values.iter().sum::<f64>() * grid.dtheta()
}

/// Exponential-type terms `λ|y|^{2α}K̃e^v` shared by scalar Liouville and systems.
fn liouville_terms(grid: &PolarGrid, v: &[f64], lambda: f64, alpha: f64, k: &crate::conformal::PotentialField) -> (f64, ComponentTerms) {
    let m = grid.moments_for(alpha);
    let dk = k.radial_derivative_at_nodes();
    let kv = k.interior();
    let g: Vec<f64> = kv.iter().zip(v).map(|(k, v)| lambda * k * v.exp()).collect();
    let radial: Vec<f64> = (0..v.len())
        .map(|idx| {
            let r = grid.radii[idx / grid.n_theta];
            lambda * (2.0 * alpha * kv[idx] + r * dk[idx]) * v[idx].exp()
        })
        .collect();
    let area = integrate_with(grid, &g, &m);
    (
        area,
        ComponentTerms {
            rhs_area: 2.0 * area,
            rhs_radial: integrate_with(grid, &radial, &m),
            rhs_boundary: lambda * boundary_sum(k.boundary(), grid),
        },
    )
}

pub fn pohozaev_report(solution: &DiskSolution) -> Result<PohozaevReport> {
    require_converged(solution)?;
    let grid = solution.grid.as_ref();
    let v = &solution.values;
    let d = &solution.boundary_derivative;
    let lhs = 0.5 * boundary_sum(&d.iter().map(|x| x * x).collect::<Vec<_>>(), grid);
    let flux = boundary_sum(d, grid);
    let (terms, mass, source_integral) = match solution.problem.as_ref() {
        ProblemSpec::Liouville { lambda, alpha, k } => {
            let (m, t) = liouville_terms(grid, v, *lambda, *alpha, k);
            (t, m, m)
        }
        ProblemSpec::Henon { p, alpha, k } => {
            let m = grid.moments_for(*alpha);
            let dk = k.radial_derivative_at_nodes();
            let kv = k.interior();
            let q = p + 1.0;
            let g: Vec<f64> = kv.iter().zip(v).map(|(k, v)| k * v.abs().powf(q) / q).collect();
            let radial: Vec<f64> = (0..v.len())
                .map(|idx| {
                    let r = grid.radii[idx / grid.n_theta];
                    (2.0 * alpha * kv[idx] + r * dk[idx]) * v[idx].abs().powf(q) / q
                })
                .collect();
            let src: Vec<f64> = kv.iter().zip(v).map(|(k, v)| k * v.abs().powf(p - 1.0) * v).collect();
            let ga = integrate_with(grid, &g, &m);
            (
                ComponentTerms {
                    rhs_area: 2.0 * ga,
                    rhs_radial: integrate_with(grid, &radial, &m),
                    rhs_boundary: 0.0,
                },
                p * q * ga,
                integrate_with(grid, &src, &m),
            )
        }
        ProblemSpec::General { w, f } => {
            let m = grid.area_moments();
            let dw = w.radial_derivative_at_nodes();
            let wv = w.interior();
            let g: Vec<f64> = wv.iter().zip(v).map(|(w, v)| w * f.f(*v)).collect();
            let radial: Vec<f64> = (0..v.len())
                .map(|idx| grid.radii[idx / grid.n_theta] * dw[idx] * f.f(v[idx]))
                .collect();
            let src: Vec<f64> = wv.iter().zip(v).map(|(w, v)| w * f.df(*v)).collect();
            let s = integrate_with(grid, &src, &m);
            (
                ComponentTerms {
                    rhs_area: 2.0 * integrate_with(grid, &g, &m),
                    rhs_radial: integrate_with(grid, &radial, &m),
                    rhs_boundary: f.f(0.0) * boundary_sum(w.boundary(), grid),
                },
                s,
                s,
            )
        }
        ProblemSpec::System { .. } => {
            return Err(Error::UnsupportedProblem("use system_pohozaev_report for systems".into()));
        }
    };
    let rhs = terms.rhs_area + terms.rhs_radial - terms.rhs_boundary;
    Ok(PohozaevReport {
        lhs,
        rhs_area: terms.rhs_area,
        rhs_radial: terms.rhs_radial,
        rhs_boundary: terms.rhs_boundary,
        residual: (lhs - rhs).abs(),
        mass,
        flux,
        holder_gap: lhs - flux * flux / (4.0 * PI),
        source_integral,
    })
}

/// Mass of a scalar solution or of one system component: `λ∫|y|^{2α}K̃e^v`
/// (Liouville and systems), `p∫|y|^{2α}K̃v^{p+1}` (Hénon), `∫W̃F′(v)` (general).
pub fn mass(solution: &DiskSolution) -> Result<f64> {
    require_converged(solution)?;
    let grid = solution.grid.as_ref();
    let v = &solution.values;
    Ok(match solution.problem.as_ref() {
        ProblemSpec::Liouville { lambda, alpha, k } => {
            let g: Vec<f64> = k.interior().iter().zip(v).map(|(k, v)| k * v.exp()).collect();
            lambda * integrate_with(grid, &g, &grid.moments_for(*alpha))
        }
        ProblemSpec::Henon { p, alpha, k } => {
            let g: Vec<f64> = k.interior().iter().zip(v).map(|(k, v)| k * v.abs().powf(p + 1.0)).collect();
            p * integrate_with(grid, &g, &grid.moments_for(*alpha))
        }
        ProblemSpec::General { w, f } => {
            let g: Vec<f64> = w.interior().iter().zip(v).map(|(w, v)| w * f.df(*v)).collect();
            integrate_with(grid, &g, &grid.area_moments())
        }
        ProblemSpec::System { lambdas, alphas, ks, .. } => {
            let c = solution.component;
            let g: Vec<f64> = ks[c].interior().iter().zip(v).map(|(k, v)| k * v.exp()).collect();
            lambdas[c] * integrate_with(grid, &g, &grid.moments_for(alphas[c]))
        }
    })
}

/// Pohozaev identity for `−Δv_i = Σ_j a_ij λ_j|y|^{2α_j}K̃_j e^{v_j}`.
pub fn system_pohozaev_report(solutions: &[DiskSolution], a: &[Vec<f64>]) -> Result<SystemPohozaevReport> {
    let n = a.len();
    if n == 0 || solutions.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("system size does not match the solutions".into()));
    }
    for (c, s) in solutions.iter().enumerate() {
        require_converged(s)?;
        match s.problem.as_ref() {
            ProblemSpec::System { a: pa, .. } if pa.as_slice() == a && s.component == c => {}
            ProblemSpec::System { .. } => {
                return Err(Error::InvalidParameter("solutions were computed with a different matrix or order".into()));
            }
            _ => return Err(Error::UnsupportedProblem("system report needs system solutions".into())),
        }
        if !s.grid.same_layout(&solutions[0].grid) {
            return Err(Error::GridMismatch("components live on different grids".into()));
        }
    }
    let inv = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j])
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;
    let grid = solutions[0].grid.as_ref();
    let mut lhs = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = solutions[i]
                .boundary_derivative
                .iter()
                .zip(&solutions[j].boundary_derivative)
                .map(|(x, y)| x * y)
                .sum();
            lhs += 0.5 * inv[(i, j)] * dot * grid.dtheta();
        }
    }
    let (lambdas, alphas, ks) = match solutions[0].problem.as_ref() {
        ProblemSpec::System { lambdas, alphas, ks, .. } => (lambdas, alphas, ks),
        _ => unreachable!("checked above"),
    };
    let mut components = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    let mut fluxes = Vec::with_capacity(n);
    let mut rhs = 0.0;
    for i in 0..n {
        let (m, t) = liouville_terms(grid, &solutions[i].values, lambdas[i], alphas[i], &ks[i]);
        rhs += t.rhs_area + t.rhs_radial - t.rhs_boundary;
        components.push(t);
        masses.push(m);
        fluxes.push(boundary_sum(&solutions[i].boundary_derivative, grid));
    }
    Ok(SystemPohozaevReport {
        lhs,
        components,
        residual: (lhs - rhs).abs(),
        masses,
        fluxes,
    })
}
