//! Solution branches: Liouville in the centre value `s`, Hénon in the exponent `p`.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::grid::PolarGrid;
use super::newton::{
    build_source, finish_solution, newton, newton_bordered, DiskSolution, FvLaplacian, HenonTracker, NewtonOptions,
    ScalarKind, ScalarSource,
};
use super::problem::ProblemSpec;
use crate::conformal::PotentialField;
use crate::error::{Error, Result};
use crate::pohozaev::mass;

#[derive(Debug, Clone)]
pub enum BranchFamily {
    /// Sweep of the centre value `s` with `λ` solved for.
    Liouville { alpha: f64, k: Arc<PotentialField> },
    /// Sweep of the exponent `p`; `s` is recorded, not prescribed.
    Henon { alpha: f64, k: Arc<PotentialField> },
}

impl BranchFamily {
    pub fn alpha(&self) -> f64 {
        match self {
            BranchFamily::Liouville { alpha, .. } | BranchFamily::Henon { alpha, .. } => *alpha,
        }
    }

    fn field(&self) -> &Arc<PotentialField> {
        match self {
            BranchFamily::Liouville { k, .. } | BranchFamily::Henon { k, .. } => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchEntry {
    pub s: f64,
    pub lambda_or_p: f64,
    pub mass: f64,
    pub sup_norm: f64,
    pub residual: f64,
}

/// Maximum of `λ(s)` along a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fold {
    pub s: f64,
    pub lambda: f64,
    /// Index of the largest sampled `λ`.
    pub index: usize,
    /// False when the maximum sits at an end of the sweep (no turning point seen).
    pub interior: bool,
}

#[derive(Debug, Clone)]
pub struct ContinuationBranch {
    pub family: BranchFamily,
    pub entries: Vec<BranchEntry>,
    pub solutions: Vec<DiskSolution>,
    pub fold: Option<Fold>,
    /// Set when a step failed; `entries` then holds the converged prefix.
    pub truncated: bool,
    pub failure: Option<String>,
}

impl ContinuationBranch {
    pub fn max_mass(&self) -> f64 {
        self.entries.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.mass))
    }

    pub fn max_lambda(&self) -> f64 {
        self.entries.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.lambda_or_p))
    }

    /// Writes `s, lambda_or_p, mass, sup_norm, residual`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "lambda_or_p", "mass", "sup_norm", "residual"])?;
        for e in &self.entries {
            w.write_record(&[
                format!("{:.12e}", e.s),
                format!("{:.12e}", e.lambda_or_p),
                format!("{:.12e}", e.mass),
                format!("{:.12e}", e.sup_norm),
                format!("{:.6e}", e.residual),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Locates the maximum of `λ` and refines it by a parabola through the
/// neighbouring samples.
pub fn locate_fold(entries: &[BranchEntry]) -> Option<Fold> {
    if entries.is_empty() {
        return None;
    }
    let (index, _) = entries
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, e)| if e.lambda_or_p > bv { (i, e.lambda_or_p) } else { (bi, bv) });
    let e = entries[index];
    if index == 0 || index + 1 == entries.len() {
        return Some(Fold {
            s: e.s,
            lambda: e.lambda_or_p,
            index,
            interior: false,
        });
    }
    let (x0, y0) = (entries[index - 1].s, entries[index - 1].lambda_or_p);
    let (x1, y1) = (e.s, e.lambda_or_p);
    let (x2, y2) = (entries[index + 1].s, entries[index + 1].lambda_or_p);
    // Newton form of the interpolating parabola.
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let c = (d12 - d01) / (x2 - x0);
    let (s, lambda) = if c < 0.0 {
        let s = 0.5 * (x0 + x1) - d01 / (2.0 * c);
        let lambda = y0 + d01 * (s - x0) + c * (s - x0) * (s - x1);
        (s, lambda)
    } else {
        (x1, y1)
    };
    Some(Fold {
        s,
        lambda,
        index,
        interior: true,
    })
}

/// Traces a branch over `n_steps` equispaced values in `range`: centre values
/// for Liouville, exponents for Hénon.
pub fn continuation_branch(
    family: BranchFamily,
    range: [f64; 2],
    n_steps: usize,
    grid: Arc<PolarGrid>,
    opts: &NewtonOptions,
) -> Result<ContinuationBranch> {
    if n_steps < 1 || !(range[1] >= range[0]) || !range[0].is_finite() || !range[1].is_finite() {
        return Err(Error::InvalidParameter(format!("bad sweep range {range:?} with {n_steps} steps")));
    }
    if n_steps > 1 && range[1] == range[0] {
        return Err(Error::InvalidParameter("degenerate sweep range".into()));
    }
    let values: Vec<f64> = if n_steps == 1 {
        vec![range[0]]
    } else {
        (0..n_steps)
            .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n_steps - 1) as f64)
            .collect()
    };
    continuation_at(family, &values, grid, opts)
}

/// Traces a branch through an explicit increasing list of parameter values.
pub fn continuation_at(
    family: BranchFamily,
    values: &[f64],
    grid: Arc<PolarGrid>,
    opts: &NewtonOptions,
) -> Result<ContinuationBranch> {
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("sweep values must be strictly increasing".into()));
    }
    let k = family.field().clone();
    if !k.matches(&grid) {
        return Err(Error::GridMismatch("potential field sampled on a different grid".into()));
    }
    let alpha = family.alpha();
    let probe = match &family {
        BranchFamily::Liouville { .. } => ProblemSpec::Liouville { lambda: 1.0, alpha, k: k.clone() },
        BranchFamily::Henon { .. } => {
            if let Some(p) = values.iter().find(|p| !(**p > 1.0)) {
                return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
            }
            ProblemSpec::Henon { p: 2.0, alpha, k: k.clone() }
        }
    };
    probe.validate(opts.allow_extreme_alpha)?;
    match family {
        BranchFamily::Liouville { .. } => liouville_branch(family, values, grid, opts),
        BranchFamily::Henon { .. } => henon_branch(family, values, grid, opts),
    }
}

fn unit_coeff(grid: &PolarGrid, k: &PotentialField, alpha: f64) -> Vec<f64> {
    let m = grid.moments_for(alpha);
    let dth = grid.dtheta();
    k.interior()
        .iter()
        .enumerate()
        .map(|(idx, v)| v * m[idx / grid.n_theta] * dth)
        .collect()
}

fn liouville_branch(
    family: BranchFamily,
    values: &[f64],
    grid: Arc<PolarGrid>,
    opts: &NewtonOptions,
) -> Result<ContinuationBranch> {
    let alpha = family.alpha();
    let k = family.field().clone();
    let lap = FvLaplacian::new(&grid, 1);
    let coeff = unit_coeff(&grid, &k, alpha);
    let e = 2.0 + 2.0 * alpha;
    let k0 = k.interior()[..grid.n_theta].iter().sum::<f64>() / grid.n_theta as f64;
    let profile = grid.sample(|r, _| 1.0 - r.powf(e));

    let mut branch = ContinuationBranch {
        family,
        entries: Vec::new(),
        solutions: Vec::new(),
        fold: None,
        truncated: false,
        failure: None,
    };
    // Last two converged states (s, v, λ) for the secant predictor.
    let mut history: Vec<(f64, Vec<f64>, f64)> = Vec::new();

    let predict = |history: &[(f64, Vec<f64>, f64)], s: f64| -> (Vec<f64>, f64) {
        match history {
            [] => (profile.iter().map(|p| s * p).collect(), e * e * s / k0),
            [(s1, v1, l1)] => (v1.iter().map(|x| x * s / s1).collect(), l1 * s / s1),
            [.., (s0, v0, l0), (s1, v1, l1)] => {
                let t = (s - s1) / (s1 - s0);
                (
                    v1.iter().zip(v0).map(|(a, b)| a + t * (a - b)).collect(),
                    l1 + t * (l1 - l0),
                )
            }
        }
    };

    for &target in values {
        // Substeps are inserted when the direct step fails.
        let start = history.last().map(|h| h.0);
        let mut done = false;
        let mut last_err = None;
        let mut iterations = 0;
        for level in 0..5 {
            let pieces = 1usize << level;
            let saved = history.clone();
            let mut ok = true;
            for piece in 1..=pieces {
                let s = match start {
                    Some(s0) => s0 + (target - s0) * piece as f64 / pieces as f64,
                    None => target,
                };
                let (guess, lambda0) = predict(&history, s);
                let mut src = ScalarSource {
                    kind: ScalarKind::Exp,
                    coeff: coeff.clone(),
                    scale: lambda0,
                };
                match newton_bordered(&lap, &mut src, guess, lambda0, s, opts) {
                    Ok((v, lambda, _, it)) if lambda.is_finite() && lambda > 0.0 => {
                        iterations += it;
                        history.push((s, v, lambda));
                        if history.len() > 2 {
                            history.remove(0);
                        }
                    }
                    Ok((_, lambda, _, _)) => {
                        last_err = Some(Error::InvalidParameter(format!("branch left λ > 0 (λ = {lambda})")));
                        ok = false;
                        break;
                    }
                    Err(err) => {
                        last_err = Some(err);
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                done = true;
                break;
            }
            history = saved;
            if start.is_none() {
                break;
            }
        }
        if !done {
            branch.truncated = true;
            branch.failure = last_err.map(|e| format!("s = {target}: {e}"));
            break;
        }
        let (s, v, lambda) = history.last().cloned().expect("converged state");
        let problem = Arc::new(ProblemSpec::Liouville { lambda, alpha, k: k.clone() });
        // Residual of the plain equation at the converged λ.
        let src = build_source(&problem, &grid)?;
        let mut sv = vec![0.0; v.len()];
        src.eval(&v, &mut sv, None);
        let res = lap.norm(&v, &lap.residual(&v, &sv), &sv);
        let sol = finish_solution(&lap, grid.clone(), problem, 0, v, res, opts.tol, iterations);
        branch.entries.push(BranchEntry {
            s,
            lambda_or_p: lambda,
            mass: mass(&sol)?,
            sup_norm: sol.sup_norm,
            residual: res,
        });
        branch.solutions.push(sol);
    }
    branch.fold = locate_fold(&branch.entries);
    Ok(branch)
}

fn henon_branch(
    family: BranchFamily,
    values: &[f64],
    grid: Arc<PolarGrid>,
    opts: &NewtonOptions,
) -> Result<ContinuationBranch> {
    let alpha = family.alpha();
    let k = family.field().clone();
    let lap = FvLaplacian::new(&grid, 1);
    let coeff = unit_coeff(&grid, &k, alpha);
    let mut tracker = HenonTracker::start(&grid, alpha, &k, values[0].min(1.5));
    let mut branch = ContinuationBranch {
        family,
        entries: Vec::new(),
        solutions: Vec::new(),
        fold: None,
        truncated: false,
        failure: None,
    };
    for &p in values {
        let step = tracker.advance(&lap, &coeff, p, opts).and_then(|_| {
            let problem = Arc::new(ProblemSpec::Henon { p, alpha, k: k.clone() });
            let src = build_source(&problem, &grid)?;
            let (v, res, iters) = newton(&lap, src.as_ref(), tracker.rescaled(), opts)?;
            let min = v.iter().fold(f64::INFINITY, |m, x| m.min(*x));
            if !(min > 0.0) {
                return Err(Error::PositivityLost(min));
            }
            Ok(finish_solution(&lap, grid.clone(), problem, 0, v, res, opts.tol, iters))
        });
        match step {
            Ok(sol) => {
                branch.entries.push(BranchEntry {
                    s: sol.center_value(),
                    lambda_or_p: p,
                    mass: mass(&sol)?,
                    sup_norm: sol.sup_norm,
                    residual: sol.residual,
                });
                branch.solutions.push(sol);
            }
            Err(err) => {
                branch.truncated = true;
                branch.failure = Some(format!("p = {p}: {err}"));
                break;
            }
        }
    }
    Ok(branch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::build_grid;
    use crate::disk::oracle::radial_oracle;

    #[test]
    fn fold_parabola_recovers_vertex() {
        let entries: Vec<BranchEntry> = [0.0, 1.0, 2.0, 3.0]
            .iter()
            .map(|&s: &f64| BranchEntry {
                s,
                lambda_or_p: 2.0 - (s - 1.3) * (s - 1.3),
                mass: 0.0,
                sup_norm: 0.0,
                residual: 0.0,
            })
            .collect();
        let f = locate_fold(&entries).unwrap();
        assert!(f.interior);
        assert!((f.s - 1.3).abs() < 1e-12 && (f.lambda - 2.0).abs() < 1e-12);
    }

    #[test]
    fn short_liouville_branch_follows_oracle() {
        let g = Arc::new(build_grid(64, 16, 0.0, 1.0).unwrap());
        let k = Arc::new(PotentialField::constant(&g, 1.0).unwrap());
        let b = continuation_branch(
            BranchFamily::Liouville { alpha: 0.0, k },
            [0.2, 2.0],
            10,
            g,
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(!b.truncated);
        for e in &b.entries {
            let o = radial_oracle(0.0, (0.5 * e.s).exp_m1()).unwrap();
            assert!((e.lambda_or_p - o.lambda).abs() < 5e-3 * o.lambda, "{e:?} vs {o:?}");
        }
        assert!(b.entries.windows(2).all(|w| w[1].mass > w[0].mass));
    }

    #[test]
    fn rejects_bad_ranges() {
        let g = Arc::new(build_grid(16, 16, 0.0, 1.0).unwrap());
        let k = Arc::new(PotentialField::constant(&g, 1.0).unwrap());
        let fam = BranchFamily::Liouville { alpha: 0.0, k };
        assert!(continuation_branch(fam.clone(), [1.0, 1.0], 3, g.clone(), &NewtonOptions::default()).is_err());
        assert!(continuation_branch(fam, [2.0, 1.0], 3, g, &NewtonOptions::default()).is_err());
    }
}
