//! Explicit mass bounds `ρ₀` and their ingredients.
//!
//! Certificates are exact statements about exact masses: `satisfied` uses no
//! tolerance. Discretization allowances belong to the caller.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conformal::PotentialField;
use crate::disk::grid::integrate_with;
use crate::disk::PolarGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Liouville,
    Henon,
    System,
    General,
}

/// Data of one potential entering a bracket `2(1+α) + sup|∇K̃| / inf K̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialIngredients {
    pub alpha: f64,
    pub inf: f64,
    pub sup_grad: f64,
    pub scan_resolution: (usize, usize),
    pub refinement_factor: usize,
}

impl PotentialIngredients {
    fn from_field(alpha: f64, k: &PotentialField) -> Result<Self> {
        if !(alpha > -1.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must exceed -1")));
        }
        let e = k.extrema;
        if !(e.inf > 0.0) {
            return Err(Error::NonPositivePotential { value: e.inf, x: f64::NAN, y: f64::NAN });
        }
        Ok(Self {
            alpha,
            inf: e.inf,
            sup_grad: e.sup_grad,
            scan_resolution: e.scan_resolution,
            refinement_factor: e.refinement_factor,
        })
    }

    fn bracket(&self, inflation: f64) -> f64 {
        2.0 * (1.0 + self.alpha) + inflation * self.sup_grad / (self.inf / inflation)
    }
}

/// Sampled constants of the structural conditions on `W̃` and `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionConstants {
    /// `max |∇W̃||y| / W̃`.
    pub c_w: f64,
    /// Fitted exponent and constant in `W̃ ≤ C_α |y|^{2α}`.
    pub alpha_fit: f64,
    pub c_alpha: f64,
    /// `max F / (1 + F′)` over the sampled range.
    pub c_f: f64,
    /// True when `C_F` is still growing at the end of the range.
    pub c_f_range_dependent: bool,
    /// Smallest `C` on the ladder 1, 2, 4, … with `F′(u) ≤ C e^{C u²}` on the range.
    pub gauss_c: f64,
    pub u_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ingredients {
    pub potentials: Vec<PotentialIngredients>,
    /// Hénon: sup-norm bound, flagged as measured rather than proven.
    pub c0: Option<f64>,
    pub c0_empirical: bool,
    pub p0: Option<f64>,
    /// System: smallest eigenvalue of `A⁻¹` and the maximal bracket.
    pub mu: Option<f64>,
    pub bracket: Option<f64>,
    pub n_components: usize,
    pub conditions: Option<ConditionConstants>,
    pub w_integral: Option<f64>,
    pub inflation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassCertificate {
    pub theorem: Theorem,
    pub ingredients: Ingredients,
    pub rho0: f64,
    pub derivation: String,
    pub observed_masses: Vec<f64>,
    pub satisfied: bool,
    /// `ρ₀ − max observed mass` (`ρ₀` when nothing was observed).
    pub slack: f64,
    /// Set when the constant collapses to zero (`C_F = 0`).
    pub degenerate: bool,
}

impl MassCertificate {
    fn new(theorem: Theorem, ingredients: Ingredients, rho0: f64, derivation: String) -> Self {
        Self {
            theorem,
            ingredients,
            rho0,
            derivation,
            observed_masses: Vec::new(),
            satisfied: true,
            slack: rho0,
            degenerate: false,
        }
    }

    /// Records observed masses and re-evaluates `satisfied` and `slack`.
    pub fn with_observed(mut self, masses: &[f64]) -> Self {
        self.observed_masses.extend_from_slice(masses);
        let max = self.observed_masses.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        self.satisfied = self.observed_masses.iter().all(|m| *m <= self.rho0);
        self.slack = if self.observed_masses.is_empty() { self.rho0 } else { self.rho0 - max };
        self
    }

    /// `mass ≤ ρ₀ (1 + allowance)`.
    pub fn admits(&self, mass: f64, allowance: f64) -> bool {
        mass <= self.rho0 * (1.0 + allowance)
    }

    /// Recomputes `ρ₀` with `inf K̃` divided and `sup|∇K̃|` multiplied by `factor`.
    pub fn inflated(&self, factor: f64) -> Result<Self> {
        if !(factor >= 1.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!("inflation factor {factor} must be >= 1")));
        }
        let mut ing = self.ingredients.clone();
        ing.inflation = factor;
        let rho0 = match self.theorem {
            Theorem::Liouville => 4.0 * PI * ing.potentials[0].bracket(factor),
            Theorem::Henon => {
                let c0 = ing.c0.expect("henon certificate carries C0");
                8.0 * PI * c0 * c0 * ing.potentials[0].bracket(factor)
            }
            Theorem::System => {
                let c = ing.potentials.iter().map(|p| p.bracket(factor)).fold(f64::NEG_INFINITY, f64::max);
                ing.bracket = Some(c);
                4.0 * PI * c * (ing.n_components as f64).sqrt() / ing.mu.expect("system certificate carries mu")
            }
            Theorem::General => self.rho0,
        };
        let observed = self.observed_masses.clone();
        let mut out = MassCertificate::new(self.theorem, ing, rho0, self.derivation.clone());
        out.degenerate = self.degenerate;
        Ok(out.with_observed(&observed))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn base_ingredients(potentials: Vec<PotentialIngredients>) -> Ingredients {
    let n = potentials.len();
    Ingredients {
        potentials,
        c0: None,
        c0_empirical: false,
        p0: None,
        mu: None,
        bracket: None,
        n_components: n,
        conditions: None,
        w_integral: None,
        inflation: 1.0,
    }
}

/// `ρ₀ = 4π (2(1+α) + sup|∇K̃| / inf K̃)`.
pub fn liouville_certificate(alpha: f64, k: &PotentialField) -> Result<MassCertificate> {
    let p = PotentialIngredients::from_field(alpha, k)?;
    let rho0 = 4.0 * PI * p.bracket(1.0);
    let derivation = format!(
        "Integrating the equation gives the flux identity m = -int_dD dv/dnu; the Pohozaev identity bounds \
         (1/2) int_dD (dv/dnu)^2 by m (2(1+alpha) + sup|grad K|/inf K) since |y|=1 on the circle and \
         y.grad K <= (sup|grad K|/inf K) K. Cauchy-Schwarz on the circle gives m^2/(4 pi) <= that bound, so \
         m <= 4 pi (2(1+alpha) + sup|grad K|/inf K) = 4 pi ({:.6}) = {rho0:.6}.",
        p.bracket(1.0)
    );
    Ok(MassCertificate::new(Theorem::Liouville, base_ingredients(vec![p]), rho0, derivation))
}

/// `ρ₀ = 8π C₀² (2(1+α) + sup|∇K̃| / inf K̃)` with a measured or supplied `C₀`.
pub fn henon_certificate(alpha: f64, k: &PotentialField, c0: f64, p0: f64) -> Result<MassCertificate> {
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::InvalidParameter(format!("C0 = {c0} must be positive")));
    }
    if !(p0 > 1.0) || !p0.is_finite() {
        return Err(Error::InvalidParameter(format!("p0 = {p0} must exceed 1")));
    }
    let p = PotentialIngredients::from_field(alpha, k)?;
    let rho0 = 8.0 * PI * c0 * c0 * p.bracket(1.0);
    let derivation = format!(
        "Same Pohozaev and Cauchy-Schwarz chain as the exponential case applied to G = |y|^(2 alpha) K v^(p+1)/(p+1), \
         using p/(p+1) <= 1 and the uniform bound sup v <= C0 for p >= p0 = {p0}. C0 = {c0:.6} is a measured \
         sup-norm over computed solutions, so the bound is conditional on it: \
         rho0 = 8 pi C0^2 ({:.6}) = {rho0:.6}.",
        p.bracket(1.0)
    );
    let mut ing = base_ingredients(vec![p]);
    ing.c0 = Some(c0);
    ing.c0_empirical = true;
    ing.p0 = Some(p0);
    Ok(MassCertificate::new(Theorem::Henon, ing, rho0, derivation))
}

/// `ρ₀ = 4π C √N / μ` with `C` the largest bracket and `μ = λ_min(A⁻¹)`.
pub fn system_certificate(a: &[Vec<f64>], alphas: &[f64], ks: &[&PotentialField]) -> Result<MassCertificate> {
    let n = a.len();
    if n == 0 || alphas.len() != n || ks.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("system dimensions are inconsistent".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if (0..n).any(|i| (0..n).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale)) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let inv = chol.inverse();
    let mu = inv.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if !(mu > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let potentials = alphas
        .iter()
        .zip(ks)
        .map(|(al, k)| PotentialIngredients::from_field(*al, k))
        .collect::<Result<Vec<_>>>()?;
    let c = potentials.iter().map(|p| p.bracket(1.0)).fold(f64::NEG_INFINITY, f64::max);
    let rho0 = 4.0 * PI * c * (n as f64).sqrt() / mu;
    let derivation = format!(
        "The system Pohozaev identity and the flux identities m_i = -int dv_i/dnu give \
         sum_ij a^ij m_i m_j / (4 pi) <= C sum_i m_i with C = max_i (2(1+alpha_i) + sup|grad K_i|/inf K_i) = {c:.6}. \
         With mu = lambda_min(A^-1) = {mu:.6}: (mu/(4 pi))|m|^2 <= C sqrt(N)|m|, hence every m_i <= |m| <= \
         4 pi C sqrt(N)/mu = {rho0:.6} (N = {n})."
    );
    let mut ing = base_ingredients(potentials);
    ing.mu = Some(mu);
    ing.bracket = Some(c);
    Ok(MassCertificate::new(Theorem::System, ing, rho0, derivation))
}

/// Largest root of `M²/(4π) = c M + c ∫W̃` with `c = C_F (2 + C_W)`.
pub fn general_certificate(w: &PotentialField, grid: &PolarGrid, constants: &ConditionConstants) -> Result<MassCertificate> {
    if !w.matches(grid) {
        return Err(Error::GridMismatch("weight sampled on a different grid".into()));
    }
    if !(constants.c_w >= 0.0 && constants.c_w.is_finite()) || !(constants.c_f >= 0.0 && constants.c_f.is_finite()) {
        return Err(Error::ConditionsViolated(format!(
            "constants C_W = {}, C_F = {} are not finite and nonnegative",
            constants.c_w, constants.c_f
        )));
    }
    let w_integral = integrate_with(grid, w.interior(), &grid.area_moments());
    let c = constants.c_f * (2.0 + constants.c_w);
    let (rho0, degenerate) = if c == 0.0 {
        (0.0, true)
    } else {
        (2.0 * PI * c * (1.0 + (1.0 + w_integral / (PI * c)).sqrt()), false)
    };
    let derivation = format!(
        "The Pohozaev identity with G = W F(v), |grad W||y| <= C_W W and F <= C_F (1 + F') bounds \
         (1/2) int (dv/dnu)^2 by C_F (2 + C_W)(M + int W); with Cauchy-Schwarz M^2/(4 pi) <= c M + c int W, \
         c = {c:.6}, int W = {w_integral:.6}. The largest root is rho0 = 2 pi c (1 + sqrt(1 + int W/(pi c))) = {rho0:.6}."
    );
    let mut ing = base_ingredients(Vec::new());
    ing.conditions = Some(*constants);
    ing.w_integral = Some(w_integral);
    let mut cert = MassCertificate::new(Theorem::General, ing, rho0, derivation);
    cert.degenerate = degenerate;
    Ok(cert)
}

/// Sampled estimates of the constants in `|∇W̃||y| ≤ C_W W̃`, `W̃ ≤ C_α|y|^{2α}`,
/// `F ≤ C_F(1 + F′)` and `F′(u) ≤ C e^{C u²}` on `u ∈ u_range`.
pub fn validate_general_conditions(
    w: &PotentialField,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    u_range: [f64; 2],
) -> Result<ConditionConstants> {
    let [u0, u1] = u_range;
    if !(u0 >= 0.0) || !(u1 > u0) || !u1.is_finite() {
        return Err(Error::InvalidParameter(format!("u range {u_range:?} must be [0, u_max] with u_max > 0")));
    }
    if let Some(v) = w.values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::ConditionsViolated(format!("weight takes the value {v} < 0")));
    }
    let c_w = w.max_log_radial_gradient();
    if !c_w.is_finite() {
        return Err(Error::ConditionsViolated("|grad W||y|/W is unbounded on the sample".into()));
    }

    // Exponent from the innermost quarter of rings, then the smallest admissible constant.
    let n_inner = (w.radii.len() / 4).max(2);
    let ring_mean = |i: usize| w.values[i * w.n_theta..(i + 1) * w.n_theta].iter().sum::<f64>() / w.n_theta as f64;
    let pts: Vec<(f64, f64)> = (0..n_inner)
        .filter(|&i| ring_mean(i) > 0.0)
        .map(|i| (w.radii[i].ln(), ring_mean(i).ln()))
        .collect();
    let alpha_fit = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (0.5 * sxy / sxx).max(-0.99)
    } else {
        0.0
    };
    let alpha_fit = if alpha_fit.abs() < 1e-8 { 0.0 } else { alpha_fit };
    let mut c_alpha = 0.0f64;
    for (k, v) in w.values.iter().enumerate() {
        let r = w.radii[k / w.n_theta];
        c_alpha = c_alpha.max(v / r.powf(2.0 * alpha_fit));
    }

    const SAMPLES: usize = 4000;
    let us: Vec<f64> = (0..=SAMPLES).map(|i| u0 + (u1 - u0) * i as f64 / SAMPLES as f64).collect();
    let mut c_f = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, &u) in us.iter().enumerate() {
        let r = f(u) / (1.0 + df(u));
        if !r.is_finite() || !df(u).is_finite() {
            return Err(Error::ConditionsViolated(format!("F/(1+F') is not finite at u = {u}")));
        }
        if r > c_f {
            c_f = r;
            arg = i;
        }
    }
    let c_f = c_f.max(0.0);
    let half = {
        let u = 0.5 * (u0 + u1);
        f(u) / (1.0 + df(u))
    };
    let c_f_range_dependent = arg == SAMPLES && c_f > 1.05 * half.max(0.0);

    let mut gauss_c = None;
    let mut c = 1.0;
    while c <= 1024.0 {
        if us.iter().all(|&u| df(u) <= c * (c * u * u).exp()) {
            gauss_c = Some(c);
            break;
        }
        c *= 2.0;
    }
    let gauss_c = gauss_c.ok_or_else(|| Error::ConditionsViolated("F' grows faster than C exp(C u^2) on the range".into()))?;

    Ok(ConditionConstants {
        c_w,
        alpha_fit,
        c_alpha,
        c_f,
        c_f_range_dependent,
        gauss_c,
        u_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::FieldSign;
    use crate::disk::build_grid;
    use proptest::prelude::*;

    fn grid() -> PolarGrid {
        build_grid(32, 32, 0.0, 1.0).unwrap()
    }

    #[test]
    fn liouville_constants() {
        let g = grid();
        let one = PotentialField::constant(&g, 1.0).unwrap();
        assert!((liouville_certificate(0.0, &one).unwrap().rho0 - 8.0 * PI).abs() < 1e-12);
        assert!((liouville_certificate(0.5, &one).unwrap().rho0 - 12.0 * PI).abs() < 1e-12);
        let affine = PotentialField::from_fn(&g, FieldSign::Positive, |r, t| 1.0 + 0.5 * r * t.cos()).unwrap();
        let c = liouville_certificate(0.0, &affine).unwrap();
        assert!((c.rho0 - 12.0 * PI).abs() < 1e-6 * 12.0 * PI, "{}", c.rho0);
    }

    #[test]
    fn henon_constants() {
        let g = grid();
        let one = PotentialField::constant(&g, 1.0).unwrap();
        assert!((henon_certificate(0.0, &one, 2.0, 2.0).unwrap().rho0 - 64.0 * PI).abs() < 1e-12);
        let c = henon_certificate(0.5, &one, 1.0, 2.0).unwrap();
        assert!((c.rho0 - 24.0 * PI).abs() < 1e-12);
        assert!(c.ingredients.c0_empirical);
        assert!(henon_certificate(0.0, &one, 0.0, 2.0).is_err());
    }

    #[test]
    fn system_constants() {
        let g = grid();
        let one = PotentialField::constant(&g, 1.0).unwrap();
        let c = system_certificate(&[vec![1.0]], &[0.0], &[&one]).unwrap();
        assert!((c.rho0 - 8.0 * PI).abs() < 1e-12);
        let toda = vec![vec![2.0, -1.0], vec![-1.0, 2.0]];
        let c = system_certificate(&toda, &[0.0, 0.0], &[&one, &one]).unwrap();
        // A⁻¹ = (1/3)[[2,1],[1,2]] has eigenvalues 1/3 and 1.
        let inv = DMatrix::<f64>::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        let mu: f64 = inv.symmetric_eigenvalues().min();
        assert!((c.ingredients.mu.unwrap() - mu).abs() < 1e-14);
        assert!((c.rho0 - 24.0 * 2f64.sqrt() * PI).abs() < 1e-10);
        assert!((c.rho0 - 106.63).abs() < 0.01);
        assert!(matches!(
            system_certificate(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[0.0, 0.0], &[&one, &one]),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn general_constants() {
        let g = build_grid(64, 32, 0.0, 1.0).unwrap();
        let one = PotentialField::constant(&g, 1.0).unwrap();
        let cc = ConditionConstants {
            c_w: 0.0,
            alpha_fit: 0.0,
            c_alpha: 1.0,
            c_f: 1.0,
            c_f_range_dependent: false,
            gauss_c: 1.0,
            u_range: [0.0, 10.0],
        };
        let c = general_certificate(&one, &g, &cc).unwrap();
        // Largest root of M²/(4π) − 2M − 2π by bisection.
        let q = |m: f64| m * m / (4.0 * PI) - 2.0 * m - 2.0 * PI;
        let (mut lo, mut hi) = (1.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((c.rho0 - lo).abs() < 1e-9, "{} vs {lo}", c.rho0);
        assert!((c.rho0 - 27.957).abs() < 1e-3);
        let zero = ConditionConstants { c_f: 0.0, ..cc };
        let d = general_certificate(&one, &g, &zero).unwrap();
        assert!(d.degenerate && d.rho0 == 0.0);
    }

    #[test]
    fn condition_estimates() {
        let g = grid();
        let one = PotentialField::constant(&g, 1.0).unwrap();
        let cc = validate_general_conditions(&one, |u| u.exp_m1(), |u| u.exp(), [0.0, 10.0]).unwrap();
        assert_eq!(cc.c_w, 0.0);
        assert!((cc.c_f - 1.0).abs() < 1e-3 && cc.c_f < 1.0);
        assert!(!cc.c_f_range_dependent);
        let radial = PotentialField::from_fn(&g, FieldSign::Nonnegative, |r, _| r).unwrap();
        let cc = validate_general_conditions(&radial, |u| u.exp_m1(), |u| u.exp(), [0.0, 10.0]).unwrap();
        assert!((cc.c_w - 1.0).abs() < 1e-9, "{}", cc.c_w);
        assert!((cc.alpha_fit - 0.5).abs() < 1e-9);
        let cc = validate_general_conditions(&one, |u| u, |_| 1.0, [0.0, 8.0]).unwrap();
        assert!((cc.c_f - 4.0).abs() < 1e-12);
        assert!(cc.c_f_range_dependent);
        let p = 1.5;
        let cc = validate_general_conditions(
            &one,
            |u: f64| u.powf(p).exp_m1() / p,
            |u: f64| u.powf(p - 1.0) * u.powf(p).exp(),
            [0.0, 10.0],
        )
        .unwrap();
        assert!(cc.c_f.is_finite() && cc.c_f > 0.0 && !cc.c_f_range_dependent);
        assert!(validate_general_conditions(&one, |u| u, |u| (u * u * u).exp(), [0.0, 10.0]).is_err());
    }

    #[test]
    fn observed_masses_and_inflation() {
        let g = grid();
        let one = PotentialField::constant(&g, 1.0).unwrap();
        let c = liouville_certificate(0.0, &one).unwrap().with_observed(&[4.0 * PI, 20.0]);
        assert!(c.satisfied);
        assert!((c.slack - (8.0 * PI - 20.0)).abs() < 1e-12);
        let c = c.with_observed(&[26.0]);
        assert!(!c.satisfied && c.admits(25.14, 1e-3));
        let affine = PotentialField::from_fn(&g, FieldSign::Positive, |r, t| 1.0 + 0.5 * r * t.cos()).unwrap();
        let base = liouville_certificate(0.0, &affine).unwrap();
        assert!(base.inflated(1.1).unwrap().rho0 > base.rho0);
    }

    proptest! {
        #[test]
        fn liouville_monotone_and_scale_invariant(a1 in -0.8f64..5.0, da in 0.0f64..2.0, slope in 0.0f64..0.5, scale in 0.1f64..10.0) {
            let g = build_grid(16, 16, 0.0, 1.0).unwrap();
            let k = PotentialField::from_fn(&g, FieldSign::Positive, |r, t| 1.0 + slope * r * t.sin()).unwrap();
            let ks = PotentialField::from_fn(&g, FieldSign::Positive, |r, t| scale * (1.0 + slope * r * t.sin())).unwrap();
            let c1 = liouville_certificate(a1, &k).unwrap().rho0;
            let c2 = liouville_certificate(a1 + da, &k).unwrap().rho0;
            let c3 = liouville_certificate(a1, &ks).unwrap().rho0;
            prop_assert!(c2 >= c1);
            prop_assert!((c3 - c1).abs() <= 1e-12 * c1);
        }
    }
}
