use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conformal::PotentialField;
use crate::error::{Error, Result};

/// Default admissible range for singular exponents; values outside need
/// `allow_extreme_alpha`.
pub const ALPHA_RANGE: (f64, f64) = (-0.9, 10.0);

/// Antiderivative `F` of the nonlinearity in `-Δv = W̃ F′(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    /// `F(u) = λ(e^u − 1)`.
    Exponential { lambda: f64 },
    /// `F(u) = λ(e^{u^p} − 1)/p` for `u ≥ 0`, `F = 0` below; `F′ = λ u^{p−1} e^{u^p}`.
    ExpPower { lambda: f64, p: f64 },
    /// `F(u) = λu`.
    Linear { lambda: f64 },
}

impl Nonlinearity {
    pub fn f(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Exponential { lambda } => lambda * u.exp_m1(),
            Nonlinearity::ExpPower { lambda, p } => {
                if u <= 0.0 {
                    0.0
                } else {
                    lambda * u.powf(p).exp_m1() / p
                }
            }
            Nonlinearity::Linear { lambda } => lambda * u,
        }
    }

    pub fn df(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Exponential { lambda } => lambda * u.exp(),
            Nonlinearity::ExpPower { lambda, p } => {
                if u <= 0.0 {
                    0.0
                } else {
                    lambda * u.powf(p - 1.0) * u.powf(p).exp()
                }
            }
            Nonlinearity::Linear { lambda } => lambda,
        }
    }

    pub fn d2f(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Exponential { lambda } => lambda * u.exp(),
            Nonlinearity::ExpPower { lambda, p } => {
                if u <= 0.0 {
                    0.0
                } else {
                    lambda * u.powf(p).exp() * ((p - 1.0) * u.powf(p - 2.0) + p * u.powf(2.0 * p - 2.0))
                }
            }
            Nonlinearity::Linear { .. } => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lambda, p) = match *self {
            Nonlinearity::Exponential { lambda } | Nonlinearity::Linear { lambda } => (lambda, 2.0),
            Nonlinearity::ExpPower { lambda, p } => (lambda, p),
        };
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("nonlinearity lambda = {lambda} must be >= 0")));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("nonlinearity exponent p = {p} must be >= 1")));
        }
        Ok(())
    }
}

/// Transported problem on the unit disk.
#[derive(Debug, Clone)]
pub enum ProblemSpec {
    /// `-Δv = λ|y|^{2α} K̃ e^v`.
    Liouville {
        lambda: f64,
        alpha: f64,
        k: Arc<PotentialField>,
    },
    /// `-Δv = |y|^{2α} K̃ v^p`, `v > 0`.
    Henon {
        p: f64,
        alpha: f64,
        k: Arc<PotentialField>,
    },
    /// `-Δv_i = Σ_j a_ij λ_j |y|^{2α_j} K̃_j e^{v_j}`.
    System {
        a: Vec<Vec<f64>>,
        lambdas: Vec<f64>,
        alphas: Vec<f64>,
        ks: Vec<Arc<PotentialField>>,
    },
    /// `-Δv = W̃ F′(v)`.
    General {
        w: Arc<PotentialField>,
        f: Nonlinearity,
    },
}

fn check_alpha(alpha: f64, allow_extreme: bool) -> Result<()> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::SingularityMismatch(alpha));
    }
    if !(alpha > ALPHA_RANGE.0 && alpha <= ALPHA_RANGE.1) {
        if allow_extreme {
            eprintln!(
                "warning: alpha = {alpha} outside the default range ({}, {}]; quadrature accuracy degrades",
                ALPHA_RANGE.0, ALPHA_RANGE.1
            );
        } else {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} outside the default range ({}, {}]",
                ALPHA_RANGE.0, ALPHA_RANGE.1
            )));
        }
    }
    Ok(())
}

impl ProblemSpec {
    pub fn n_components(&self) -> usize {
        match self {
            ProblemSpec::System { lambdas, .. } => lambdas.len(),
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Liouville { .. } => "liouville",
            ProblemSpec::Henon { .. } => "henon",
            ProblemSpec::System { .. } => "system",
            ProblemSpec::General { .. } => "general",
        }
    }

    /// Checks parameter ranges. Zero `λ` is admitted (trivial solution `v ≡ 0`).
    pub fn validate(&self, allow_extreme_alpha: bool) -> Result<()> {
        match self {
            ProblemSpec::Liouville { lambda, alpha, .. } => {
                if !(*lambda >= 0.0) || !lambda.is_finite() {
                    return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 0")));
                }
                check_alpha(*alpha, allow_extreme_alpha)
            }
            ProblemSpec::Henon { p, alpha, .. } => {
                if !(*p > 1.0) || !p.is_finite() {
                    return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
                }
                check_alpha(*alpha, allow_extreme_alpha)
            }
            ProblemSpec::System { a, lambdas, alphas, ks } => {
                let n = lambdas.len();
                if n == 0 || alphas.len() != n || ks.len() != n || a.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidParameter("system dimensions are inconsistent".into()));
                }
                for (l, al) in lambdas.iter().zip(alphas) {
                    if !(*l >= 0.0) || !l.is_finite() {
                        return Err(Error::InvalidParameter(format!("lambda = {l} must be >= 0")));
                    }
                    check_alpha(*al, allow_extreme_alpha)?;
                }
                let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
                let det = m.clone().lu().determinant();
                let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).powi(n as i32);
                if !(det.abs() > 1e-12 * scale) {
                    return Err(Error::SingularMatrix);
                }
                Ok(())
            }
            ProblemSpec::General { f, .. } => f.validate(),
        }
    }

    pub fn fields(&self) -> Vec<&PotentialField> {
        match self {
            ProblemSpec::Liouville { k, .. } | ProblemSpec::Henon { k, .. } => vec![k.as_ref()],
            ProblemSpec::System { ks, .. } => ks.iter().map(|k| k.as_ref()).collect(),
            ProblemSpec::General { w, .. } => vec![w.as_ref()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonlinearity_derivatives_match_finite_differences() {
        let cases = [
            Nonlinearity::Exponential { lambda: 0.7 },
            Nonlinearity::ExpPower { lambda: 1.0, p: 1.5 },
            Nonlinearity::Linear { lambda: 2.0 },
        ];
        for f in cases {
            for &u in &[0.3, 0.9, 1.7] {
                let h = 1e-6;
                let d1 = (f.f(u + h) - f.f(u - h)) / (2.0 * h);
                let d2 = (f.df(u + h) - f.df(u - h)) / (2.0 * h);
                assert!((d1 - f.df(u)).abs() < 1e-6 * (1.0 + d1.abs()), "{f:?} F' at {u}");
                assert!((d2 - f.d2f(u)).abs() < 1e-5 * (1.0 + d2.abs()), "{f:?} F'' at {u}");
            }
        }
        let f = Nonlinearity::ExpPower { lambda: 1.0, p: 1.5 };
        assert_eq!(f.f(-1.0), 0.0);
        assert_eq!(f.df(0.0), 0.0);
    }
}
