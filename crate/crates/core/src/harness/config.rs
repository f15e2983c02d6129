//! Experiment configuration files (strict JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::disk::Nonlinearity;
use crate::error::{Error, Result};
use crate::geometry::DomainKind;

/// Potential or weight on the physical domain, given analytically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticField {
    Constant {
        value: f64,
    },
    /// `c0 + cx x₁ + cy x₂`.
    Affine {
        c0: f64,
        cx: f64,
        cy: f64,
    },
    /// `base + amplitude · exp(−|x − center|² / (2σ²))`.
    GaussianBump {
        center: [f64; 2],
        sigma: f64,
        amplitude: f64,
        #[serde(default = "one")]
        base: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl AnalyticField {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            AnalyticField::Constant { value } => value,
            AnalyticField::Affine { c0, cx, cy } => c0 + cx * x[0] + cy * x[1],
            AnalyticField::GaussianBump {
                center,
                sigma,
                amplitude,
                base,
            } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                base + amplitude * (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AnalyticField::Constant { value } => value.is_finite(),
            AnalyticField::Affine { c0, cx, cy } => c0.is_finite() && cx.is_finite() && cy.is_finite(),
            AnalyticField::GaussianBump {
                center,
                sigma,
                amplitude,
                base,
            } => center.iter().all(|c| c.is_finite()) && sigma > 0.0 && amplitude.is_finite() && base.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid field parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Liouville {
        lambda: f64,
        alpha: f64,
        k: AnalyticField,
    },
    Henon {
        p: f64,
        alpha: f64,
        k: AnalyticField,
    },
    System {
        a: Vec<Vec<f64>>,
        lambdas: Vec<f64>,
        alphas: Vec<f64>,
        ks: Vec<AnalyticField>,
    },
    General {
        w: AnalyticField,
        f: Nonlinearity,
    },
}

impl ProblemConfig {
    /// Exponent used to lay out the grid moments.
    pub fn grid_alpha(&self) -> f64 {
        match self {
            ProblemConfig::Liouville { alpha, .. } | ProblemConfig::Henon { alpha, .. } => *alpha,
            ProblemConfig::System { alphas, .. } => alphas.first().copied().unwrap_or(0.0),
            ProblemConfig::General { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(default = "one")]
    pub grading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Liouville centre value, `λ` solved for.
    S,
    /// Liouville `λ`, each solve warm-started from the previous one.
    Lambda,
    /// Hénon exponent.
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    #[serde(default)]
    pub steps: Option<usize>,
    /// Explicit values; overrides `range` and `steps`.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl SweepConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        let vals = match (&self.values, self.range, self.steps) {
            (Some(v), _, _) => v.clone(),
            (None, Some([a, b]), Some(n)) if n >= 2 => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            (None, Some([a, _]), Some(1)) => vec![a],
            _ => return Err(Error::Config("sweep needs `values` or `range` with `steps`".into())),
        };
        if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite and non-empty".into()));
        }
        if vals.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("sweep values must be strictly increasing (non-degenerate range)".into()));
        }
        Ok(vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_newton_tol")]
    pub newton: f64,
    /// Relative allowance in the pass test `mass ≤ ρ₀(1 + allowance)`.
    #[serde(default = "default_allowance")]
    pub mass_allowance: f64,
}

fn default_newton_tol() -> f64 {
    1e-10
}

fn default_allowance() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton: default_newton_tol(),
            mass_allowance: default_allowance(),
        }
    }
}

fn default_map_nodes() -> usize {
    512
}

fn default_validation_points() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: DomainKind,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_map_nodes")]
    pub map_nodes: usize,
    /// Compute the certificate without solving.
    #[serde(default)]
    pub certify_only: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for the sampled map validation points.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_validation_points")]
    pub validation_points: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.tolerances;
        if !(t.newton > 0.0) || !t.newton.is_finite() {
            return Err(Error::Config(format!("newton tolerance {} must be positive", t.newton)));
        }
        if !(t.mass_allowance >= 0.0) || !t.mass_allowance.is_finite() {
            return Err(Error::Config(format!("mass allowance {} must be nonnegative", t.mass_allowance)));
        }
        if self.grid.n_r < 16 || self.grid.n_theta < 16 || !(self.grid.grading >= 1.0) {
            return Err(Error::Config(format!("grid {:?} needs n_r, n_theta >= 16 and grading >= 1", self.grid)));
        }
        if self.map_nodes < 64 || !self.map_nodes.is_multiple_of(2) {
            return Err(Error::Config(format!("map_nodes = {} must be even and >= 64", self.map_nodes)));
        }
        match &self.problem {
            ProblemConfig::Liouville { k, .. } | ProblemConfig::Henon { k, .. } => k.validate()?,
            ProblemConfig::System { a, lambdas, alphas, ks } => {
                let n = lambdas.len();
                if n == 0 || a.len() != n || alphas.len() != n || ks.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("system sizes are inconsistent".into()));
                }
                for k in ks {
                    k.validate()?;
                }
            }
            ProblemConfig::General { w, .. } => w.validate()?,
        }
        if let Some(sweep) = &self.sweep {
            sweep.values()?;
            let ok = matches!(
                (&self.problem, sweep.parameter),
                (ProblemConfig::Liouville { .. }, SweepParameter::S)
                    | (ProblemConfig::Liouville { .. }, SweepParameter::Lambda)
                    | (ProblemConfig::Henon { .. }, SweepParameter::P)
            );
            if !ok {
                return Err(Error::Config(format!(
                    "sweep over {:?} is not available for this problem",
                    sweep.parameter
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "name": "demo",
        "domain": {"kind": "ellipse", "params": {"a": 1.5, "b": 1.0}},
        "problem": {"kind": "liouville", "lambda": 0.5, "alpha": 0.0,
                    "k": {"kind": "affine", "c0": 1.0, "cx": 0.3, "cy": 0.1}},
        "grid": {"n_r": 64, "n_theta": 32},
        "sweep": {"parameter": "s", "range": [0.2, 2.0], "steps": 5}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.map_nodes, 512);
        assert_eq!(cfg.sweep.as_ref().unwrap().values().unwrap().len(), 5);
        let again = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let typo = SAMPLE.replace("\"grid\"", "\"gird\"");
        assert!(ExperimentConfig::from_json(&typo).is_err());
        let extra = SAMPLE.replace("\"cy\": 0.1", "\"cy\": 0.1, \"cz\": 0.0");
        assert!(ExperimentConfig::from_json(&extra).is_err());
        let neg = SAMPLE.replace("\"steps\": 5}", "\"steps\": 5}, \"tolerances\": {\"newton\": -1e-8}");
        assert!(matches!(ExperimentConfig::from_json(&neg), Err(Error::Config(_))));
        let flat = SAMPLE.replace("[0.2, 2.0]", "[2.0, 2.0]");
        assert!(ExperimentConfig::from_json(&flat).is_err());
    }

    #[test]
    fn field_values() {
        let g = AnalyticField::GaussianBump {
            center: [0.0, 0.0],
            sigma: 1.0,
            amplitude: 2.0,
            base: 1.0,
        };
        assert_eq!(g.eval([0.0, 0.0]), 3.0);
        let a = AnalyticField::Affine { c0: 1.0, cx: 0.3, cy: 0.1 };
        assert!((a.eval([1.0, -1.0]) - 1.2).abs() < 1e-15);
    }
}
