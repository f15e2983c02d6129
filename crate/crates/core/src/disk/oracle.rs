//! Explicit radial Liouville solutions on the unit disk with `K̃ ≡ 1`.

use std::f64::consts::PI;

use serde::Serialize;

use super::grid::PolarGrid;
use crate::error::{Error, Result};

/// The family `v_b(r) = 2 log((1+b)/(1 + b r^{2(1+α)}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialOracle {
    pub alpha: f64,
    pub b: f64,
    pub lambda: f64,
    pub mass: f64,
    pub sup_norm: f64,
}

pub fn radial_oracle(alpha: f64, b: f64) -> Result<RadialOracle> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must exceed -1")));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("b = {b} must be positive")));
    }
    let a1 = 1.0 + alpha;
    Ok(RadialOracle {
        alpha,
        b,
        lambda: 8.0 * a1 * a1 * b / ((1.0 + b) * (1.0 + b)),
        mass: 8.0 * PI * a1 * b / (1.0 + b),
        sup_norm: 2.0 * (1.0 + b).ln(),
    })
}

impl RadialOracle {
    /// Member of the family with centre value `s = v_b(0)`.
    pub fn from_center(alpha: f64, s: f64) -> Result<Self> {
        radial_oracle(alpha, (0.5 * s).exp_m1())
    }

    pub fn value(&self, r: f64) -> f64 {
        2.0 * ((1.0 + self.b) / (1.0 + self.b * r.powf(2.0 * (1.0 + self.alpha)))).ln()
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let e = 2.0 * (1.0 + self.alpha);
        let q = self.b * r.powf(e);
        -2.0 * e * q / (r * (1.0 + q))
    }

    /// Node values on a grid, usable as a Newton warm start.
    pub fn sample(&self, grid: &PolarGrid) -> Vec<f64> {
        grid.sample(|r, _| self.value(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::build_grid;

    /// Residual of `−v'' − v'/r − λ r^{2α} e^v` by centred differences.
    fn substitution_residual(o: &RadialOracle, h: f64) -> f64 {
        let mut worst = 0.0f64;
        let mut r = 0.05;
        while r < 0.99 {
            let d2 = (o.value(r + h) - 2.0 * o.value(r) + o.value(r - h)) / (h * h);
            let d1 = (o.value(r + h) - o.value(r - h)) / (2.0 * h);
            let res = -d2 - d1 / r - o.lambda * r.powf(2.0 * o.alpha) * o.value(r).exp();
            worst = worst.max(res.abs());
            r += 0.01;
        }
        worst
    }

    #[test]
    fn family_solves_the_equation() {
        for (alpha, b) in [(0.0, 1.0), (0.5, 1.0), (1.0, 3.0), (-0.5, 0.4)] {
            let o = radial_oracle(alpha, b).unwrap();
            let e1 = substitution_residual(&o, 1e-3);
            let e2 = substitution_residual(&o, 5e-4);
            assert!(e2 < 1e-4, "alpha {alpha}: residual {e2}");
            assert!(e1 / e2 > 3.5, "alpha {alpha}: fd residual is not O(h^2)");
            assert!(o.value(1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_matches_quadrature_and_flux() {
        for (alpha, b) in [(0.0, 1.0), (0.5, 1.0), (1.0, 7.0)] {
            let o = radial_oracle(alpha, b).unwrap();
            let n = 200_000;
            let h = 1.0 / n as f64;
            let q: f64 = (0..n)
                .map(|i| {
                    let r = (i as f64 + 0.5) * h;
                    r.powf(2.0 * alpha + 1.0) * o.value(r).exp()
                })
                .sum::<f64>()
                * h;
            let mass = 2.0 * PI * o.lambda * q;
            assert!((mass - o.mass).abs() < 1e-6 * o.mass, "{mass} vs {}", o.mass);
            assert!((-2.0 * PI * o.derivative(1.0) - o.mass).abs() < 1e-12 * o.mass);
        }
    }

    #[test]
    fn documented_values() {
        let o = radial_oracle(0.0, 1.0).unwrap();
        assert_eq!(o.lambda, 2.0);
        assert!((o.mass - 4.0 * PI).abs() < 1e-14);
        assert!((o.sup_norm - 2.0 * 2f64.ln()).abs() < 1e-15);
        let o = radial_oracle(0.5, 1.0).unwrap();
        assert!((o.lambda - 4.5).abs() < 1e-14);
        assert!((o.mass - 6.0 * PI).abs() < 1e-13);
        let big = radial_oracle(0.0, 1e12).unwrap();
        assert!((big.mass - 8.0 * PI).abs() < 1e-9);
        assert!(radial_oracle(-1.0, 1.0).is_err());
        assert!(radial_oracle(0.0, 0.0).is_err());
    }

    #[test]
    fn center_parametrization() {
        let o = RadialOracle::from_center(0.0, 2.0 * 2f64.ln()).unwrap();
        assert!((o.b - 1.0).abs() < 1e-14);
        let g = build_grid(16, 16, 0.0, 1.0).unwrap();
        assert_eq!(o.sample(&g).len(), 256);
    }
}
