//! Scalar fields on the disk sampled at the solver grid plus the boundary ring.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::map::ConformalMap;
use crate::disk::grid::PolarGrid;
use crate::error::{Error, Result};
use crate::spline::{NaturalSpline, PeriodicSpline};

/// Sign requirement on the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSign {
    /// `K̃`-type potentials.
    Positive,
    /// `W̃`-type weights.
    Nonnegative,
}

/// Scanned extrema of a field and of its gradient norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldExtrema {
    pub inf: f64,
    pub sup: f64,
    pub sup_grad: f64,
    /// `(n_r + 1, n_θ)` rings/angles of the scan before refinement.
    pub scan_resolution: (usize, usize),
    pub refinement_factor: usize,
}

/// Samples of a scalar field at the cell centres of a [`PolarGrid`] and on the
/// boundary ring `r = 1`, with a tensor-product cubic spline interpolant
/// (natural in `r`, periodic in `θ`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialField {
    /// Cell-centre radii followed by `1.0`.
    pub radii: Vec<f64>,
    pub n_theta: usize,
    /// Row-major `(radii.len(), n_theta)` samples.
    pub values: Vec<f64>,
    pub sign: FieldSign,
    pub extrema: FieldExtrema,
}

impl PotentialField {
    /// Builds a field from samples on `grid` (interior nodes, row-major) and the
    /// boundary ring.
    pub fn from_samples(grid: &PolarGrid, interior: Vec<f64>, boundary: Vec<f64>, sign: FieldSign) -> Result<Self> {
        if interior.len() != grid.n_cells() || boundary.len() != grid.n_theta {
            return Err(Error::GridMismatch("field sample count does not match grid".into()));
        }
        let mut radii = grid.radii.clone();
        radii.push(1.0);
        let mut values = interior;
        values.extend(boundary);
        for (k, &v) in values.iter().enumerate() {
            let bad = !v.is_finite()
                || match sign {
                    FieldSign::Positive => v <= 0.0,
                    FieldSign::Nonnegative => v < 0.0,
                };
            if bad {
                let i = k / grid.n_theta;
                let th = grid.theta(k % grid.n_theta);
                let r = radii[i];
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue(k));
                }
                return Err(Error::NonPositivePotential {
                    value: v,
                    x: r * th.cos(),
                    y: r * th.sin(),
                });
            }
        }
        let mut field = Self {
            radii,
            n_theta: grid.n_theta,
            values,
            sign,
            extrema: FieldExtrema {
                inf: 0.0,
                sup: 0.0,
                sup_grad: 0.0,
                scan_resolution: (grid.n_r + 1, grid.n_theta),
                refinement_factor: 3,
            },
        };
        field.extrema = field.scan_extrema();
        Ok(field)
    }

    /// Samples an analytic function of `(r, θ)` on the grid and boundary ring.
    pub fn from_fn(grid: &PolarGrid, sign: FieldSign, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let interior = grid.sample(&f);
        let boundary = (0..grid.n_theta).map(|j| f(1.0, grid.theta(j))).collect();
        Self::from_samples(grid, interior, boundary, sign)
    }

    pub fn constant(grid: &PolarGrid, value: f64) -> Result<Self> {
        Self::from_fn(grid, FieldSign::Positive, |_, _| value)
    }

    pub fn n_rings(&self) -> usize {
        self.radii.len()
    }

    pub fn at(&self, ring: usize, j: usize) -> f64 {
        self.values[ring * self.n_theta + j]
    }

    /// Samples at the interior nodes only.
    pub fn interior(&self) -> &[f64] {
        &self.values[..(self.n_rings() - 1) * self.n_theta]
    }

    pub fn boundary(&self) -> &[f64] {
        &self.values[(self.n_rings() - 1) * self.n_theta..]
    }

    pub fn matches(&self, grid: &PolarGrid) -> bool {
        self.n_theta == grid.n_theta
            && self.radii.len() == grid.n_r + 1
            && self.radii[..grid.n_r] == grid.radii[..]
    }

    fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    fn row(&self, ring: usize) -> &[f64] {
        &self.values[ring * self.n_theta..(ring + 1) * self.n_theta]
    }

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rings()).map(|i| self.at(i, j)).collect()
    }

    /// `(value, ∂_r, ∂_θ)` of the spline interpolant at `(r, θ)`.
    pub fn eval(&self, r: f64, theta: f64) -> (f64, f64, f64) {
        let mut vals = Vec::with_capacity(self.n_rings());
        let mut dths = Vec::with_capacity(self.n_rings());
        for i in 0..self.n_rings() {
            let (v, d) = PeriodicSpline::new(self.row(i)).eval(theta);
            vals.push(v);
            dths.push(d);
        }
        let (v, dr) = NaturalSpline::new(&self.radii, &vals).eval(r);
        let (dth, _) = NaturalSpline::new(&self.radii, &dths).eval(r);
        (v, dr, dth)
    }

    /// `∂_r` of the interpolant at every interior node (row-major).
    pub fn radial_derivative_at_nodes(&self) -> Vec<f64> {
        let nr = self.n_rings() - 1;
        let mut out = vec![0.0; nr * self.n_theta];
        for j in 0..self.n_theta {
            let s = NaturalSpline::new(&self.radii, &self.column(j));
            for i in 0..nr {
                out[i * self.n_theta + j] = s.knot_derivative(i);
            }
        }
        out
    }

    /// `(∂_r, ∂_θ)` at every node including the boundary ring.
    fn gradient_at_all_nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.values.len();
        let mut dr = vec![0.0; n];
        let mut dth = vec![0.0; n];
        for j in 0..self.n_theta {
            let s = NaturalSpline::new(&self.radii, &self.column(j));
            for i in 0..self.n_rings() {
                dr[i * self.n_theta + j] = s.knot_derivative(i);
            }
        }
        for i in 0..self.n_rings() {
            let s = PeriodicSpline::new(self.row(i));
            for j in 0..self.n_theta {
                dth[i * self.n_theta + j] = s.knot_derivative(j);
            }
        }
        (dr, dth)
    }

    /// Largest `|∇f(y)|·|y| / f(y)` over the nodes where `f > 0`.
    pub fn max_log_radial_gradient(&self) -> f64 {
        let (dr, dth) = self.gradient_at_all_nodes();
        let mut best = 0.0f64;
        for k in 0..self.values.len() {
            let v = self.values[k];
            if v > 0.0 {
                let r = self.radii[k / self.n_theta];
                let g = ((r * dr[k]).powi(2) + dth[k].powi(2)).sqrt();
                best = best.max(g / v);
            }
        }
        best
    }

    /// Grid scan plus one local pass on a 3x finer grid around the extremal cells.
    fn scan_extrema(&self) -> FieldExtrema {
        let (dr, dth) = self.gradient_at_all_nodes();
        let mut inf = (f64::INFINITY, 0usize);
        let mut sup = (f64::NEG_INFINITY, 0usize);
        let mut grad = (0.0f64, 0usize);
        for k in 0..self.values.len() {
            let v = self.values[k];
            let r = self.radii[k / self.n_theta];
            let g = (dr[k].powi(2) + (dth[k] / r).powi(2)).sqrt();
            if v < inf.0 {
                inf = (v, k);
            }
            if v > sup.0 {
                sup = (v, k);
            }
            if g > grad.0 {
                grad = (g, k);
            }
        }
        let mut ext = FieldExtrema {
            inf: inf.0,
            sup: sup.0,
            sup_grad: grad.0,
            scan_resolution: (self.n_rings(), self.n_theta),
            refinement_factor: 3,
        };
        for &(_, k) in &[inf, sup, grad] {
            for (r, th) in self.refinement_points(k) {
                let (v, vr, vth) = self.eval(r, th);
                ext.inf = ext.inf.min(v);
                ext.sup = ext.sup.max(v);
                ext.sup_grad = ext.sup_grad.max((vr * vr + (vth / r).powi(2)).sqrt());
            }
        }
        if self.sign == FieldSign::Nonnegative {
            // the interpolant may undershoot near zeros of a weight
            ext.inf = ext.inf.max(0.0);
        }
        ext
    }

    fn refinement_points(&self, k: usize) -> Vec<(f64, f64)> {
        let i = k / self.n_theta;
        let j = k % self.n_theta;
        let last = self.n_rings() - 1;
        let r_lo = if i == 0 { self.radii[0] } else { self.radii[i - 1] };
        let r_hi = if i == last { 1.0 } else { self.radii[i + 1] };
        let th = j as f64 * self.dtheta();
        let h = self.dtheta();
        let mut pts = Vec::new();
        for a in 0..=6 {
            let r = r_lo + (r_hi - r_lo) * a as f64 / 6.0;
            for b in 0..=6 {
                pts.push((r, th - h + 2.0 * h * b as f64 / 6.0));
            }
        }
        pts
    }

    /// Writes `r, theta, value` for every sample.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "theta", "value"])?;
        for i in 0..self.n_rings() {
            for j in 0..self.n_theta {
                w.write_record(&[
                    format!("{:.17e}", self.radii[i]),
                    format!("{:.17e}", j as f64 * self.dtheta()),
                    format!("{:.17e}", self.at(i, j)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Transported potential
/// `K̃(y) = K(Φ⁻¹(y)) (|Φ⁻¹(y)|/|y|)^{2α} |(Φ⁻¹)′(y)|²` sampled on `grid`.
///
/// Boundary samples are taken from the boundary correspondence. The ratio
/// `|Φ⁻¹(y)|/|y|` is evaluated as `|Σ c_k y^{k-1}|`, whose value at the origin
/// is the limit `|(Φ⁻¹)′(0)|`.
pub fn transform_potential(
    map: &ConformalMap,
    alpha: f64,
    k: impl Fn([f64; 2]) -> f64,
    grid: &PolarGrid,
) -> Result<PotentialField> {
    if !(alpha > -1.0) {
        return Err(Error::SingularityMismatch(alpha));
    }
    transport(map, alpha, k, grid, FieldSign::Positive)
}

/// Transported weight `W̃(y) = W(Φ⁻¹(y)) |(Φ⁻¹)′(y)|²` (nonnegative).
pub fn transform_weight(map: &ConformalMap, w: impl Fn([f64; 2]) -> f64, grid: &PolarGrid) -> Result<PotentialField> {
    transport(map, 0.0, w, grid, FieldSign::Nonnegative)
}

fn transport(
    map: &ConformalMap,
    alpha: f64,
    k: impl Fn([f64; 2]) -> f64,
    grid: &PolarGrid,
    sign: FieldSign,
) -> Result<PotentialField> {
    let check = |v: f64, x: Complex64| -> Result<f64> {
        let bad = match sign {
            FieldSign::Positive => !(v > 0.0),
            FieldSign::Nonnegative => !(v >= 0.0),
        };
        if bad {
            Err(Error::NonPositivePotential { value: v, x: x.re, y: x.im })
        } else {
            Ok(v)
        }
    };
    let mut interior = Vec::with_capacity(grid.n_cells());
    for i in 0..grid.n_r {
        for j in 0..grid.n_theta {
            let y = Complex64::from_polar(grid.radii[i], grid.theta(j));
            let (x, ratio, dx) = map.inverse_with_derivative(y);
            let kv = check(k([x.re, x.im]), x)?;
            interior.push(kv * ratio.norm().powf(2.0 * alpha) * dx.norm_sqr());
        }
    }
    let mut boundary = Vec::with_capacity(grid.n_theta);
    for j in 0..grid.n_theta {
        let (x, speed) = map.boundary_inverse(grid.theta(j));
        let kv = check(k([x.re, x.im]), x)?;
        boundary.push(kv * x.norm().powf(2.0 * alpha) * speed * speed);
    }
    PotentialField::from_samples(grid, interior, boundary, sign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::compute_map;
    use crate::disk::build_grid;
    use crate::geometry::{build_domain, DomainKind};

    #[test]
    fn identity_map_keeps_affine_field() {
        let map = compute_map(&build_domain(DomainKind::UnitDisk {}).unwrap(), 64).unwrap();
        let grid = build_grid(64, 32, 0.0, 1.0).unwrap();
        let k = transform_potential(&map, 0.0, |x| 1.0 + 0.5 * x[0], &grid).unwrap();
        // inf over the closed disk is attained at (−1, 0), gradient is constant
        assert!((k.extrema.inf - 0.5).abs() < 1e-12, "{:?}", k.extrema);
        assert!((k.extrema.sup - 1.5).abs() < 1e-12);
        assert!((k.extrema.sup_grad - 0.5).abs() < 1e-6);
        let (v, vr, vth) = k.eval(0.37, 1.1);
        assert!((v - (1.0 + 0.5 * 0.37 * 1.1f64.cos())).abs() < 1e-5);
        assert!((vr - 0.5 * 1.1f64.cos()).abs() < 1e-4);
        assert!((vth + 0.5 * 0.37 * 1.1f64.sin()).abs() < 1e-4);
    }

    #[test]
    fn scaled_disk_field_is_power_of_radius() {
        let map = compute_map(&build_domain(DomainKind::Ellipse { a: 2.0, b: 2.0 }).unwrap(), 128).unwrap();
        let grid = build_grid(32, 16, 0.5, 1.0).unwrap();
        let k = transform_potential(&map, 0.5, |_| 1.0, &grid).unwrap();
        let expected = 2f64.powf(3.0);
        assert!(k.values.iter().all(|v| (v - expected).abs() < 1e-12 * expected));
    }

    #[test]
    fn nonpositive_potential_rejected() {
        let map = compute_map(&build_domain(DomainKind::UnitDisk {}).unwrap(), 64).unwrap();
        let grid = build_grid(32, 16, 0.0, 1.0).unwrap();
        let res = transform_potential(&map, 0.0, |x| x[0], &grid);
        assert!(matches!(res, Err(Error::NonPositivePotential { .. })));
        assert!(matches!(transform_potential(&map, -1.0, |_| 1.0, &grid), Err(Error::SingularityMismatch(_))));
        let w = transform_weight(&map, |x| x[0].max(0.0), &grid).unwrap();
        assert_eq!(w.extrema.inf, 0.0);
    }
}
