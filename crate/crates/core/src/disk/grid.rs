use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell-centred polar grid on the unit disk.
///
/// Radial faces are `ρ_i = (i / n_r)^g` for grading exponent `g ≥ 1`, cell
/// centres sit halfway between faces, so no node is placed at the pole.
/// Angles are `θ_j = j·2π/n_θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub n_r: usize,
    pub n_theta: usize,
    pub alpha: f64,
    pub grading: f64,
    pub faces: Vec<f64>,
    pub radii: Vec<f64>,
    /// `∫_{ρ_{i-1}}^{ρ_i} r^{2α+1} dr` per ring.
    pub moments: Vec<f64>,
}

/// Exact `∫_a^b r^{2α+1} dr`.
pub fn singular_moment(a: f64, b: f64, alpha: f64) -> f64 {
    let e = 2.0 * alpha + 2.0;
    (b.powf(e) - a.powf(e)) / e
}

pub fn build_grid(n_r: usize, n_theta: usize, alpha: f64, grading: f64) -> Result<PolarGrid> {
    if n_r < 16 || n_theta < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid needs n_r, n_theta >= 16, got {n_r} x {n_theta}"
        )));
    }
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must exceed -1")));
    }
    if !(grading >= 1.0) || !grading.is_finite() {
        return Err(Error::InvalidParameter(format!("grading exponent {grading} must be >= 1")));
    }
    let faces: Vec<f64> = (0..=n_r).map(|i| (i as f64 / n_r as f64).powf(grading)).collect();
    let radii: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let moments = faces.windows(2).map(|w| singular_moment(w[0], w[1], alpha)).collect();
    Ok(PolarGrid {
        n_r,
        n_theta,
        alpha,
        grading,
        faces,
        radii,
        moments,
    })
}

impl PolarGrid {
    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn n_cells(&self) -> usize {
        self.n_r * self.n_theta
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// Ring moments for a different singular exponent.
    pub fn moments_for(&self, alpha: f64) -> Vec<f64> {
        if alpha == self.alpha {
            return self.moments.clone();
        }
        self.faces.windows(2).map(|w| singular_moment(w[0], w[1], alpha)).collect()
    }

    /// Ring areas divided by `Δθ` (moments for `α = 0`).
    pub fn area_moments(&self) -> Vec<f64> {
        self.moments_for(0.0)
    }

    /// Cartesian coordinates of node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let (s, c) = self.theta(j).sin_cos();
        [self.radii[i] * c, self.radii[i] * s]
    }

    /// Samples a function of `(r, θ)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_cells());
        for i in 0..self.n_r {
            for j in 0..self.n_theta {
                out.push(f(self.radii[i], self.theta(j)));
            }
        }
        out
    }

    pub fn same_layout(&self, other: &PolarGrid) -> bool {
        self.n_r == other.n_r && self.n_theta == other.n_theta && self.faces == other.faces
    }
}

/// Which radial weight to integrate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// Plain area measure.
    None,
    /// `|y|^{2α} dy` with the grid's exponent.
    Singular,
}

/// Midpoint rule in angle, exact moments in radius.
pub fn integrate(grid: &PolarGrid, values: &[f64], weight: Weight) -> Result<f64> {
    if values.len() != grid.n_cells() {
        return Err(Error::GridMismatch(format!(
            "expected {} node values, got {}",
            grid.n_cells(),
            values.len()
        )));
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(k));
    }
    let moments = match weight {
        Weight::Singular => grid.moments.clone(),
        Weight::None => grid.area_moments(),
    };
    Ok(integrate_with(grid, values, &moments))
}

pub(crate) fn integrate_with(grid: &PolarGrid, values: &[f64], moments: &[f64]) -> f64 {
    let dth = grid.dtheta();
    let mut total = 0.0;
    for (i, m) in moments.iter().enumerate() {
        let row: f64 = values[i * grid.n_theta..(i + 1) * grid.n_theta].iter().sum();
        total += row * m;
    }
    total * dth
}
