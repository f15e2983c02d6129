//! Riemann map `Φ: Ω → 𝔻` with `Φ(0) = 0`, `Φ′(0) > 0`.
//!
//! The boundary correspondence comes from the Kerzman-Stein integral equation
//! for the Szegő kernel `s(z) = S(z, 0)`,
//!
//! ```text
//! s(w) − ∫_{∂Ω} A(w, z) s(z) |dz| = conj(H(0, w)),
//! H(w, z) = T(z) / (2πi (z − w)),   A(w, z) = H(w, z) − conj(H(z, w)),
//! ```
//!
//! discretized by Nyström's method with the trapezoidal rule at equispaced
//! parameter nodes. On the boundary `Φ = T s² / (i |s|²)` and
//! `|Φ′| = 2π |s|² / S(0, 0)`. The inverse map is the power series
//! `Φ⁻¹(y) = Σ_{k≥1} c_k y^k` whose coefficients come from an FFT of the
//! boundary correspondence sampled at equispaced angles.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const RESIDUAL_TOL: f64 = 1e-10;
const MAX_DISTORTION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone)]
pub struct ConformalMap {
    domain: DomainSpec,
    /// Parameter nodes `t_k`.
    pub t: Vec<f64>,
    /// Unwrapped angles `θ_k = arg Φ(γ(t_k))`, strictly increasing.
    pub theta: Vec<f64>,
    /// `dθ/dt` at the nodes.
    pub dtheta: Vec<f64>,
    z: Vec<Complex64>,
    dz: Vec<Complex64>,
    szego: Vec<Complex64>,
    s00: f64,
    image: Vec<Complex64>,
    /// Power-series coefficients of the inverse map, `coeffs[k]` multiplies `y^k`.
    inverse_coeffs: Vec<Complex64>,
    /// Relative residual of the discrete integral equation.
    pub residual: f64,
    /// Size of the neglected Fourier content of the inverse map.
    pub accuracy: f64,
}

impl ConformalMap {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn n_boundary_nodes(&self) -> usize {
        self.t.len()
    }

    /// `Φ′(0)`, real and positive.
    pub fn derivative_at_origin(&self) -> f64 {
        2.0 * PI * self.s00
    }

    /// Ratio `max |Φ′| / min |Φ′|` on the boundary.
    pub fn distortion(&self) -> f64 {
        let (lo, hi) = self
            .szego
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.norm_sqr()), hi.max(s.norm_sqr())));
        hi / lo
    }
}

fn kernel_h(w: Complex64, z: Complex64, tz: Complex64) -> Complex64 {
    tz / (2.0 * PI * I * (z - w))
}

/// Kerzman-Stein kernel `A(w, z)`; zero on the diagonal.
fn kernel_a(w: Complex64, tw: Complex64, z: Complex64, tz: Complex64) -> Complex64 {
    kernel_h(w, z, tz) - kernel_h(z, w, tw).conj()
}

/// Computes the normalized Riemann map of `domain` with `n_boundary_nodes` nodes.
pub fn compute_map(domain: &DomainSpec, n_boundary_nodes: usize) -> Result<ConformalMap> {
    let n = n_boundary_nodes;
    if n < 64 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "n_boundary_nodes = {n} must be even and at least 64"
        )));
    }
    let dt = 2.0 * PI / n as f64;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let z: Vec<Complex64> = t.iter().map(|&s| domain.gamma(s)).collect();
    let dz: Vec<Complex64> = t.iter().map(|&s| domain.dgamma(s)).collect();
    let speed: Vec<f64> = dz.iter().map(|d| d.norm()).collect();
    let tan: Vec<Complex64> = dz.iter().zip(&speed).map(|(d, s)| d / s).collect();

    let mut mat = DMatrix::<Complex64>::identity(n, n);
    let mut rhs = DVector::<Complex64>::zeros(n);
    for m in 0..n {
        rhs[m] = kernel_h(Complex64::new(0.0, 0.0), z[m], tan[m]).conj();
        for k in 0..n {
            if k != m {
                mat[(m, k)] -= kernel_a(z[m], tan[m], z[k], tan[k]) * speed[k] * dt;
            }
        }
    }
    let lu = mat.clone().lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::MapSolverDiverged("singular Nyström matrix".into()))?;
    let res_vec = &mat * &sol - &rhs;
    let rhs_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let residual = res_vec.iter().fold(0.0f64, |m, v| m.max(v.norm())) / rhs_norm;
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::MapSolverDiverged(format!(
            "integral equation residual {residual:.3e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    let szego: Vec<Complex64> = sol.iter().copied().collect();
    let s00: f64 = szego
        .iter()
        .zip(&speed)
        .map(|(s, sp)| s.norm_sqr() * sp * dt)
        .sum();
    let (lo, hi) = szego
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.norm_sqr()), hi.max(s.norm_sqr())));
    if !(lo > 0.0) || !(hi / lo < MAX_DISTORTION) || !s00.is_finite() {
        return Err(Error::DomainTooDistorted(hi / lo));
    }

    let image: Vec<Complex64> = szego
        .iter()
        .zip(&tan)
        .map(|(s, tn)| tn * s * s / (I * s.norm_sqr()))
        .collect();
    let dtheta: Vec<f64> = szego
        .iter()
        .zip(&speed)
        .map(|(s, sp)| 2.0 * PI * s.norm_sqr() * sp / s00)
        .collect();
    let mut theta = Vec::with_capacity(n);
    theta.push(image[0].arg());
    for k in 1..n {
        let prev = theta[k - 1];
        let mut a = image[k].arg();
        a += 2.0 * PI * ((prev - a) / (2.0 * PI)).round();
        theta.push(a);
    }
    if theta.windows(2).any(|w| w[1] <= w[0]) || theta[n - 1] >= theta[0] + 2.0 * PI {
        return Err(Error::MapSolverDiverged(
            "boundary correspondence is not strictly increasing".into(),
        ));
    }

    let mut map = ConformalMap {
        domain: domain.clone(),
        t,
        theta,
        dtheta,
        z,
        dz,
        szego,
        s00,
        image,
        inverse_coeffs: Vec::new(),
        residual,
        accuracy: 0.0,
    };
    map.build_inverse_series(2 * n)?;
    Ok(map)
}

impl ConformalMap {
    fn tangent(&self, k: usize) -> Complex64 {
        self.dz[k] / self.dz[k].norm()
    }

    /// Nyström interpolant of the Szegő kernel at parameter `t`.
    fn szego_at(&self, t: f64) -> Complex64 {
        let n = self.t.len();
        let dt = 2.0 * PI / n as f64;
        let t = t.rem_euclid(2.0 * PI);
        let near = (t / dt).round() as usize % n;
        let gap = (t - near as f64 * dt).abs().min(2.0 * PI - (t - near as f64 * dt).abs());
        if gap < 1e-13 {
            return self.szego[near];
        }
        let w = self.domain.gamma(t);
        let dw = self.domain.dgamma(t);
        let tw = dw / dw.norm();
        let mut s = kernel_h(Complex64::new(0.0, 0.0), w, tw).conj();
        for k in 0..n {
            if k == near && gap < 1e-9 {
                continue;
            }
            let tk = self.tangent(k);
            s += kernel_a(w, tw, self.z[k], tk) * self.szego[k] * self.dz[k].norm() * dt;
        }
        s
    }

    /// `(θ(t) mod 2π, θ′(t))` at an arbitrary parameter value.
    pub fn correspondence_at(&self, t: f64) -> (f64, f64) {
        let s = self.szego_at(t);
        let dw = self.domain.dgamma(t);
        let tw = dw / dw.norm();
        let phi = tw * s * s / (I * s.norm_sqr());
        (phi.arg(), 2.0 * PI * s.norm_sqr() * dw.norm() / self.s00)
    }

    /// Parameter `t` with `θ(t) ≡ angle (mod 2π)`.
    pub fn boundary_preimage(&self, angle: f64) -> f64 {
        let n = self.t.len();
        let base = self.theta[0];
        let target = base + (angle - base).rem_euclid(2.0 * PI);
        // locate the bracketing interval in the unwrapped table
        let k = match self.theta.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
            Ok(k) => return self.t[k],
            Err(k) => k,
        };
        let (t0, th0, t1, th1) = if k == 0 {
            (self.t[0], self.theta[0], self.t[0], self.theta[0])
        } else if k == n {
            (self.t[n - 1], self.theta[n - 1], 2.0 * PI, self.theta[0] + 2.0 * PI)
        } else {
            (self.t[k - 1], self.theta[k - 1], self.t[k], self.theta[k])
        };
        let mut t = if th1 > th0 {
            t0 + (target - th0) / (th1 - th0) * (t1 - t0)
        } else {
            t0
        };
        for _ in 0..50 {
            let (th, dth) = self.correspondence_at(t);
            let mut diff = th - angle;
            diff -= 2.0 * PI * (diff / (2.0 * PI)).round();
            let step = diff / dth;
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        t.rem_euclid(2.0 * PI)
    }

    fn build_inverse_series(&mut self, m: usize) -> Result<()> {
        let samples: Vec<Complex64> = (0..m)
            .map(|j| {
                let angle = 2.0 * PI * j as f64 / m as f64;
                self.domain.gamma(self.boundary_preimage(angle))
            })
            .collect();
        let mut buf = samples;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
        fft.process(&mut buf);
        let scale = 1.0 / m as f64;
        let coeffs: Vec<Complex64> = buf.iter().map(|c| c * scale).collect();
        let half = m / 2;
        let top = coeffs[1..half].iter().fold(0.0f64, |a, c| a.max(c.norm()));
        let negative = coeffs[half..].iter().fold(0.0f64, |a, c| a.max(c.norm()));
        let tail = coeffs[half - 8..half].iter().fold(0.0f64, |a, c| a.max(c.norm()));
        self.accuracy = coeffs[0].norm().max(negative).max(tail) / top;
        let mut inv = coeffs[..half].to_vec();
        inv[0] = Complex64::new(0.0, 0.0);
        self.inverse_coeffs = inv;
        Ok(())
    }

    /// `(Φ⁻¹(y), Φ⁻¹(y)/y, (Φ⁻¹)′(y))`; the ratio at `y = 0` is `(Φ⁻¹)′(0)`.
    pub fn inverse_with_derivative(&self, y: Complex64) -> (Complex64, Complex64, Complex64) {
        // Horner for h(y) = Σ c_k y^{k-1} and its derivative
        let c = &self.inverse_coeffs;
        let mut h = Complex64::new(0.0, 0.0);
        let mut dh = Complex64::new(0.0, 0.0);
        for k in (1..c.len()).rev() {
            dh = dh * y + h;
            h = h * y + c[k];
        }
        (y * h, h, h + y * dh)
    }

    /// Forward map by the barycentric Cauchy formula for `Φ(x)/x`, polished by
    /// Newton's method on the inverse series.
    fn forward(&self, x: Complex64) -> Result<Complex64> {
        if x == Complex64::new(0.0, 0.0) {
            return Ok(x);
        }
        if !self.contains(x) {
            return Err(Error::PointOutsideDomain(x.re, x.im));
        }
        let dt = 2.0 * PI / self.t.len() as f64;
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for k in 0..self.t.len() {
            let d = self.z[k] - x;
            if d.norm() == 0.0 {
                return Ok(self.image[k]);
            }
            let w = self.dz[k] * dt / d;
            num += w * self.image[k] / self.z[k];
            den += w;
        }
        let mut y = x * num / den;
        for _ in 0..30 {
            if y.norm() >= 1.0 {
                y *= 0.999 / y.norm();
            }
            let (p, _, dp) = self.inverse_with_derivative(y);
            let step = (p - x) / dp;
            y -= step;
            if step.norm() < 1e-15 {
                break;
            }
        }
        if y.norm() >= 1.0 {
            return Err(Error::PointOutsideDomain(x.re, x.im));
        }
        Ok(y)
    }

    /// Crossing-number test against the boundary node polygon.
    pub fn contains(&self, x: Complex64) -> bool {
        let n = self.z.len();
        let mut inside = false;
        for k in 0..n {
            let a = self.z[k];
            let b = self.z[(k + 1) % n];
            if (a.im > x.im) != (b.im > x.im) {
                let xc = a.re + (x.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if x.re < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn map_point(&self, point: [f64; 2], direction: Direction) -> Result<[f64; 2]> {
        let p = Complex64::new(point[0], point[1]);
        let out = match direction {
            Direction::Forward => self.forward(p)?,
            Direction::Inverse => {
                if !(p.norm() < 1.0) {
                    return Err(Error::PointOutsideDomain(point[0], point[1]));
                }
                self.inverse_with_derivative(p).0
            }
        };
        Ok([out.re, out.im])
    }

    /// `1 / det DΦ(Φ⁻¹(y)) = |(Φ⁻¹)′(y)|²`.
    pub fn conformal_factor(&self, y: [f64; 2]) -> Result<f64> {
        let p = Complex64::new(y[0], y[1]);
        if !(p.norm() < 1.0) {
            return Err(Error::PointOutsideDomain(y[0], y[1]));
        }
        Ok(self.inverse_with_derivative(p).2.norm_sqr())
    }

    /// Boundary data at angle `φ`: `(Φ⁻¹(e^{iφ}), |(Φ⁻¹)′(e^{iφ})|)` taken from
    /// the boundary correspondence.
    pub fn boundary_inverse(&self, angle: f64) -> (Complex64, f64) {
        let t = self.boundary_preimage(angle);
        let (_, dth) = self.correspondence_at(t);
        (self.domain.gamma(t), self.domain.dgamma(t).norm() / dth)
    }

    /// Writes `t, theta, gamma_x, gamma_y` for every boundary node.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "theta", "gamma_x", "gamma_y"])?;
        for k in 0..self.t.len() {
            w.write_record(&[
                format!("{:.17e}", self.t[k]),
                format!("{:.17e}", self.theta[k]),
                format!("{:.17e}", self.z[k].re),
                format!("{:.17e}", self.z[k].im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "nodes={} residual={:.3e} accuracy={:.3e} phi_prime_0={:.12} distortion={:.3e}",
            self.t.len(),
            self.residual,
            self.accuracy,
            self.derivative_at_origin(),
            self.distortion()
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainKind};

    #[test]
    fn unit_disk_gives_identity() {
        let d = build_domain(DomainKind::UnitDisk {}).unwrap();
        let m = compute_map(&d, 64).unwrap();
        for k in 0..64 {
            assert!((m.theta[k] - m.t[k]).abs() < 1e-13);
        }
        let y = m.map_point([0.3, 0.4], Direction::Forward).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-13 && (y[1] - 0.4).abs() < 1e-13);
        assert!((m.conformal_factor([0.2, -0.5]).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_node_counts() {
        let d = build_domain(DomainKind::UnitDisk {}).unwrap();
        assert!(compute_map(&d, 32).is_err());
        assert!(compute_map(&d, 65).is_err());
    }

    #[test]
    fn origin_is_fixed_and_outside_points_rejected() {
        let d = build_domain(DomainKind::Ellipse { a: 1.5, b: 1.0 }).unwrap();
        let m = compute_map(&d, 128).unwrap();
        assert_eq!(m.map_point([0.0, 0.0], Direction::Forward).unwrap(), [0.0, 0.0]);
        assert_eq!(m.map_point([0.0, 0.0], Direction::Inverse).unwrap(), [0.0, 0.0]);
        assert!(matches!(
            m.map_point([1.6, 0.0], Direction::Forward),
            Err(Error::PointOutsideDomain(..))
        ));
        assert!(matches!(
            m.map_point([1.0, 0.0], Direction::Inverse),
            Err(Error::PointOutsideDomain(..))
        ));
        assert!(m.derivative_at_origin() > 0.0);
    }

    /// `Φ′(0)` for the ellipse with semi-axes `a > b` from the closed-form map
    /// `√k sn((2K/π) asin(z/c), k)`, `c² = a² − b²`, nome `((a−b)/(a+b))²`.
    fn ellipse_derivative_oracle(a: f64, b: f64) -> f64 {
        let q = ((a - b) / (a + b)).powi(2);
        let theta2: f64 = (0..30).map(|n| 2.0 * q.powf((n as f64 + 0.5).powi(2))).sum();
        let theta3: f64 = 1.0 + (1..30).map(|n| 2.0 * q.powi(n * n)).sum::<f64>();
        let k = (theta2 / theta3).powi(2);
        let (mut x, mut y) = (1.0f64, (1.0 - k * k).sqrt());
        while (x - y).abs() > 1e-16 * x {
            (x, y) = (0.5 * (x + y), (x * y).sqrt());
        }
        let kk = PI / (2.0 * x);
        k.sqrt() * 2.0 * kk / (PI * (a * a - b * b).sqrt())
    }

    #[test]
    fn ellipse_derivative_matches_elliptic_function_map() {
        for (a, b) in [(1.5, 1.0), (2.0, 1.0), (1.2, 0.8)] {
            let m = compute_map(&build_domain(DomainKind::Ellipse { a, b }).unwrap(), 512).unwrap();
            let exact = ellipse_derivative_oracle(a, b);
            assert!((m.derivative_at_origin() - exact).abs() < 1e-10, "{a} {b}: {} vs {exact}", m.derivative_at_origin());
        }
    }

    #[test]
    fn scaled_disk_map_is_linear() {
        let m = compute_map(&build_domain(DomainKind::Ellipse { a: 2.0, b: 2.0 }).unwrap(), 128).unwrap();
        assert!((m.derivative_at_origin() - 0.5).abs() < 1e-13);
        for p in [[0.5, 0.3], [-1.2, 1.4], [0.0, -1.9]] {
            let y = m.map_point(p, Direction::Forward).unwrap();
            assert!((y[0] - p[0] / 2.0).abs() < 1e-12 && (y[1] - p[1] / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_map_satisfies_cauchy_riemann() {
        let m = compute_map(&build_domain(DomainKind::Ellipse { a: 1.5, b: 1.0 }).unwrap(), 256).unwrap();
        let h = 1e-5;
        let f = |x: f64, y: f64| m.map_point([x, y], Direction::Forward).unwrap();
        for p in [[0.3, 0.2], [-0.9, 0.1], [0.5, -0.6], [1.2, 0.3]] {
            let (xp, xm) = (f(p[0] + h, p[1]), f(p[0] - h, p[1]));
            let (yp, ym) = (f(p[0], p[1] + h), f(p[0], p[1] - h));
            let ux = (xp[0] - xm[0]) / (2.0 * h);
            let vx = (xp[1] - xm[1]) / (2.0 * h);
            let uy = (yp[0] - ym[0]) / (2.0 * h);
            let vy = (yp[1] - ym[1]) / (2.0 * h);
            assert!((ux - vy).abs() < 1e-8 && (uy + vx).abs() < 1e-8, "{p:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip_on_disk_points(rho in 0.0f64..0.95, phi in 0.0f64..(2.0 * PI), blob in proptest::bool::ANY) {
            use std::sync::OnceLock;
            static MAPS: OnceLock<[ConformalMap; 2]> = OnceLock::new();
            let maps = MAPS.get_or_init(|| {
                let e = compute_map(&build_domain(DomainKind::Ellipse { a: 1.5, b: 1.0 }).unwrap(), 256).unwrap();
                let kind = DomainKind::FourierBlob { cos: vec![1.0, 0.0, 0.0, 0.2], sin: vec![0.0, 0.1] };
                let b = compute_map(&build_domain(kind).unwrap(), 256).unwrap();
                [e, b]
            });
            let m = &maps[usize::from(blob)];
            let y = [rho * phi.cos(), rho * phi.sin()];
            let x = m.map_point(y, Direction::Inverse).unwrap();
            let back = m.map_point(x, Direction::Forward).unwrap();
            proptest::prop_assert!((back[0] - y[0]).hypot(back[1] - y[1]) < 1e-8);
        }
    }
}
