//! Cubic splines used to interpolate sampled fields on polar grids.

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut sub = vec![0.0; k];
            let mut sup = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                sub[i - 1] = h0;
                sup[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; k];
            sol[k - 1] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                sol[i] = (rhs[i] - sup[i] * sol[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and first derivative at `t` (cubic extrapolation outside the knots).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        (v, d)
    }

    /// First derivative at knot `i`.
    pub fn knot_derivative(&self, i: usize) -> f64 {
        let n = self.x.len();
        if i + 1 < n {
            let h = self.x[i + 1] - self.x[i];
            (self.y[i + 1] - self.y[i]) / h - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0
        } else {
            let h = self.x[i] - self.x[i - 1];
            (self.y[i] - self.y[i - 1]) / h + h * (self.m[i - 1] + 2.0 * self.m[i]) / 6.0
        }
    }
}

/// Periodic cubic spline on the uniform grid `θ_j = j·2π/n`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(y: &[f64]) -> Self {
        let n = y.len();
        assert!(n >= 3);
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let rhs: Vec<f64> = (0..n)
            .map(|j| 6.0 * (y[(j + 1) % n] - 2.0 * y[j] + y[(j + n - 1) % n]) / (h * h))
            .collect();
        let m = solve_cyclic_141(&rhs);
        Self { h, y: y.to_vec(), m }
    }

    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let n = self.y.len();
        let s = theta.rem_euclid(2.0 * std::f64::consts::PI) / self.h;
        let i = (s.floor() as usize).min(n - 1);
        let b = s - i as f64;
        let a = 1.0 - b;
        let j = (i + 1) % n;
        let h = self.h;
        let (m0, m1) = (self.m[i], self.m[j]);
        let (y0, y1) = (self.y[i], self.y[j]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        (v, d)
    }

    pub fn knot_derivative(&self, j: usize) -> f64 {
        let n = self.y.len();
        let k = (j + 1) % n;
        (self.y[k] - self.y[j]) / self.h - self.h * (2.0 * self.m[j] + self.m[k]) / 6.0
    }
}

/// Solves the circulant system `m_{j-1} + 4 m_j + m_{j+1} = r_j` by
/// Sherman-Morrison on top of a tridiagonal sweep.
fn solve_cyclic_141(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let (a, b, c) = (1.0, 4.0, 1.0);
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let thomas = |rhs: &[f64]| -> Vec<f64> {
        let mut d = diag.clone();
        let mut x = rhs.to_vec();
        for i in 1..n {
            let w = a / d[i - 1];
            d[i] -= w * c;
            x[i] -= w * x[i - 1];
        }
        x[n - 1] /= d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - c * x[i + 1]) / d[i];
        }
        x
    };
    let y = thomas(r);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = a;
    let z = thomas(&u);
    let factor = (y[0] + c * y[n - 1] / gamma) / (1.0 + z[0] + c * z[n - 1] / gamma);
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}
