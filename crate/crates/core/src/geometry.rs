//! Simply connected planar domains described by analytic boundary curves.
//!
//! Every boundary is a closed curve `γ(t) = (x(t), y(t))`, `t ∈ [0, 2π)`, with
//! each coordinate a truncated Fourier series. The curve is traversed
//! counterclockwise and must wind once around the origin.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VALIDATION_SAMPLES: usize = 2048;

/// Truncated real Fourier series `Σ_k a_k cos(kt) + b_k sin(kt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    fn zeros(degree: usize) -> Self {
        Self {
            cos: vec![0.0; degree + 1],
            sin: vec![0.0; degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len()).saturating_sub(1)
    }

    /// Value and first two derivatives at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (mut f, mut df, mut d2f) = (0.0, 0.0, 0.0);
        for k in 0..=self.degree() {
            let a = self.cos.get(k).copied().unwrap_or(0.0);
            let b = self.sin.get(k).copied().unwrap_or(0.0);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            f += a * c + b * s;
            df += kf * (-a * s + b * c);
            d2f += -kf * kf * (a * c + b * s);
        }
        (f, df, d2f)
    }

    // coefficient of cos(mt) / sin(mt) for a possibly negative m
    fn add_cos(&mut self, m: i64, v: f64) {
        self.cos[m.unsigned_abs() as usize] += v;
    }

    fn add_sin(&mut self, m: i64, v: f64) {
        self.sin[m.unsigned_abs() as usize] += v * m.signum() as f64;
    }

    fn is_finite(&self) -> bool {
        self.cos.iter().chain(self.sin.iter()).all(|c| c.is_finite())
    }
}

/// Domain families supported by the laboratory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "repr::DomainKindRepr", into = "repr::DomainKindRepr")]
pub enum DomainKind {
    UnitDisk {},
    Ellipse { a: f64, b: f64 },
    /// Star-shaped curve `r(t) = Σ cos[k] cos(kt) + Σ sin[k-1] sin(kt)`;
    /// `cos` starts at `k = 0`, `sin` at `k = 1`.
    FourierBlob { cos: Vec<f64>, sin: Vec<f64> },
    /// `r(t) = ε + (1-ε) cos²t = (1+ε)/2 + (1-ε)/2 cos 2t`; the neck half-width
    /// on the `x₂` axis is exactly `ε`.
    Dumbbell { neck_width: f64 },
}

/// Serialized shape `{"kind": ..., "params": {...}}` with strict parameter keys.
mod repr {
    use serde::{Deserialize, Serialize};

    use super::DomainKind;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Empty {}

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Ellipse {
        a: f64,
        b: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Blob {
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Dumbbell {
        neck_width: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
    pub enum DomainKindRepr {
        UnitDisk(Empty),
        Ellipse(Ellipse),
        FourierBlob(Blob),
        Dumbbell(Dumbbell),
    }

    impl From<DomainKindRepr> for DomainKind {
        fn from(r: DomainKindRepr) -> Self {
            match r {
                DomainKindRepr::UnitDisk(_) => DomainKind::UnitDisk {},
                DomainKindRepr::Ellipse(Ellipse { a, b }) => DomainKind::Ellipse { a, b },
                DomainKindRepr::FourierBlob(Blob { cos, sin }) => DomainKind::FourierBlob { cos, sin },
                DomainKindRepr::Dumbbell(Dumbbell { neck_width }) => DomainKind::Dumbbell { neck_width },
            }
        }
    }

    impl From<DomainKind> for DomainKindRepr {
        fn from(k: DomainKind) -> Self {
            match k {
                DomainKind::UnitDisk {} => DomainKindRepr::UnitDisk(Empty {}),
                DomainKind::Ellipse { a, b } => DomainKindRepr::Ellipse(Ellipse { a, b }),
                DomainKind::FourierBlob { cos, sin } => DomainKindRepr::FourierBlob(Blob { cos, sin }),
                DomainKind::Dumbbell { neck_width } => DomainKindRepr::Dumbbell(Dumbbell { neck_width }),
            }
        }
    }
}

/// A validated simply connected domain containing the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub x: FourierSeries,
    pub y: FourierSeries,
    pub n_validation_samples: usize,
}

/// Point on the boundary with its unit tangent and outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
}

fn polar_to_coordinates(radial: &FourierSeries) -> (FourierSeries, FourierSeries) {
    let n = radial.degree() + 1;
    let mut x = FourierSeries::zeros(n);
    let mut y = FourierSeries::zeros(n);
    for k in 0..=radial.degree() {
        let a = radial.cos.get(k).copied().unwrap_or(0.0);
        let b = radial.sin.get(k).copied().unwrap_or(0.0);
        let k = k as i64;
        // a cos kt cos t, a cos kt sin t
        x.add_cos(k + 1, a / 2.0);
        x.add_cos(k - 1, a / 2.0);
        y.add_sin(k + 1, a / 2.0);
        y.add_sin(k - 1, -a / 2.0);
        // b sin kt cos t, b sin kt sin t
        x.add_sin(k + 1, b / 2.0);
        x.add_sin(k - 1, b / 2.0);
        y.add_cos(k - 1, b / 2.0);
        y.add_cos(k + 1, -b / 2.0);
    }
    (x, y)
}

/// Builds and validates a domain.
pub fn build_domain(kind: DomainKind) -> Result<DomainSpec> {
    build_domain_with_samples(kind, DEFAULT_VALIDATION_SAMPLES)
}

pub fn build_domain_with_samples(kind: DomainKind, n_validation_samples: usize) -> Result<DomainSpec> {
    if n_validation_samples < 16 {
        return Err(Error::InvalidParameter(format!(
            "n_validation_samples = {n_validation_samples} must be at least 16"
        )));
    }
    let radial = match &kind {
        DomainKind::UnitDisk {} => FourierSeries {
            cos: vec![1.0],
            sin: vec![],
        },
        DomainKind::Ellipse { a, b } => {
            if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "ellipse semi-axes must be positive, got a = {a}, b = {b}"
                )));
            }
            let x = FourierSeries {
                cos: vec![0.0, *a],
                sin: vec![0.0, 0.0],
            };
            let y = FourierSeries {
                cos: vec![0.0, 0.0],
                sin: vec![0.0, *b],
            };
            return finish(kind, x, y, n_validation_samples);
        }
        DomainKind::FourierBlob { cos, sin } => {
            if cos.is_empty() {
                return Err(Error::InvalidParameter(
                    "fourier_blob needs a nonempty cosine coefficient list".into(),
                ));
            }
            let mut s = vec![0.0];
            s.extend_from_slice(sin);
            FourierSeries {
                cos: cos.clone(),
                sin: s,
            }
        }
        DomainKind::Dumbbell { neck_width } => {
            let e = *neck_width;
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "dumbbell neck width must lie in (0, 1), got {e}"
                )));
            }
            FourierSeries {
                cos: vec![(1.0 + e) / 2.0, 0.0, (1.0 - e) / 2.0],
                sin: vec![],
            }
        }
    };
    if !radial.is_finite() {
        return Err(Error::InvalidParameter("non-finite Fourier coefficient".into()));
    }
    let (x, y) = polar_to_coordinates(&radial);
    finish(kind, x, y, n_validation_samples)
}

fn finish(kind: DomainKind, x: FourierSeries, y: FourierSeries, n: usize) -> Result<DomainSpec> {
    let domain = DomainSpec {
        kind,
        x,
        y,
        n_validation_samples: n,
    };
    domain.validate()?;
    Ok(domain)
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 <= 0.0) && (d3 * d4 <= 0.0)
}

impl DomainSpec {
    /// γ(t) as a complex number.
    pub fn gamma(&self, t: f64) -> Complex64 {
        Complex64::new(self.x.eval(t).0, self.y.eval(t).0)
    }

    /// γ′(t).
    pub fn dgamma(&self, t: f64) -> Complex64 {
        Complex64::new(self.x.eval(t).1, self.y.eval(t).1)
    }

    /// γ″(t).
    pub fn d2gamma(&self, t: f64) -> Complex64 {
        Complex64::new(self.x.eval(t).2, self.y.eval(t).2)
    }

    pub fn boundary_point(&self, t: f64) -> BoundaryPoint {
        let t = t.rem_euclid(2.0 * PI);
        let p = self.gamma(t);
        let d = self.dgamma(t);
        let tan = d / d.norm();
        BoundaryPoint {
            point: [p.re, p.im],
            tangent: [tan.re, tan.im],
            normal: [tan.im, -tan.re],
        }
    }

    pub fn samples(&self, n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|k| {
                let p = self.gamma(2.0 * PI * k as f64 / n as f64);
                [p.re, p.im]
            })
            .collect()
    }

    /// Winding number of the sampled boundary around `point`.
    pub fn winding_number(&self, point: [f64; 2]) -> i64 {
        let pts = self.samples(self.n_validation_samples);
        let mut total = 0.0;
        for k in 0..pts.len() {
            let a = pts[k];
            let b = pts[(k + 1) % pts.len()];
            let ta = (a[1] - point[1]).atan2(a[0] - point[0]);
            let tb = (b[1] - point[1]).atan2(b[0] - point[0]);
            let mut d = tb - ta;
            if d > PI {
                d -= 2.0 * PI;
            } else if d < -PI {
                d += 2.0 * PI;
            }
            total += d;
        }
        (total / (2.0 * PI)).round() as i64
    }

    /// Half-width of the domain along the `x₁ = 0` axis: smallest `|x₂|` where
    /// the sampled boundary crosses the axis.
    pub fn neck_half_width(&self) -> f64 {
        let pts = self.samples(self.n_validation_samples.max(4096));
        let mut best = f64::INFINITY;
        for k in 0..pts.len() {
            let a = pts[k];
            let b = pts[(k + 1) % pts.len()];
            if (a[0] <= 0.0 && b[0] > 0.0) || (a[0] >= 0.0 && b[0] < 0.0) || a[0] == 0.0 {
                let y = if a[0] == b[0] {
                    a[1]
                } else {
                    a[1] + (b[1] - a[1]) * (-a[0]) / (b[0] - a[0])
                };
                best = best.min(y.abs());
            }
        }
        best
    }

    fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::InvalidParameter("non-finite Fourier coefficient".into()));
        }
        let n = self.n_validation_samples;
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            if self.dgamma(t).norm() <= 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "boundary parametrization is singular at t = {t}"
                )));
            }
        }
        let pts = self.samples(n);
        for i in 0..n {
            let (p1, p2) = (pts[i], pts[(i + 1) % n]);
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (q1, q2) = (pts[j], pts[(j + 1) % n]);
                let min_dist = ((p1[0] - q1[0]).powi(2) + (p1[1] - q1[1]).powi(2)).sqrt();
                if min_dist == 0.0 || segments_intersect(p1, p2, q1, q2) {
                    return Err(Error::SelfIntersectingBoundary(i, j));
                }
            }
        }
        let w = self.winding_number([0.0, 0.0]);
        if w != 1 {
            return Err(Error::OriginOutsideDomain(w));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_disk_is_the_circle() {
        let d = build_domain(DomainKind::UnitDisk {}).unwrap();
        for k in 0..7 {
            let t = 0.9 * k as f64;
            let p = d.gamma(t);
            assert_abs_diff_eq!(p.re, t.cos(), epsilon = 1e-15);
            assert_abs_diff_eq!(p.im, t.sin(), epsilon = 1e-15);
        }
        let bp = d.boundary_point(0.0);
        assert_abs_diff_eq!(bp.point[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bp.normal[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bp.normal[1], 0.0, epsilon = 1e-15);
        let bp = d.boundary_point(PI / 2.0);
        assert_abs_diff_eq!(bp.point[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bp.normal[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bp.normal[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ellipse_parametrization_and_normal() {
        let d = build_domain(DomainKind::Ellipse { a: 1.5, b: 1.0 }).unwrap();
        assert_eq!(d.winding_number([0.0, 0.0]), 1);
        let bp = d.boundary_point(0.0);
        assert_abs_diff_eq!(bp.point[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(bp.point[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bp.normal[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bp.normal[1], 0.0, epsilon = 1e-15);
        let p = d.gamma(1.0);
        assert_abs_diff_eq!(p.re, 1.5 * 1f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.im, 1f64.sin(), epsilon = 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(matches!(
            build_domain(DomainKind::Ellipse { a: 1.5, b: -1.0 }),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build_domain(DomainKind::Dumbbell { neck_width: 1.0 }),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build_domain(DomainKind::FourierBlob { cos: vec![], sin: vec![] }),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn origin_outside_detected() {
        // r(t) = 0.3 + cos t is a limaçon with an inner loop: self-intersecting
        let r = build_domain(DomainKind::FourierBlob {
            cos: vec![0.3, 1.0],
            sin: vec![],
        });
        assert!(matches!(r, Err(Error::SelfIntersectingBoundary(..))));
        // circle of radius 1 centred at (2, 0), written directly in coordinates
        let d = DomainSpec {
            kind: DomainKind::UnitDisk {},
            x: FourierSeries { cos: vec![2.0, 1.0], sin: vec![0.0, 0.0] },
            y: FourierSeries { cos: vec![0.0, 0.0], sin: vec![0.0, 1.0] },
            n_validation_samples: 256,
        };
        assert!(matches!(d.validate(), Err(Error::OriginOutsideDomain(0))));
    }

    #[test]
    fn dumbbell_neck_shrinks() {
        let widths: Vec<f64> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&e| build_domain(DomainKind::Dumbbell { neck_width: e }).unwrap().neck_half_width())
            .collect();
        assert_abs_diff_eq!(widths[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(widths[2], 0.125, epsilon = 1e-6);
        assert!(widths[0] > widths[1] && widths[1] > widths[2]);
    }

    #[test]
    fn blob_polar_conversion_matches_direct_evaluation() {
        let cos = vec![1.0, 0.0, 0.1, 0.15];
        let sin = vec![0.05, 0.08];
        let d = build_domain(DomainKind::FourierBlob { cos: cos.clone(), sin: sin.clone() }).unwrap();
        for k in 0..13 {
            let t = 0.47 * k as f64;
            let r = cos[0] + cos[2] * (2.0 * t).cos() + cos[3] * (3.0 * t).cos()
                + sin[0] * t.sin()
                + sin[1] * (2.0 * t).sin();
            let p = d.gamma(t);
            assert_abs_diff_eq!(p.re, r * t.cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(p.im, r * t.sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn config_roundtrip_and_strictness() {
        let k: DomainKind = serde_json::from_str(r#"{"kind":"ellipse","params":{"a":1.5,"b":1.0}}"#).unwrap();
        assert_eq!(k, DomainKind::Ellipse { a: 1.5, b: 1.0 });
        let k: DomainKind = serde_json::from_str(r#"{"kind":"unit_disk","params":{}}"#).unwrap();
        assert_eq!(k, DomainKind::UnitDisk {});
        assert!(serde_json::from_str::<DomainKind>(r#"{"kind":"ellipse","params":{"a":1.5,"b":1.0,"c":2}}"#).is_err());
    }

    proptest::proptest! {
        #[test]
        fn normals_are_unit_and_orthogonal(t in 0.0f64..(2.0 * PI), a in 0.3f64..3.0, b in 0.3f64..3.0) {
            let d = build_domain_with_samples(DomainKind::Ellipse { a, b }, 64).unwrap();
            let bp = d.boundary_point(t);
            let dot = bp.normal[0] * bp.tangent[0] + bp.normal[1] * bp.tangent[1];
            let len = (bp.normal[0].powi(2) + bp.normal[1].powi(2)).sqrt();
            proptest::prop_assert!(dot.abs() < 1e-12);
            proptest::prop_assert!((len - 1.0).abs() < 1e-12);
        }
    }
}
