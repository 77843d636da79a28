//! Conformally flat metrics `g = e^{2φ}δ` on the plane.
//!
//! In two dimensions every curvature quantity has a closed form in terms of
//! `φ`: the Gaussian curvature is `K = -e^{-2φ}Δφ`, `Ric = K·g`, lengths scale
//! by `e^φ` and areas by `e^{2φ}`. The catalogue of conformal exponents is
//! small on purpose so that all derivatives are exact.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryGeometry, TriMesh, Vec2};
use crate::poly::Poly2;
use crate::taylor::Taylor;
use crate::{Error, Result};

/// Tolerance on `Δφ` when certifying nonnegative Ricci curvature.
pub const RICCI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ConformalExponent {
    Zero,
    Constant(f64),
    Poly(Poly2),
    /// `amplitude · exp(-|x - center|² / (2σ²))`.
    Bump { amplitude: f64, sigma: f64, center: Vec2 },
}

/// `φ` with its gradient and Hessian at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiJet {
    pub value: f64,
    pub grad: Vec2,
    pub hess: Matrix2<f64>,
}

impl PhiJet {
    pub fn laplacian(&self) -> f64 {
        self.hess.trace()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMetric {
    phi: ConformalExponent,
    nonnegative_ricci: bool,
}

/// JSON form: `{"kind": "flat" | "constant" | "poly" | "bump", "params": [...]}`.
///
/// `constant`: `[c]`; `poly`: up to 15 coefficients in graded order
/// `1, x, y, x², xy, y², …`; `bump`: `[amplitude, sigma, cx, cy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub kind: MetricKind,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Flat,
    Constant,
    Poly,
    Bump,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec { kind: MetricKind::Flat, params: Vec::new() }
    }
}

impl MetricSpec {
    pub fn build(&self) -> Result<ConformalMetric> {
        let p = &self.params;
        match self.kind {
            MetricKind::Flat => {
                if !p.is_empty() {
                    return Err(Error::Validation("flat metric takes no params".into()));
                }
                Ok(ConformalMetric::flat())
            }
            MetricKind::Constant => match p.as_slice() {
                [c] if c.is_finite() => Ok(ConformalMetric::constant(*c)),
                _ => Err(Error::Validation("constant metric takes exactly one finite param".into())),
            },
            MetricKind::Poly => ConformalMetric::poly(p.clone()),
            MetricKind::Bump => match p.as_slice() {
                [a, s, cx, cy] => ConformalMetric::bump(*a, *s, Vec2::new(*cx, *cy)),
                _ => Err(Error::Validation("bump metric takes [amplitude, sigma, cx, cy]".into())),
            },
        }
    }
}

impl ConformalMetric {
    pub fn flat() -> Self {
        ConformalMetric { phi: ConformalExponent::Zero, nonnegative_ricci: true }
    }

    pub fn constant(c: f64) -> Self {
        ConformalMetric { phi: ConformalExponent::Constant(c), nonnegative_ricci: true }
    }

    pub fn poly(coeffs: Vec<f64>) -> Result<Self> {
        Ok(ConformalMetric { phi: ConformalExponent::Poly(Poly2::new(coeffs)?), nonnegative_ricci: false })
    }

    pub fn bump(amplitude: f64, sigma: f64, center: Vec2) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && amplitude.is_finite()) {
            return Err(Error::Validation(format!("bump metric needs sigma > 0, got {sigma}")));
        }
        Ok(ConformalMetric { phi: ConformalExponent::Bump { amplitude, sigma, center }, nonnegative_ricci: false })
    }

    /// `φ = -(x² + y²)/(4s)`: positive curvature `K = e^{-2φ}/s`.
    pub fn spherical_cap(s: f64) -> Self {
        let c = -0.25 / s;
        ConformalMetric {
            phi: ConformalExponent::Poly(Poly2::new(vec![0.0, 0.0, 0.0, c, 0.0, c]).unwrap()),
            nonnegative_ricci: true,
        }
    }

    pub fn exponent(&self) -> &ConformalExponent {
        &self.phi
    }

    /// True only for the dedicated flat metric, which takes the Euclidean fast
    /// path everywhere. A zero polynomial is flat too but is evaluated through
    /// the conformal formulas.
    pub fn is_flat(&self) -> bool {
        matches!(self.phi, ConformalExponent::Zero)
    }

    pub fn nonnegative_ricci(&self) -> bool {
        self.nonnegative_ricci
    }

    /// Declares `Ric ≥ 0`, verified as `Δφ ≤ 1e-12` at every quadrature point.
    pub fn declare_nonnegative_ricci(mut self, mesh: &TriMesh) -> Result<Self> {
        if let Some(q) = mesh.quadrature().iter().find(|q| self.jet(&q.position).laplacian() > RICCI_TOL) {
            return Err(Error::Validation(format!(
                "metric has negative curvature at ({:.4}, {:.4}): Δφ = {:e}",
                q.position.x,
                q.position.y,
                self.jet(&q.position).laplacian()
            )));
        }
        self.nonnegative_ricci = true;
        Ok(self)
    }

    /// Whether `Δφ ≤ 1e-12` holds at every quadrature point of `mesh`.
    pub fn has_nonnegative_ricci_on(&self, mesh: &TriMesh) -> bool {
        mesh.quadrature().iter().all(|q| self.jet(&q.position).laplacian() <= RICCI_TOL)
    }

    pub fn phi(&self, x: &Vec2) -> f64 {
        match &self.phi {
            ConformalExponent::Zero => 0.0,
            ConformalExponent::Constant(c) => *c,
            ConformalExponent::Poly(p) => p.eval(x.x, x.y),
            ConformalExponent::Bump { amplitude, sigma, center } => {
                amplitude * (-(x - center).norm_squared() / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    pub fn jet(&self, x: &Vec2) -> PhiJet {
        match &self.phi {
            ConformalExponent::Zero => PhiJet { value: 0.0, grad: Vec2::zeros(), hess: Matrix2::zeros() },
            ConformalExponent::Constant(c) => PhiJet { value: *c, grad: Vec2::zeros(), hess: Matrix2::zeros() },
            ConformalExponent::Poly(p) => {
                let g = p.grad(x.x, x.y);
                let h = p.hess(x.x, x.y);
                PhiJet {
                    value: p.eval(x.x, x.y),
                    grad: Vec2::new(g[0], g[1]),
                    hess: Matrix2::new(h[0][0], h[0][1], h[1][0], h[1][1]),
                }
            }
            ConformalExponent::Bump { amplitude, sigma, center } => {
                let d = x - center;
                let s2 = sigma * sigma;
                let v = amplitude * (-d.norm_squared() / (2.0 * s2)).exp();
                PhiJet {
                    value: v,
                    grad: -d * (v / s2),
                    hess: (d * d.transpose() / (s2 * s2) - Matrix2::identity() / s2) * v,
                }
            }
        }
    }

    /// Degree-3 Taylor expansion of `φ` around `x`.
    pub fn taylor(&self, x: &Vec2) -> Taylor {
        match &self.phi {
            ConformalExponent::Zero => Taylor::constant(0.0),
            ConformalExponent::Constant(c) => Taylor::constant(*c),
            ConformalExponent::Poly(p) => p.taylor(x.x, x.y),
            ConformalExponent::Bump { amplitude, sigma, center } => {
                let dx = Taylor::var_x(x.x - center.x);
                let dy = Taylor::var_y(x.y - center.y);
                ((dx * dx + dy * dy) * (-0.5 / (sigma * sigma))).exp() * *amplitude
            }
        }
    }

    /// Gaussian curvature `K = -e^{-2φ}Δφ`.
    pub fn gaussian_curvature(&self, x: &Vec2) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        let j = self.jet(x);
        -(-2.0 * j.value).exp() * j.laplacian()
    }

    /// `Ric(v, v) = K·|v|²_g` for a coordinate vector `v`.
    pub fn ricci_quadratic(&self, x: &Vec2, v: &Vec2) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        let j = self.jet(x);
        self.gaussian_curvature(x) * (2.0 * j.value).exp() * v.norm_squared()
    }

    /// Conformal factor of lengths, `e^φ`.
    pub fn length_factor(&self, x: &Vec2) -> f64 {
        if self.is_flat() {
            1.0
        } else {
            self.phi(x).exp()
        }
    }

    /// Conformal factor of areas, `e^{2φ}`.
    pub fn area_factor(&self, x: &Vec2) -> f64 {
        if self.is_flat() {
            1.0
        } else {
            (2.0 * self.phi(x)).exp()
        }
    }

    /// Geodesic curvature of the boundary in `g`: `κ_g = e^{-φ}(κ + ∂_νφ)`.
    pub fn geodesic_boundary_curvature(&self, bg: &BoundaryGeometry) -> Vec<f64> {
        bg.nodes
            .iter()
            .map(|n| {
                if self.is_flat() {
                    n.curvature
                } else {
                    let j = self.jet(&n.position);
                    (-j.value).exp() * (n.curvature + j.grad.dot(&n.normal))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_geometry, build_mesh, DomainSpec};

    #[test]
    fn curvature_catalogue() {
        let o = Vec2::zeros();
        assert_eq!(ConformalMetric::flat().gaussian_curvature(&o), 0.0);
        assert_eq!(ConformalMetric::constant(0.7).gaussian_curvature(&Vec2::new(0.3, 0.1)), 0.0);
        let m = ConformalMetric::spherical_cap(1.0);
        assert!((m.gaussian_curvature(&o) - 1.0).abs() < 1e-15);
        assert!((m.ricci_quadratic(&o, &Vec2::new(1.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((m.ricci_quadratic(&o, &Vec2::new(2.0, 0.0)) - 4.0).abs() < 1e-14);
        assert_eq!(ConformalMetric::flat().ricci_quadratic(&o, &Vec2::new(3.0, 1.0)), 0.0);
    }

    #[test]
    fn geodesic_curvature_of_circles() {
        let spec = DomainSpec::disk(1.0);
        let mesh = build_mesh(&spec, 0.2).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        for k in ConformalMetric::flat().geodesic_boundary_curvature(&bg) {
            assert!((k - 1.0).abs() < 1e-14);
        }
        for k in ConformalMetric::constant(0.3).geodesic_boundary_curvature(&bg) {
            assert!((k - (-0.3f64).exp()).abs() < 1e-14);
        }
        let expected = 0.25f64.exp() * 0.5;
        for k in ConformalMetric::spherical_cap(1.0).geodesic_boundary_curvature(&bg) {
            assert!((k - expected).abs() < 1e-12);
        }
        assert!((expected - 0.64201).abs() < 1e-5);
    }

    #[test]
    fn bump_jet_matches_taylor() {
        let m = ConformalMetric::bump(0.4, 0.6, Vec2::new(0.1, -0.2)).unwrap();
        let x = Vec2::new(0.35, 0.2);
        let j = m.jet(&x);
        let t = m.taylor(&x);
        assert!((j.value - t.value()).abs() < 1e-15);
        assert!((j.grad.x - t.grad()[0]).abs() < 1e-14);
        assert!((j.hess[(0, 1)] - t.hess()[0][1]).abs() < 1e-14);
        assert!((j.hess[(1, 1)] - t.hess()[1][1]).abs() < 1e-14);
    }

    #[test]
    fn spec_parsing() {
        let spec: MetricSpec = serde_json::from_str(r#"{"kind":"poly","params":[0,0,0,-0.25,0,-0.25]}"#).unwrap();
        assert_eq!(spec.build().unwrap(), ConformalMetric::poly(vec![0.0, 0.0, 0.0, -0.25, 0.0, -0.25]).unwrap());
        let bad = MetricSpec { kind: MetricKind::Constant, params: vec![] };
        assert!(bad.build().is_err());
        assert!(serde_json::from_str::<MetricSpec>(r#"{"kind":"flat","extra":1}"#).is_err());
    }

    #[test]
    fn nonnegative_ricci_declaration_is_checked() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.2).unwrap();
        let good = ConformalMetric::poly(vec![0.0, 0.0, 0.0, -0.125, 0.0, -0.125]).unwrap();
        assert!(good.declare_nonnegative_ricci(&mesh).unwrap().nonnegative_ricci());
        let bad = ConformalMetric::poly(vec![0.0, 0.0, 0.0, 0.125, 0.0, 0.125]).unwrap();
        assert!(bad.declare_nonnegative_ricci(&mesh).is_err());
    }
}
