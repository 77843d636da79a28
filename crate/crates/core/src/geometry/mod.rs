//! Planar domains with smooth parametric boundaries.
//!
//! Boundary data (positions, outward normals, curvature, arc-length weights)
//! always come from the parametric curve; the polygonal mesh boundary is only
//! used for the finite-element discretization.

mod boundary;
mod curve;
mod mesh;

pub use boundary::{boundary_geometry, domain_measures, BoundaryGeometry, BoundaryNode, DomainMeasures};
pub use curve::BoundaryCurve;
pub use mesh::{build_mesh, build_mesh_with, MeshOptions, QuadPoint, TriMesh};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Smallest admissible value of the polar-star radius relative to `r0`.
const POLAR_MIN_RATIO: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        radius: f64,
    },
    /// Semi-axes `a ≥ b > 0` along x and y.
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `r(θ) = r0 + Σ_k cos[k-1]·cos(kθ) + sin[k-1]·sin(kθ)`.
    PolarStar {
        r0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Annulus {
        inner: f64,
        outer: f64,
    },
}

impl DomainSpec {
    pub fn disk(radius: f64) -> Self {
        DomainSpec::Disk { radius }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        DomainSpec::Ellipse { a, b }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be strictly positive, got {v}")))
            }
        };
        match self {
            DomainSpec::Disk { radius } => positive("disk radius", *radius),
            DomainSpec::Ellipse { a, b } => {
                positive("ellipse semi-axis a", *a)?;
                positive("ellipse semi-axis b", *b)?;
                if a < b {
                    return Err(Error::Validation(format!("ellipse requires a ≥ b, got a = {a}, b = {b}")));
                }
                Ok(())
            }
            DomainSpec::PolarStar { r0, cos, sin } => {
                positive("polar_star r0", *r0)?;
                if cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(Error::Validation("polar_star coefficient is not finite".into()));
                }
                let curve = BoundaryCurve::Polar { r0: *r0, cos: cos.clone(), sin: sin.clone(), clockwise: false };
                let samples = 4096;
                let r_min = (0..samples)
                    .map(|k| curve.polar_radius(std::f64::consts::TAU * k as f64 / samples as f64))
                    .fold(f64::INFINITY, f64::min);
                if r_min < POLAR_MIN_RATIO * r0 {
                    return Err(Error::Validation(format!(
                        "polar_star radius function must stay ≥ {:.3e}; sampled minimum {r_min:.3e} (self-intersecting or degenerate boundary)",
                        POLAR_MIN_RATIO * r0
                    )));
                }
                Ok(())
            }
            DomainSpec::Annulus { inner, outer } => {
                positive("annulus inner radius", *inner)?;
                positive("annulus outer radius", *outer)?;
                if inner >= outer {
                    return Err(Error::Validation(format!(
                        "annulus requires inner < outer, got {inner} ≥ {outer}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Boundary loops, outer first, each oriented with the domain on its left.
    pub fn loops(&self) -> Vec<BoundaryCurve> {
        match self {
            DomainSpec::Disk { radius } => vec![BoundaryCurve::Circle { radius: *radius, clockwise: false }],
            DomainSpec::Ellipse { a, b } => vec![BoundaryCurve::Ellipse { a: *a, b: *b }],
            DomainSpec::PolarStar { r0, cos, sin } => {
                vec![BoundaryCurve::Polar { r0: *r0, cos: cos.clone(), sin: sin.clone(), clockwise: false }]
            }
            DomainSpec::Annulus { inner, outer } => vec![
                BoundaryCurve::Circle { radius: *outer, clockwise: false },
                BoundaryCurve::Circle { radius: *inner, clockwise: true },
            ],
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Disk { radius } => 2.0 * radius,
            DomainSpec::Ellipse { a, .. } => 2.0 * a,
            DomainSpec::Annulus { outer, .. } => 2.0 * outer,
            DomainSpec::PolarStar { .. } => {
                let curve = &self.loops()[0];
                let n = 2048;
                let pts: Vec<Vec2> =
                    (0..n).map(|k| curve.position(std::f64::consts::TAU * k as f64 / n as f64)).collect();
                let mut d: f64 = 0.0;
                for (i, a) in pts.iter().enumerate().step_by(8) {
                    for b in &pts[i..] {
                        d = d.max((a - b).norm());
                    }
                }
                d
            }
        }
    }

    /// Whether `x` lies strictly inside the exact (curved) domain.
    pub fn contains(&self, x: &Vec2) -> bool {
        match self {
            DomainSpec::Disk { radius } => x.norm() < *radius,
            DomainSpec::Ellipse { a, b } => (x.x / a).powi(2) + (x.y / b).powi(2) < 1.0,
            DomainSpec::PolarStar { .. } => {
                let theta = x.y.atan2(x.x);
                x.norm() < self.loops()[0].polar_radius(theta)
            }
            DomainSpec::Annulus { inner, outer } => {
                let r = x.norm();
                r > *inner && r < *outer
            }
        }
    }

    /// Disks, ellipses and polar stars with positive curvature everywhere.
    pub fn is_convex(&self) -> bool {
        match self {
            DomainSpec::Disk { .. } | DomainSpec::Ellipse { .. } => true,
            DomainSpec::Annulus { .. } => false,
            DomainSpec::PolarStar { .. } => {
                let curve = &self.loops()[0];
                (0..4096).all(|k| curve.curvature(std::f64::consts::TAU * k as f64 / 4096.0) > 0.0)
            }
        }
    }

    pub fn is_disk(&self) -> bool {
        match self {
            DomainSpec::Disk { .. } => true,
            DomainSpec::Ellipse { a, b } => a == b,
            DomainSpec::PolarStar { cos, sin, .. } => cos.iter().chain(sin).all(|&c| c == 0.0),
            DomainSpec::Annulus { .. } => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_ellipse_is_rejected() {
        let err = DomainSpec::ellipse(0.0, 1.0).validate().unwrap_err();
        assert!(err.to_string().contains("semi-axis a"), "{err}");
        assert!(DomainSpec::ellipse(1.0, 2.0).validate().is_err());
    }

    #[test]
    fn polar_star_must_stay_positive() {
        let bad = DomainSpec::PolarStar { r0: 1.0, cos: vec![0.0, 0.0, 1.2], sin: vec![] };
        assert!(bad.validate().is_err());
        let ok = DomainSpec::PolarStar { r0: 1.0, cos: vec![0.0, 0.0, 0.1], sin: vec![] };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let spec: DomainSpec = serde_json::from_str(r#"{"kind":"ellipse","a":2,"b":1}"#).unwrap();
        assert_eq!(spec, DomainSpec::ellipse(2.0, 1.0));
        assert!(serde_json::from_str::<DomainSpec>(r#"{"kind":"disk","radius":1,"r":2}"#).is_err());
    }
}
