use std::f64::consts::TAU;

use super::Vec2;
use crate::quadrature::{composite_gauss, gauss_legendre};

/// A closed C^∞ curve parametrized over `t ∈ [0, 2π)`.
///
/// `clockwise` reverses the traversal so the domain stays on the left.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCurve {
    Circle { radius: f64, clockwise: bool },
    Ellipse { a: f64, b: f64 },
    Polar { r0: f64, cos: Vec<f64>, sin: Vec<f64>, clockwise: bool },
}

impl BoundaryCurve {
    fn clockwise(&self) -> bool {
        match self {
            BoundaryCurve::Circle { clockwise, .. } | BoundaryCurve::Polar { clockwise, .. } => *clockwise,
            BoundaryCurve::Ellipse { .. } => false,
        }
    }

    /// Radius function of a polar curve and its first two θ-derivatives.
    fn polar_jet(r0: f64, cos: &[f64], sin: &[f64], theta: f64) -> [f64; 3] {
        let mut r = [r0, 0.0, 0.0];
        for (k, c) in cos.iter().enumerate() {
            let m = (k + 1) as f64;
            let (s, co) = (m * theta).sin_cos();
            r[0] += c * co;
            r[1] -= c * m * s;
            r[2] -= c * m * m * co;
        }
        for (k, c) in sin.iter().enumerate() {
            let m = (k + 1) as f64;
            let (s, co) = (m * theta).sin_cos();
            r[0] += c * s;
            r[1] += c * m * co;
            r[2] -= c * m * m * s;
        }
        r
    }

    pub fn polar_radius(&self, theta: f64) -> f64 {
        match self {
            BoundaryCurve::Circle { radius, .. } => *radius,
            BoundaryCurve::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt()
            }
            BoundaryCurve::Polar { r0, cos, sin, .. } => Self::polar_jet(*r0, cos, sin, theta)[0],
        }
    }

    /// Position and first two derivatives with respect to the curve's own
    /// (possibly reversed) parameter.
    pub fn jet(&self, t: f64) -> [Vec2; 3] {
        let (sign, s) = if self.clockwise() { (-1.0, -t) } else { (1.0, t) };
        let [p, d1, d2] = match self {
            BoundaryCurve::Circle { radius, .. } => {
                let (sn, cs) = s.sin_cos();
                [
                    Vec2::new(radius * cs, radius * sn),
                    Vec2::new(-radius * sn, radius * cs),
                    Vec2::new(-radius * cs, -radius * sn),
                ]
            }
            BoundaryCurve::Ellipse { a, b } => {
                let (sn, cs) = s.sin_cos();
                [Vec2::new(a * cs, b * sn), Vec2::new(-a * sn, b * cs), Vec2::new(-a * cs, -b * sn)]
            }
            BoundaryCurve::Polar { r0, cos, sin, .. } => {
                let [r, dr, ddr] = Self::polar_jet(*r0, cos, sin, s);
                let (sn, cs) = s.sin_cos();
                [
                    Vec2::new(r * cs, r * sn),
                    Vec2::new(dr * cs - r * sn, dr * sn + r * cs),
                    Vec2::new(ddr * cs - 2.0 * dr * sn - r * cs, ddr * sn + 2.0 * dr * cs - r * sn),
                ]
            }
        };
        [p, d1 * sign, d2]
    }

    pub fn position(&self, t: f64) -> Vec2 {
        self.jet(t)[0]
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.jet(t)[1].norm()
    }

    /// Unit normal pointing out of the domain (right-hand normal of the traversal).
    pub fn outward_normal(&self, t: f64) -> Vec2 {
        let d = self.jet(t)[1];
        Vec2::new(d.y, -d.x) / d.norm()
    }

    /// Signed curvature with respect to the outward normal; positive on convex
    /// outer boundaries, negative on the inner loop of an annulus.
    pub fn curvature(&self, t: f64) -> f64 {
        if let BoundaryCurve::Circle { radius, clockwise } = self {
            return if *clockwise { -1.0 / radius } else { 1.0 / radius };
        }
        let [_, d1, d2] = self.jet(t);
        (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3)
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            BoundaryCurve::Circle { radius, .. } => TAU * radius,
            _ => composite_gauss(|t| self.speed(t), 0.0, TAU, 256, 10),
        }
    }

    /// Foot point parameter of `x` (Newton on the squared distance, started at
    /// `t0`) and the depth of `x` along the inward normal there.
    pub fn project(&self, x: &Vec2, t0: f64) -> (f64, f64) {
        let mut t = t0;
        for _ in 0..50 {
            let [p, d1, d2] = self.jet(t);
            let f = (p - x).dot(&d1);
            let fp = d1.norm_squared() + (p - x).dot(&d2);
            let step = if fp > 0.0 { f / fp } else { f / d1.norm_squared() };
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let depth = -(x - self.position(t)).dot(&self.outward_normal(t));
        (t, depth)
    }

    /// Parameters of `n` points equally spaced in arc length, starting at `t = 0`.
    pub fn equal_arc_parameters(&self, n: usize) -> Vec<f64> {
        if let BoundaryCurve::Circle { .. } = self {
            return (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        }
        let total = self.perimeter();
        let ds = total / n as f64;
        let (gx, gw) = gauss_legendre(16);
        let arc = |a: f64, b: f64| -> f64 {
            let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
            h * gx.iter().zip(&gw).map(|(x, w)| w * self.speed(m + h * x)).sum::<f64>()
        };
        let mut params = Vec::with_capacity(n);
        params.push(0.0);
        let mut t_prev = 0.0;
        for _ in 1..n {
            let mut t = t_prev + ds / self.speed(t_prev);
            for _ in 0..50 {
                let f = arc(t_prev, t) - ds;
                let step = f / self.speed(t);
                t -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            params.push(t);
            t_prev = t;
        }
        params
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_curvature_extrema() {
        let e = BoundaryCurve::Ellipse { a: 2.0, b: 1.0 };
        assert!((e.curvature(0.0) - 2.0).abs() < 1e-14);
        assert!((e.curvature(TAU / 4.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn clockwise_circle_has_negative_curvature_and_inward_normal() {
        let c = BoundaryCurve::Circle { radius: 0.5, clockwise: true };
        assert!((c.curvature(0.3) + 2.0).abs() < 1e-14);
        let p = c.position(0.3);
        let n = c.outward_normal(0.3);
        assert!((n + p / p.norm()).norm() < 1e-14);
    }

    #[test]
    fn projection_recovers_depth_along_the_normal() {
        let e = BoundaryCurve::Ellipse { a: 2.0, b: 1.0 };
        for t in [0.0, 0.4, 2.5, 5.9] {
            let x = e.position(t) - e.outward_normal(t) * 0.2;
            let (tf, d) = e.project(&x, t + 0.05);
            assert!((tf - t).abs() < 1e-12);
            assert!((d - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_curve_with_no_harmonics_is_a_circle() {
        let p = BoundaryCurve::Polar { r0: 1.5, cos: vec![], sin: vec![], clockwise: false };
        for t in [0.0, 0.7, 2.0] {
            assert!((p.curvature(t) - 1.0 / 1.5).abs() < 1e-14);
        }
        assert!((p.perimeter() - TAU * 1.5).abs() < 1e-12);
    }

    #[test]
    fn equal_arc_spacing_closes_the_loop() {
        let e = BoundaryCurve::Ellipse { a: 2.0, b: 1.0 };
        let n = 64;
        let t = e.equal_arc_parameters(n);
        // by symmetry the midpoint parameter is π
        assert!((t[n / 2] - TAU / 2.0).abs() < 1e-10);
        assert!((t[n / 4] - TAU / 4.0).abs() < 1e-10);
    }
}
