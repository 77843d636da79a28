//! Closed-form fields and exact-derivative evaluation of every pointwise
//! quantity.
//!
//! Two independent routes are provided. The frame route converts exact
//! coordinate derivatives into an orthonormal-frame [`Jet`] and applies the
//! expanded formulas of [`super::jet`]. The divergence route works in
//! truncated Taylor arithmetic on the divergence forms
//! `Δₚᵍu = e^{-2φ} div(e^{(2-p)φ}|∇u|^{p-2}∇u)` and its linearization, never
//! touching a Hessian formula. Agreement of the two is the oracle check.

use nalgebra::{Matrix2, Vector2};

use super::jet::{self, Jet};
use crate::geometry::Vec2;
use crate::metric::{ConformalMetric, PhiJet};
use crate::oracles::{radial_exact, RadialProfile};
use crate::poly::Poly2;
use crate::taylor::Taylor;
use crate::{Error, Result};

/// Closed-form scalar field with exact derivatives through order three.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticField {
    /// Polynomial of degree at most 4.
    Poly(Poly2),
    /// `profile(|x - center|)`; evaluated only away from the center.
    Radial { profile: RadialProfile, center: Vec2 },
}

impl AnalyticField {
    /// Polynomial in graded coefficient order `1, x, y, x², xy, y², …`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Ok(AnalyticField::Poly(Poly2::new(coeffs)?))
    }

    /// Exact torsion profile translated to `center`.
    pub fn radial(n: usize, p: f64, radius: f64, center: Vec2) -> Result<Self> {
        Ok(AnalyticField::Radial { profile: radial_exact(n, p, radius)?, center })
    }

    /// Degree-3 Taylor expansion at `x`.
    pub fn taylor(&self, x: &Vec2) -> Taylor {
        match self {
            AnalyticField::Poly(p) => p.taylor(x.x, x.y),
            AnalyticField::Radial { profile, center } => {
                let dx = Taylor::var_x(x.x - center.x);
                let dy = Taylor::var_y(x.y - center.y);
                let r = (dx * dx + dy * dy).sqrt();
                let d = profile.derivatives(r.value()).expect("radial fields hold exact profiles");
                r.compose(d)
            }
        }
    }

    /// Whether all derivatives through order three are finite at `x`.
    pub fn is_regular_at(&self, x: &Vec2) -> bool {
        match self {
            AnalyticField::Poly(_) => true,
            AnalyticField::Radial { center, .. } => (x - center).norm() > 1e-6,
        }
    }

    pub fn value(&self, x: &Vec2) -> f64 {
        self.taylor(x).value()
    }

    /// `∂x^i ∂y^j u`, `i + j ≤ 3`.
    pub fn derivative(&self, i: usize, j: usize, x: &Vec2) -> f64 {
        self.taylor(x).derivative(i, j)
    }

    pub fn grad(&self, x: &Vec2) -> Vec2 {
        let g = self.taylor(x).grad();
        Vec2::new(g[0], g[1])
    }

    pub fn hess(&self, x: &Vec2) -> Matrix2<f64> {
        let h = self.taylor(x).hess();
        Matrix2::new(h[0][0], h[0][1], h[1][0], h[1][1])
    }

    /// Orthonormal-frame jet in the metric `g`.
    pub fn jet(&self, metric: &ConformalMetric, x: &Vec2) -> Jet<2> {
        let t = self.taylor(x);
        frame_jet(metric, x, t.value(), self.grad(x), self.hess(x))
    }
}

/// Converts coordinate derivatives to orthonormal-frame components of
/// `g = e^{2φ}δ`: `∇u ↦ e^{-φ}du`, `∇²u ↦ e^{-2φ}(∂²u - Γ·du)` with the
/// Christoffel term `φ_j u_i + φ_i u_j - δ_ij ⟨∇φ, ∇u⟩`.
pub fn frame_jet(metric: &ConformalMetric, x: &Vec2, value: f64, grad: Vec2, hess: Matrix2<f64>) -> Jet<2> {
    if metric.is_flat() {
        return Jet::new(value, grad, hess);
    }
    frame_jet_with(&metric.jet(x), value, grad, hess)
}

pub(crate) fn frame_jet_with(phi: &PhiJet, value: f64, grad: Vec2, hess: Matrix2<f64>) -> Jet<2> {
    let christoffel = phi.grad * grad.transpose() + grad * phi.grad.transpose()
        - Matrix2::identity() * phi.grad.dot(&grad);
    let s = (-phi.value).exp();
    Jet::new(value, grad * s, (hess - christoffel) * (s * s))
}

/// `Ric(∇u, ∇u) = K|∇u|²_g` from a frame jet.
pub fn ricci_term(metric: &ConformalMetric, x: &Vec2, u: &Jet<2>) -> f64 {
    if metric.is_flat() {
        return 0.0;
    }
    metric.gaussian_curvature(x) * u.grad.norm_squared()
}

fn phi_taylor(metric: &ConformalMetric, x: &Vec2) -> Taylor {
    metric.taylor(x)
}

fn squared_coord_grad(u: &Taylor) -> Taylor {
    let (ux, uy) = (u.dx(), u.dy());
    ux * ux + uy * uy
}

/// Divergence-form p-Laplacian as a Taylor series, exact through degree
/// `deg(u) - 2`.
pub fn oracle_p_laplacian(u: &Taylor, phi: &Taylor, p: f64) -> Taylor {
    let (ux, uy) = (u.dx(), u.dy());
    let weight = (*phi * (2.0 - p)).exp() * squared_coord_grad(u).powf((p - 2.0) / 2.0);
    let div = (weight * ux).dx() + (weight * uy).dy();
    (*phi * -2.0).exp() * div
}

/// Divergence-form linearized operator
/// `e^{-2φ} div(e^{(2-p)φ}(|∇u|^{p-2}∇η + (p-2)|∇u|^{p-4}⟨∇u,∇η⟩∇u))` at the
/// base point.
pub fn oracle_linearized(u: &Taylor, eta: &Taylor, phi: &Taylor, p: f64) -> f64 {
    let (ux, uy) = (u.dx(), u.dy());
    let (ex, ey) = (eta.dx(), eta.dy());
    let g2 = squared_coord_grad(u);
    let conf = (*phi * (2.0 - p)).exp();
    let a = conf * g2.powf((p - 2.0) / 2.0);
    let b = conf * g2.powf((p - 4.0) / 2.0) * (ux * ex + uy * ey) * (p - 2.0);
    let vx = a * ex + b * ux;
    let vy = a * ey + b * uy;
    ((*phi * -2.0).exp() * (vx.dx() + vy.dy())).value()
}

/// `P = ((p-1)/p)|∇u|_g^p + u/2` as a Taylor series.
pub fn oracle_p_function(u: &Taylor, phi: &Taylor, p: f64) -> Taylor {
    let g2 = (*phi * -2.0).exp() * squared_coord_grad(u);
    g2.powf(p / 2.0) * ((p - 1.0) / p) + u.scale(0.5)
}

/// Frame jet of a Taylor series in the metric.
fn taylor_frame_jet(t: &Taylor, phi: &PhiJet) -> Jet<2> {
    let g = t.grad();
    let h = t.hess();
    frame_jet_with(phi, t.value(), Vector2::new(g[0], g[1]), Matrix2::new(h[0][0], h[0][1], h[1][0], h[1][1]))
}

fn phi_jet_of(metric: &ConformalMetric, x: &Vec2) -> PhiJet {
    metric.jet(x)
}

/// Everything needed to compare the two routes at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseCheck {
    /// `Δₚu` from the frame formula and from the divergence form.
    pub p_laplacian: (f64, f64),
    /// `𝓛ᵤP` from the expanded non-divergence formula applied to `P`, from the
    /// closed-form expansion, and from the divergence form.
    pub lu_p: (f64, f64, f64),
    pub bochner_residual: f64,
}

/// `⟨∇Δₚu, ∇u⟩_g` at `x` via the divergence-form series.
fn grad_p_laplacian_dot_grad(u: &Taylor, phi_t: &Taylor, phi: &PhiJet, p: f64) -> f64 {
    let dp = oracle_p_laplacian(u, phi_t, p);
    let a = dp.grad();
    let b = u.grad();
    (-2.0 * phi.value).exp() * (a[0] * b[0] + a[1] * b[1])
}

/// `Δₚu` by the frame formula; `None` at critical points.
pub fn p_laplacian_at(field: &AnalyticField, metric: &ConformalMetric, p: f64, x: &Vec2) -> Option<f64> {
    field.jet(metric, x).p_laplacian(p)
}

/// `𝓛ᵤη` by the expanded formula with exact derivatives.
pub fn linearized_apply_at(
    u: &AnalyticField,
    eta: &AnalyticField,
    metric: &ConformalMetric,
    p: f64,
    x: &Vec2,
) -> Option<f64> {
    jet::linearized_apply(&u.jet(metric, x), &eta.jet(metric, x), p)
}

/// `𝓛ᵤη` by the divergence form.
pub fn linearized_oracle_at(
    u: &AnalyticField,
    eta: &AnalyticField,
    metric: &ConformalMetric,
    p: f64,
    x: &Vec2,
) -> f64 {
    oracle_linearized(&u.taylor(x), &eta.taylor(x), &phi_taylor(metric, x), p)
}

/// `𝓛ᵤP` by the general expansion, including the third-order term
/// `(p-1)|∇u|^{p-2}⟨∇Δₚu,∇u⟩` (exact here; never estimated on discrete fields).
pub fn lu_p_expansion_at(field: &AnalyticField, metric: &ConformalMetric, p: f64, x: &Vec2) -> Option<f64> {
    let t = field.taylor(x);
    let phi = phi_jet_of(metric, x);
    let u = taylor_frame_jet(&t, &phi);
    let third = grad_p_laplacian_dot_grad(&t, &phi_taylor(metric, x), &phi, p);
    jet::lu_p_expansion(&u, p, ricci_term(metric, x, &u), third)
}

/// p-Bochner residual `(1/p)𝓛ᴵᴵ(|∇u|^p) - RHS` at `x`; `None` at critical points.
pub fn p_bochner_residual(field: &AnalyticField, metric: &ConformalMetric, p: f64, x: &Vec2) -> Option<f64> {
    let t = field.taylor(x);
    let phi_t = phi_taylor(metric, x);
    let phi = phi_jet_of(metric, x);
    let u = taylor_frame_jet(&t, &phi);
    let coeffs = u.linearized_coefficients(p)?;
    let f = ((phi_t * -2.0).exp() * squared_coord_grad(&t)).powf(p / 2.0);
    let f_jet = taylor_frame_jet(&f, &phi);
    let lhs = coeffs.component_mul(&f_jet.hess).sum() / p;
    let rhs = jet::bochner_rhs(&u, p, ricci_term(metric, x, &u), grad_p_laplacian_dot_grad(&t, &phi_t, &phi, p))?;
    Some(lhs - rhs)
}

/// Evaluates every route at `x`. Fails if `∇u(x) = 0` or the field is singular
/// there.
pub fn pointwise_check(field: &AnalyticField, metric: &ConformalMetric, p: f64, x: &Vec2) -> Result<PointwiseCheck> {
    if !field.is_regular_at(x) {
        return Err(Error::Precondition(format!("field is singular at ({}, {})", x.x, x.y)));
    }
    let undefined = || Error::Precondition(format!("critical point at ({}, {})", x.x, x.y));
    let t = field.taylor(x);
    let phi_t = phi_taylor(metric, x);
    let phi = phi_jet_of(metric, x);
    let u = taylor_frame_jet(&t, &phi);
    let dp_frame = u.p_laplacian(p).ok_or_else(undefined)?;
    let dp_div = oracle_p_laplacian(&t, &phi_t, p).value();
    let pf = oracle_p_function(&t, &phi_t, p);
    let lu_p_frame = jet::linearized_apply(&u, &taylor_frame_jet(&pf, &phi), p).ok_or_else(undefined)?;
    let lu_p_expansion = lu_p_expansion_at(field, metric, p, x).ok_or_else(undefined)?;
    let lu_p_div = oracle_linearized(&t, &pf, &phi_t, p);
    Ok(PointwiseCheck {
        p_laplacian: (dp_frame, dp_div),
        lu_p: (lu_p_frame, lu_p_expansion, lu_p_div),
        bochner_residual: p_bochner_residual(field, metric, p, x).ok_or_else(undefined)?,
    })
}

/// Test-function catalogue: polynomials up to degree 4 and translated radial
/// torsion profiles.
pub fn catalogue() -> Vec<(String, AnalyticField)> {
    let polys: [(&str, &[f64]); 16] = [
        ("linear", &[0.3, 1.0, -0.5]),
        ("quadratic_bowl", &[0.25, 0.0, 0.0, -0.25, 0.0, -0.25]),
        ("quadratic_saddle", &[0.0, 0.2, 0.1, 0.5, 0.0, -0.5]),
        ("quadratic_mixed", &[0.1, -0.3, 0.7, 0.4, 0.9, 0.2]),
        ("ellipse_torsion", &[0.4, 0.0, 0.0, -0.1, 0.0, -0.4]),
        ("cubic_x", &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0 / 3.0]),
        ("cubic_mixed", &[0.0, 0.5, -0.5, 0.0, 0.2, 0.0, 0.1, -0.3, 0.2, 0.4]),
        ("cubic_harmonic", &[0.0, 0.7, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -3.0, 0.0]),
        ("cubic_y", &[1.0, 0.0, 1.2, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, -0.2]),
        ("quartic_bochner", &[0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0 / 12.0]),
        ("quartic_radial", &[0.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.5, 0.0, 0.25]),
        ("quartic_mixed", &[0.1, 0.2, 0.3, -0.4, 0.5, -0.6, 0.7, -0.8, 0.9, -1.0, 0.1, 0.2, -0.3, 0.4, -0.5]),
        ("quartic_xy", &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0]),
        ("quartic_tilted", &[0.0, -0.6, 0.9, 0.2, 0.0, 0.1, 0.0, 0.05, 0.0, 0.0, 0.02, -0.04, 0.0, 0.03, 0.01]),
        ("quartic_steep", &[0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -0.1, 0.0, 0.0, 0.0, 0.2]),
        ("quartic_wave", &[0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.15, 0.0, -0.15, 0.0]),
    ];
    let mut out: Vec<(String, AnalyticField)> = polys
        .iter()
        .map(|(name, c)| (name.to_string(), AnalyticField::polynomial(c.to_vec()).expect("catalogue coefficients")))
        .collect();
    let radial = [
        (2usize, 2.0, 1.0, Vec2::new(0.0, 0.0)),
        (2, 1.5, 1.0, Vec2::new(0.1, -0.2)),
        (2, 3.0, 1.0, Vec2::new(-0.3, 0.0)),
        (2, 4.0, 1.5, Vec2::new(0.2, 0.2)),
        (3, 2.5, 1.2, Vec2::new(0.0, 0.4)),
        (4, 1.8, 0.9, Vec2::new(-0.1, -0.1)),
    ];
    for (n, p, r, c) in radial {
        out.push((
            format!("radial_n{n}_p{p}_r{r}"),
            AnalyticField::radial(n, p, r, c).expect("catalogue profile"),
        ));
    }
    out
}
