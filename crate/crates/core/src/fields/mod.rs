//! Discrete and analytic scalar fields and the pointwise quantities built on
//! their derivatives.
//!
//! A discrete field lives on mesh vertices. [`recover_derivatives`] turns it
//! into a [`DerivativeBundle`]: recovered gradient and Hessian at every
//! quadrature point, converted to an orthonormal frame of the metric, plus the
//! critical-set mask. Pointwise operations return `None` on masked points.

pub mod analytic;
pub mod jet;
mod locate;
mod recovery;

use std::io::Write;

use nalgebra::Matrix2;

pub use analytic::{catalogue, AnalyticField, PointwiseCheck};
pub use jet::Jet;
pub use locate::PointLocator;
pub use recovery::{boundary_ring_depth, NodalDerivatives, Recovery, RecoveryMethod, RecoveryOptions};

use crate::geometry::{BoundaryGeometry, TriMesh, Vec2};
use crate::metric::ConformalMetric;
use crate::par::{compensated_sum, map_slice};
use crate::{Error, Result};

/// Nodal values on a specific mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh_id: u64,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: &TriMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::SizeMismatch { expected: mesh.n_vertices(), actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("field value at vertex {i} is not finite")));
        }
        Ok(ScalarField { mesh_id: mesh.id(), values })
    }

    pub fn zeros(mesh: &TriMesh) -> Self {
        ScalarField { mesh_id: mesh.id(), values: vec![0.0; mesh.n_vertices()] }
    }

    pub fn from_fn(mesh: &TriMesh, f: impl Fn(&Vec2) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.vertices().iter().map(f).collect())
    }

    pub fn interpolate(mesh: &TriMesh, field: &AnalyticField) -> Result<Self> {
        Self::from_fn(mesh, |x| field.value(x))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        if self.mesh_id != mesh.id() || self.values.len() != mesh.n_vertices() {
            return Err(Error::SizeMismatch { expected: mesh.n_vertices(), actual: self.values.len() });
        }
        Ok(())
    }

    /// Nodal table with header `x,y,<name>`.
    pub fn write_csv<W: Write>(&self, mesh: &TriMesh, name: &str, w: W) -> Result<()> {
        self.check_mesh(mesh)?;
        let values: Vec<Option<f64>> = self.values.iter().map(|v| Some(*v)).collect();
        write_point_csv(w, name, mesh.vertices(), &values)?;
        Ok(())
    }
}

/// Point table with header `x,y,<name>`; undefined values become empty cells.
pub fn write_point_csv<W: Write>(mut w: W, name: &str, points: &[Vec2], values: &[Option<f64>]) -> std::io::Result<()> {
    writeln!(w, "x,y,{name}")?;
    for (x, v) in points.iter().zip(values) {
        match v {
            Some(v) => writeln!(w, "{},{},{}", x.x, x.y, v)?,
            None => writeln!(w, "{},{},", x.x, x.y)?,
        }
    }
    Ok(())
}

/// Quadrature points where `|∇u|_g ≤ δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalMask {
    masked: Vec<bool>,
    delta: f64,
}

impl CriticalMask {
    /// Default threshold `max(1e-8, 1e-3·h·max|∇u|)`.
    pub fn default_threshold(h: f64, max_grad: f64) -> f64 {
        (1e-3 * h * max_grad).max(1e-8)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.masked[i]
    }

    pub fn count(&self) -> usize {
        self.masked.iter().filter(|m| **m).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.masked.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.masked.len() as f64
        }
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.masked
    }
}

/// Recovered derivatives at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSample {
    pub element: usize,
    pub position: Vec2,
    /// Euclidean quadrature weight.
    pub weight: f64,
    /// Riemannian weight `w·e^{2φ}`.
    pub volume_weight: f64,
    /// Coordinate gradient and Hessian.
    pub coord_grad: Vec2,
    pub coord_hess: Matrix2<f64>,
    /// Orthonormal-frame jet in the metric.
    pub jet: Jet<2>,
    /// `Ric(∇u, ∇u)`.
    pub ricci: f64,
}

#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    mesh_id: u64,
    metric: ConformalMetric,
    nodal: NodalDerivatives,
    samples: Vec<QuadSample>,
    mask: CriticalMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BundleOptions {
    pub recovery: RecoveryOptions,
    /// Overrides the default critical threshold.
    pub critical_threshold: Option<f64>,
}

/// Recovery in the flat metric with default options.
pub fn recover_derivatives(u: &ScalarField, mesh: &TriMesh) -> Result<DerivativeBundle> {
    recover_derivatives_with(u, mesh, &ConformalMetric::flat(), &BundleOptions::default())
}

pub fn recover_derivatives_with(
    u: &ScalarField,
    mesh: &TriMesh,
    metric: &ConformalMetric,
    opts: &BundleOptions,
) -> Result<DerivativeBundle> {
    u.check_mesh(mesh)?;
    let recovery = Recovery::new(mesh, &opts.recovery);
    let nodal = recovery.derivatives(u.values());
    bundle_from_nodal(u, mesh, metric, nodal, opts)
}

/// Builds the quadrature-point bundle from already recovered nodal derivatives.
pub fn bundle_from_nodal(
    u: &ScalarField,
    mesh: &TriMesh,
    metric: &ConformalMetric,
    nodal: NodalDerivatives,
    opts: &BundleOptions,
) -> Result<DerivativeBundle> {
    u.check_mesh(mesh)?;
    if nodal.grad.len() != mesh.n_vertices() || nodal.hess.len() != mesh.n_vertices() {
        return Err(Error::SizeMismatch { expected: mesh.n_vertices(), actual: nodal.grad.len() });
    }
    let samples = map_slice(opts.recovery.exec, mesh.quadrature(), |q| {
        let t = mesh.triangles()[q.element];
        let mut g = Vec2::zeros();
        let mut h = Matrix2::zeros();
        let mut value = 0.0;
        for (k, &b) in t.iter().zip(&q.bary) {
            g += nodal.grad[*k] * b;
            h += nodal.hess[*k] * b;
            value += u.values()[*k] * b;
        }
        let jet = analytic::frame_jet(metric, &q.position, value, g, h);
        QuadSample {
            element: q.element,
            position: q.position,
            weight: q.weight,
            volume_weight: q.weight * metric.area_factor(&q.position),
            coord_grad: g,
            coord_hess: h,
            jet,
            ricci: analytic::ricci_term(metric, &q.position, &jet),
        }
    });
    let max_grad = samples.iter().map(|s| s.jet.grad_norm()).fold(0.0, f64::max);
    let delta = opts.critical_threshold.unwrap_or_else(|| CriticalMask::default_threshold(mesh.h(), max_grad));
    let masked = samples.iter().map(|s| s.jet.grad_norm() <= delta).collect();
    Ok(DerivativeBundle {
        mesh_id: mesh.id(),
        metric: metric.clone(),
        nodal,
        samples,
        mask: CriticalMask { masked, delta },
    })
}

impl DerivativeBundle {
    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn metric(&self) -> &ConformalMetric {
        &self.metric
    }

    pub fn nodal(&self) -> &NodalDerivatives {
        &self.nodal
    }

    pub fn samples(&self) -> &[QuadSample] {
        &self.samples
    }

    pub fn mask(&self) -> &CriticalMask {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn unmasked<T>(&self, f: impl Fn(&QuadSample) -> Option<T>) -> Vec<Option<T>> {
        self.samples
            .iter()
            .zip(self.mask.as_slice())
            .map(|(s, &m)| if m { None } else { f(s) })
            .collect()
    }

    pub fn grad_norm(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.jet.grad_norm()).collect()
    }

    pub fn a_u(&self) -> Vec<Option<f64>> {
        self.unmasked(|s| s.jet.a_u())
    }

    pub fn grad_of_grad_norm(&self) -> Vec<Option<f64>> {
        self.unmasked(|s| s.jet.grad_of_grad_norm())
    }

    pub fn hess_norm(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.jet.hess_norm_sq().sqrt()).collect()
    }

    /// `max(A² - |∇|∇u||²)` over unmasked points; nonpositive up to rounding.
    pub fn cauchy_schwarz_excess(&self) -> f64 {
        self.unmasked(|s| Some(s.jet.a_u()?.powi(2) - s.jet.grad_of_grad_norm()?.powi(2)))
            .into_iter()
            .flatten()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ f·dv_g` over unmasked points with compensated summation.
    pub fn integrate(&self, values: &[Option<f64>]) -> f64 {
        compensated_sum(self.samples.iter().zip(values).filter_map(|(s, v)| v.map(|v| v * s.volume_weight)))
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.samples.iter().map(|s| s.position).collect()
    }
}

/// `P = ((p-1)/p)|∇u|^p + u/2` at quadrature points; defined everywhere.
pub fn p_function(bundle: &DerivativeBundle, p: f64) -> Vec<f64> {
    bundle.samples.iter().map(|s| s.jet.p_function(p)).collect()
}

/// Nodal P-function from the recovered nodal gradient.
pub fn p_function_nodal(u: &ScalarField, mesh: &TriMesh, bundle: &DerivativeBundle, p: f64) -> Result<ScalarField> {
    u.check_mesh(mesh)?;
    if bundle.mesh_id != mesh.id() {
        return Err(Error::Precondition("bundle belongs to another mesh".into()));
    }
    let values = mesh
        .vertices()
        .iter()
        .zip(u.values())
        .zip(&bundle.nodal.grad)
        .map(|((x, &v), g)| {
            let scale = if bundle.metric.is_flat() { 1.0 } else { 1.0 / bundle.metric.length_factor(x) };
            (p - 1.0) / p * (g.norm() * scale).powf(p) + v / 2.0
        })
        .collect();
    ScalarField::new(mesh, values)
}

/// `Δₚu = |∇u|^{p-2}(Δu + (p-2)A_u)` in the metric; `None` on masked points.
pub fn p_laplacian(bundle: &DerivativeBundle, p: f64) -> Vec<Option<f64>> {
    bundle.unmasked(|s| s.jet.p_laplacian(p))
}

/// Direction field for the linearized operator.
#[derive(Debug, Clone, Copy)]
pub enum Direction<'a> {
    Analytic(&'a AnalyticField),
    Discrete(&'a DerivativeBundle),
}

/// `𝓛ᵤη` at quadrature points; `None` on masked points.
pub fn linearized_apply(bundle: &DerivativeBundle, eta: Direction<'_>, p: f64) -> Result<Vec<Option<f64>>> {
    match eta {
        Direction::Analytic(f) => {
            Ok(bundle.unmasked(|s| jet::linearized_apply(&s.jet, &f.jet(&bundle.metric, &s.position), p)))
        }
        Direction::Discrete(other) => {
            if other.mesh_id != bundle.mesh_id || other.len() != bundle.len() {
                return Err(Error::Precondition("direction field lives on another mesh".into()));
            }
            Ok(bundle
                .samples
                .iter()
                .zip(&other.samples)
                .zip(bundle.mask.as_slice())
                .map(|((s, e), &m)| if m { None } else { jet::linearized_apply(&s.jet, &e.jet, p) })
                .collect())
        }
    }
}

/// `𝓛ᵤP` for a torsion solution (constant source, third-order term absent);
/// `None` on masked points.
pub fn lu_p(bundle: &DerivativeBundle, p: f64) -> Vec<Option<f64>> {
    bundle.unmasked(|s| jet::lu_p_torsion(&s.jet, p, s.ricci))
}

/// Flux field `a = (p-2)|∇u|^{p-4}⟨∇u,∇P⟩∇u + |∇u|^{p-2}∇P` at quadrature
/// points in frame components, with `∇P` taken from the recovered P-bundle.
/// Zero on masked points.
pub fn flux_vector_field(u: &DerivativeBundle, pf: &DerivativeBundle, p: f64) -> Result<Vec<Vec2>> {
    if u.mesh_id != pf.mesh_id || u.len() != pf.len() {
        return Err(Error::Precondition("P-bundle lives on another mesh".into()));
    }
    Ok(u.samples
        .iter()
        .zip(&pf.samples)
        .zip(u.mask.as_slice())
        .map(|((s, q), &m)| if m { Vec2::zeros() } else { flux_from(&s.jet.grad, &q.jet.grad, p) })
        .collect())
}

fn flux_from(g: &Vec2, grad_p: &Vec2, p: f64) -> Vec2 {
    let n = g.norm();
    if n == 0.0 {
        return Vec2::zeros();
    }
    g * ((p - 2.0) * n.powf(p - 4.0) * g.dot(grad_p)) + grad_p * n.powf(p - 2.0)
}

/// Divergence theorem for the flux field: `(∫ div a dv_g, ∮ ⟨a,ν⟩ ds_g)`.
///
/// The flux is assembled at the vertices from recovered nodal gradients of `u`
/// and `P`, interpolated linearly, and its divergence integrated element by
/// element. Nodes with `|∇u|_g ≤ δ` of the u-bundle carry `a = 0`.
pub fn flux_divergence_check(
    mesh: &TriMesh,
    bg: &BoundaryGeometry,
    u: &DerivativeBundle,
    pf: &DerivativeBundle,
    p: f64,
) -> Result<(f64, f64)> {
    if u.mesh_id != mesh.id() || pf.mesh_id != mesh.id() {
        return Err(Error::Precondition("bundles belong to another mesh".into()));
    }
    let metric = &u.metric;
    // coordinate components of e^{2φ}·(coordinate vector a) = e^{φ}·â
    let nodal: Vec<Vec2> = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, x)| {
            let s = 1.0 / metric.length_factor(x);
            let g = u.nodal.grad[v] * s;
            if g.norm() <= u.mask.delta {
                return Vec2::zeros();
            }
            flux_from(&g, &(pf.nodal.grad[v] * s), p) * metric.length_factor(x)
        })
        .collect();
    let volume = compensated_sum((0..mesh.n_triangles()).map(|e| {
        let t = mesh.triangles()[e];
        let g = mesh.basis_gradients(e);
        mesh.area(e) * (0..3).map(|k| nodal[t[k]].dot(&g[k])).sum::<f64>()
    }));
    let boundary = compensated_sum(bg.nodes.iter().map(|n| n.weight * nodal[n.vertex].dot(&n.normal)));
    Ok((volume, boundary))
}
