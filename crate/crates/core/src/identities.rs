//! Boundary traces of a torsion solution and both sides of every integral
//! identity relating them to the interior.
//!
//! Notation: `n = 2`, `φ = |u_ν|^{p-2}u_ν`, `H` the (geodesic) curvature of
//! the boundary, weights `ds_g` and `dv_g` of the metric.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fields::{self, BundleOptions, DerivativeBundle, PointLocator, ScalarField};
use crate::geometry::{BoundaryCurve, BoundaryGeometry, BoundaryNode, DomainMeasures, TriMesh, Vec2};
use crate::metric::ConformalMetric;
use crate::par::{compensated_sum, map_slice, Exec};
use crate::solver::Solution;
use crate::{Error, Result};

const N: f64 = 2.0;

/// Normal derivatives at one boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub vertex: usize,
    pub loop_id: usize,
    /// Arc length along the loop.
    pub s: f64,
    pub x: f64,
    pub y: f64,
    /// Boundary curvature in the metric.
    pub curvature: f64,
    /// `ds_g` quadrature weight.
    pub weight: f64,
    pub u_nu: f64,
    pub u_nunu: f64,
    /// `|u_ν|^{p-2}((p-1)u_νν + (n-1)H u_ν) + 1`.
    pub eq64_residual: f64,
    /// Adjacent to the critical mask; excluded from pointwise statistics.
    pub flagged: bool,
}

impl TraceNode {
    /// `|u_ν|^{p-2}u_ν`.
    pub fn flux(&self, p: f64) -> f64 {
        self.u_nu.abs().powf(p - 2.0) * self.u_nu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub p: f64,
    pub nodes: Vec<TraceNode>,
}

/// How the normal derivatives are read off at a boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    /// Least-squares fit of the nodal values in boundary-fitted coordinates
    /// `(depth d, tangential offset σ)` with `u = Σ_{i≥1} a_ij d^i σ^j`, which
    /// vanishes on the boundary by construction.
    #[default]
    BoundaryFit,
    /// Recovered gradient sampled along the inward normal and extrapolated
    /// to the boundary by a low-degree polynomial in the depth.
    GradientExtrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub method: TraceMethod,
    /// Fit radius in units of `h`.
    pub radius: f64,
    pub depth_degree: usize,
    pub tangential_degree: usize,
    /// Extrapolation samples at depths `k·spacing·h`, `k = 1..=samples`.
    pub samples: usize,
    pub spacing: f64,
    pub extrapolation_degree: usize,
    pub exec: Exec,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            method: TraceMethod::BoundaryFit,
            radius: 7.5,
            depth_degree: 3,
            tangential_degree: 4,
            samples: 6,
            spacing: 0.75,
            extrapolation_degree: 2,
            exec: Exec::Parallel,
        }
    }
}

impl BoundaryTrace {
    /// All `u_ν < 0` (Hopf-type sign).
    pub fn hopf_holds(&self) -> bool {
        self.nodes.iter().all(|n| n.u_nu < 0.0)
    }

    pub fn flagged_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.flagged).count()
    }

    /// Largest `|eq64_residual|` over unflagged nodes.
    pub fn max_eq64_residual(&self) -> f64 {
        self.nodes.iter().filter(|n| !n.flagged).map(|n| n.eq64_residual.abs()).fold(0.0, f64::max)
    }

    fn sum(&self, f: impl Fn(&TraceNode) -> f64) -> f64 {
        compensated_sum(self.nodes.iter().map(|n| n.weight * f(n)))
    }

    /// CSV with columns `s,x,y,H,u_nu,u_nunu,eq64_residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,x,y,H,u_nu,u_nunu,eq64_residual")?;
        for n in &self.nodes {
            writeln!(w, "{},{},{},{},{},{},{}", n.s, n.x, n.y, n.curvature, n.u_nu, n.u_nunu, n.eq64_residual)?;
        }
        Ok(())
    }
}

/// Recovers derivatives of the solution and extracts its boundary trace.
pub fn boundary_trace(
    sol: &Solution,
    mesh: &TriMesh,
    bg: &BoundaryGeometry,
    metric: &ConformalMetric,
) -> Result<(DerivativeBundle, BoundaryTrace)> {
    let bundle = fields::recover_derivatives_with(&sol.u, mesh, metric, &BundleOptions::default())?;
    let trace = boundary_trace_with(&sol.u, &bundle, mesh, bg, sol.p, &TraceOptions::default())?;
    Ok((bundle, trace))
}

/// Boundary trace of `u` from its nodal values and recovered derivatives.
///
/// Both methods produce the Euclidean `∂_νu` and `∂²u(ν,ν)`; in a conformal
/// metric the frame values are `u_ν = e^{-φ}∂_νu` and
/// `u_νν = e^{-2φ}(∂²u(ν,ν) - ∂_νφ ∂_νu)`, using that the tangential
/// derivative of `u` vanishes on the boundary.
pub fn boundary_trace_with(
    u: &ScalarField,
    bundle: &DerivativeBundle,
    mesh: &TriMesh,
    bg: &BoundaryGeometry,
    p: f64,
    opts: &TraceOptions,
) -> Result<BoundaryTrace> {
    u.check_mesh(mesh)?;
    if bundle.mesh_id() != mesh.id() {
        return Err(Error::Precondition("bundle belongs to another mesh".into()));
    }
    if opts.samples < opts.extrapolation_degree + 1 || opts.depth_degree < 2 {
        return Err(Error::Validation("trace fit is underdetermined".into()));
    }
    let metric = bundle.metric();
    let curvature = metric.geodesic_boundary_curvature(bg);
    let curves = mesh.spec().loops();
    let locator = PointLocator::new(mesh);
    let mut masked_elements = vec![false; mesh.n_triangles()];
    for (s, &m) in bundle.samples().iter().zip(bundle.mask().as_slice()) {
        if m {
            masked_elements[s.element] = true;
        }
    }
    let near_mask: Vec<bool> =
        (0..mesh.n_vertices()).map(|v| mesh.vertex_triangles(v).iter().any(|&e| masked_elements[e])).collect();

    let raw = map_slice(opts.exec, &bg.nodes, |node| match opts.method {
        TraceMethod::BoundaryFit => boundary_fit(mesh, &curves[node.loop_id], node, u.values(), &near_mask, opts),
        TraceMethod::GradientExtrapolation => {
            gradient_extrapolation(mesh, &locator, node, bundle, &masked_elements, opts)
        }
    });
    let mut nodes = Vec::with_capacity(bg.nodes.len());
    for ((node, &kappa), r) in bg.nodes.iter().zip(&curvature).zip(raw) {
        let (dnu, dnunu, flagged) = r?;
        let (u_nu, u_nunu, weight) = if metric.is_flat() {
            (dnu, dnunu, node.weight)
        } else {
            let j = metric.jet(&node.position);
            let s = (-j.value).exp();
            (s * dnu, s * s * (dnunu - j.grad.dot(&node.normal) * dnu), node.weight / s)
        };
        let eq64 = u_nu.abs().powf(p - 2.0) * ((p - 1.0) * u_nunu + (N - 1.0) * kappa * u_nu) + 1.0;
        nodes.push(TraceNode {
            vertex: node.vertex,
            loop_id: node.loop_id,
            s: node.arc,
            x: node.position.x,
            y: node.position.y,
            curvature: kappa,
            weight,
            u_nu,
            u_nunu,
            eq64_residual: eq64,
            flagged,
        });
    }
    Ok(BoundaryTrace { p, nodes })
}

/// Interior vertices within `radius` of vertex `v`, found by a graph search
/// that only expands vertices inside the ball.
/// Fraction of the local radius of curvature the trace fit may reach.
const FOCAL_FRACTION: f64 = 0.8;

fn vertices_within(mesh: &TriMesh, v: usize, radius: f64) -> Vec<usize> {
    let x0 = mesh.vertices()[v];
    let mut seen = vec![v];
    let mut frontier = vec![v];
    let mut inside = Vec::new();
    while let Some(w) = frontier.pop() {
        for &e in mesh.vertex_triangles(w) {
            for &k in &mesh.triangles()[e] {
                if seen.contains(&k) {
                    continue;
                }
                seen.push(k);
                if (mesh.vertices()[k] - x0).norm() <= radius {
                    frontier.push(k);
                    if !mesh.is_boundary(k) {
                        inside.push(k);
                    }
                }
            }
        }
    }
    inside
}

fn boundary_fit(
    mesh: &TriMesh,
    curve: &BoundaryCurve,
    node: &BoundaryNode,
    values: &[f64],
    near_mask: &[bool],
    opts: &TraceOptions,
) -> Result<(f64, f64, bool)> {
    let h = mesh.h();
    // Beyond the local radius of curvature the projection is not unique.
    let cap = FOCAL_FRACTION / curve.curvature(node.t).abs().max(f64::MIN_POSITIVE);
    let mut tangential = opts.tangential_degree as i32;
    let (monomials, pts) = loop {
        let monomials: Vec<(i32, i32)> =
            (1..=opts.depth_degree as i32).flat_map(|i| (0..=tangential).map(move |j| (i, j))).collect();
        let mut radius = (opts.radius * h).min(cap);
        let mut pts = vertices_within(mesh, node.vertex, radius);
        while pts.len() < 2 * monomials.len() && radius < (4.0 * opts.radius * h).min(cap) {
            radius = (radius * 1.25).min(cap);
            pts = vertices_within(mesh, node.vertex, radius);
        }
        if pts.len() >= 2 * monomials.len() || tangential <= 2 {
            break (monomials, pts);
        }
        tangential -= 1;
    };
    if pts.len() < monomials.len() + 2 {
        return Err(Error::Precondition(format!(
            "too few interior vertices near boundary vertex {} for the trace fit; refine the mesh",
            node.vertex
        )));
    }
    let speed = curve.speed(node.t);
    let coords: Vec<(f64, f64)> = pts
        .iter()
        .map(|&k| {
            let (t, d) = curve.project(&mesh.vertices()[k], node.t);
            (d / h, (t - node.t) * speed / h)
        })
        .collect();
    let a = DMatrix::from_fn(pts.len(), monomials.len(), |r, m| {
        coords[r].0.powi(monomials[m].0) * coords[r].1.powi(monomials[m].1)
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|&k| values[k]));
    let c = lstsq(a, b);
    let at = |i: i32| c[monomials.iter().position(|&m| m == (i, 0)).expect("monomial present")];
    let flagged = near_mask[node.vertex] || pts.iter().any(|&k| near_mask[k]);
    Ok((-at(1) / h, 2.0 * at(2) / (h * h), flagged))
}

fn gradient_extrapolation(
    mesh: &TriMesh,
    locator: &PointLocator,
    node: &BoundaryNode,
    bundle: &DerivativeBundle,
    masked_elements: &[bool],
    opts: &TraceOptions,
) -> Result<(f64, f64, bool)> {
    let h = mesh.h();
    let nodal = bundle.nodal();
    let nu = node.normal;
    let mut depths = Vec::with_capacity(opts.samples);
    let mut values = Vec::with_capacity(opts.samples);
    let mut flagged = mesh.vertex_triangles(node.vertex).iter().any(|&e| masked_elements[e]);
    for k in 1..=opts.samples {
        let s = k as f64 * opts.spacing * h;
        let Some((e, b)) = locator.locate(mesh, &(node.position - nu * s)) else {
            continue;
        };
        flagged |= masked_elements[e];
        let t = mesh.triangles()[e];
        let g = nodal.grad[t[0]] * b[0] + nodal.grad[t[1]] * b[1] + nodal.grad[t[2]] * b[2];
        depths.push(s / h);
        values.push(g.dot(&nu));
    }
    if depths.len() < opts.extrapolation_degree + 1 {
        return Err(Error::Precondition(format!(
            "normal line at boundary vertex {} leaves the mesh; refine the mesh",
            node.vertex
        )));
    }
    let a = DMatrix::from_fn(depths.len(), opts.extrapolation_degree + 1, |r, j| depths[r].powi(j as i32));
    let c = lstsq(a, DVector::from_vec(values));
    Ok((c[0], -c[1] / h, flagged))
}

fn lstsq(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    a.svd(true, true).solve(&b, 1e-12).expect("SVD computed with both factors")
}

/// Both sides of one identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|, scale floor)`.
    pub relative_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, lhs: f64, rhs: f64, floor: f64, tolerance: f64) -> Self {
        let residual = (lhs - rhs).abs();
        let relative_residual = residual / lhs.abs().max(rhs.abs()).max(floor);
        Check {
            name: name.into(),
            lhs,
            rhs,
            residual,
            relative_residual,
            tolerance,
            pass: relative_residual <= tolerance,
        }
    }
}

/// `∮ |u_ν|^{p-2}u_ν ds = -|Ω|`.
pub fn flux_balance(trace: &BoundaryTrace, measures: &DomainMeasures, tolerance: f64) -> Check {
    let lhs = trace.sum(|n| n.flux(trace.p));
    let mut c = Check::new("flux_balance", lhs, -measures.volume, measures.volume, tolerance);
    c.relative_residual = c.residual / measures.volume;
    c.pass = c.relative_residual <= tolerance;
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalIdentity {
    /// `(1/((p-1)(n-1)))∫𝓛ᵤP dv` over unmasked quadrature points.
    pub lhs_volume: f64,
    /// Same quantity from the boundary form
    /// `(p-1)∮φ((p-1)|u_ν|^{p-2}u_νν + 1/n) ds`, divided likewise.
    pub lhs_boundary: f64,
    /// `|Ω|/n - ∮H|u_ν|^{2p-2} ds`.
    pub rhs: f64,
    pub masked_fraction: f64,
    pub volume_vs_rhs: Check,
    pub boundary_vs_rhs: Check,
    pub volume_vs_boundary: Check,
}

/// `(1/((p-1)(n-1)))∫𝓛ᵤP dv`.
pub fn lu_p_integral(bundle: &DerivativeBundle, p: f64) -> f64 {
    bundle.integrate(&fields::lu_p(bundle, p)) / ((p - 1.0) * (N - 1.0))
}

pub fn fundamental_identity(
    bundle: &DerivativeBundle,
    trace: &BoundaryTrace,
    measures: &DomainMeasures,
    tolerance: f64,
) -> FundamentalIdentity {
    let p = trace.p;
    let lhs_volume = lu_p_integral(bundle, p);
    let lhs_boundary = (p - 1.0)
        * trace.sum(|n| n.flux(p) * ((p - 1.0) * n.u_nu.abs().powf(p - 2.0) * n.u_nunu + 1.0 / N))
        / ((p - 1.0) * (N - 1.0));
    let rhs = measures.volume / N - trace.sum(|n| n.curvature * n.u_nu.abs().powf(2.0 * p - 2.0));
    let floor = measures.volume / N;
    FundamentalIdentity {
        lhs_volume,
        lhs_boundary,
        rhs,
        masked_fraction: bundle.mask().fraction(),
        volume_vs_rhs: Check::new("fundamental.volume_vs_rhs", lhs_volume, rhs, floor, tolerance),
        boundary_vs_rhs: Check::new("fundamental.boundary_vs_rhs", lhs_boundary, rhs, floor, tolerance),
        volume_vs_boundary: Check::new("fundamental.volume_vs_boundary", lhs_volume, lhs_boundary, floor, tolerance),
    }
}

fn require_positive_curvature(trace: &BoundaryTrace) -> Result<()> {
    if let Some(n) = trace.nodes.iter().find(|n| !(n.curvature > 0.0)) {
        return Err(Error::Precondition(format!(
            "mean curvature {} ≤ 0 at boundary vertex {} ({:.4}, {:.4})",
            n.curvature, n.vertex, n.x, n.y
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeintzeKarcher {
    /// `(n²/((p-1)(n-1)))∫𝓛ᵤP dv`.
    pub t1: f64,
    /// `∮(1 + nHφ)²/H ds ≥ 0`.
    pub t2: f64,
    /// `∮1/H ds - n|Ω|`.
    pub t3: f64,
    pub identity: Check,
    /// `T₃ ≥ -tolerance·n|Ω|`.
    pub inequality_holds: bool,
}

pub fn hk_report(
    bundle: &DerivativeBundle,
    trace: &BoundaryTrace,
    measures: &DomainMeasures,
    tolerance: f64,
    inequality_tolerance: f64,
) -> Result<HeintzeKarcher> {
    require_positive_curvature(trace)?;
    let p = trace.p;
    let t1 = N * N * lu_p_integral(bundle, p);
    let t2 = trace.sum(|n| (1.0 + N * n.curvature * n.flux(p)).powi(2) / n.curvature);
    let t3 = trace.sum(|n| 1.0 / n.curvature) - N * measures.volume;
    let scale = N * measures.volume;
    Ok(HeintzeKarcher {
        t1,
        t2,
        t3,
        identity: Check::new("hk.identity", t1 + t2, t3, scale, tolerance),
        inequality_holds: t3 >= -inequality_tolerance * scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoapBubble {
    pub h0: f64,
    /// `(1/((p-1)(n-1)))∫𝓛ᵤP dv`.
    pub lhs1: f64,
    /// `(1/(n²H₀))∮(nφH₀ + 1)² ds`.
    pub lhs2: f64,
    /// `∮(H₀ - H)|u_ν|^{2p-2} ds`.
    pub rhs: f64,
    pub max_curvature_deviation: f64,
    pub identity: Check,
}

pub fn soap_bubble_report(
    bundle: &DerivativeBundle,
    trace: &BoundaryTrace,
    measures: &DomainMeasures,
    tolerance: f64,
) -> SoapBubble {
    let p = trace.p;
    let h0 = measures.perimeter / (N * measures.volume);
    let lhs1 = lu_p_integral(bundle, p);
    let lhs2 = trace.sum(|n| (N * n.flux(p) * h0 + 1.0).powi(2)) / (N * N * h0);
    let rhs = trace.sum(|n| (h0 - n.curvature) * n.u_nu.abs().powf(2.0 * p - 2.0));
    let max_curvature_deviation = trace.nodes.iter().map(|n| (n.curvature - h0).abs()).fold(0.0, f64::max);
    SoapBubble {
        h0,
        lhs1,
        lhs2,
        rhs,
        max_curvature_deviation,
        identity: Check::new("sbt.identity", lhs1 + lhs2, rhs, measures.volume / N, tolerance),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerrinDeficit {
    /// `∮(1 + nHφ)²/H ds`.
    pub deficit: f64,
    /// `nHφ + 1` per node.
    pub nodewise: Vec<f64>,
    /// Largest `|nHφ + 1|` over unflagged nodes.
    pub max_nodewise: f64,
}

pub fn serrin_deficit(trace: &BoundaryTrace) -> Result<SerrinDeficit> {
    require_positive_curvature(trace)?;
    let p = trace.p;
    let nodewise: Vec<f64> = trace.nodes.iter().map(|n| N * n.curvature * n.flux(p) + 1.0).collect();
    let max_nodewise = trace
        .nodes
        .iter()
        .zip(&nodewise)
        .filter(|(n, _)| !n.flagged)
        .map(|(_, r)| r.abs())
        .fold(0.0, f64::max);
    Ok(SerrinDeficit {
        deficit: trace.sum(|n| (1.0 + N * n.curvature * n.flux(p)).powi(2) / n.curvature),
        nodewise,
        max_nodewise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicityScan {
    pub min: f64,
    pub max: f64,
    pub tolerance: f64,
    /// `∫𝓛ᵤP dv` over unmasked points.
    pub integral: f64,
    /// Points scanned (unmasked, away from the critical zone).
    pub scanned: usize,
    pub excluded: usize,
    /// Histogram bin edges and counts over `[min, max]`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Minimum of the vertexwise weak form `-∫a·∇ψ / ∫ψ`, at vertices at
    /// least `WEAK_DEPTH` rings inside and away from the critical zone.
    pub weak_min: f64,
    pub pass: bool,
}

const WEAK_DEPTH: usize = 4;

/// `tol_scan = (p-1)/n · h`, i.e. `0.05(p-1)/n` at `h = 0.05`.
pub fn scan_tolerance(p: f64, h: f64) -> f64 {
    (p - 1.0) / N * h
}

/// Whether the linear interpolant of the nodal gradient vanishes on element `e`.
fn gradient_vanishes_on(mesh: &TriMesh, grad: &[Vec2], e: usize) -> bool {
    let [a, b, c] = mesh.triangles()[e].map(|k| grad[k]);
    let m = nalgebra::Matrix2::from_columns(&[a - c, b - c]);
    match m.try_inverse() {
        Some(inv) => {
            let l = inv * (-c);
            l.x >= 0.0 && l.y >= 0.0 && l.x + l.y <= 1.0
        }
        None => a.norm() == 0.0 || b.norm() == 0.0 || c.norm() == 0.0,
    }
}

/// Elements of the critical zone: masked elements and those where the
/// interpolated nodal gradient vanishes, grown by `rings` element rings.
pub fn critical_zone(bundle: &DerivativeBundle, mesh: &TriMesh, rings: usize) -> Vec<bool> {
    let mut near: Vec<bool> = (0..mesh.n_triangles()).map(|e| gradient_vanishes_on(mesh, &bundle.nodal().grad, e)).collect();
    for (s, &m) in bundle.samples().iter().zip(bundle.mask().as_slice()) {
        if m {
            near[s.element] = true;
        }
    }
    for _ in 0..rings {
        let mut grown = near.clone();
        for (e, _) in near.iter().enumerate().filter(|(_, &m)| m) {
            for &v in &mesh.triangles()[e] {
                for &f in mesh.vertex_triangles(v) {
                    grown[f] = true;
                }
            }
        }
        near = grown;
    }
    near
}

/// Vertexwise weak form of `𝓛ᵤP` against the hat functions, from the
/// nodal P-function; `None` on boundary vertices.
pub fn weak_lu_p(u: &ScalarField, bundle: &DerivativeBundle, mesh: &TriMesh, p: f64) -> Result<Vec<Option<f64>>> {
    let pn = fields::p_function_nodal(u, mesh, bundle, p)?;
    let nv = mesh.n_vertices();
    let mut flux = vec![0.0; nv];
    let mut mass = vec![0.0; nv];
    for (q, s) in mesh.quadrature().iter().zip(bundle.samples()) {
        let t = mesh.triangles()[q.element];
        let gr = mesh.basis_gradients(q.element);
        let gp: Vec2 = (0..3).map(|k| gr[k] * pn.values()[t[k]]).sum();
        let g = s.coord_grad;
        let a = if g.norm() > 0.0 {
            let nu = g / g.norm();
            (gp + nu * ((p - 2.0) * nu.dot(&gp))) * s.jet.grad_norm().powf(p - 2.0)
        } else {
            Vec2::zeros()
        };
        for k in 0..3 {
            flux[t[k]] -= q.weight * a.dot(&gr[k]);
            mass[t[k]] += s.volume_weight * q.bary[k];
        }
    }
    Ok((0..nv).map(|v| (!mesh.is_boundary(v)).then(|| flux[v] / mass[v])).collect())
}

/// Pointwise sign of `𝓛ᵤP`, excluding points within two element rings of the
/// critical zone.
pub fn subharmonicity_scan(
    u: &ScalarField,
    bundle: &DerivativeBundle,
    mesh: &TriMesh,
    p: f64,
    bins: usize,
) -> Result<SubharmonicityScan> {
    let metric = bundle.metric();
    if !(metric.is_flat() || metric.nonnegative_ricci()) {
        return Err(Error::Precondition("subharmonicity needs a metric declared with Ric ≥ 0".into()));
    }
    if bundle.mesh_id() != mesh.id() {
        return Err(Error::Precondition("bundle belongs to another mesh".into()));
    }
    let near = critical_zone(bundle, mesh, 2);
    let values = fields::lu_p(bundle, p);
    let integral = bundle.integrate(&values);
    let scanned: Vec<f64> = bundle
        .samples()
        .iter()
        .zip(&values)
        .filter(|(s, _)| !near[s.element])
        .filter_map(|(_, v)| *v)
        .collect();
    let min = scanned.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scanned.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if max > min { (max - min) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in &scanned {
        let k = (((v - min) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }

    let depth = fields::boundary_ring_depth(mesh);
    let mut near_vertex = vec![false; mesh.n_vertices()];
    for (e, _) in near.iter().enumerate().filter(|(_, &m)| m) {
        for &v in &mesh.triangles()[e] {
            near_vertex[v] = true;
        }
    }
    let weak_min = weak_lu_p(u, bundle, mesh, p)?
        .into_iter()
        .enumerate()
        .filter(|&(v, _)| depth[v] >= WEAK_DEPTH && !near_vertex[v])
        .filter_map(|(_, w)| w)
        .fold(f64::INFINITY, f64::min);

    let tolerance = scan_tolerance(p, mesh.h());
    Ok(SubharmonicityScan {
        min,
        max,
        tolerance,
        integral,
        scanned: scanned.len(),
        excluded: bundle.len() - scanned.len(),
        bin_edges: (0..=bins).map(|k| min + k as f64 * width).collect(),
        counts,
        weak_min,
        pass: !scanned.is_empty() && min >= -tolerance,
    })
}

/// Numeric flags for the equivalent characterizations of the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    /// (A) the domain is a disk, from the domain description.
    pub a_is_ball: bool,
    /// (B) `φ = -1/(nH)` on the boundary, from the nodewise Serrin residual.
    pub b_overdetermined: bool,
    /// (C) the solution is radial: reported together with (A).
    pub c_radial: bool,
    /// (D) `H ≡ H₀`.
    pub d_constant_curvature: bool,
    /// (E) `|∇u| ≡ (1/(nH₀))^{1/(p-1)}` on the boundary.
    pub e_constant_gradient: bool,
    pub e_value: f64,
    pub b_max_residual: f64,
    pub d_max_relative_deviation: f64,
    pub e_max_relative_deviation: f64,
}

pub fn equivalence_suite(
    trace: &BoundaryTrace,
    measures: &DomainMeasures,
    is_disk: bool,
    metric: &ConformalMetric,
    tolerance: f64,
) -> Result<Equivalence> {
    if !metric.is_flat() {
        return Err(Error::Precondition("the ball characterizations are Euclidean".into()));
    }
    let p = trace.p;
    let h0 = measures.perimeter / (N * measures.volume);
    let serrin = serrin_deficit(trace)?;
    let e_value = (1.0 / (N * h0)).powf(1.0 / (p - 1.0));
    let usable = || trace.nodes.iter().filter(|n| !n.flagged);
    let d_dev = usable().map(|n| (n.curvature - h0).abs() / h0).fold(0.0, f64::max);
    let e_dev = usable().map(|n| (n.u_nu.abs() - e_value).abs() / e_value).fold(0.0, f64::max);
    Ok(Equivalence {
        a_is_ball: is_disk,
        b_overdetermined: serrin.max_nodewise <= tolerance,
        c_radial: is_disk,
        d_constant_curvature: d_dev <= tolerance,
        e_constant_gradient: e_dev <= tolerance,
        e_value,
        b_max_residual: serrin.max_nodewise,
        d_max_relative_deviation: d_dev,
        e_max_relative_deviation: e_dev,
    })
}

/// Acceptance thresholds for [`identity_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub flux_balance: f64,
    pub fundamental: f64,
    pub hk: f64,
    pub hk_inequality: f64,
    pub soap_bubble: f64,
    pub eq64: f64,
    pub equivalence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            flux_balance: 0.01,
            fundamental: 0.02,
            hk: 0.02,
            hk_inequality: 1e-3,
            soap_bubble: 0.02,
            eq64: 0.05,
            equivalence: 0.03,
        }
    }
}

/// Everything computed from one solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub domain: String,
    pub p: f64,
    pub h: f64,
    pub volume: f64,
    pub perimeter: f64,
    pub h0: f64,
    pub masked_fraction: f64,
    /// Fixed-name scalar entries.
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub flags: BTreeMap<String, bool>,
}

impl IdentityReport {
    /// Every identity check within tolerance. Flags describe the domain and
    /// are not pass criteria.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// Runs every report on a solved field.
///
/// Curvature-dependent reports (HK, Serrin) are skipped when the boundary
/// curvature is not positive, the subharmonicity scan when the metric is not
/// known to have `Ric ≥ 0`, and the equivalence flags for curved metrics.
pub fn identity_report(
    sol: &Solution,
    mesh: &TriMesh,
    bg: &BoundaryGeometry,
    metric: &ConformalMetric,
    tol: &Tolerances,
) -> Result<(IdentityReport, DerivativeBundle, BoundaryTrace)> {
    let (bundle, trace) = boundary_trace(sol, mesh, bg, metric)?;
    let measures = crate::geometry::domain_measures(mesh, metric)?;
    let p = sol.p;
    let mut values = BTreeMap::new();
    let mut checks = Vec::new();
    let mut flags = BTreeMap::new();

    let flux = flux_balance(&trace, &measures, tol.flux_balance);
    values.insert("flux.boundary".into(), flux.lhs);
    values.insert("flux.variational".into(), sol.variational_flux());
    checks.push(flux);

    let fi = fundamental_identity(&bundle, &trace, &measures, tol.fundamental);
    values.insert("fundamental.lhs_volume".into(), fi.lhs_volume);
    values.insert("fundamental.lhs_boundary".into(), fi.lhs_boundary);
    values.insert("fundamental.rhs".into(), fi.rhs);
    checks.extend([fi.volume_vs_rhs.clone(), fi.boundary_vs_rhs.clone(), fi.volume_vs_boundary.clone()]);

    let sbt = soap_bubble_report(&bundle, &trace, &measures, tol.soap_bubble);
    values.insert("sbt.lhs1".into(), sbt.lhs1);
    values.insert("sbt.lhs2".into(), sbt.lhs2);
    values.insert("sbt.rhs".into(), sbt.rhs);
    values.insert("sbt.max_curvature_deviation".into(), sbt.max_curvature_deviation);
    checks.push(sbt.identity.clone());

    let eq64 = trace.max_eq64_residual();
    values.insert("trace.max_eq64_residual".into(), eq64);
    flags.insert("flags.eq64".into(), eq64 <= tol.eq64);
    flags.insert("flags.hopf".into(), trace.hopf_holds());
    values.insert("trace.flagged_nodes".into(), trace.flagged_count() as f64);

    if trace.nodes.iter().all(|n| n.curvature > 0.0) {
        let hk = hk_report(&bundle, &trace, &measures, tol.hk, tol.hk_inequality)?;
        values.insert("hk.t1".into(), hk.t1);
        values.insert("hk.t2".into(), hk.t2);
        values.insert("hk.t3".into(), hk.t3);
        flags.insert("flags.hk_inequality".into(), hk.inequality_holds);
        checks.push(hk.identity);
        let serrin = serrin_deficit(&trace)?;
        values.insert("serrin.deficit".into(), serrin.deficit);
        values.insert("serrin.max_nodewise".into(), serrin.max_nodewise);
        if metric.is_flat() {
            let eq = equivalence_suite(&trace, &measures, mesh.spec().is_disk(), metric, tol.equivalence)?;
            flags.insert("flags.a_ball".into(), eq.a_is_ball);
            flags.insert("flags.b_overdetermined".into(), eq.b_overdetermined);
            flags.insert("flags.c_radial".into(), eq.c_radial);
            flags.insert("flags.d_constant_curvature".into(), eq.d_constant_curvature);
            flags.insert("flags.e_constant_gradient".into(), eq.e_constant_gradient);
            values.insert("equivalence.e_value".into(), eq.e_value);
        }
    }
    if metric.is_flat() || metric.nonnegative_ricci() {
        let scan = subharmonicity_scan(&sol.u, &bundle, mesh, p, 20)?;
        values.insert("subharmonicity.min".into(), scan.min);
        values.insert("subharmonicity.weak_min".into(), scan.weak_min);
        values.insert("subharmonicity.tolerance".into(), scan.tolerance);
        values.insert("subharmonicity.integral".into(), scan.integral);
        flags.insert("flags.subharmonic".into(), scan.pass);
    }
    let h0 = measures.perimeter / (N * measures.volume);
    values.retain(|_, v: &mut f64| v.is_finite());
    let report = IdentityReport {
        domain: format!("{:?}", mesh.spec()),
        p,
        h: mesh.h(),
        volume: measures.volume,
        perimeter: measures.perimeter,
        h0,
        masked_fraction: bundle.mask().fraction(),
        values,
        checks,
        flags,
    };
    Ok((report, bundle, trace))
}

/// Boundary profile `s,H,u_nu,overdetermined_residual` for plotting.
pub fn write_boundary_profile<W: Write>(mut w: W, trace: &BoundaryTrace) -> std::io::Result<()> {
    writeln!(w, "s,H,u_nu,overdetermined_residual")?;
    for n in &trace.nodes {
        let r = N * n.curvature * n.flux(trace.p) + 1.0;
        writeln!(w, "{},{},{},{}", n.s, n.curvature, n.u_nu, r)?;
    }
    Ok(())
}

/// Samples a nodal field along the segment `a → b` (points outside the mesh
/// are skipped).
pub fn field_slice(mesh: &TriMesh, values: &[f64], a: Vec2, b: Vec2, count: usize) -> Vec<(Vec2, f64)> {
    let locator = PointLocator::new(mesh);
    (0..count)
        .filter_map(|k| {
            let t = k as f64 / (count.max(2) - 1) as f64;
            let x = a + (b - a) * t;
            let (e, bary) = locator.locate(mesh, &x)?;
            let tri = mesh.triangles()[e];
            Some((x, bary[0] * values[tri[0]] + bary[1] * values[tri[1]] + bary[2] * values[tri[2]]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_geometry, build_mesh, domain_measures, DomainSpec};
    use crate::solver::{solve, SolveConfig};

    fn circle_trace(p: f64, flux_scale: f64) -> BoundaryTrace {
        let m = 64;
        let nodes = (0..m)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / m as f64;
                // φ = -flux_scale/(nH) with H = 1.
                let target = -flux_scale / N;
                let u_nu = -target.abs().powf(1.0 / (p - 1.0));
                TraceNode {
                    vertex: k,
                    loop_id: 0,
                    s: t,
                    x: t.cos(),
                    y: t.sin(),
                    curvature: 1.0,
                    weight: std::f64::consts::TAU / m as f64,
                    u_nu,
                    u_nunu: 0.0,
                    eq64_residual: 0.0,
                    flagged: false,
                }
            })
            .collect();
        BoundaryTrace { p, nodes }
    }

    #[test]
    fn serrin_deficit_vanishes_on_the_overdetermined_trace() {
        for p in [1.5, 2.0, 3.0] {
            let s = serrin_deficit(&circle_trace(p, 1.0)).unwrap();
            assert!(s.deficit.abs() < 1e-12, "p={p} deficit {}", s.deficit);
            assert!(s.max_nodewise < 1e-12);
            let s = serrin_deficit(&circle_trace(p, 1.2)).unwrap();
            assert!((s.max_nodewise - 0.2).abs() < 1e-12);
            assert!((s.deficit - 0.04 * std::f64::consts::TAU).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_curvature_is_rejected() {
        let mut trace = circle_trace(2.0, 1.0);
        trace.nodes[5].curvature = -0.1;
        assert!(matches!(serrin_deficit(&trace), Err(Error::Precondition(_))));
    }

    #[test]
    fn check_uses_the_larger_side_or_the_floor() {
        let c = Check::new("x", 1.0, 1.01, 0.1, 0.02);
        assert!((c.relative_residual - 0.01 / 1.01).abs() < 1e-15);
        assert!(c.pass);
        let c = Check::new("x", 1e-6, -1e-6, 0.5, 0.02);
        assert!((c.relative_residual - 4e-6).abs() < 1e-15);
        let c = Check::new("x", 1.0, 1.5, 0.1, 0.02);
        assert!(!c.pass);
    }

    #[test]
    fn reports_are_algebraically_consistent() {
        let spec = DomainSpec::ellipse(1.5, 1.0);
        let mesh = build_mesh(&spec, 0.1).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        let metric = ConformalMetric::flat();
        let measures = domain_measures(&mesh, &metric).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let sol = solve(&mesh, &metric, &SolveConfig::with_p(p)).unwrap();
            let (rep, _, trace) = identity_report(&sol, &mesh, &bg, &metric, &Tolerances::default()).unwrap();
            let v = |k: &str| rep.value(k).unwrap();
            let flux = v("flux.boundary");
            let vol = measures.volume;
            // The boundary terms of the three identities differ only by the flux.
            let hk = v("hk.t2") - v("hk.t3") + N * N * v("fundamental.rhs");
            assert!((hk - 2.0 * N * (flux + vol)).abs() < 1e-10 * vol, "p={p}");
            let h0 = measures.perimeter / (N * vol);
            let length = trace.sum(|_| 1.0);
            let sbt = v("sbt.lhs2") - v("sbt.rhs") + v("fundamental.rhs");
            assert!((sbt - (flux + vol / N + length / (N * N * h0))).abs() < 1e-10 * vol, "p={p}");
            assert_eq!(v("sbt.lhs1"), v("fundamental.lhs_volume"));
            assert_eq!(v("hk.t1"), N * N * v("fundamental.lhs_volume"));
        }
    }

    #[test]
    fn disk_trace_matches_the_radial_profile() {
        let spec = DomainSpec::disk(1.0);
        let mesh = build_mesh(&spec, 0.07).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        let metric = ConformalMetric::flat();
        for p in [1.5, 2.0, 3.0] {
            let sol = solve(&mesh, &metric, &SolveConfig::with_p(p)).unwrap();
            let (_, trace) = boundary_trace(&sol, &mesh, &bg, &metric).unwrap();
            let exact = crate::oracles::radial_exact(2, p, 1.0).unwrap();
            for n in &trace.nodes {
                assert!((n.u_nu - exact.du(1.0)).abs() < 5e-3 * exact.du(1.0).abs(), "p={p} u_nu {}", n.u_nu);
            }
            assert!(trace.hopf_holds());
            assert!(trace.max_eq64_residual() < 0.05, "p={p}");
        }
    }

    #[test]
    fn both_trace_methods_agree_on_the_disk() {
        let spec = DomainSpec::disk(1.0);
        let mesh = build_mesh(&spec, 0.07).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        let sol = solve(&mesh, &ConformalMetric::flat(), &SolveConfig::with_p(2.0)).unwrap();
        let bundle = fields::recover_derivatives(&sol.u, &mesh).unwrap();
        let fit = boundary_trace_with(&sol.u, &bundle, &mesh, &bg, 2.0, &TraceOptions::default()).unwrap();
        let opts = TraceOptions { method: TraceMethod::GradientExtrapolation, ..Default::default() };
        let extrapolated = boundary_trace_with(&sol.u, &bundle, &mesh, &bg, 2.0, &opts).unwrap();
        for (a, b) in fit.nodes.iter().zip(&extrapolated.nodes) {
            assert!((a.u_nu - b.u_nu).abs() < 0.05 * a.u_nu.abs());
        }
    }

    #[test]
    fn disk_is_subharmonic_and_the_scan_excludes_the_centre() {
        let spec = DomainSpec::disk(1.0);
        let mesh = build_mesh(&spec, 0.07).unwrap();
        let sol = solve(&mesh, &ConformalMetric::flat(), &SolveConfig::with_p(3.0)).unwrap();
        let bundle = fields::recover_derivatives(&sol.u, &mesh).unwrap();
        let scan = subharmonicity_scan(&sol.u, &bundle, &mesh, 3.0, 10).unwrap();
        assert!(scan.excluded > 0);
        assert!(scan.pass, "min {} tol {}", scan.min, scan.tolerance);
        assert_eq!(scan.counts.iter().sum::<usize>(), scan.scanned);
    }

    #[test]
    fn scan_refuses_negative_curvature() {
        let spec = DomainSpec::disk(1.0);
        let mesh = build_mesh(&spec, 0.15).unwrap();
        let metric = ConformalMetric::poly(vec![0.0, 0.0, 0.0, 0.1, 0.0, 0.1]).unwrap();
        let sol = solve(&mesh, &metric, &SolveConfig::with_p(2.0)).unwrap();
        let bundle = fields::recover_derivatives_with(&sol.u, &mesh, &metric, &BundleOptions::default()).unwrap();
        assert!(subharmonicity_scan(&sol.u, &bundle, &mesh, 2.0, 10).is_err());
    }
}
