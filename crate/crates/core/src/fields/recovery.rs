//! Nodal gradient and Hessian recovery for piecewise-linear fields.

use nalgebra::{DMatrix, Matrix2, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::geometry::{TriMesh, Vec2};
use crate::par::{map_range, Exec};

/// How a nodal derivative is recovered from neighbouring data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMethod {
    /// Area-weighted average of the element gradients around the node.
    PatchAverage,
    /// Derivatives of a least-squares quadratic through the nodal values of
    /// the surrounding patch (two rings, grown until well determined).
    QuadraticFit,
    /// Gradient and Hessian of a least-squares cubic through the nodal values
    /// within `4.5h`.
    #[default]
    CubicFit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub interior: RecoveryMethod,
    /// Used on vertices fewer than `band` element rings from the boundary.
    pub boundary: RecoveryMethod,
    pub band: usize,
    pub exec: Exec,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            interior: RecoveryMethod::PatchAverage,
            boundary: RecoveryMethod::CubicFit,
            band: 3,
            exec: Exec::Parallel,
        }
    }
}

const CUBIC_RADIUS: f64 = 4.5;

/// Recovered coordinate derivatives at every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalDerivatives {
    pub grad: Vec<Vec2>,
    /// Symmetric.
    pub hess: Vec<Matrix2<f64>>,
}

/// Precomputed recovery weights: for each vertex, the nodes it draws on and
/// the weights producing `∂x`, `∂y` of the recovered field.
#[derive(Debug, Clone)]
pub struct Recovery {
    stencils: Vec<Stencil>,
}

#[derive(Debug, Clone)]
struct Stencil {
    nodes: Vec<usize>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    /// Direct `∂xx, ∂xy, ∂yy` weights, when the method provides them.
    hess: Option<[Vec<f64>; 3]>,
}

/// Element-ring distance of every vertex from the boundary.
pub fn boundary_ring_depth(mesh: &TriMesh) -> Vec<usize> {
    let mut depth = vec![usize::MAX; mesh.n_vertices()];
    let mut frontier: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| mesh.is_boundary(v)).collect();
    for &v in &frontier {
        depth[v] = 0;
    }
    let mut d = 0;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &w in &frontier {
            for &e in mesh.vertex_triangles(w) {
                for &k in &mesh.triangles()[e] {
                    if depth[k] == usize::MAX {
                        depth[k] = d;
                        next.push(k);
                    }
                }
            }
        }
        frontier = next;
    }
    depth
}

fn ring_neighbours(mesh: &TriMesh, v: usize, rings: usize) -> Vec<usize> {
    let mut set = vec![v];
    let mut frontier = vec![v];
    for _ in 0..rings {
        let mut next = Vec::new();
        for &w in &frontier {
            for &e in mesh.vertex_triangles(w) {
                for &k in &mesh.triangles()[e] {
                    if !set.contains(&k) {
                        set.push(k);
                        next.push(k);
                    }
                }
            }
        }
        frontier = next;
    }
    set
}

fn average_stencil(mesh: &TriMesh, v: usize) -> Stencil {
    let mut nodes: Vec<usize> = Vec::new();
    let mut dx: Vec<f64> = Vec::new();
    let mut dy: Vec<f64> = Vec::new();
    let tris = mesh.vertex_triangles(v);
    let total: f64 = tris.iter().map(|&e| mesh.area(e)).sum();
    for &e in tris {
        let w = mesh.area(e) / total;
        for (k, g) in mesh.triangles()[e].iter().zip(mesh.basis_gradients(e)) {
            let slot = match nodes.iter().position(|n| n == k) {
                Some(s) => s,
                None => {
                    nodes.push(*k);
                    dx.push(0.0);
                    dy.push(0.0);
                    nodes.len() - 1
                }
            };
            dx[slot] += w * g.x;
            dy[slot] += w * g.y;
        }
    }
    Stencil { nodes, dx, dy, hess: None }
}

fn quadratic_stencil(mesh: &TriMesh, v: usize) -> Stencil {
    let h = mesh.h();
    let x0 = mesh.vertices()[v];
    let mut rings = 2;
    loop {
        let nodes = ring_neighbours(mesh, v, rings);
        let basis = |k: usize| {
            let d = (mesh.vertices()[k] - x0) / h;
            Vector6::new(1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y)
        };
        let mut normal = Matrix6::zeros();
        for &k in &nodes {
            let b = basis(k);
            normal += b * b.transpose();
        }
        let inverse = normal.try_inverse().filter(|_| nodes.len() >= 10 || rings >= 4);
        match inverse {
            Some(inv) if rcond(&normal, &inv) > 1e-10 => {
                let mut dx = Vec::with_capacity(nodes.len());
                let mut dy = Vec::with_capacity(nodes.len());
                for &k in &nodes {
                    let c = inv * basis(k);
                    dx.push(c[1] / h);
                    dy.push(c[2] / h);
                }
                return Stencil { nodes, dx, dy, hess: None };
            }
            _ if rings < 4 => rings += 1,
            _ => return average_stencil(mesh, v),
        }
    }
}

/// Vertices within `radius` of `v`, by a graph search restricted to the ball.
fn ball_neighbours(mesh: &TriMesh, v: usize, radius: f64) -> Vec<usize> {
    let x0 = mesh.vertices()[v];
    let mut set = vec![v];
    let mut frontier = vec![v];
    while let Some(w) = frontier.pop() {
        for &e in mesh.vertex_triangles(w) {
            for &k in &mesh.triangles()[e] {
                if !set.contains(&k) && (mesh.vertices()[k] - x0).norm() <= radius {
                    set.push(k);
                    frontier.push(k);
                }
            }
        }
    }
    set
}

fn cubic_stencil(mesh: &TriMesh, v: usize) -> Stencil {
    const MONOMIALS: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
    let h = mesh.h();
    let x0 = mesh.vertices()[v];
    let mut radius = CUBIC_RADIUS * h;
    let mut nodes = ball_neighbours(mesh, v, radius);
    while nodes.len() < 2 * MONOMIALS.len() && radius < 4.0 * CUBIC_RADIUS * h {
        radius *= 1.25;
        nodes = ball_neighbours(mesh, v, radius);
    }
    if nodes.len() < 2 * MONOMIALS.len() {
        return quadratic_stencil(mesh, v);
    }
    let a = DMatrix::from_fn(nodes.len(), MONOMIALS.len(), |r, m| {
        let d = (mesh.vertices()[nodes[r]] - x0) / h;
        d.x.powi(MONOMIALS[m].0) * d.y.powi(MONOMIALS[m].1)
    });
    let svd = a.svd(true, true);
    if svd.singular_values.min() < 1e-8 * svd.singular_values.max() {
        return quadratic_stencil(mesh, v);
    }
    // Rows of the pseudo-inverse map nodal values to coefficients.
    let pinv = svd.pseudo_inverse(0.0).expect("SVD computed with both factors");
    let row = |m: usize, scale: f64| -> Vec<f64> { pinv.row(m).iter().map(|c| c * scale).collect() };
    let h2 = h * h;
    Stencil {
        dx: row(1, 1.0 / h),
        dy: row(2, 1.0 / h),
        hess: Some([row(3, 2.0 / h2), row(4, 1.0 / h2), row(5, 2.0 / h2)]),
        nodes,
    }
}

fn rcond(a: &Matrix6<f64>, inv: &Matrix6<f64>) -> f64 {
    let norm1 = |m: &Matrix6<f64>| (0..6).map(|j| m.column(j).abs().sum()).fold(0.0, f64::max);
    1.0 / (norm1(a) * norm1(inv))
}

impl Recovery {
    pub fn new(mesh: &TriMesh, opts: &RecoveryOptions) -> Self {
        let depth = boundary_ring_depth(mesh);
        let stencils = map_range(opts.exec, mesh.n_vertices(), |v| {
            let method = if depth[v] < opts.band.max(1) { opts.boundary } else { opts.interior };
            match method {
                RecoveryMethod::PatchAverage => average_stencil(mesh, v),
                RecoveryMethod::QuadraticFit => quadratic_stencil(mesh, v),
                RecoveryMethod::CubicFit => cubic_stencil(mesh, v),
            }
        });
        Recovery { stencils }
    }

    /// Recovered nodal gradient of a nodal field.
    pub fn gradient(&self, values: &[f64]) -> Vec<Vec2> {
        self.stencils
            .iter()
            .map(|s| {
                let mut g = Vec2::zeros();
                for ((&k, &wx), &wy) in s.nodes.iter().zip(&s.dx).zip(&s.dy) {
                    g.x += wx * values[k];
                    g.y += wy * values[k];
                }
                g
            })
            .collect()
    }

    /// Gradient, then Hessian: directly where the stencil fits second
    /// derivatives, otherwise by recovering each gradient component again.
    pub fn derivatives(&self, values: &[f64]) -> NodalDerivatives {
        let grad = self.gradient(values);
        let gx: Vec<f64> = grad.iter().map(|g| g.x).collect();
        let gy: Vec<f64> = grad.iter().map(|g| g.y).collect();
        let hx = self.gradient(&gx);
        let hy = self.gradient(&gy);
        let hess = self
            .stencils
            .iter()
            .zip(hx.iter().zip(&hy))
            .map(|(s, (a, b))| match &s.hess {
                Some([wxx, wxy, wyy]) => {
                    let dot = |w: &[f64]| s.nodes.iter().zip(w).map(|(&k, c)| c * values[k]).sum::<f64>();
                    let off = dot(wxy);
                    Matrix2::new(dot(wxx), off, off, dot(wyy))
                }
                None => {
                    let off = 0.5 * (a.y + b.x);
                    Matrix2::new(a.x, off, off, b.y)
                }
            })
            .collect();
        NodalDerivatives { grad, hess }
    }
}
