use super::{DomainSpec, TriMesh, Vec2};
use crate::metric::ConformalMetric;
use crate::par::compensated_sum;
use crate::{Error, Result};

/// Exact boundary data at one boundary vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub vertex: usize,
    pub loop_id: usize,
    /// Curve parameter.
    pub t: f64,
    /// Arc length from the loop's first node.
    pub arc: f64,
    pub position: Vec2,
    /// Outward unit normal.
    pub normal: Vec2,
    /// Mean curvature `H` with `(n-1)H = div_∂Ω ν`, n = 2.
    pub curvature: f64,
    /// Euclidean arc-length quadrature weight.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGeometry {
    pub nodes: Vec<BoundaryNode>,
    /// Parametric perimeter of each loop.
    pub loop_perimeters: Vec<f64>,
}

impl BoundaryGeometry {
    pub fn perimeter(&self) -> f64 {
        self.loop_perimeters.iter().sum()
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.nodes.iter().map(|n| n.weight))
    }

    pub fn min_curvature(&self) -> f64 {
        self.nodes.iter().map(|n| n.curvature).fold(f64::INFINITY, f64::min)
    }

    pub fn max_curvature(&self) -> f64 {
        self.nodes.iter().map(|n| n.curvature).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Normals, curvature and arc-length weights from the parametric boundary.
///
/// Nodes sit at equal arc-length spacing, so the weight of every node on a
/// loop is `perimeter / count`: the periodic trapezoidal rule, spectrally
/// accurate for smooth integrands.
pub fn boundary_geometry(spec: &DomainSpec, mesh: &TriMesh) -> Result<BoundaryGeometry> {
    if spec != mesh.spec() {
        return Err(Error::Precondition("mesh was not generated from this domain spec".into()));
    }
    let curves = spec.loops();
    let mut nodes = Vec::new();
    let mut loop_perimeters = Vec::with_capacity(curves.len());
    for (l, ids) in mesh.boundary_loops().iter().enumerate() {
        let curve = &curves[l];
        let perimeter = curve.perimeter();
        let weight = perimeter / ids.len() as f64;
        loop_perimeters.push(perimeter);
        for (k, &v) in ids.iter().enumerate() {
            let (_, t) = mesh.boundary_param(v).expect("loop vertex carries a curve parameter");
            nodes.push(BoundaryNode {
                vertex: v,
                loop_id: l,
                t,
                arc: weight * k as f64,
                position: curve.position(t),
                normal: curve.outward_normal(t),
                curvature: curve.curvature(t),
                weight,
            });
        }
    }
    Ok(BoundaryGeometry { nodes, loop_perimeters })
}

/// Volume and boundary measure of the domain in the metric `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainMeasures {
    pub volume: f64,
    pub perimeter: f64,
}

/// `|Ω| = Σ w_q e^{2φ}` over quadrature points, `|∂Ω| = Σ w_b e^{φ}` over
/// boundary nodes.
pub fn domain_measures(mesh: &TriMesh, metric: &ConformalMetric) -> Result<DomainMeasures> {
    let bg = boundary_geometry(mesh.spec(), mesh)?;
    Ok(DomainMeasures {
        volume: compensated_sum(mesh.quadrature().iter().map(|q| q.weight * metric.area_factor(&q.position))),
        perimeter: compensated_sum(bg.nodes.iter().map(|n| n.weight * metric.length_factor(&n.position))),
    })
}
