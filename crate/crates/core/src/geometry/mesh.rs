use std::f64::consts::TAU;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use spade::{ConstrainedDelaunayTriangulation, HasPosition, Point2, Triangulation};

use super::{DomainSpec, Vec2};
use crate::quadrature::TriangleRule;
use crate::{Error, Result};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Interior quadrature point of a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub element: usize,
    pub bary: [f64; 3],
    pub position: Vec2,
    /// Euclidean weight; the rule's weights sum to the triangle area.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Minimum interior angle in degrees every triangle must satisfy.
    pub min_angle_deg: f64,
    /// Laplacian smoothing sweeps applied to interior vertices.
    pub smoothing_sweeps: usize,
    pub quadrature: TriangleRule,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { min_angle_deg: 20.0, smoothing_sweeps: 12, quadrature: TriangleRule::Degree2 }
    }
}

/// Triangulated planar domain with exact boundary vertices.
#[derive(Debug, Clone)]
pub struct TriMesh {
    id: u64,
    spec: DomainSpec,
    h: f64,
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    loops: Vec<Vec<usize>>,
    /// `(loop, t)` for boundary vertices.
    boundary_param: Vec<Option<(usize, f64)>>,
    areas: Vec<f64>,
    /// Gradients of the three barycentric coordinates on each triangle.
    basis_grads: Vec<[Vec2; 3]>,
    vertex_triangles: Vec<Vec<usize>>,
    quad: Vec<QuadPoint>,
    rule: TriangleRule,
    min_angle_bound: f64,
}

#[derive(Clone, Copy)]
struct Site {
    pos: Point2<f64>,
    id: usize,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

pub fn build_mesh(spec: &DomainSpec, h: f64) -> Result<TriMesh> {
    build_mesh_with(spec, h, MeshOptions::default())
}

/// Hex-lattice interior points, equal-arc-length boundary points, constrained
/// Delaunay triangulation and Laplacian smoothing with retriangulation.
pub fn build_mesh_with(spec: &DomainSpec, h: f64, opts: MeshOptions) -> Result<TriMesh> {
    spec.validate()?;
    let diameter = spec.diameter();
    if !(h > 0.0 && h < diameter / 4.0) {
        return Err(Error::Validation(format!(
            "target edge length must satisfy 0 < h < diameter/4 = {:.4}, got {h}",
            diameter / 4.0
        )));
    }

    let curves = spec.loops();
    let mut points: Vec<Vec2> = Vec::new();
    let mut loops = Vec::new();
    let mut boundary_param = Vec::new();
    for (l, curve) in curves.iter().enumerate() {
        let n = boundary_count(curve.perimeter(), h);
        let mut ids = Vec::with_capacity(n);
        for t in curve.equal_arc_parameters(n) {
            ids.push(points.len());
            points.push(curve.position(t));
            boundary_param.push(Some((l, t)));
        }
        loops.push(ids);
    }
    let n_boundary = points.len();
    let segments: Vec<(Vec2, Vec2)> = loops
        .iter()
        .flat_map(|ids| (0..ids.len()).map(move |k| (ids[k], ids[(k + 1) % ids.len()])))
        .map(|(a, b)| (points[a], points[b]))
        .collect();
    let polygons: Vec<Vec<Vec2>> = loops.iter().map(|ids| ids.iter().map(|&i| points[i]).collect()).collect();

    // Hex lattice clipped to the domain with a boundary clearance.
    let clearance = 0.6 * h;
    let (lo, hi) = bounding_box(&points);
    let dy = h * 3f64.sqrt() / 2.0;
    let j_lo = (lo.y / dy).floor() as i64 - 1;
    let j_hi = (hi.y / dy).ceil() as i64 + 1;
    let i_lo = (lo.x / h).floor() as i64 - 1;
    let i_hi = (hi.x / h).ceil() as i64 + 1;
    for j in j_lo..=j_hi {
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for i in i_lo..=i_hi {
            let p = Vec2::new(i as f64 * h + shift, j as f64 * dy);
            if inside_polygons(&polygons, &p) && distance_to_segments(&segments, &p) >= clearance {
                points.push(p);
            }
        }
    }

    let mut triangles = triangulate(&points, &loops, &polygons)?;
    for _ in 0..opts.smoothing_sweeps {
        let neighbors = vertex_neighbors(points.len(), &triangles);
        let mut moved = points.clone();
        for i in n_boundary..points.len() {
            let nb = &neighbors[i];
            if nb.is_empty() {
                continue;
            }
            let target = nb.iter().fold(Vec2::zeros(), |acc, &k| acc + points[k]) / nb.len() as f64;
            if inside_polygons(&polygons, &target) && distance_to_segments(&segments, &target) >= 0.35 * h {
                moved[i] = target;
            }
        }
        points = moved;
        triangles = triangulate(&points, &loops, &polygons)?;
    }

    // Drop vertices not referenced by any triangle (cannot happen for valid
    // inputs, but keeps the mesh consistent).
    let mut used = vec![false; points.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    if used[..n_boundary].iter().any(|u| !u) {
        return Err(Error::MeshGeneration("boundary vertex not covered by any triangle".into()));
    }
    let mut remap = vec![usize::MAX; points.len()];
    let mut kept = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(*p);
        }
    }
    for t in triangles.iter_mut() {
        for v in t.iter_mut() {
            *v = remap[*v];
        }
    }
    boundary_param.resize(kept.len(), None);

    let mesh = TriMesh::assemble(spec.clone(), h, kept, triangles, loops, boundary_param, opts)?;
    let min_angle = mesh.min_angle_deg();
    if min_angle < opts.min_angle_deg {
        return Err(Error::MeshQuality { min_angle_deg: min_angle, bound_deg: opts.min_angle_deg });
    }
    Ok(mesh)
}

fn boundary_count(perimeter: f64, h: f64) -> usize {
    let n = (perimeter / h).round() as usize;
    (n.div_ceil(4) * 4).max(16)
}

fn triangulate(points: &[Vec2], loops: &[Vec<usize>], polygons: &[Vec<Vec2>]) -> Result<Vec<[usize; 3]>> {
    let mut cdt: ConstrainedDelaunayTriangulation<Site> = ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(points.len());
    for (id, p) in points.iter().enumerate() {
        let handle = cdt
            .insert(Site { pos: Point2::new(p.x, p.y), id })
            .map_err(|e| Error::MeshGeneration(format!("vertex insertion failed: {e:?}")))?;
        handles.push(handle);
    }
    if cdt.num_vertices() != points.len() {
        return Err(Error::MeshGeneration("duplicate vertices in point set".into()));
    }
    for ids in loops {
        for k in 0..ids.len() {
            let (a, b) = (handles[ids[k]], handles[ids[(k + 1) % ids.len()]]);
            if !cdt.can_add_constraint(a, b) {
                return Err(Error::MeshGeneration("boundary segment crosses another constraint".into()));
            }
            cdt.add_constraint(a, b);
        }
    }
    let mut tris = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        let [a, b, c] = face.vertices().map(|v| v.data().id);
        let centroid = (points[a] + points[b] + points[c]) / 3.0;
        if !inside_polygons(polygons, &centroid) {
            continue;
        }
        let area = signed_area(&points[a], &points[b], &points[c]);
        tris.push(if area > 0.0 { [a, b, c] } else { [a, c, b] });
    }
    Ok(tris)
}

fn vertex_neighbors(n: usize, triangles: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut nb: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if !nb[a].contains(&b) {
                nb[a].push(b);
            }
            if !nb[b].contains(&a) {
                nb[b].push(a);
            }
        }
    }
    nb
}

fn bounding_box(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn signed_area(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Even-odd point-in-polygon test over all boundary loops.
pub(crate) fn inside_polygons(polygons: &[Vec<Vec2>], p: &Vec2) -> bool {
    let mut inside = false;
    for poly in polygons {
        let n = poly.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (poly[i], poly[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
    }
    inside
}

fn distance_to_segments(segments: &[(Vec2, Vec2)], p: &Vec2) -> f64 {
    segments
        .iter()
        .map(|(a, b)| {
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (p - (a + ab * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

impl TriMesh {
    fn assemble(
        spec: DomainSpec,
        h: f64,
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        loops: Vec<Vec<usize>>,
        boundary_param: Vec<Option<(usize, f64)>>,
        opts: MeshOptions,
    ) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut basis_grads = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter().enumerate() {
            let [a, b, c] = t.map(|i| vertices[i]);
            let area = signed_area(&a, &b, &c);
            if !(area > 0.0) {
                return Err(Error::MeshGeneration(format!("triangle {e} has non-positive area {area:e}")));
            }
            // ∇λ_k = rot90(opposite edge) / (2·area)
            let grad = |p: Vec2, q: Vec2| Vec2::new(p.y - q.y, q.x - p.x) / (2.0 * area);
            basis_grads.push([grad(b, c), grad(c, a), grad(a, b)]);
            areas.push(area);
        }
        let mut vertex_triangles = vec![Vec::new(); vertices.len()];
        for (e, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_triangles[v].push(e);
            }
        }
        let mut mesh = TriMesh {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            spec,
            h,
            vertices,
            triangles,
            loops,
            boundary_param,
            areas,
            basis_grads,
            vertex_triangles,
            quad: Vec::new(),
            rule: opts.quadrature,
            min_angle_bound: opts.min_angle_deg,
        };
        mesh.quad = mesh.build_quadrature(opts.quadrature);
        Ok(mesh)
    }

    fn build_quadrature(&self, rule: TriangleRule) -> Vec<QuadPoint> {
        let pts = rule.points();
        let mut quad = Vec::with_capacity(self.triangles.len() * pts.len());
        for (e, t) in self.triangles.iter().enumerate() {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            for (bary, w) in &pts {
                quad.push(QuadPoint {
                    element: e,
                    bary: *bary,
                    position: a * bary[0] + b * bary[1] + c * bary[2],
                    weight: w * self.areas[e],
                });
            }
        }
        quad
    }

    /// Identity token shared by fields defined on this mesh.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn boundary_param(&self, v: usize) -> Option<(usize, f64)> {
        self.boundary_param[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_param[v].is_some()
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn basis_gradients(&self, e: usize) -> &[Vec2; 3] {
        &self.basis_grads[e]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    pub fn quadrature(&self) -> &[QuadPoint] {
        &self.quad
    }

    pub fn quadrature_rule(&self) -> TriangleRule {
        self.rule
    }

    pub fn min_angle_bound(&self) -> f64 {
        self.min_angle_bound
    }

    /// Area of the polygonal mesh domain.
    pub fn polygon_area(&self) -> f64 {
        crate::par::compensated_sum(self.areas.iter().copied())
    }

    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                let p = t.map(|i| self.vertices[i]);
                (0..3).map(move |k| {
                    let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                    let (u, v) = (b - a, c - a);
                    (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos().to_degrees()
                })
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (self.vertices[t[k]] - self.vertices[t[(k + 1) % 3]]).norm()))
            .fold(0.0, f64::max)
    }

    /// Interpolates a nodal field at a quadrature point.
    pub fn interpolate(&self, values: &[f64], q: &QuadPoint) -> f64 {
        let t = &self.triangles[q.element];
        q.bary[0] * values[t[0]] + q.bary[1] * values[t[1]] + q.bary[2] * values[t[2]]
    }

    /// Mirror image under `y ↦ -y`. The domain must be symmetric under that
    /// reflection (disks, ellipses, annuli, cosine-only polar stars).
    pub fn mirrored_y(&self) -> Result<TriMesh> {
        let symmetric = match &self.spec {
            DomainSpec::PolarStar { sin, .. } => sin.iter().all(|&s| s == 0.0),
            _ => true,
        };
        if !symmetric {
            return Err(Error::Precondition("domain is not symmetric under y ↦ -y".into()));
        }
        let vertices = self.vertices.iter().map(|p| Vec2::new(p.x, -p.y)).collect();
        let triangles = self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect();
        let boundary_param = self
            .boundary_param
            .iter()
            .map(|bp| bp.map(|(l, t)| (l, if t == 0.0 { 0.0 } else { TAU - t })))
            .collect();
        let loops = self
            .loops
            .iter()
            .map(|ids| {
                let mut r: Vec<usize> = ids.iter().rev().copied().collect();
                r.rotate_right(1);
                r
            })
            .collect();
        TriMesh::assemble(
            self.spec.clone(),
            self.h,
            vertices,
            triangles,
            loops,
            boundary_param,
            MeshOptions { min_angle_deg: self.min_angle_bound, smoothing_sweeps: 0, quadrature: self.rule },
        )
    }

    /// Plain-text node/element dump: a header `n_vertices n_triangles`, then
    /// one `x y` line per vertex and one 0-based `i j k` line per triangle.
    pub fn write_node_element<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.vertices.len(), self.triangles.len())?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", p.x, p.y)?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_mesh_invariants() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.05).unwrap();
        assert!(mesh.min_angle_deg() >= 20.0);
        assert!((mesh.polygon_area() - PI).abs() / PI < 5e-3);
        for e in 0..mesh.n_triangles() {
            assert!(mesh.area(e) > 0.0);
        }
        for &v in &mesh.boundary_loops()[0] {
            assert!((mesh.vertices()[v].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn h_out_of_range_is_rejected() {
        assert!(build_mesh(&DomainSpec::disk(1.0), 0.6).is_err());
        assert!(build_mesh(&DomainSpec::disk(1.0), 0.0).is_err());
    }

    #[test]
    fn annulus_has_two_loops_and_a_hole() {
        let mesh = build_mesh(&DomainSpec::Annulus { inner: 0.4, outer: 1.0 }, 0.08).unwrap();
        assert_eq!(mesh.boundary_loops().len(), 2);
        let exact = PI * (1.0 - 0.16);
        assert!((mesh.polygon_area() - exact).abs() / exact < 2e-2);
        for q in mesh.quadrature() {
            assert!(q.position.norm() > 0.39);
        }
    }

    #[test]
    fn node_element_dump_has_expected_line_count() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.2).unwrap();
        let mut buf = Vec::new();
        mesh.write_node_element(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + mesh.n_vertices() + mesh.n_triangles());
        let last = text.lines().last().unwrap();
        assert_eq!(last.split_whitespace().count(), 3);
    }

    #[test]
    fn mirrored_mesh_is_valid() {
        let mesh = build_mesh(&DomainSpec::ellipse(2.0, 1.0), 0.2).unwrap();
        let m = mesh.mirrored_y().unwrap();
        assert_eq!(m.n_triangles(), mesh.n_triangles());
        assert!((m.polygon_area() - mesh.polygon_area()).abs() < 1e-12);
        let bad = DomainSpec::PolarStar { r0: 1.0, cos: vec![], sin: vec![0.1] };
        assert!(build_mesh(&bad, 0.2).unwrap().mirrored_y().is_err());
    }
}
