use crate::geometry::{TriMesh, Vec2};

/// Uniform-grid bucket index over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct PointLocator {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &TriMesh) -> Self {
        let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
        for v in mesh.vertices() {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let cell = mesh.h().max(1e-12);
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for (e, t) in mesh.triangles().iter().enumerate() {
            let pts = t.map(|i| mesh.vertices()[i]);
            let tlo = pts[0].inf(&pts[1]).inf(&pts[2]);
            let thi = pts[0].sup(&pts[1]).sup(&pts[2]);
            for i in clamp((tlo.x - lo.x) / cell, nx)..=clamp((thi.x - lo.x) / cell, nx) {
                for j in clamp((tlo.y - lo.y) / cell, ny)..=clamp((thi.y - lo.y) / cell, ny) {
                    buckets[j * nx + i].push(e);
                }
            }
        }
        PointLocator { origin: lo, cell, nx, ny, buckets }
    }

    /// Element containing `x` and the barycentric coordinates of `x` in it.
    pub fn locate(&self, mesh: &TriMesh, x: &Vec2) -> Option<(usize, [f64; 3])> {
        let fx = (x.x - self.origin.x) / self.cell;
        let fy = (x.y - self.origin.y) / self.cell;
        if fx < -1e-9 || fy < -1e-9 || fx > self.nx as f64 + 1e-9 || fy > self.ny as f64 + 1e-9 {
            return None;
        }
        let i = (fx.max(0.0) as usize).min(self.nx - 1);
        let j = (fy.max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &e in &self.buckets[j * self.nx + i] {
            let t = mesh.triangles()[e];
            let g = mesh.basis_gradients(e);
            let b = [0, 1, 2].map(|k| {
                let anchor = mesh.vertices()[t[(k + 1) % 3]];
                g[k].dot(&(x - anchor))
            });
            let worst = b.iter().copied().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(_, _, w)| worst > w) {
                best = Some((e, b, worst));
            }
        }
        best.filter(|(_, _, w)| *w >= -1e-10).map(|(e, b, _)| (e, b))
    }
}
