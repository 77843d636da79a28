//! P1 finite-element solver for `-Δₚᵍu = 1`, `u = 0` on `∂Ω`.
//!
//! The regularized energy
//!
//! `J_ε(u) = ∫ (1/p) e^{(2-p)φ}(ε² + |∇u|²)^{p/2} dx - ∫ u e^{2φ} dx`
//!
//! is strictly convex; its stationarity equation is the regularized torsion
//! problem in the metric `e^{2φ}δ`. Each `ε` of a geometric ladder is solved
//! by damped Newton with an Armijo line search on `J_ε`, warm-started from the
//! previous rung. Boundary values are eliminated.

use serde::{Deserialize, Serialize};

use crate::fields::ScalarField;
use crate::geometry::{DomainSpec, TriMesh, Vec2};
use crate::metric::ConformalMetric;
use crate::oracles::radial_exact;
use crate::par::{compensated_sum, map_range, Exec};
use crate::quadrature::TriangleRule;
use crate::sparse::{norm, CsrMatrix, EnvelopeCholesky};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub p: f64,
    /// Initial regularization; `None` means a tenth of the largest gradient of
    /// the initial guess.
    pub eps0: Option<f64>,
    pub rho: f64,
    pub eps_min: f64,
    /// Newton stops when `‖R‖ ≤ newton_tol·‖b‖`, `b` the load vector.
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub armijo: f64,
    /// Rule for the conformal weights; `None` uses the mesh rule.
    #[serde(skip)]
    pub quadrature: Option<TriangleRule>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            p: 2.0,
            eps0: None,
            rho: 0.1,
            eps_min: 1e-8,
            newton_tol: 1e-10,
            max_newton_iter: 50,
            backtrack: 0.5,
            max_backtracks: 40,
            armijo: 1e-4,
            quadrature: None,
            exec: Exec::Parallel,
        }
    }
}

impl SolveConfig {
    pub fn with_p(p: f64) -> Self {
        SolveConfig { p, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p must exceed 1, got {}", self.p));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.eps_min > 0.0) {
            return bad(format!("eps_min must be positive, got {}", self.eps_min));
        }
        if let Some(e0) = self.eps0 {
            if !(e0 > self.eps_min) {
                return bad(format!("eps0 = {e0} must exceed eps_min = {}", self.eps_min));
            }
        }
        if !(self.newton_tol > 0.0) || self.max_newton_iter == 0 {
            return bad("newton_tol must be positive and max_newton_iter nonzero".into());
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.armijo > 0.0 && self.armijo < 0.5) {
            return bad("backtrack must lie in (0, 1) and armijo in (0, 1/2)".into());
        }
        Ok(())
    }
}

/// Regularized flux coefficient on one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedFlux {
    /// `G* = (ε² + |∇u|²)^{(p-2)/2}`.
    pub g_star: f64,
    /// `G*(I + (p-2)∇u∇uᵀ/(ε² + |∇u|²))`, row-major.
    pub tangent: [[f64; 2]; 2],
}

impl RegularizedFlux {
    pub fn new(grad: &Vec2, p: f64, eps: f64) -> Self {
        let s = eps * eps + grad.norm_squared();
        let g_star = s.powf((p - 2.0) / 2.0);
        let c = if s > 0.0 { (p - 2.0) / s } else { 0.0 };
        let t = |i: usize, j: usize| g_star * (f64::from(u8::from(i == j)) + c * grad[i] * grad[j]);
        RegularizedFlux { g_star, tangent: [[t(0, 0), t(0, 1)], [t(1, 0), t(1, 1)]] }
    }
}

/// Energy, gradient and second variation of `J_ε` at a nodal field.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub energy: f64,
    /// Gradient of `J_ε` for every vertex, boundary rows included.
    pub residual: Vec<f64>,
    /// Tangent restricted to interior vertices, indexed by [`Discretization::dof`].
    pub tangent: CsrMatrix,
}

/// Mesh data independent of `u`: element weights of the conformal factors and
/// the interior numbering.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh_id: u64,
    /// `∫_e e^{(2-p)φ}` per element.
    grad_weight: Vec<f64>,
    /// `∫ λ_k e^{2φ}` per vertex.
    load: Vec<f64>,
    dof: Vec<Option<usize>>,
    interior: Vec<usize>,
    p: f64,
    exec: Exec,
}

impl Discretization {
    pub fn new(mesh: &TriMesh, metric: &ConformalMetric, p: f64, rule: Option<TriangleRule>, exec: Exec) -> Self {
        let rule = rule.unwrap_or(mesh.quadrature_rule());
        let pts = rule.points();
        let per_element = map_range(exec, mesh.n_triangles(), |e| {
            let t = mesh.triangles()[e];
            let area = mesh.area(e);
            if metric.is_flat() {
                return (area, [area / 3.0; 3]);
            }
            let [a, b, c] = t.map(|i| mesh.vertices()[i]);
            let mut gw = 0.0;
            let mut lw = [0.0; 3];
            for (bary, w) in &pts {
                let x = a * bary[0] + b * bary[1] + c * bary[2];
                let phi = metric.phi(&x);
                gw += w * area * ((2.0 - p) * phi).exp();
                for k in 0..3 {
                    lw[k] += w * area * bary[k] * (2.0 * phi).exp();
                }
            }
            (gw, lw)
        });
        let mut load = vec![0.0; mesh.n_vertices()];
        let mut grad_weight = Vec::with_capacity(mesh.n_triangles());
        for (e, (gw, lw)) in per_element.into_iter().enumerate() {
            grad_weight.push(gw);
            for (k, &v) in mesh.triangles()[e].iter().enumerate() {
                load[v] += lw[k];
            }
        }
        let mut dof = vec![None; mesh.n_vertices()];
        let mut interior = Vec::new();
        for v in 0..mesh.n_vertices() {
            if !mesh.is_boundary(v) {
                dof[v] = Some(interior.len());
                interior.push(v);
            }
        }
        Discretization { mesh_id: mesh.id(), grad_weight, load, dof, interior, p, exec }
    }

    pub fn n_dofs(&self) -> usize {
        self.interior.len()
    }

    pub fn dof(&self, v: usize) -> Option<usize> {
        self.dof[v]
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    fn element_gradient(mesh: &TriMesh, e: usize, u: &[f64]) -> Vec2 {
        let t = mesh.triangles()[e];
        let g = mesh.basis_gradients(e);
        g[0] * u[t[0]] + g[1] * u[t[1]] + g[2] * u[t[2]]
    }

    /// `J_ε(u)`.
    pub fn energy(&self, mesh: &TriMesh, u: &[f64], eps: f64) -> Result<f64> {
        let p = self.p;
        let terms = map_range(self.exec, mesh.n_triangles(), |e| {
            let g = Self::element_gradient(mesh, e, u);
            self.grad_weight[e] * (eps * eps + g.norm_squared()).powf(p / 2.0) / p
        });
        if let Some(e) = terms.iter().position(|t| !t.is_finite()) {
            return Err(Error::NumericalFailure { element: e, what: "non-finite energy density".into() });
        }
        Ok(compensated_sum(terms) - compensated_sum(u.iter().zip(&self.load).map(|(a, b)| a * b)))
    }

    pub fn assemble(&self, mesh: &TriMesh, u: &[f64], eps: f64) -> Result<Assembly> {
        if mesh.id() != self.mesh_id || u.len() != mesh.n_vertices() {
            return Err(Error::SizeMismatch { expected: mesh.n_vertices(), actual: u.len() });
        }
        let p = self.p;
        let local = map_range(self.exec, mesh.n_triangles(), |e| {
            let g = Self::element_gradient(mesh, e, u);
            let w = self.grad_weight[e];
            let flux = RegularizedFlux::new(&g, p, eps);
            let energy = w * (eps * eps + g.norm_squared()).powf(p / 2.0) / p;
            let bg = mesh.basis_gradients(e);
            let mut r = [0.0; 3];
            let mut k = [[0.0; 3]; 3];
            for a in 0..3 {
                r[a] = w * flux.g_star * g.dot(&bg[a]);
                for b in 0..3 {
                    let t = &flux.tangent;
                    let tb = Vec2::new(t[0][0] * bg[b].x + t[0][1] * bg[b].y, t[1][0] * bg[b].x + t[1][1] * bg[b].y);
                    k[a][b] = w * bg[a].dot(&tb);
                }
            }
            (energy, r, k)
        });
        let mut residual: Vec<f64> = self.load.iter().map(|b| -b).collect();
        let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
        let mut energies = Vec::with_capacity(local.len());
        for (e, (energy, r, k)) in local.into_iter().enumerate() {
            if !energy.is_finite() || r.iter().any(|v| !v.is_finite()) || k.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure { element: e, what: "non-finite energy, residual or tangent".into() });
            }
            energies.push(energy);
            let t = mesh.triangles()[e];
            for a in 0..3 {
                residual[t[a]] += r[a];
                if let Some(i) = self.dof[t[a]] {
                    for b in 0..3 {
                        if let Some(j) = self.dof[t[b]] {
                            triplets.push((i, j, k[a][b]));
                        }
                    }
                }
            }
        }
        let energy = compensated_sum(energies) - compensated_sum(u.iter().zip(&self.load).map(|(a, b)| a * b));
        Ok(Assembly { energy, residual, tangent: CsrMatrix::from_triplets(self.n_dofs(), &triplets) })
    }

    fn interior_norm(&self, full: &[f64]) -> f64 {
        self.interior.iter().map(|&v| full[v] * full[v]).sum::<f64>().sqrt()
    }

    fn load_norm(&self) -> f64 {
        self.interior_norm(&self.load)
    }
}

/// `J_ε`, its gradient and its tangent at `u`.
pub fn assemble_energy_residual(
    u: &ScalarField,
    mesh: &TriMesh,
    metric: &ConformalMetric,
    p: f64,
    eps: f64,
) -> Result<Assembly> {
    u.check_mesh(mesh)?;
    Discretization::new(mesh, metric, p, None, Exec::Parallel).assemble(mesh, u.values(), eps)
}

/// Diagnostics of one continuation rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsStep {
    pub eps: f64,
    pub iterations: usize,
    /// Relative residual `‖R‖/‖b‖` after each accepted step, starting value first.
    pub residual_history: Vec<f64>,
    /// `J_ε` after each accepted step, starting value first.
    pub energy_history: Vec<f64>,
}

impl EpsStep {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("nonempty history")
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy_history.last().expect("nonempty history")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub min_u: f64,
    pub max_u: f64,
    /// All interior nodal values are positive.
    pub interior_positive: bool,
    /// Fraction of elements whose gradient lies below the default critical
    /// threshold.
    pub critical_fraction: f64,
    pub n_dofs: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    pub p: f64,
    pub steps: Vec<EpsStep>,
    pub final_eps: f64,
    pub diagnostics: SolveDiagnostics,
    /// Boundary reactions: `∮ λ_k |u_ν|^{p-2}u_ν ds_g` per boundary vertex.
    pub reactions: Vec<(usize, f64)>,
}

impl Solution {
    /// Variational boundary flux `∮ |u_ν|^{p-2}u_ν ds_g`.
    pub fn variational_flux(&self) -> f64 {
        compensated_sum(self.reactions.iter().map(|r| r.1))
    }

    /// Nodal table with header `x,y,u`.
    pub fn write_csv<W: std::io::Write>(&self, mesh: &TriMesh, w: W) -> Result<()> {
        self.u.write_csv(mesh, "u", w)
    }
}

fn eps_schedule(eps0: f64, rho: f64, eps_min: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = eps0;
    while e > eps_min * (1.0 + 1e-12) {
        out.push(e);
        e *= rho;
    }
    out.push(eps_min);
    out
}

/// Solves the torsion problem by ε-continuation.
pub fn solve(mesh: &TriMesh, metric: &ConformalMetric, config: &SolveConfig) -> Result<Solution> {
    config.validate()?;
    let p = config.p;
    let disc = Discretization::new(mesh, metric, p, config.quadrature, config.exec);
    if disc.n_dofs() == 0 {
        return Err(Error::Precondition("mesh has no interior vertices".into()));
    }
    let mut u = initial_guess(mesh, metric, &disc, config)?;
    let max_grad = (0..mesh.n_triangles())
        .map(|e| Discretization::element_gradient(mesh, e, &u).norm())
        .fold(0.0, f64::max);
    let eps0 = config.eps0.unwrap_or(0.1 * max_grad).max(config.eps_min);
    let mut steps = Vec::new();
    for eps in eps_schedule(eps0, config.rho, config.eps_min) {
        steps.push(newton(mesh, &disc, &mut u, eps, config)?);
    }
    let final_eps = steps.last().map_or(config.eps_min, |s| s.eps);
    let full = disc.assemble(mesh, &u, final_eps)?;
    let reactions = (0..mesh.n_vertices()).filter(|&v| mesh.is_boundary(v)).map(|v| (v, full.residual[v])).collect();
    let diagnostics = diagnostics(mesh, metric, &disc, &u);
    Ok(Solution { u: ScalarField::new(mesh, u)?, p, steps, final_eps, diagnostics, reactions })
}

fn diagnostics(mesh: &TriMesh, metric: &ConformalMetric, disc: &Discretization, u: &[f64]) -> SolveDiagnostics {
    let interior = disc.interior.iter().map(|&v| u[v]);
    let min_u = interior.clone().fold(f64::INFINITY, f64::min);
    let max_u = interior.fold(f64::NEG_INFINITY, f64::max);
    let grads: Vec<f64> = (0..mesh.n_triangles())
        .map(|e| {
            let t = mesh.triangles()[e];
            let c = (mesh.vertices()[t[0]] + mesh.vertices()[t[1]] + mesh.vertices()[t[2]]) / 3.0;
            Discretization::element_gradient(mesh, e, u).norm() / metric.length_factor(&c)
        })
        .collect();
    let max_g = grads.iter().copied().fold(0.0, f64::max);
    let delta = crate::fields::CriticalMask::default_threshold(mesh.h(), max_g);
    SolveDiagnostics {
        min_u,
        max_u,
        interior_positive: min_u > 0.0,
        critical_fraction: grads.iter().filter(|g| **g <= delta).count() as f64 / grads.len() as f64,
        n_dofs: disc.n_dofs(),
    }
}

/// Scaled `p = 2` solution: `t·u₂` with `t = (B/A)^{1/(p-1)}` minimizing
/// `J_0(t·u₂)`, `A = ∫e^{(2-p)φ}|∇u₂|^p`, `B = ∫u₂e^{2φ}`.
fn initial_guess(mesh: &TriMesh, metric: &ConformalMetric, disc: &Discretization, config: &SolveConfig) -> Result<Vec<f64>> {
    let lin = Discretization::new(mesh, metric, 2.0, config.quadrature, config.exec);
    let zero = vec![0.0; mesh.n_vertices()];
    let a = lin.assemble(mesh, &zero, 0.0)?;
    let chol = EnvelopeCholesky::factor(&a.tangent)?;
    let rhs: Vec<f64> = lin.interior.iter().map(|&v| lin.load[v]).collect();
    let x = chol.solve(&rhs);
    let mut u2 = vec![0.0; mesh.n_vertices()];
    for (k, &v) in lin.interior.iter().enumerate() {
        u2[v] = x[k];
    }
    if (config.p - 2.0).abs() < 1e-15 {
        return Ok(u2);
    }
    let p = config.p;
    let big_a = compensated_sum((0..mesh.n_triangles()).map(|e| {
        disc.grad_weight[e] * Discretization::element_gradient(mesh, e, &u2).norm().powf(p)
    }));
    let big_b = compensated_sum(u2.iter().zip(&disc.load).map(|(a, b)| a * b));
    let t = (big_b / big_a).powf(1.0 / (p - 1.0));
    Ok(u2.into_iter().map(|v| v * t).collect())
}

fn newton(mesh: &TriMesh, disc: &Discretization, u: &mut Vec<f64>, eps: f64, cfg: &SolveConfig) -> Result<EpsStep> {
    let bnorm = disc.load_norm();
    let mut asm = disc.assemble(mesh, u, eps)?;
    let mut res = disc.interior_norm(&asm.residual) / bnorm;
    let mut residual_history = vec![res];
    let mut energy_history = vec![asm.energy];
    let mut iterations = 0;
    while res > cfg.newton_tol {
        if iterations >= cfg.max_newton_iter {
            return Err(Error::NonConvergence { eps, iterations, last: res, history: residual_history });
        }
        iterations += 1;
        let rhs: Vec<f64> = disc.interior.iter().map(|&v| -asm.residual[v]).collect();
        let chol = EnvelopeCholesky::factor(&asm.tangent)?;
        let mut d = chol.solve(&rhs);
        // one step of iterative refinement keeps the solve at working precision
        let r2: Vec<f64> = asm.tangent.mul_vec(&d).iter().zip(&rhs).map(|(a, b)| b - a).collect();
        if norm(&r2) > 1e-12 * norm(&rhs) {
            for (di, ci) in d.iter_mut().zip(chol.solve(&r2)) {
                *di += ci;
            }
        }
        let slope = -crate::sparse::dot(&d, &rhs);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut trial = u.clone();
            for (k, &v) in disc.interior.iter().enumerate() {
                trial[v] += alpha * d[k];
            }
            let e = disc.energy(mesh, &trial, eps)?;
            let de = e - asm.energy;
            let sufficient = de <= cfg.armijo * alpha * slope;
            // Near convergence the decrease drowns in rounding; accept a step
            // that leaves the energy unchanged to working precision and
            // reduces the residual.
            let flat = de <= 4.0 * f64::EPSILON * asm.energy.abs().max(1e-300);
            if sufficient || flat {
                let trial_asm = disc.assemble(mesh, &trial, eps)?;
                let trial_res = disc.interior_norm(&trial_asm.residual) / bnorm;
                if sufficient || trial_res < res {
                    accepted = Some((trial, trial_asm, trial_res));
                    break;
                }
            }
            alpha *= cfg.backtrack;
        }
        let Some((trial, trial_asm, trial_res)) = accepted else {
            return Err(Error::LineSearchStagnation { eps, last: res, history: residual_history });
        };
        *u = trial;
        asm = trial_asm;
        res = trial_res;
        residual_history.push(res);
        energy_history.push(asm.energy);
    }
    Ok(EpsStep { eps, iterations, residual_history, energy_history })
}

/// One row of a refinement study against the exact radial solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub linf: f64,
    pub l2: f64,
    /// `log(e_prev/e)/log(h_prev/h)` in L²; absent on the first row.
    pub order: Option<f64>,
}

/// Solves on a disk for each `h` and compares with the radial oracle.
pub fn convergence_study(spec: &DomainSpec, metric: &ConformalMetric, p: f64, hs: &[f64]) -> Result<Vec<ConvergenceRow>> {
    let DomainSpec::Disk { radius } = *spec else {
        return Err(Error::Precondition("convergence study needs a disk (radial oracle)".into()));
    };
    if !metric.is_flat() {
        return Err(Error::Precondition("radial oracle is Euclidean; use the flat metric".into()));
    }
    let exact = radial_exact(2, p, radius)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &h in hs {
        let mesh = crate::geometry::build_mesh(spec, h)?;
        let sol = solve(&mesh, metric, &SolveConfig::with_p(p))?;
        let (linf, l2) = nodal_errors(&mesh, sol.u.values(), |x| exact.u(x.norm()));
        let order = rows.last().map(|prev| (prev.l2 / l2).ln() / (prev.h / h).ln());
        rows.push(ConvergenceRow { h, linf, l2, order });
    }
    Ok(rows)
}

/// `(max |u_h - u|` over vertices, `‖u_h - u‖_{L²}` by the mesh quadrature`)`.
pub fn nodal_errors(mesh: &TriMesh, u: &[f64], exact: impl Fn(&Vec2) -> f64) -> (f64, f64) {
    let linf = mesh.vertices().iter().zip(u).map(|(x, v)| (v - exact(x)).abs()).fold(0.0, f64::max);
    let l2 = compensated_sum(mesh.quadrature().iter().map(|q| q.weight * (mesh.interpolate(u, q) - exact(&q.position)).powi(2))).sqrt();
    (linf, l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_mesh;

    #[test]
    fn zero_field_residual_is_minus_load() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.2).unwrap();
        let u = ScalarField::zeros(&mesh);
        let a = assemble_energy_residual(&u, &mesh, &ConformalMetric::flat(), 2.0, 0.3).unwrap();
        let disc = Discretization::new(&mesh, &ConformalMetric::flat(), 2.0, None, Exec::Sequential);
        assert!(a.residual.iter().zip(disc.load()).all(|(r, b)| (r + b).abs() < 1e-15));
        // energy of u = 0 is the ε-constant term only
        let b = assemble_energy_residual(&u, &mesh, &ConformalMetric::flat(), 2.0, 0.0).unwrap();
        assert_eq!(b.energy, 0.0);
    }

    #[test]
    fn p_two_tangent_ignores_eps() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.2).unwrap();
        let u = ScalarField::from_fn(&mesh, |x| 1.0 - x.norm_squared()).unwrap();
        let a = assemble_energy_residual(&u, &mesh, &ConformalMetric::flat(), 2.0, 0.0).unwrap();
        let b = assemble_energy_residual(&u, &mesh, &ConformalMetric::flat(), 2.0, 5.0).unwrap();
        assert_eq!(a.tangent, b.tangent);
    }

    #[test]
    fn regularized_flux_is_positive_definite() {
        for p in [1.1, 1.5, 2.0, 3.0, 6.0] {
            for g in [Vec2::new(0.0, 0.0), Vec2::new(1e-6, 0.0), Vec2::new(3.0, -4.0)] {
                let f = RegularizedFlux::new(&g, p, 1e-3);
                let t = nalgebra::Matrix2::new(f.tangent[0][0], f.tangent[0][1], f.tangent[1][0], f.tangent[1][1]);
                let min_eig = t.symmetric_eigenvalues().min();
                assert!(min_eig >= f.g_star * (p - 1.0).min(1.0) * (1.0 - 1e-12), "p={p} g={g:?}");
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig { rho: 1.5, ..Default::default() }.validate().is_err());
        assert!(SolveConfig::with_p(1.0).validate().is_err());
        assert!(SolveConfig { eps0: Some(1e-9), ..Default::default() }.validate().is_err());
        assert!(SolveConfig::with_p(3.0).validate().is_ok());
    }

    #[test]
    fn schedule_ends_at_eps_min() {
        let s = eps_schedule(0.05, 0.1, 1e-8);
        assert_eq!(s.len(), 8);
        assert_eq!(*s.last().unwrap(), 1e-8);
    }

    #[test]
    fn disk_p2_matches_exact() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.1).unwrap();
        let sol = solve(&mesh, &ConformalMetric::flat(), &SolveConfig::with_p(2.0)).unwrap();
        let (linf, _) = nodal_errors(&mesh, sol.u.values(), |x| (1.0 - x.norm_squared()) / 4.0);
        assert!(linf < 2e-3, "{linf}");
        assert!(sol.diagnostics.interior_positive);
        assert!((sol.variational_flux() + std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI);
    }
}
