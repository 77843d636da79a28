//! Pointwise differential algebra on second-order jets.
//!
//! A [`Jet`] holds `u`, `∇u` and `∇²u` at a point, expressed in an orthonormal
//! frame of the metric. Every formula here is purely algebraic in those
//! components, so the same code serves flat and conformal metrics and any
//! dimension. Quantities that divide by `|∇u|` return `None` on the critical
//! set instead of a number.

use nalgebra::{SMatrix, SVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub value: f64,
    pub grad: SVector<f64, N>,
    /// Symmetric Hessian.
    pub hess: SMatrix<f64, N, N>,
}

impl<const N: usize> Jet<N> {
    pub fn new(value: f64, grad: SVector<f64, N>, hess: SMatrix<f64, N, N>) -> Self {
        Jet { value, grad, hess: (hess + hess.transpose()) * 0.5 }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad.norm()
    }

    pub fn is_critical(&self) -> bool {
        self.grad_norm() == 0.0
    }

    pub fn laplacian(&self) -> f64 {
        self.hess.trace()
    }

    /// Squared Hilbert–Schmidt norm `‖∇²u‖²`.
    pub fn hess_norm_sq(&self) -> f64 {
        self.hess.norm_squared()
    }

    /// `A_u = ∇²u(∇u, ∇u) / |∇u|²`.
    pub fn a_u(&self) -> Option<f64> {
        let g2 = self.grad.norm_squared();
        (g2 > 0.0).then(|| (self.grad.transpose() * self.hess * self.grad)[(0, 0)] / g2)
    }

    /// `|∇|∇u|| = |∇²u·∇u| / |∇u|`.
    pub fn grad_of_grad_norm(&self) -> Option<f64> {
        let g = self.grad_norm();
        (g > 0.0).then(|| (self.hess * self.grad).norm() / g)
    }

    /// `Δₚu = |∇u|^{p-2}(Δu + (p-2)A_u)`.
    pub fn p_laplacian(&self, p: f64) -> Option<f64> {
        let a = self.a_u()?;
        Some(self.grad_norm().powf(p - 2.0) * (self.laplacian() + (p - 2.0) * a))
    }

    /// `P = ((p-1)/p)|∇u|^p + u/n`, `n = N`.
    pub fn p_function(&self, p: f64) -> f64 {
        (p - 1.0) / p * self.grad_norm().powf(p) + self.value / N as f64
    }

    /// `∇P = (p-1)|∇u|^{p-2}∇²u·∇u + ∇u/n`.
    pub fn grad_p_function(&self, p: f64) -> Option<SVector<f64, N>> {
        let g = self.grad_norm();
        (g > 0.0).then(|| self.hess * self.grad * ((p - 1.0) * g.powf(p - 2.0)) + self.grad / N as f64)
    }

    /// Coefficients of the second-order part of the linearized operator,
    /// `|∇u|^{p-2}δ_ij + (p-2)|∇u|^{p-4}∇_i u ∇_j u`.
    pub fn linearized_coefficients(&self, p: f64) -> Option<SMatrix<f64, N, N>> {
        let g = self.grad_norm();
        (g > 0.0).then(|| {
            SMatrix::<f64, N, N>::identity() * g.powf(p - 2.0)
                + self.grad * self.grad.transpose() * ((p - 2.0) * g.powf(p - 4.0))
        })
    }
}

/// Linearized p-Laplacian applied to `η` (expanded non-divergence form):
///
/// `𝓛ᵤη = |∇u|^{p-2}Δη + (p-2)|∇u|^{p-4}∇²η(∇u,∇u) + (p-2)(⟨∇u,∇η⟩/|∇u|²)Δₚu
///        + 2(p-2)|∇u|^{p-4}∇²u(∇u, ∇η - ν⟨ν,∇η⟩)`, `ν = ∇u/|∇u|`.
pub fn linearized_apply<const N: usize>(u: &Jet<N>, eta: &Jet<N>, p: f64) -> Option<f64> {
    let g = u.grad_norm();
    let dpu = u.p_laplacian(p)?;
    let gp2 = g.powf(p - 2.0);
    let gp4 = g.powf(p - 4.0);
    let du_deta = u.grad.dot(&eta.grad);
    let nu = u.grad / g;
    let tangential = eta.grad - nu * nu.dot(&eta.grad);
    let hess_eta_uu = (u.grad.transpose() * eta.hess * u.grad)[(0, 0)];
    let hess_u_mixed = (u.grad.transpose() * u.hess * tangential)[(0, 0)];
    Some(
        gp2 * eta.laplacian()
            + (p - 2.0) * gp4 * hess_eta_uu
            + (p - 2.0) * du_deta / (g * g) * dpu
            + 2.0 * (p - 2.0) * gp4 * hess_u_mixed,
    )
}

/// `𝓛ᵤP` for an arbitrary `C³` field:
///
/// `(p-1)|∇u|^{2(p-2)}(|∇u|^{2-p}⟨∇Δₚu,∇u⟩ + ‖∇²u‖² + (p-2)²A² + Ric(∇u,∇u))
///  + 2(p-1)(p-2)|∇u|^{2(p-2)}|∇|∇u||² + (p-1)Δₚu/n`.
pub fn lu_p_expansion<const N: usize>(u: &Jet<N>, p: f64, ricci: f64, grad_dpu_dot_grad_u: f64) -> Option<f64> {
    let g = u.grad_norm();
    let a = u.a_u()?;
    let ggn = u.grad_of_grad_norm()?;
    let dpu = u.p_laplacian(p)?;
    let w = g.powf(2.0 * (p - 2.0));
    Some(
        (p - 1.0)
            * w
            * (g.powf(2.0 - p) * grad_dpu_dot_grad_u + u.hess_norm_sq() + (p - 2.0).powi(2) * a * a + ricci)
            + 2.0 * (p - 1.0) * (p - 2.0) * w * ggn * ggn
            + (p - 1.0) * dpu / N as f64,
    )
}

/// `𝓛ᵤP` for a solution of `Δₚu = -1`: the constant source removes the
/// third-order term.
///
/// `(p-1)|∇u|^{2(p-2)}(‖∇²u‖² + (p-2)²A² + Ric) + 2(p-1)(p-2)|∇u|^{2(p-2)}|∇|∇u||² - (p-1)/n`.
pub fn lu_p_torsion<const N: usize>(u: &Jet<N>, p: f64, ricci: f64) -> Option<f64> {
    let g = u.grad_norm();
    let a = u.a_u()?;
    let ggn = u.grad_of_grad_norm()?;
    let w = g.powf(2.0 * (p - 2.0));
    Some(
        (p - 1.0) * w * (u.hess_norm_sq() + (p - 2.0).powi(2) * a * a + ricci)
            + 2.0 * (p - 1.0) * (p - 2.0) * w * ggn * ggn
            - (p - 1.0) / N as f64,
    )
}

/// Right-hand side of the p-Bochner formula:
///
/// `|∇u|^{2(p-2)}(|∇u|^{2-p}(⟨∇Δₚu,∇u⟩ - (p-2)A Δₚu) + ‖∇²u‖² + p(p-2)A² + Ric(∇u,∇u))`.
pub fn bochner_rhs<const N: usize>(u: &Jet<N>, p: f64, ricci: f64, grad_dpu_dot_grad_u: f64) -> Option<f64> {
    let g = u.grad_norm();
    let a = u.a_u()?;
    let dpu = u.p_laplacian(p)?;
    Some(
        g.powf(2.0 * (p - 2.0))
            * (g.powf(2.0 - p) * (grad_dpu_dot_grad_u - (p - 2.0) * a * dpu)
                + u.hess_norm_sq()
                + p * (p - 2.0) * a * a
                + ricci),
    )
}

/// Flux field `a = (p-2)|∇u|^{p-4}⟨∇u,∇P⟩∇u + |∇u|^{p-2}∇P`, zero on the
/// critical set by convention.
pub fn flux_vector<const N: usize>(u: &Jet<N>, p: f64) -> SVector<f64, N> {
    let Some(grad_p) = u.grad_p_function(p) else {
        return SVector::zeros();
    };
    let g = u.grad_norm();
    u.grad * ((p - 2.0) * g.powf(p - 4.0) * u.grad.dot(&grad_p)) + grad_p * g.powf(p - 2.0)
}
