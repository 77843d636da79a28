//! Dense bivariate polynomials of total degree at most four.

use serde::{Deserialize, Serialize};

use crate::taylor::Taylor;

pub const MAX_DEGREE: usize = 4;
/// Number of monomials `x^i y^j` with `i + j ≤ 4`.
pub const N_COEFFS: usize = 15;

/// Monomial exponents in graded order: `1, x, y, x², xy, y², x³, x²y, …, y⁴`.
pub fn monomial(k: usize) -> (usize, usize) {
    let mut d = 0;
    while (d + 1) * (d + 2) / 2 <= k {
        d += 1;
    }
    let j = k - d * (d + 1) / 2;
    (d - j, j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly2 {
    /// Coefficients in graded order; missing trailing entries are zero.
    coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn new(coeffs: Vec<f64>) -> crate::Result<Self> {
        if coeffs.len() > N_COEFFS {
            return Err(crate::Error::Validation(format!(
                "polynomial has {} coefficients, at most {N_COEFFS} allowed (degree ≤ 4)",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(crate::Error::Validation("polynomial coefficient is not finite".into()));
        }
        Ok(Poly2 { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `∂x^a ∂y^b p` at `(x, y)`.
    pub fn derivative(&self, a: usize, b: usize, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let (i, j) = monomial(k);
            if i < a || j < b {
                continue;
            }
            let fx = falling(i, a) * x.powi((i - a) as i32);
            let fy = falling(j, b) * y.powi((j - b) as i32);
            s += c * fx * fy;
        }
        s
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.derivative(0, 0, x, y)
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        [self.derivative(1, 0, x, y), self.derivative(0, 1, x, y)]
    }

    pub fn hess(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let xy = self.derivative(1, 1, x, y);
        [[self.derivative(2, 0, x, y), xy], [xy, self.derivative(0, 2, x, y)]]
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        self.derivative(2, 0, x, y) + self.derivative(0, 2, x, y)
    }

    pub fn taylor(&self, x: f64, y: f64) -> Taylor {
        Taylor::from_derivatives(|i, j| self.derivative(i, j, x, y))
    }
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|m| (n - m) as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_order() {
        assert_eq!(monomial(0), (0, 0));
        assert_eq!(monomial(2), (0, 1));
        assert_eq!(monomial(4), (1, 1));
        assert_eq!(monomial(9), (0, 3));
        assert_eq!(monomial(14), (0, 4));
    }

    #[test]
    fn derivatives_of_quartic() {
        // p = x⁴/12 + y²/2
        let mut c = vec![0.0; N_COEFFS];
        c[5] = 0.5;
        c[10] = 1.0 / 12.0;
        let p = Poly2::new(c).unwrap();
        assert!((p.eval(1.0, 1.0) - (1.0 / 12.0 + 0.5)).abs() < 1e-15);
        assert!((p.derivative(2, 0, 2.0, 0.0) - 4.0).abs() < 1e-14);
        assert!((p.derivative(3, 0, 2.0, 0.0) - 4.0).abs() < 1e-14);
        assert_eq!(p.derivative(1, 1, 2.0, 3.0), 0.0);
    }

    #[test]
    fn rejects_degree_five() {
        assert!(Poly2::new(vec![0.0; 16]).is_err());
    }
}
