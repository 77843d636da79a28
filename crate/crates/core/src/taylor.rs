//! Truncated bivariate Taylor arithmetic.
//!
//! A [`Taylor`] holds the coefficients of `Σ c_ij dx^i dy^j` for `i + j ≤ 3`
//! around a base point, together with the degree up to which the coefficients
//! are exact. Products and compositions propagate exactness; differentiation
//! lowers it by one. This is the exact-derivative engine behind the analytic
//! cross-checks: every quantity built from closed-form inputs carries its own
//! derivatives without finite differencing.

use std::ops::{Add, Mul, Neg, Sub};

pub const MAX_DEGREE: usize = 3;
const LEN: usize = 10;

#[inline]
const fn idx(i: usize, j: usize) -> usize {
    // graded ordering: degree d block starts at d(d+1)/2, then by power of y
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor {
    c: [f64; LEN],
    degree: usize,
}

impl Taylor {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Taylor { c, degree: MAX_DEGREE }
    }

    /// The coordinate `x` expanded around `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut t = Self::constant(x0);
        t.c[idx(1, 0)] = 1.0;
        t
    }

    pub fn var_y(y0: f64) -> Self {
        let mut t = Self::constant(y0);
        t.c[idx(0, 1)] = 1.0;
        t
    }

    /// Builds a series from partial derivatives `d[i][j] = ∂x^i ∂y^j f`.
    pub fn from_derivatives(d: impl Fn(usize, usize) -> f64) -> Self {
        let mut c = [0.0; LEN];
        for deg in 0..=MAX_DEGREE {
            for j in 0..=deg {
                let i = deg - j;
                c[idx(i, j)] = d(i, j) / (factorial(i) * factorial(j));
            }
        }
        Taylor { c, degree: MAX_DEGREE }
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.c[idx(i, j)]
    }

    /// Degree up to which the coefficients are exact.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `∂x^i ∂y^j f` at the base point.
    pub fn derivative(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= self.degree, "derivative order {} exceeds exact degree {}", i + j, self.degree);
        self.c[idx(i, j)] * factorial(i) * factorial(j)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.derivative(1, 0), self.derivative(0, 1)]
    }

    pub fn hess(&self) -> [[f64; 2]; 2] {
        let xy = self.derivative(1, 1);
        [[self.derivative(2, 0), xy], [xy, self.derivative(0, 2)]]
    }

    pub fn dx(&self) -> Self {
        self.partial(0)
    }

    pub fn dy(&self) -> Self {
        self.partial(1)
    }

    fn partial(&self, axis: usize) -> Self {
        assert!(self.degree >= 1, "cannot differentiate a degree-0 series");
        let mut c = [0.0; LEN];
        for deg in 0..MAX_DEGREE {
            for j in 0..=deg {
                let i = deg - j;
                c[idx(i, j)] = if axis == 0 {
                    (i + 1) as f64 * self.c[idx(i + 1, j)]
                } else {
                    (j + 1) as f64 * self.c[idx(i, j + 1)]
                };
            }
        }
        Taylor { c, degree: self.degree - 1 }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.c.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `f ∘ self` where `f_derivs = [f(a), f'(a), f''(a), f'''(a)]` at `a = self.value()`.
    pub fn compose(&self, f_derivs: [f64; 4]) -> Self {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Taylor::constant(f_derivs[0]);
        out.degree = self.degree;
        let mut power = Taylor::constant(1.0);
        let mut fact = 1.0;
        for (k, fk) in f_derivs.iter().enumerate().skip(1) {
            power = power * delta;
            fact *= k as f64;
            out = out + power.scale(fk / fact);
        }
        out.degree = self.degree;
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    /// `self^a`; requires a positive base value unless `a` is a small integer.
    pub fn powf(&self, a: f64) -> Self {
        let v = self.value();
        let f = |k: i32| {
            let mut coef = 1.0;
            for m in 0..k {
                coef *= a - m as f64;
            }
            coef * v.powf(a - k as f64)
        };
        self.compose([f(0), f(1), f(2), f(3)])
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, rhs: Taylor) -> Taylor {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        Taylor { c, degree: self.degree.min(rhs.degree) }
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, rhs: Taylor) -> Taylor {
        self + (-rhs)
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, rhs: Taylor) -> Taylor {
        let degree = self.degree.min(rhs.degree);
        let mut c = [0.0; LEN];
        for d1 in 0..=degree {
            for j1 in 0..=d1 {
                let a = self.c[idx(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=(degree - d1) {
                    for j2 in 0..=d2 {
                        let i = d1 - j1 + d2 - j2;
                        c[idx(i, j1 + j2)] += a * rhs.c[idx(d2 - j2, j2)];
                    }
                }
            }
        }
        Taylor { c, degree }
    }
}

impl Add<f64> for Taylor {
    type Output = Taylor;
    fn add(mut self, rhs: f64) -> Taylor {
        self.c[0] += rhs;
        self
    }
}

impl Mul<f64> for Taylor {
    type Output = Taylor;
    fn mul(self, rhs: f64) -> Taylor {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_variables_matches_monomial() {
        let (x0, y0) = (0.3, -1.2);
        let x = Taylor::var_x(x0);
        let y = Taylor::var_y(y0);
        let f = x * x * y; // x²y
        assert!((f.value() - x0 * x0 * y0).abs() < 1e-15);
        assert!((f.derivative(1, 0) - 2.0 * x0 * y0).abs() < 1e-15);
        assert!((f.derivative(2, 1) - 2.0).abs() < 1e-15);
        assert!((f.derivative(1, 1) - 2.0 * x0).abs() < 1e-15);
    }

    #[test]
    fn exp_and_sqrt_derivatives() {
        let x = Taylor::var_x(0.7);
        let y = Taylor::var_y(0.2);
        let r2 = x * x + y * y;
        let r = r2.sqrt();
        let rv = (0.49f64 + 0.04).sqrt();
        assert!((r.derivative(1, 0) - 0.7 / rv).abs() < 1e-14);
        // ∂xx r = y²/r³
        assert!((r.derivative(2, 0) - 0.04 / rv.powi(3)).abs() < 1e-14);
        let e = (x * 2.0).exp();
        assert!((e.derivative(3, 0) - 8.0 * (1.4f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn differentiation_lowers_degree() {
        let t = Taylor::var_x(1.0) * Taylor::var_y(1.0);
        assert_eq!(t.dx().degree(), 2);
        assert_eq!(t.dx().dy().degree(), 1);
        assert!((t.dx().dy().value() - 1.0).abs() < 1e-15);
    }
}
