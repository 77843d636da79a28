//! Ground truths that do not touch the finite-element solver.
//!
//! * exact radial torsion profiles in any dimension and the P-function value
//!   they produce,
//! * closed-form and quadrature boundary integrals of ellipses,
//! * the pointwise matrix inequality behind subharmonicity of `P`, with a
//!   seeded brute-force sampler,
//! * a 1-D finite-volume solver for the radial equation.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par::{map_range, Exec};
use crate::quadrature::adaptive;
use crate::{Error, Result};

/// Radial solution of `-Δₚu = 1` on the ball `B_R ⊂ ℝⁿ`, `u(R) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub n: usize,
    pub p: f64,
    pub radius: f64,
    repr: Repr,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// `u = c (R^q - r^q)`, `q = p/(p-1)`.
    Exact { c: f64, q: f64 },
    /// Nodal values on a uniform grid and slopes at cell midpoints.
    Grid { dr: f64, u: Vec<f64>, slope: Vec<f64> },
}

fn check_radial_args(n: usize, p: f64, radius: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Validation(format!("dimension must be at least 2, got {n}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Validation(format!("p must exceed 1, got {p}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Validation(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

/// `u(r) = ((p-1)/p) n^{-1/(p-1)} (R^{p/(p-1)} - r^{p/(p-1)})`.
pub fn radial_exact(n: usize, p: f64, radius: f64) -> Result<RadialProfile> {
    check_radial_args(n, p, radius)?;
    let q = p / (p - 1.0);
    let c = (p - 1.0) / p * (n as f64).powf(-1.0 / (p - 1.0));
    Ok(RadialProfile { n, p, radius, repr: Repr::Exact { c, q } })
}

/// Value of the P-function on the ball: `((p-1)/p) n^{-p/(p-1)} R^{p/(p-1)}`.
pub fn p_ball_constant(n: usize, p: f64, radius: f64) -> f64 {
    (p - 1.0) / p * (n as f64).powf(-p / (p - 1.0)) * radius.powf(p / (p - 1.0))
}

impl RadialProfile {
    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Exact { .. })
    }

    pub fn u(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Exact { c, q } => c * (self.radius.powf(*q) - r.powf(*q)),
            Repr::Grid { dr, u, .. } => {
                let (i, t) = grid_cell(r, *dr, u.len() - 1);
                u[i] * (1.0 - t) + u[i + 1] * t
            }
        }
    }

    /// `u'(r)`. On a grid profile: the midpoint slope of the enclosing cell.
    pub fn du(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Exact { c, q } => -c * q * r.powf(q - 1.0),
            Repr::Grid { dr, slope, .. } => slope[grid_cell(r, *dr, slope.len()).0],
        }
    }

    /// `u''(r)`; unbounded at `r = 0` when `p > 2`.
    pub fn d2u(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Exact { c, q } => -c * q * (q - 1.0) * r.powf(q - 2.0),
            Repr::Grid { dr, slope, .. } => {
                let m = slope.len();
                let x = (r / dr - 0.5).clamp(0.0, (m - 1) as f64);
                let i = (x.floor() as usize).min(m - 2);
                (slope[i + 1] - slope[i]) / dr
            }
        }
    }

    /// `[u, u', u'', u''']` at `r > 0`. Only exact profiles carry a third
    /// derivative.
    pub fn derivatives(&self, r: f64) -> Option<[f64; 4]> {
        match &self.repr {
            Repr::Exact { c, q } => Some([
                self.u(r),
                self.du(r),
                self.d2u(r),
                -c * q * (q - 1.0) * (q - 2.0) * r.powf(q - 3.0),
            ]),
            Repr::Grid { .. } => None,
        }
    }

    /// Outward normal derivative at the boundary sphere, `u'(R)`. Grid
    /// profiles use a second-order one-sided difference.
    pub fn boundary_slope(&self) -> f64 {
        match &self.repr {
            Repr::Exact { .. } => self.du(self.radius),
            Repr::Grid { dr, u, .. } => {
                let m = u.len() - 1;
                (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * dr)
            }
        }
    }

    /// `P(r) = ((p-1)/p)|u'|^p + u/n`.
    pub fn p_function(&self, r: f64) -> f64 {
        (self.p - 1.0) / self.p * self.du(r).abs().powf(self.p) + self.u(r) / self.n as f64
    }

    /// Residual of the radial equation `-(r^{n-1}|u'|^{p-2}u')'/r^{n-1} - 1`
    /// at `r > 0`.
    pub fn ode_residual(&self, r: f64) -> f64 {
        let (p, n) = (self.p, self.n as f64);
        let d1 = self.du(r);
        let d2 = self.d2u(r);
        let flux = d1.abs().powf(p - 2.0) * d1;
        -((n - 1.0) * flux / r + (p - 1.0) * d1.abs().powf(p - 2.0) * d2) - 1.0
    }

    /// Grid nodes `r_i = i·R/N` and nodal values, for grid profiles.
    pub fn grid(&self) -> Option<(Vec<f64>, &[f64])> {
        match &self.repr {
            Repr::Exact { .. } => None,
            Repr::Grid { dr, u, .. } => Some(((0..u.len()).map(|i| i as f64 * dr).collect(), u)),
        }
    }
}

fn grid_cell(r: f64, dr: f64, cells: usize) -> (usize, f64) {
    let x = (r / dr).clamp(0.0, cells as f64);
    let i = (x.floor() as usize).min(cells - 1);
    (i, x - i as f64)
}

/// Finite-volume solution of `(r^{n-1}|u'|^{p-2}u')' = -r^{n-1}` on a uniform
/// grid of `cells` cells with `u(R) = 0`.
///
/// Cell balances telescope to the midpoint fluxes
/// `r_{i+½}^{n-1} φ(s_{i+½}) = -r_{i+½}^n/n`, `φ(s) = |s|^{p-2}s`; each is
/// inverted for the slope by safeguarded Newton and the nodal values follow by
/// summation inward from the boundary.
pub fn radial_fd_solve(n: usize, p: f64, radius: f64, cells: usize) -> Result<RadialProfile> {
    check_radial_args(n, p, radius)?;
    if cells < 100 {
        return Err(Error::Validation(format!("radial grid needs at least 100 cells, got {cells}")));
    }
    let dr = radius / cells as f64;
    let nf = n as f64;
    // Conservation over the control volumes [r_{i-½}, r_{i+½}], node 0 first.
    let mut flux = vec![0.0; cells];
    let mut prev = 0.0;
    for (i, f) in flux.iter_mut().enumerate() {
        let hi = (i as f64 + 0.5) * dr;
        let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) * dr };
        *f = prev - (hi.powf(nf) - lo.powf(nf)) / nf;
        prev = *f;
    }
    let mut slope = Vec::with_capacity(cells);
    for (i, f) in flux.iter().enumerate() {
        let rm = (i as f64 + 0.5) * dr;
        let target = f / rm.powf(nf - 1.0);
        slope.push(invert_phi(target, p).ok_or_else(|| Error::NonConvergence {
            eps: 0.0,
            iterations: 200,
            last: target,
            history: vec![],
        })?);
    }
    let mut u = vec![0.0; cells + 1];
    for i in (0..cells).rev() {
        u[i] = u[i + 1] - slope[i] * dr;
    }
    Ok(RadialProfile { n, p, radius, repr: Repr::Grid { dr, u, slope } })
}

/// Solves `|s|^{p-2}s = y` by Newton on a bracket, falling back to bisection.
fn invert_phi(y: f64, p: f64) -> Option<f64> {
    if y == 0.0 {
        return Some(0.0);
    }
    let phi = |s: f64| s.abs().powf(p - 2.0) * s;
    let target = y.abs();
    let (mut lo, mut hi) = (0.0, 1.0f64);
    while phi(hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    let mut s = target.powf(1.0 / (p - 1.0)).clamp(lo, hi);
    for _ in 0..200 {
        let f = phi(s) - target;
        if f.abs() <= 1e-15 * target {
            return Some(s * y.signum());
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let d = (p - 1.0) * s.powf(p - 2.0);
        let newton = s - f / d;
        s = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * hi {
            return Some(s * y.signum());
        }
    }
    None
}

/// Closed-form and quadrature geometry of the ellipse `x²/a² + y²/b² < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseIntegrals {
    pub area: f64,
    pub perimeter: f64,
    /// `∫ 1/H ds` by quadrature.
    pub inverse_curvature_integral: f64,
    /// `(1/(ab))((3π/4)(a⁴ + b⁴) + (π/2)a²b²)`.
    pub inverse_curvature_closed_form: f64,
    /// `|∂Ω| / (n|Ω|)`, `n = 2`.
    pub h0: f64,
    pub max_curvature: f64,
    pub min_curvature: f64,
}

pub fn ellipse_boundary_integrals(a: f64, b: f64) -> Result<EllipseIntegrals> {
    if !(b > 0.0 && a >= b && a.is_finite()) {
        return Err(Error::Validation(format!("ellipse needs a ≥ b > 0, got a = {a}, b = {b}")));
    }
    let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    let area = PI * a * b;
    let perimeter = adaptive(speed, 0.0, 2.0 * PI, 1e-13);
    // κ = ab/|γ'|³ so ds/κ = |γ'|⁴/(ab) dt
    let inverse_curvature_integral = adaptive(|t| speed(t).powi(4) / (a * b), 0.0, 2.0 * PI, 1e-12);
    let inverse_curvature_closed_form =
        (0.75 * PI * (a.powi(4) + b.powi(4)) + 0.5 * PI * a * a * b * b) / (a * b);
    Ok(EllipseIntegrals {
        area,
        perimeter,
        inverse_curvature_integral,
        inverse_curvature_closed_form,
        h0: perimeter / (2.0 * area),
        max_curvature: a / (b * b),
        min_curvature: b / (a * a),
    })
}

/// Both sides of the refined matrix inequality at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixInequality {
    pub lhs: f64,
    pub rhs: f64,
    /// LHS - RHS of the looser classical estimate, which has coefficient
    /// `p(p-2)` on `A²` and no `|∇|∇u||²` term.
    pub loose_gap: f64,
}

impl MatrixInequality {
    pub fn gap(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Evaluates
///
/// `|g|^{2(p-2)}(‖H‖² + (p²-2p+2)A²) ≥ Δₚ²/n + (n/(n-1))(Δₚ/n - (p-1)|g|^{p-2}A)² + 2|g|^{2(p-2)}|Hg|²/|g|²`
///
/// with `A = gᵀHg/|g|²` and `Δₚ = |g|^{p-2}(tr H + (p-2)A)`.
pub fn matrix_inequality(p: f64, hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<MatrixInequality> {
    let n = grad.len();
    if !(2..=6).contains(&n) || hess.nrows() != n || hess.ncols() != n {
        return Err(Error::Precondition(format!(
            "need 2 ≤ n ≤ 6 and an n×n matrix, got n = {n}, {}×{}",
            hess.nrows(),
            hess.ncols()
        )));
    }
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("p must exceed 1, got {p}")));
    }
    let g2 = grad.norm_squared();
    if !(g2 > 0.0) {
        return Err(Error::Precondition("gradient must be nonzero".into()));
    }
    let h = (hess + hess.transpose()) * 0.5;
    let nf = n as f64;
    let g = g2.sqrt();
    let hg = &h * grad;
    let a = grad.dot(&hg) / g2;
    let w = g.powf(2.0 * (p - 2.0));
    let gp = g.powf(p - 2.0);
    let dp = gp * (h.trace() + (p - 2.0) * a);
    let hs = h.norm_squared();
    let hg2 = hg.norm_squared() / g2;
    let common = dp * dp / nf + nf / (nf - 1.0) * (dp / nf - (p - 1.0) * gp * a).powi(2);
    let lhs = w * (hs + (p * p - 2.0 * p + 2.0) * a * a);
    let rhs = common + 2.0 * w * hg2;
    let loose_gap = w * (hs + p * (p - 2.0) * a * a) - common;
    Ok(MatrixInequality { lhs, rhs, loose_gap })
}

/// `LHS - RHS` of the refined matrix inequality.
pub fn matrix_inequality_gap(p: f64, hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<f64> {
    matrix_inequality(p, hess, grad).map(|m| m.gap())
}

/// Randomized sweep over `n ∈ dims`, `p ~ U[p_min, p_max]`, symmetric `H`
/// with entries `U[-1, 1]` and unit `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_p_range")]
    pub p_range: [f64; 2],
    /// Independent random streams; the result depends on this number but not
    /// on the thread count.
    #[serde(default = "default_shards")]
    pub shards: usize,
}

fn default_dims() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_p_range() -> [f64; 2] {
    [1.1, 6.0]
}
fn default_shards() -> usize {
    64
}

impl SweepConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        SweepConfig { samples, seed, dims: default_dims(), p_range: default_p_range(), shards: default_shards() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.iter().any(|d| !(2..=6).contains(d)) {
            return Err(Error::Validation(format!("sweep dimensions must lie in 2..=6, got {:?}", self.dims)));
        }
        let [lo, hi] = self.p_range;
        if !(lo > 1.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Validation(format!("p range must satisfy 1 < lo ≤ hi, got [{lo}, {hi}]")));
        }
        if self.shards == 0 {
            return Err(Error::Validation("sweep needs at least one shard".into()));
        }
        Ok(())
    }
}

/// One sampled input with its gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub n: usize,
    pub p: f64,
    pub gap: f64,
    pub loose_gap: f64,
    /// Upper triangle of `H`, row-major.
    pub hess_upper: Vec<f64>,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub samples: usize,
    pub min_gap: f64,
    pub min_loose_gap: f64,
    /// Sample attaining `min_gap`.
    pub witness: SweepSample,
    /// Smallest-gap sample per dimension.
    pub per_dimension: Vec<SweepSample>,
    /// Samples where the looser gap fell below the refined one (never expected).
    pub ordering_violations: usize,
}

fn draw_sample(rng: &mut ChaCha8Rng, dims: &[usize], p_range: [f64; 2]) -> (usize, f64, DMatrix<f64>, DVector<f64>) {
    let n = dims[rng.gen_range(0..dims.len())];
    let p = rng.gen_range(p_range[0]..=p_range[1]);
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let g = loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 && norm <= 1.0 {
            break v / norm;
        }
    };
    (n, p, h, g)
}

fn to_sample(n: usize, p: f64, h: &DMatrix<f64>, g: &DVector<f64>, m: &MatrixInequality) -> SweepSample {
    let mut hess_upper = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            hess_upper.push(h[(i, j)]);
        }
    }
    SweepSample { n, p, gap: m.gap(), loose_gap: m.loose_gap, hess_upper, grad: g.iter().copied().collect() }
}

struct ShardResult {
    min_loose: f64,
    per_dim: Vec<Option<SweepSample>>,
    violations: usize,
}

pub fn matrix_inequality_sweep(cfg: &SweepConfig, exec: Exec) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.samples == 0 {
        return Err(Error::Validation("sweep needs at least one sample".into()));
    }
    let shards = cfg.shards.min(cfg.samples);
    let per_shard = |s: usize| cfg.samples / shards + usize::from(s < cfg.samples % shards);
    let results: Vec<Result<ShardResult>> = map_range(exec, shards, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s as u64);
        let mut out = ShardResult { min_loose: f64::INFINITY, per_dim: vec![None; cfg.dims.len()], violations: 0 };
        for _ in 0..per_shard(s) {
            let (n, p, h, g) = draw_sample(&mut rng, &cfg.dims, cfg.p_range);
            let m = matrix_inequality(p, &h, &g)?;
            out.min_loose = out.min_loose.min(m.loose_gap);
            if m.loose_gap < m.gap() - 1e-12 * (1.0 + m.lhs.abs()) {
                out.violations += 1;
            }
            let k = cfg.dims.iter().position(|&d| d == n).expect("drawn from dims");
            if out.per_dim[k].as_ref().map_or(true, |w| m.gap() < w.gap) {
                out.per_dim[k] = Some(to_sample(n, p, &h, &g, &m));
            }
        }
        Ok(out)
    });
    let mut per_dim: Vec<Option<SweepSample>> = vec![None; cfg.dims.len()];
    let mut min_loose = f64::INFINITY;
    let mut violations = 0;
    for r in results {
        let r = r?;
        min_loose = min_loose.min(r.min_loose);
        violations += r.violations;
        for (slot, cand) in per_dim.iter_mut().zip(r.per_dim) {
            if let Some(c) = cand {
                if slot.as_ref().map_or(true, |w| c.gap < w.gap) {
                    *slot = Some(c);
                }
            }
        }
    }
    let per_dimension: Vec<SweepSample> = per_dim.into_iter().flatten().collect();
    let witness = per_dimension
        .iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
        .cloned()
        .expect("at least one sample");
    Ok(SweepResult {
        samples: cfg.samples,
        min_gap: witness.gap,
        min_loose_gap: min_loose,
        witness,
        per_dimension,
        ordering_violations: violations,
    })
}

/// CSV with columns `n,p,gap,loose_gap,h_00,h_01,…,g_0,…` (unused columns
/// empty), one row per sample.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepSample]) -> std::io::Result<()> {
    let max_n = rows.iter().map(|r| r.n).max().unwrap_or(2);
    let mut header = vec!["n".to_string(), "p".into(), "gap".into(), "loose_gap".into()];
    for i in 0..max_n {
        for j in i..max_n {
            header.push(format!("h_{i}{j}"));
        }
    }
    for i in 0..max_n {
        header.push(format!("g_{i}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut cells = vec![r.n.to_string(), format!("{}", r.p), format!("{:e}", r.gap), format!("{:e}", r.loose_gap)];
        let mut k = 0;
        for i in 0..max_n {
            for j in i..max_n {
                if i < r.n && j < r.n {
                    cells.push(format!("{}", r.hess_upper[k]));
                    k += 1;
                } else {
                    cells.push(String::new());
                }
            }
        }
        for i in 0..max_n {
            cells.push(r.grad.get(i).map(|v| format!("{v}")).unwrap_or_default());
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
