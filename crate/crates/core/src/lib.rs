//! Numerical laboratory for the p-Laplacian torsion problem `-Δₚu = 1`.
//!
//! The crate solves the torsion problem on planar domains, flat or carrying a
//! conformal metric `g = e^{2φ}δ`, and evaluates the P-function machinery on
//! the result: linearized operator, p-Bochner formula, boundary traces and
//! the integral identities relating interior and boundary terms.
//!
//! Module map:
//!
//! * [`geometry`]: parametric domains, meshing, exact boundary geometry.
//! * [`metric`]: conformal metrics with closed-form curvature.
//! * [`fields`]: derivative recovery and every pointwise differential quantity.
//! * [`solver`]: ε-regularized energy minimization with Newton continuation.
//! * [`oracles`]: closed-form radial solutions, ellipse quadratures, the
//!   matrix-inequality sampler and a 1-D radial solver.
//! * [`identities`]: boundary traces and identity reports.

pub mod error;
pub mod fields;
pub mod geometry;
pub mod identities;
pub mod metric;
pub mod oracles;
pub mod par;
pub mod poly;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod taylor;

pub use error::{Error, Result};

pub use fields::{AnalyticField, CriticalMask, DerivativeBundle, Jet, ScalarField};
pub use geometry::{BoundaryGeometry, DomainSpec, TriMesh};
pub use identities::{BoundaryTrace, IdentityReport, Tolerances};
pub use metric::ConformalMetric;
pub use oracles::RadialProfile;
pub use solver::{Solution, SolveConfig};


