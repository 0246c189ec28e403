//! Numerical workbench for holomorphic curves in the nearly-Kähler 6-sphere.
//!
//! Modules, bottom up:
//! - [`octonion`]: G2 cross product, SU(3)-forms on S^6, nearly-Kähler checks
//! - [`taylor`]: truncated bivariate Taylor arithmetic used for analytic jets
//! - [`surface`]: curve providers, charts, jets, fundamental forms, normal splitting
//! - [`mesh`]: icosphere meshes with quadrature
//! - [`frenet`]: adapted frames, torsion, Chern integrals, binormal map
//! - [`align`]: SO(7) alignment making an immersion J-holomorphic
//! - [`jacobi`]: finite elements for the Jacobi operator and the D-hat form
//! - [`eigen`]: generalized symmetric eigensolvers and clustering
//! - [`identities`]: finite-difference covariant calculus and identity residuals
//! - [`ledger`]: integer Chern / Riemann-Roch bookkeeping

pub mod align;
pub mod eigen;
pub mod frenet;
pub mod identities;
pub mod jacobi;
pub mod ledger;
pub mod mesh;
pub mod octonion;
pub mod surface;
pub mod taylor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid G2 table: {0}")]
    InvalidTable(String),
    #[error("vector not tangent: {0}")]
    NotTangent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parameter outside chart domain: {0}")]
    OutOfDomain(String),
    #[error("jet order {requested} exceeds provider capability {max}")]
    OrderTooHigh { requested: usize, max: usize },
    #[error("degenerate metric at {0}")]
    DegenerateMetric(String),
    #[error("second fundamental form vanishes at {0}")]
    DegeneratePoint(String),
    #[error("curve is not holomorphic (residual {0:e})")]
    NotHolomorphic(f64),
    #[error("mesh too coarse: rounding residual {0:e} exceeds gate")]
    MeshTooCoarse(f64),
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error("eigensolver failure: {0}")]
    Solver(String),
    #[error("unknown curve: {0}")]
    UnknownCurve(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Deterministic RNG used everywhere a seed is accepted.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
