//! Moving least squares (MLS) approximation on scattered points and a
//! discrete collocation solver for Fredholm integral equations of the
//! second kind,
//!
//! ```text
//! λ u(x) + ∫_Ω κ(x, s) u(s) ds = f(x),   x ∈ Ω,
//! ```
//!
//! on axis-aligned boxes in one and two dimensions.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] – domains, node generation, fill/separation distance and
//!   fixed-radius neighbor search.
//! * [`polybasis`] – multi-indices and the shifted, scaled monomial basis.
//! * [`weights`] – compactly supported radial weight functions.
//! * [`linalg`] – the dense LU, Cholesky and QR primitives the solvers need.
//! * [`mls`] – MLS shape functions and the approximation operator.
//! * [`quadrature`] – Gauss–Legendre and trapezoid rules, tensor products.
//! * [`expr`] – a small expression language for kernels and data.
//! * [`fredholm`] – assembly, collocation solve, iterated solution,
//!   diagnostics and convergence studies.

// `!(a >= b)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expr;
pub mod fredholm;
pub mod geometry;
pub mod linalg;
pub mod mls;
pub mod polybasis;
pub mod quadrature;
pub mod weights;

pub use error::{Error, Result};
pub use expr::{Bindings, Expr, ExprError};
pub use fredholm::{
    CollocationSolution, ConvergenceReport, Diagnostics, FredholmProblem, LevelRecord, Rhs,
    StudyConfig, StudyError,
};
pub use geometry::{DomainBox, NeighborIndex, NodeKind, PointSet};
pub use linalg::{DenseMatrix, LinalgError};
pub use mls::{MlsConfig, MlsModel, ShapeEval};
pub use polybasis::PolyBasis;
pub use quadrature::{QuadKind, QuadSpec, QuadratureRule};
pub use weights::{WeightKind, WeightSpec};
