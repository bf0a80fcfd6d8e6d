//! Chart-based Riemannian geometry engine for almost-product
//! structures.
//!
//! The crate evaluates curvature and the structure tensors of a
//! metric splitting TM = V + H (second fundamental forms, integrability
//! tensors, mean curvature fields) from exact symbolic derivative
//! trees, then checks a family of divergence and curvature identities
//! on catalogued scenarios and reports the residuals.

// Tensor kernels index several arrays per loop; iterator rewrites of
// those loops obscure the index symmetry the formulas are written in.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::type_complexity)]

pub mod almost_product;
pub mod catalog;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod identities;
pub mod linalg;
pub mod maps;
pub mod quadrature;
pub mod report;
pub mod runner;

pub use error::{GeomError, Result};
pub use expr::{parse_expr, Rational, ScalarExpr};
pub use geometry::{Chart, CurvaturePackage, DivergenceValue, MetricAt, MetricField, VectorField};
pub use linalg::Mat;
pub use report::Report;
pub use runner::{run, RunConfig};
