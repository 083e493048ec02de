//! Curvature engine for (α,β)-Finsler metrics `F = α φ(β/α)`.
//!
//! Every curvature quantity is computed twice: once from its definition via
//! exact Taylor jets ([`geometry`]), and once from the closed-form
//! (α,β)-machinery ([`alphabeta`]). The φ-scalar identities are certified in
//! exact rational arithmetic ([`ratfunc`]), and the S-curvature is arbitrated
//! by Busemann–Hausdorff quadrature ([`volume`]).

pub mod alphabeta;
pub mod classify;
pub mod error;
pub mod expr;
pub mod geodesic;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod metric;
pub mod ratfunc;
pub mod sampling;
pub mod volume;

pub use error::{Error, Result};
pub use metric::{MetricSpec, PhiFamily, PointState};
