//! Numerical comparison geometry for weighted Finsler manifolds and
//! Finsler spacetimes.
//!
//! Connections and curvature come from a user Lagrangian by forward-mode
//! differentiation. The comparison theorems are then checked pointwise along
//! integrated radial geodesics, with parameters taken from the ε-range.
//!
//! The scalar layer ([`scalar::Real`], [`expr::Expr`], [`Lagrangian::eval`])
//! is generic over `f64`, `f32` and nested dual numbers; everything built on
//! top of it works in `f64`.

pub mod comparison;
pub mod connection;
pub mod curvature;
pub mod diff;
pub mod error;
pub mod expr;
pub mod geodesic;
pub mod lagrangian;
pub mod linalg;
pub mod lorentz;
pub mod ode;
pub mod quadrature;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod scalar;
pub mod tensor;
pub mod weighted;
pub mod zoo;

pub use error::{Error, Result};
pub use lagrangian::{ChartedSpace, Lagrangian, Signature, Weight};
pub use scalar::{Dual, Real};
pub use zoo::Model;

/// First-order dual over `f64`.
pub type Dual64 = scalar::Dual<f64>;
/// Second-order (hyper-)dual over `f64`.
pub type HyperDual64 = scalar::Dual<scalar::Dual<f64>>;
/// A charted space over the built-in model family.
pub type Space = ChartedSpace<Model>;
