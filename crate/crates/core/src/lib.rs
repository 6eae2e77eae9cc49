//! Vanishing-viscosity simulation of scalar conservation laws whose flux
//! switches across a non-aligned interface.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases. The [`harness`] works in `f64`.

pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod geometry;
pub mod harness;
pub mod mollifier;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FluxPair64 = flux::FluxPair<f64>;
pub type InterfaceSurface64 = geometry::InterfaceSurface<f64>;
pub type MollifierFamily64 = mollifier::MollifierFamily<f64>;
pub type Grid64 = solver::Grid<f64>;
pub type Field64 = solver::Field<f64>;
pub type Solver64 = solver::Solver<f64>;
pub type DiagnosticsSeries64 = diagnostics::DiagnosticsSeries<f64>;

pub type FluxPair32 = flux::FluxPair<f32>;
pub type InterfaceSurface32 = geometry::InterfaceSurface<f32>;
pub type MollifierFamily32 = mollifier::MollifierFamily<f32>;
pub type Grid32 = solver::Grid<f32>;
pub type Field32 = solver::Field<f32>;
pub type Solver32 = solver::Solver<f32>;
