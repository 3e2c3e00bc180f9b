//! Plane-wave scattering by compactly supported first-order perturbations of
//! the wave operator `∂_t² − Δ + 2W·∇ + V`.
//!
//! The numerical core is generic over the floating point type through
//! [`num::Real`]; the aliases at the crate root fix it to `f64`.

pub mod carleman;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod num;
pub mod pwe;
pub mod quadrature;
pub mod scattering;
pub mod traces;
pub mod wavesolver;

pub use error::{Error, Result};

pub type C64 = num::Cplx<f64>;
pub type Direction64 = geometry::Direction<f64>;
pub type Frame64 = geometry::Frame<f64>;
pub type SimGrid64 = geometry::SimGrid<f64>;
pub type FieldSpec64 = fields::FieldSpec<f64>;
