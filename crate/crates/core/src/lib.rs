//! Spectral analysis of two-dimensional Schrödinger operators
//! `-Δ + W + V_ε` whose potential concentrates in a thin layer around a
//! closed curve, together with their limit operators on the curve.

pub mod assembly;
pub mod asymptotics;
pub mod eigensolve;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod radial;
pub mod resonance;
pub mod sparse;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
