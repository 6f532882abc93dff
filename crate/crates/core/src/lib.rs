//! Numerical laboratory for water waves meeting a sloping bottom: corner
//! singularities, mixed elliptic problems, the Dirichlet-to-Neumann
//! operator, the pressure derivative cascade and an energy monitor for a
//! free-surface Euler time stepper.

pub mod dtn;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod evolution;
pub mod fem;
pub mod geometry;
pub mod hydro;
pub mod lab;
pub mod sector_analysis;
pub mod vec2;

pub use error::{Error, Result};
pub use vec2::{Mat2, Vec2};
