//! P1 finite element kernels: assembly, sparse solves and derivative recovery.

pub mod assembly;
pub mod quadrature;
pub mod recovery;
pub mod solver;
pub mod sparse;

pub use assembly::*;
pub use recovery::{Jet, Recovery};
pub use solver::{LuSolver, SpdSolver};
pub use sparse::CsrMatrix;
