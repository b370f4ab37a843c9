//! Finite-depth thermodynamic formalism for generalised matrix potentials.

pub mod catalog;
pub mod classes;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod kernel;
pub mod multilinear;
pub mod potentials;
pub mod pressure;
pub mod symbolic;

pub use classes::{Subspace, SubspaceClass};
pub use error::{Error, Result};
pub use gibbs::GibbsTable;
pub use multilinear::LinearMap;
pub use potentials::{Factor, MatrixSystem, Potential};
pub use pressure::{DimensionResult, PressureEstimate};
pub use symbolic::{Alphabet, Budget, Word};
