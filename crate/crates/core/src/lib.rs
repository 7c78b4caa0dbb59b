//! Lattice Green's functions, threshold states and limiting-absorption
//! diagnostics for discrete Schrödinger operators `H = H0 + V` on `Z^d`.

pub mod error;
pub mod format;
pub mod green;
pub mod grid;
pub mod inequality;
pub mod kernel;
pub mod lap;
pub mod levelset;
pub mod ops;
pub mod quadrature;
pub mod resolvent;
pub mod special;
pub mod sum;
pub mod symbol;
pub mod symindex;
pub mod threshold;

pub use error::{Error, Result};
pub use grid::{GridFn, Potential};
pub use num_complex::Complex64;
