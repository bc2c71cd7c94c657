//! Inverse determinant sums of diagonal number-field codes and quasi-orthogonal
//! division-algebra codes, evaluated by exact lattice enumeration.

pub mod analysis;
pub mod cli;
pub mod detsum;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod numberfield;
pub mod poly;
pub mod qoalgebra;
pub mod sum;
pub mod units;
pub mod zeta;

pub use error::{Error, Result};
