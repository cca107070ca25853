//! Numerical laboratory for Orlicz-Hardy spaces attached to a divergence-form
//! elliptic operator L = -div(A∇) on a periodic grid.

pub mod applications;
pub mod bmo_dual;
pub mod error;
pub mod fieldfile;
pub mod fixtures;
pub mod grid;
pub mod hardy;
pub mod linalg;
pub mod operator;
pub mod orlicz;
pub mod square_maximal;
pub mod tent_atoms;
pub mod tent_field;

pub use error::{Error, Result};
pub use grid::Grid;
pub use num_complex::Complex64 as C64;
pub use operator::{CoefficientField, EllipticOperator, Func, KernelPolicy};
pub use orlicz::{GrowthFunction, OrliczFamily, OrliczFunction, SampleSpec};
pub use tent_field::{TentField, TimeGrid};
