//! Multivariate gamma distributions defined by affine polynomials, their
//! Laplace copulas, and tools to evaluate, sample and validate them.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod copulas;
pub mod densities;
pub mod dependence;
pub mod divisibility;
pub mod error;
pub mod polynomial;
pub mod quadrature;
pub mod sampling;
pub mod specialfn;
pub mod validation;

pub use error::{Error, Result};
