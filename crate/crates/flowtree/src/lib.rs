//! Kernels of operators in the functional calculus of flow Laplacians on trees
//! with a root at infinity, together with quotient-map transference and the
//! numerical experiments that probe kernel identities and estimate scalings.

pub mod abel;
pub mod analysis;
pub mod cheb;
pub mod error;
pub mod experiment;
pub mod quotient;
pub mod scalar;
pub mod special;
pub mod ops;
pub mod tree;
pub mod zline;

pub use error::{Error, Result};
