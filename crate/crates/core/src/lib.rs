//! Knowledge-graph embeddings with matrix entities and block-diagonal
//! orthogonal relation matrices, trained by Riemannian optimization on the
//! orthogonal manifold.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense matrices, the matrix exponential, block-diagonal
//!   orthogonal matrices and their banded application.
//! - [`manifold`]: tangent projection, the exponential-map retraction, and
//!   the Gram-Schmidt parameterization used by the joint-training baseline.
//! - [`optim`]: Riemannian adaptive moments for relation blocks, diagonal
//!   adaptive gradients for entities, and the alternating schedule.
//! - [`kg`]: triple files, vocabularies, the filtered-evaluation index, and
//!   uniform negative sampling.
//! - [`model`]: parameters, the distance score, and closed-form gradients.
//! - [`eval`]: filtered ranks, mean reciprocal rank, Hits@K.
//! - [`pattern`]: residual matrices certifying relation patterns, with
//!   histogram exports.
//! - [`trainer`]: the epoch driver tying everything together.

pub mod error;
pub mod eval;
pub mod kg;
pub mod manifold;
pub mod model;
pub mod optim;
pub mod pattern;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::{BlockDiagOrthogonal, DenseMatrix};
