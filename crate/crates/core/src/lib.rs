//! Statistical theory of time-reversed Young interferometry.
//!
//! One reciprocal source-detector kernel `K(x, y)` feeds two readouts: the
//! detector marginal `p(x)` of ordinary Young interference and the
//! fixed-detector source conditional `p(y | x0)`. This crate builds the
//! kernels, forms both reductions, and evaluates the information measures
//! that distinguish them:
//!
//! - [`probcore`]: grids, normalized tables, marginal and conditional reductions.
//! - [`kernels`]: Fresnel aperture, narrow-slit and two-path `beta` kernels.
//! - [`infomeasures`]: entropies, mutual information, KL identities.
//! - [`fisher`]: score functions, conditional and detector-plane Fisher
//!   information, launched-photon decomposition.
//! - [`nullmodel`]: the regularized null response and residual-depth sweeps.
//! - [`coherence`]: coherence-matrix entropy under unitaries and truncation.
//! - [`table`]: CSV sweep tables with provenance metadata.
//!
//! Entropies are discrete Shannon entropies of grid-cell probabilities in nats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod error;
pub mod fisher;
pub mod infomeasures;
pub mod kernels;
pub mod linalg;
pub mod nullmodel;
pub mod probcore;
pub mod table;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use probcore::{Acceptance, Dist1D, Grid1D, JointDist};
