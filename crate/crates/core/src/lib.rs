//! Core algorithms for disentangling epistemic and aleatoric uncertainty in
//! classifiers on small synthetic datasets.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all floating-point
//! transcendentals route through [`libm`] so results are identical across the
//! `std` and `no_std` builds. IO, file formats, and the command-line front end
//! live in the companion `uqlab-cli` crate.
//!
//! Module map:
//! - [`linalg`]: dense matrices, Cholesky factorization, power iteration
//! - [`special`]: digamma/trigamma, log-sum-exp
//! - [`rng`]: seeded, platform-stable random streams
//! - [`dataset`]: synthetic 1D/2D dataset generators
//! - [`net`]: residual MLP classifier with optional spectral normalization
//! - [`gda`]: per-class Gaussian fit over feature vectors and mixture density
//! - [`uncertainty`]: entropy measures, ensemble decomposition, thresholds
//! - [`metrics`]: accuracy, ECE, AUROC
//! - [`dirichlet`]: Dirichlet moments of log-probabilities and entropy
//! - [`objectives`]: Gaussian-mixture fits under conditional/joint/marginal
//!   likelihood objectives
//! - [`active`]: pool-based active-learning loop

#![cfg_attr(not(feature = "std"), no_std)]
// Index loops are the clearest form for the matrix kernels, and the negated
// comparisons (`!(x > 0.0)`) are deliberate: they reject NaN where the
// suggested rewrite would accept it.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod active;
pub mod dataset;
pub mod dirichlet;
pub mod fmath;
pub mod gda;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod objectives;
pub mod rng;
pub mod special;
pub mod uncertainty;

pub use dataset::{Dataset, Split};
pub use gda::GdaModel;
pub use linalg::{CholeskyFactor, Matrix};
pub use net::{NetConfig, NetModel};
pub use rng::Rng;
