//! Exact laws, rate functions, optimal-transport couplings and bridge
//! ensembles for symmetrised empirical measures on finite alphabets.
//!
//! A symmetrised empirical measure pairs each point of an array with the
//! point a uniform random permutation sends it to:
//! `(1/n) Σ δ_{(x_i, x_{σ(i)})}`. The crate computes its exact finite-n law
//! by contingency-table enumeration, evaluates the large-deviation rate
//! functions governing it, couples it to independent-pairs empirical
//! measures through assignment problems, and lifts it to ensembles of
//! Brownian bridges whose terminal points are permuted.
//!
//! Module map:
//!
//! - [`measure`]: alphabets, measures, relative entropy
//! - [`transport`]: metrics, assignment, Wasserstein and bounded-Lipschitz
//!   distances, projections and couplings onto the permutation set
//! - [`sampler`]: seeded permutations and measure generators
//! - [`exact`]: contingency-table enumeration and exact laws
//! - [`rate`]: rate functions and entropy projection
//! - [`bridge`]: Gaussian bridge ensembles and cumulant functionals
//! - [`verify`]: the acceptance suites
//! - [`cli`]: the experiment runner behind the `symld` binary

pub mod bridge;
pub mod cli;
pub mod error;
pub mod exact;
pub mod measure;
pub mod permutation;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use measure::{
    empirical_of, marginals, pair_empirical, product, relative_entropy, Alphabet,
    DiscreteMeasure, IndexedSample, Measure, PairAtoms, PairMeasure, Point,
};
pub use permutation::Permutation;
pub use rng::RngHandle;
