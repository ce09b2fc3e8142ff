//! Sparse sampling recovery in `L_p`.
//!
//! Given a dictionary `𝒟_N` on the torus and function values at `m` points,
//! this crate recovers sparse approximants with three algorithms:
//!
//! * the Weak Chebyshev Greedy Algorithm run in the discrete space
//!   `L_p(ξ, μ_m)` ([`wcga`]),
//! * `ℓ_p` fitting over every `v`-subset of the dictionary, choosing the
//!   subset by continuous error (Algorithm 1) or sample error (Algorithm 2,
//!   the discrete best `v`-term approximation) ([`combinatorial`]),
//! * the weighted `ℓ_p` recovery operator on a fixed subspace ([`lp_solver`]),
//!
//! together with certificates that a point set discretizes the `L_p` norm
//! uniformly over a collection of subspaces ([`discretization`]) and system
//! diagnostics ([`analysis`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod combinatorial;
pub mod discretization;
pub mod domain;
pub mod error;
pub mod linalg;
pub mod lp_solver;
pub mod serde_ext;
pub mod systems;
pub mod wcga;

pub use domain::{Exponent, GridDomain, SampleSet, C64};
pub use error::{Error, Result};
pub use systems::{FunctionSystem, SparseElement, SystemDescriptor};
