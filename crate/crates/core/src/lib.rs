//! Pilot design and Bayesian channel estimation for densely spaced MIMO arrays.
//!
//! The channel prior is a Kronecker kernel `Σ_T ⊗ Σ_R` ([`kernels`]). Pilots are
//! designed to maximise the mutual information between the channel and the
//! received samples, either with unconstrained combiners ([`icefill`]) or with
//! phase-only analog stages ([`hybrid`]). [`estimator`] holds the LMMSE
//! estimator, [`baselines`] the reference designs and [`sim`] the Monte-Carlo
//! harness.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bundle;
pub mod cmt;
pub mod error;
pub mod estimator;
pub mod hybrid;
pub mod icefill;
pub mod kernels;
pub mod numkit;
pub mod schemes;
pub mod sim;

pub use error::{Error, Result};
