//! Weak approximation of Gaussian processes by integrals of renewal sign kernels.
//!
//! A renewal sequence `S_k` with i.i.d. inter-arrival times and independent
//! fair-coin rewards `η_k` defines the parity process `(-1)^{T(t)}`. Rescaling
//! time by a summable schedule `β(n)` and normalising by
//! `G(n) = (β(n) E[U²] / E[U])^{1/2}` gives the step kernel
//! `θ_n(x) = (-1)^{T(x/β(n))} / G(n)` on `[0, 1]`. Integrating deterministic
//! kernels against `θ_n` yields processes converging to Brownian motion,
//! fractional Brownian motion and iterated Stratonovich integrals.
//!
//! The crate is `no_std` with `alloc`. Everything random is driven by an
//! explicit seed so that every path is reproducible in isolation; see
//! [`seed`] for the split rule.
//!
//! Modules:
//! - [`distributions`]: inter-arrival laws, moments, hazards and hazard floors.
//! - [`renewal`]: renewal, reward and Poisson-coupled paths; exact geometric laws.
//! - [`sign_kernel`]: `θ_n` as an exact step function and integration against it.
//! - [`gauss_kernels`]: Brownian indicator and Molchan–Golosov fBm kernels.
//! - [`paths`]: `x_n`, `Y^n`, iterated families, exact Gaussian references, ensembles.
//! - [`stats`]: estimators, goodness-of-fit tests and numeric oracles.

#![no_std]
// `!(x > 0.0)` is deliberate: it rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod distributions;
pub mod gauss_kernels;
pub mod paths;
pub mod quad;
pub mod renewal;
pub mod seed;
pub mod sign_kernel;
pub mod special;
pub mod stats;

mod error;

pub use error::{Error, Result};

pub use distributions::InterarrivalLaw;
pub use gauss_kernels::{KernelSpec, ModulusReport};
pub use paths::{IteratedFamily, PathEnsemble, PathGenerator, Process, SamplePath, TimeGrid};
pub use renewal::{CoupledPath, RenewalPath, RewardPath};
pub use seed::StreamSet;
pub use sign_kernel::{ScaleSchedule, StepSign};
pub use stats::TestReport;
