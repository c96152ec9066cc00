//! Integral transforms of the Euclidean quantum-mechanical propagator.
//!
//! Two distributions over worldlines are implemented, each with analytic
//! closed forms, quadrature-based inversions and a Monte Carlo estimator:
//!
//! * the **hit function** `H(z | y, x; T)`, the action-weighted fraction of
//!   time that paths from `x` to `y` spend at the point `z`
//!   ([`hitfn`]);
//! * the **path-averaged potential** `P(v | y, x; T)`, the distribution of
//!   the line integral `v = ∫ V(x(t)) dt` over free Brownian bridges
//!   ([`pap`]).
//!
//! Integrating `H` over `z`, or `P · e^{-v}` over `v`, recovers the kernel
//! `K(y, x; T)` ([`kernels`]). The worldline sampler in [`sampler`] provides
//! an independent route to every quantity.
//!
//! Units are natural with mass `m = 1` throughout, except in
//! [`kernels::kernel_free`] where the mass is an explicit argument.

// NaN-rejecting `!(x > 0.0)` checks and reference constants quoted to more
// digits than an f64 holds are both deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod domain;
pub mod error;
pub mod greens;
pub mod hitfn;
pub mod kernels;
pub mod pap;
pub mod sampler;
pub mod specfun;

pub use domain::{
    BoundaryData, DistributionTable, EstimatorResult, GaugeKind, GaugeSpec, Grid, Position, PotentialSpec,
};
pub use error::{Error, Result};
