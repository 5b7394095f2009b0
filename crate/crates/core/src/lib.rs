//! Optimal-scaling laboratory for the Random Walk Metropolis algorithm on
//! product targets.
//!
//! The crate simulates RWM chains on `π^d = ∏ π(x_i)` with proposal scale
//! `ℓ d^{-1/2}`, evaluates the limiting acceptance rate `a(ℓ) = 2Φ(-ℓ√I/2)`
//! and diffusion speed `h(ℓ) = ℓ² a(ℓ)`, compares rescaled chains with the
//! limiting Langevin diffusion and checks the differentiability-in-mean
//! conditions numerically for Gaussian, Laplace-type, generalized Gamma and
//! Beta targets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod exec;
pub mod limits;
pub mod quadrature;
pub mod rng;
pub mod rwm;
pub mod special_fn;
pub mod stats;
pub mod targets;
pub mod verify;

pub use error::{Error, Result};
pub use quadrature::{QuadratureCfg, TailTransform};
pub use rng::{SeedStream, StreamKey};
pub use targets::{Family, SmoothPart, SupportInterval, TargetSpec};
