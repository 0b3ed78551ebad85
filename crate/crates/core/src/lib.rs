//! Decentralized coded caching with heterogeneous, popularity-aware placement.
//!
//! - [`model`]: instances, popularity and caching distributions, demands.
//! - [`simulator`]: bit-level placement, XOR multicast delivery and decoding.
//! - [`analytics`]: exact rates, expected rate, upper and cut-set lower bounds.
//! - [`optimizer`]: the closed-form placement `Q†` and a numeric baseline.
//! - [`asymptotics`]: zeta, asymptotic ratio bounds and regime sweeps.
//! - [`cli`]: the `codedcache` command-line front end.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{CachingDist, PopularityDist, ProblemInstance, RequestProfile, RequestVector};
