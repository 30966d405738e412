//! Deterministic, seed-reproducible simulation and diagnostics for toy
//! models of macroscopic irreversibility: the Ehrenfest urn, its
//! independent-ball variant, and the Kac ring/chain, together with the
//! probabilistic machinery around them (empirical measures, large-deviation
//! bounds, truncated Solovay tests, compression-based complexity estimates,
//! and Birkhoff/two-sided ergodic averages).
//!
//! Everything downstream of a seed is a pure function of that seed: bit
//! sources are random-access SplitMix64 streams and derived per-stream seeds
//! make Monte Carlo replicas independent and reproducible in parallel.
//!
//! The analytic layer (closed-form curves, rate functions, entropies) is
//! generic over the floating-point scalar via [`Real`]; simulation kernels
//! work on packed 64-bit words, and exact oracles use big rationals.

pub mod curve;
pub mod ehrenfest;
pub mod ergodic;
pub mod error;
pub mod kac;
pub mod largedev;
pub mod modified_ehrenfest;
pub mod randomness;
pub mod scalar;
pub mod seqcore;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

/// Exact rational used by the enumeration oracles.
pub type Rational = num_rational::BigRational;

/// Concrete curve aliases for the two supported scalars.
pub type Curve64 = curve::Curve<f64>;
pub type Curve32 = curve::Curve<f32>;
