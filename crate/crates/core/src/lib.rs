//! Exact and numerical verification of Voronoi-type summation formulas for
//! GL(N) over Q: hyper-Kloosterman sums over residue rings, torus coset
//! combinatorics, unramified Whittaker coefficient providers, the archimedean
//! Hankel-type dual-weight transform, and evaluators for both sides of the
//! ordinary and balanced summation formulas together with a brute-force
//! convention search over the finitely many sign/orientation ambiguities.

pub mod afe;
pub mod arith;
pub mod bessel;
pub mod cache;
pub mod hankel;
pub mod engine;
pub mod error;
pub mod kloosterman;
pub mod whittaker;
pub mod quad;
pub mod torus;

pub use error::{Error, Result};
