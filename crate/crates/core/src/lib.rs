//! A finite-difference laboratory for fully nonlinear parabolic transmission
//! problems with a moving graph interface.
//!
//! The equation under study is ∂t u − F±(D²u) = f± on the two sides of the
//! interface x_n = ψ(x',t), coupled by the jump condition u_ν⁺ − u_ν⁻ = g,
//! with Dirichlet data on the parabolic boundary of a backwards cylinder.
//! The crate provides:
//!
//! * space-time grids over parabolic cylinders and parabolic Hölder / C^{1,α}
//!   norms ([`grid`], [`field`]);
//! * uniformly elliptic operators, including the Pucci extremal pair, with a
//!   sampled ellipticity certificate ([`operators`]);
//! * interface classification and the local trace system enforcing the jump
//!   condition ([`interface`]);
//! * an explicit monotone marching solver with barrier sandwiching and the
//!   flat-interface decomposition ([`solver`]);
//! * parabolic convex envelopes, contact sets, and ε-envelopes
//!   ([`envelope`]);
//! * regularity metrology: ABP, Harnack, oscillation decay, Hölder and
//!   C^{1,α} fits, interface-perturbation stability ([`estimates`]);
//! * Dini moduli, the Hopf recursion, and Hopf lower-bound checks ([`hopf`]);
//! * a deterministic experiment runner behind the `translab` binary
//!   ([`experiment`]).

// `!(x > 0.0)` guards reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod envelope;
pub mod error;
pub mod estimates;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod hopf;
pub mod interface;
pub mod operators;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
