//! Numerical toolkit for fine-grained SVP hardness experiments.
//!
//! The crate has three layers:
//!
//! * **Theta numerics** ([`theta`]): arbitrary-precision evaluation of the
//!   shifted theta function `Θ_p(τ; t) = Σ_z exp(-τ|z-t|^p)`, its log-derivatives
//!   `μ_p` and `V_p`, the `H_p` lower-bound functional, and the hardness
//!   constants `W_p`, `C_p`, and `p_0`.
//! * **Counting** ([`counting`], [`lattice`]): exact big-integer dynamic
//!   programming for integer points in shifted `ℓ_p` balls, certified interval
//!   counting for irrational data, and exact small-rank lattice enumeration
//!   (`λ_1`, `dist`, primitive and annoying vector counts, sparsification).
//! * **Reductions** ([`gadgets`], [`reductions`], [`oracles`]): the integer-lattice
//!   gadget for `p > 2`, kissing-number Monte-Carlo machinery, and the executable
//!   pipeline DIMACS → ExactSetCover → (A,G)-CVP → SVP, checked at desk scale
//!   against brute-force oracles.

pub mod counting;
pub mod error;
pub mod gadgets;
pub mod lattice;
pub mod oracles;
pub mod real;
pub mod reductions;
pub mod theta;

pub use error::{Error, Result};
pub use real::{NormExponent, RealApprox, DEFAULT_PREC};
