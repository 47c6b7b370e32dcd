//! Vladimirov–Taibleson calculus on p-adic Vilenkin groups.
//!
//! The crate covers exact p-adic arithmetic ([`padic`]), the graded groups
//! ℚ_p^d, ℍ_d and 𝔼_4 ([`group`], [`cells`]), locally constant test functions
//! ([`testfn`]), VT operators ([`vt`]), radial kernels and heat/Riesz
//! potentials ([`kernels`]) and Schrödinger-representation symbols and heat
//! traces on ℍ_d and 𝔼_4 ([`spectral`]).

// `!(x > 0.0)` is the intended spelling: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod error;
pub mod group;
pub mod kernels;
pub mod padic;
pub mod par;
pub mod spectral;
pub mod testfn;
pub mod vt;

pub use error::{Error, Result};
