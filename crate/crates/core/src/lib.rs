//! Exact-arithmetic computation and verification engine for quantized
//! current algebras attached to a curve with a meromorphic differential.
//!
//! The crate builds, at configurable truncation orders, the kernels, jet
//! series, defining relations, coproducts, evaluation representations and
//! twists of the deformed double extension of the current algebra of sl2
//! over the trigonometric and elliptic (Tate) curves, and machine-checks
//! the identities among them. All arithmetic is over exact rationals; every
//! check is literal coefficient equality on a declared validity window.

pub mod rat;
pub mod coeff;
pub mod jets;
pub mod laurent;
pub mod kernel;
pub mod opseries;
pub mod theta;
pub mod curve;
pub mod finiterr;
pub mod kernels;

pub use coeff::{Coeff, Expo, Trunc};
pub use rat::Rat;
