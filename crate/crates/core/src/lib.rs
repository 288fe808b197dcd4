//! Transient generation of pair-coherent ("circle") states in a
//! non-degenerate parametric oscillator with an adiabatically eliminated pump.
//!
//! The crate builds the sparse number-basis generator of the two-mode master
//! equation, integrates it from the vacuum, and evaluates two signatures of
//! the circle state: conditional cat-state interference fringes in homodyne
//! distributions, and fidelity against the ideal references.

// `!(x > 0.0)` in parameter checks is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod fidelity;
pub mod fock;
pub mod integrator;
pub mod liouvillian;
pub mod measurement;
pub mod oracle;
pub mod states;

pub use error::{Error, Result};
pub use fock::{Cutoff, Mode, SingleModeDensityMatrix, TwoModeDensityMatrix, TwoModePureState};
pub use liouvillian::{OscillatorParams, SuperOperator};
