//! Rotation-symmetric bosonic codes in a memoryless quantum-repeater chain.
//!
//! The crate is layered bottom-up:
//!
//! - [`fock`]: truncated single-mode Fock-space states and operators.
//! - [`codes`]: codeword pairs for cat, squeezed-cat, binomial and GKP-like codes.
//! - [`channel`]: photon-loss Kraus channel, syndrome projection, entanglement
//!   creation and the approximate constructions used for non-cat codes.
//! - [`metrics`]: success probability, fidelity, key rate and cost.
//! - [`sweep`]: parameter grids, optimizers and resource searches.
//! - [`output`]: fixed-schema CSV serialization.

pub mod channel;
pub mod codes;
pub mod error;
pub mod fock;
pub mod metrics;
pub mod output;
pub mod par;
pub mod sweep;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
