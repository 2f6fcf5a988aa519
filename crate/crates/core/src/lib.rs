//! Statevector simulation of decoherence-free logical pairs and two
//! multi-party semi-quantum private comparison protocols built on them.

pub mod adversary;
pub mod circuits;
pub mod codec;
pub mod efficiency;
pub mod error;
pub mod protocol;
pub mod statevector;
pub mod transcript;

pub use codec::{EncodingFamily, LogicalBasis, LogicalValue};
pub use error::{Error, Result};
pub use statevector::{Amplitude, Bitstring, Circuit, Gate, StateVector, Unitary};
