//! Decoders and Monte Carlo tooling for the qudit toric code.

pub mod decoder;
pub mod dsu;
pub mod error;
pub mod hdrg;
pub mod init;
pub mod lattice;
pub mod percolation;
pub mod rng;
pub mod sdrg;
pub mod stats;

pub use decoder::Decoder;
pub use error::{DecodeError, LatticeError, StatsError};
