//! Deterministic simulator and verification harness for quantum lottery
//! protocols: BB84-state, entanglement-based and semi-quantum variants.

pub mod bits;
pub mod cli;
pub mod classical;
pub mod config;
pub mod keylink;
pub mod protocol;
pub mod qds;
pub mod qsim;
pub mod rng;
pub mod tickets;

pub use bits::{BitString, BitsError};
pub use rng::RandomStream;
