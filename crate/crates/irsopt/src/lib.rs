//! Joint transmit-beamforming and reflecting-surface phase optimization for
//! multiuser MISO downlinks: power-minimization solvers under per-user SINR
//! constraints, with nominal and worst-case robust variants, plus the channel
//! model and experiment harness behind the `irsopt` CLI.

pub mod algorithms;
pub mod channel;
pub mod config;
pub mod harness;
pub mod matcore;
pub mod robust;
pub mod sdp;
pub mod state;

pub use matcore::{C64, ComplexMatrix, ComplexVector, HermitianMatrix};
