//! Numerical core for charged-particle phase-shift interference experiments.
//!
//! The crate computes the phase a localized charged wave packet accumulates
//! while moving in scalar and vector potentials, three different ways: from
//! the exact closed form for time-only forces, from the general-force phase
//! formula evaluated on classically integrated trajectories, and from a
//! direct grid propagation of the Schrödinger equation. On top of that sit
//! the interference machinery (packet overlaps, interaction phases,
//! detection probabilities) and two concrete experiment models: a rotating
//! charged-shell solenoid orbited by an electron, and a charged parallel-plate
//! capacitor passed above/below by an electron.
//!
//! The crate is `no_std` (with `alloc`); all IO and the CLI live in the
//! companion `abkit-cli` crate.
//!
//! Phases are handled in natural units (ħ = 1) inside the packet, dynamics
//! and interference modules; the experiment modules accept physical CGS/MKS
//! quantities and divide by ħ at their boundary. See [`units`] for the
//! conversion helpers.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod capacitor;
pub mod dynamics;
pub mod error;
pub mod interference;
pub mod ode;
pub mod packet;
pub mod quad;
pub mod schrodinger;
pub mod solenoid;
pub mod units;
pub mod vec3;

pub use error::{AbError, Result};
