//! Numerical toolkit for ring-of-spikes constructions in coupled cubic
//! Schrödinger systems.
//!
//! The crate solves scalar radial ground states, measures the interaction
//! constants that govern spike-spike and spike-potential forces, builds
//! rings of spikes per component, locates critical points of the
//! leading-order reduced energy in the placement parameters, and verifies
//! constructed solutions with a full 2-D Newton solve.

pub mod config;
pub mod error;
pub mod field;
pub mod io;
pub mod ground_state;
pub mod geometry;
pub mod interaction;
pub mod numerics;
pub mod reduced;
pub mod par;

pub use error::{Error, Result};
