//! Quantum trajectories of a particle in a harmonic trap that is watched by
//! a lattice of phase-space detectors.
//!
//! Units are those of the oscillator (`ħ = m = ω = 1`). Detector `(j, k)` is
//! the coherent state centered at `(j·d_x, k·d_p)`; it fires at rate
//! `γ|⟨α|ψ⟩|²` and collapses the particle onto itself. The crate simulates
//! ensembles of such trajectories, integrates the corresponding master
//! equation for cross-checks, and computes the ensemble statistics (mean
//! orbit, dispersion growth, energy distributions) of the recorded clicks.

pub mod config;
pub mod detectors;
pub mod ensemble;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod rng;
pub mod stats;
pub mod validate;
pub mod wavefunction;

pub use config::{EngineKind, SimConfig};
pub use error::{Error, Result};
