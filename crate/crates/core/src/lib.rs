//! Quantum-optical high-harmonic generation from a trapped ideal Bose gas.
//!
//! The pipeline runs thermodynamics of the trapped gas, Franck–Condon
//! factors, driven single-particle dynamics, coherent field amplitudes and
//! mixed-state diagnostics of the emitted harmonic field.

pub mod config;
pub mod dynamics;
pub mod field;
pub mod franck_condon;
pub mod pipeline;
pub mod state;
pub mod trap;
