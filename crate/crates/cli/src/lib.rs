//! Experiment harness for the ring-array AoA estimation toolkit:
//! configuration handling, frame synthesis, Monte Carlo sweeps, capacity
//! comparisons, and deterministic CSV emission. The `oam-aoa` binary is a
//! thin argument parser over the commands exposed here, so integration
//! tests and downstream tools can drive the same code paths directly.

pub mod capacity;
pub mod config;
pub mod csvout;
pub mod experiments;
