//! Modeling toolkit for membrane-in-the-middle cavity optomechanics.
//!
//! * [`params`]: constants, parameter sets, config files
//! * [`cavity`]: dispersive bands, thin-film optics, transmission maps, ringdown
//! * [`mechanics`]: zero-point motion, thermal occupation, mechanical Q
//! * [`cooling`]: displacement PSD model and effective-temperature estimators
//! * [`qnd`]: phonon-number QND readout budget
//! * [`jumpsim`]: Monte Carlo phonon jumps with noisy frequency readout
//! * [`sweep`]: grid sweeps and constrained SNR maximization
//! * [`cli`]: the `mimqnd` command-line frontend

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod cli;
pub mod cooling;
pub mod error;
pub mod fit;
pub mod jumpsim;
pub mod mechanics;
pub mod output;
pub mod params;
pub mod qnd;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
pub use params::{ExperimentParams, MembraneSpec, ParamName};
