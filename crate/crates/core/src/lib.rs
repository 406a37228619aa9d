//! Simulation of a serial multistable metamaterial with integrated
//! capacitive state sensing.
//!
//! The chain couples N bistable cells in series under displacement control.
//! Each cell carries a parallel-plate sensor whose gap follows the cell's
//! elongation; an LC-resonance converter digitizes the coupled channel
//! capacitances, and the detection pipeline recovers the cell deployment
//! sequence from those codes alone.
//!
//! Modules follow the physical signal path:
//!
//! * [`geometry`]  - beam profile and plate dimensions
//! * [`mechanics`] - reduced-order cell law, series equilibrium, snap events
//! * [`sensing`]   - plate capacitance and channel coupling
//! * [`acquisition`] - capacitance-to-digital conversion and noise
//! * [`detection`] - normalization, derivative peaks, sequence recovery
//! * [`harness`]   - scenario configs, orchestration, sweeps and reports

// validation guards use `!(v > 0.0)` so NaN fails closed
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mechanics;
pub mod rngutil;
pub mod sensing;
pub mod trace;

pub use error::{Error, Result};
