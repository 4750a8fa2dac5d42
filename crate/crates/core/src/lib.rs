//! Master-equation and quantum-trajectory simulation of a coherently driven
//! two-level atom coupled to a damped cavity mode, monitored by homodyne,
//! heterodyne and direct photodetection.

pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod phase_space;
pub mod runner;
pub mod semiclassics;
pub mod sparse;
pub mod trajectories;

pub use error::{Error, Result};
