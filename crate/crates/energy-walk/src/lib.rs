//! Discrete-time energy-space walks on a truncated ladder: classical
//! birth-death dynamics, a collision-model quantum channel with tunable
//! ancilla coherence, and the diagnostics used to study equilibration
//! versus thermalization.

pub mod classical;
pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod ladder;
pub mod linalg;
pub mod plot;
pub mod scenario;

pub use error::{Error, Result};
