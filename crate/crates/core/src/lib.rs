//! Engagement-threshold neurofeedback engine.
//!
//! The crate is `no_std` (with `alloc`) so the engine can run anywhere a tick
//! driver can feed it frames. IO, file formats, the CLI and the network
//! gateway live in the companion `neurofeed` crate.
//!
//! - [`signal`]: engagement frames and the sources that emit them.
//! - [`calibration`]: fixation / eyes-closed baseline procedure.
//! - [`intervention`]: smoothing, threshold test, video and maze controllers.
//! - [`maze`]: perfect-maze generation, DFS tour, caterpillar kinematics.
//! - [`session`]: the fixed protocol state machine and its tick log.
//! - [`analysis`]: descriptive statistics, Welch t-tests, word frequencies.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod calibration;
pub mod intervention;
pub mod maze;
pub mod session;
pub mod signal;

pub use calibration::CalibrationResult;
pub use intervention::{EvaluatorConfig, EventKind, InterventionEvent};
pub use session::{Phase, Session, SessionConfig, SessionLogRecord};
pub use signal::{SignalFrame, SignalSource};
