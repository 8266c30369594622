//! GNSS spoofing detection for vehicle traces via in-vehicle sensor fusion.
//!
//! The toolkit fuses low-cost in-vehicle sensor streams (GNSS, speedometer,
//! accelerator pedal position, steering angle) and raises alarms through two
//! concurrent strategies:
//!
//! * **Strategy 1** — an LSTM predicts the per-timestep location shift from
//!   the fused features; the prediction is compared against the GNSS-derived
//!   shift, and the speedometer-derived motion state is cross-checked against
//!   the motion state implied by GNSS.
//! * **Strategy 2** — turning maneuvers segmented from the steering stream
//!   are classified with a DTW/k-NN model and cross-checked against turns
//!   inferred independently from the GNSS track.
//!
//! Because real drive recordings are not shipped with the crate, [`simgen`]
//! produces kinematically consistent synthetic traces with ground truth, and
//! [`attacks`] injects four spoofing attack families (turn-by-turn,
//! overshoot, wrong turn, stop) into clean traces for evaluation.

pub mod attacks;
pub mod detector;
pub mod dtw;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod lstm;
pub mod simgen;
pub mod suite;
pub mod turns;

pub use error::{Error, Result};
