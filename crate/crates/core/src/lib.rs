//! Hybrid frame/event eye tracking engine.
//!
//! Low-rate grayscale frames anchor a parametric eye model (pupil ellipse,
//! eyelid parabola, glint circle) through batch least squares; the
//! high-rate event stream keeps the model current between frames through
//! gated incremental updates. A calibrated polynomial regressor maps the
//! pupil center to screen coordinates, and a synthetic DVS eye simulator
//! plus metrics suite make the whole pipeline testable end to end.

pub mod blink;
pub mod fitter;
pub mod frames;
pub mod gaze;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sim;
