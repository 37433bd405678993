//! Recording container, flat configuration and text sidecars.
//!
//! A recording is one binary container holding the event stream and the
//! concatenated PGM frame stream, each with a CRC32 in the manifest.
//! Ground truth travels in a separate plain-text sidecar (the scripted
//! scenario, which is exact at any timestamp), and calibration results in a
//! small text file of map coefficients.

mod config;
mod pgm;
mod recording;
mod sidecar;

pub use config::RunConfig;
pub use pgm::{read_pgm, write_pgm};
pub use recording::{read_recording, serialize_recording, write_recording, Recording};
pub use sidecar::{
    parse_gaze_map, parse_scenario, render_gaze_map, render_scenario, sidecar_path,
};

/// Errors of the recording and config readers.
#[derive(Debug)]
pub enum IoError {
    /// Magic, version or section table is broken; offset of the defect.
    MalformedHeader { offset: u64, reason: String },
    /// A section's CRC32 does not match the manifest.
    ChecksumMismatch { section: &'static str },
    /// Timestamps in a stream decrease; index of the offending record.
    OutOfOrderTimestamp { stream: &'static str, index: usize },
    /// A record's payload is invalid (polarity, bounds, PGM syntax).
    MalformedRecord { stream: &'static str, index: usize, reason: String },
    /// Config file defect: unknown key, bad value.
    BadConfig(String),
    Io(std::io::Error),
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MalformedHeader { offset, reason } => {
                write!(f, "malformed header at offset {}: {}", offset, reason)
            }
            Self::ChecksumMismatch { section } => {
                write!(f, "checksum mismatch in section '{}'", section)
            }
            Self::OutOfOrderTimestamp { stream, index } => {
                write!(f, "timestamps out of order in {} stream at record {}", stream, index)
            }
            Self::MalformedRecord { stream, index, reason } => {
                write!(f, "malformed {} record {}: {}", stream, index, reason)
            }
            Self::BadConfig(msg) => write!(f, "bad config: {}", msg),
            Self::Io(e) => write!(f, "io error: {}", e),
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
