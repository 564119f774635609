use thiserror::Error;

use crate::hand::{Digit, JointId};

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rolling angle {theta} rad outside [-pi, pi]")]
    RollingDomain { theta: f64 },

    #[error("rolling radius must be positive, got {radius} m")]
    RollingRadius { radius: f64 },

    #[error("joint {joint} at {value} rad violates limits [{min}, {max}]")]
    JointLimit {
        joint: JointId,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{digit}: distal joint deviates from its leader by {residual} rad")]
    Coupling { digit: Digit, residual: f64 },

    #[error("target unreachable for {digit}: best residual {residual:.6} m")]
    Unreachable { digit: Digit, residual: f64 },

    #[error("invalid hand spec: {0}")]
    Spec(String),

    #[error("routing configuration: {0}")]
    Routing(String),

    #[error("keypoint frame rejected: {0}")]
    FrameRejected(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("grasp presets: {0}")]
    Presets(String),

    #[error("session: {0}")]
    Session(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Bus(#[from] crate::bus::BusError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
