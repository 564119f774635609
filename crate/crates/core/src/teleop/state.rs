use serde::{Deserialize, Serialize};

use crate::hand::JointId;
use crate::tendon::MotorId;

pub const STATE_SCHEMA: &str = "craft-state";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateFlags {
    /// No keypoint frame within the stale window; targets are held.
    pub stale: bool,
    /// The bus failed past its retries; targets are frozen.
    pub fault: Option<String>,
    /// Joints whose target was clamped onto a limit this tick.
    pub clamped: Vec<String>,
    /// Motors at their current limit.
    pub overload: Vec<u8>,
}

/// One tick of telemetry, as streamed to observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub schema: String,
    pub version: u32,
    pub tick: u64,
    pub t: f64,
    /// Joint angles read back through the transmission, all 20 joints.
    pub q: Vec<f64>,
    /// Current joint targets, all 20 joints.
    pub target: Vec<f64>,
    /// Spool angles in motor-id order, radians.
    pub motor_positions: Vec<f64>,
    pub currents_ma: Vec<f64>,
    pub flags: StateFlags,
    /// Wall time spent computing the tick, ms. Zero on a virtual clock.
    pub latency_ms: f64,
}

impl StateMessage {
    pub fn idle(tick: u64, t: f64) -> Self {
        StateMessage {
            schema: STATE_SCHEMA.into(),
            version: STATE_VERSION,
            tick,
            t,
            q: vec![0.0; JointId::COUNT],
            target: vec![0.0; JointId::COUNT],
            motor_positions: vec![0.0; MotorId::COUNT],
            currents_ma: vec![0.0; MotorId::COUNT],
            flags: StateFlags::default(),
            latency_ms: 0.0,
        }
    }
}
