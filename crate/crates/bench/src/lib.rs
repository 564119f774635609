//! Fixtures shared by the benchmarks.

use craft_core::bus::{encode_frame, BusFrame, Instruction};
use craft_core::retarget::{calibrate_operator, spec_robot_limits, CalibrationProfile, KeypointFrame, SyntheticHand};
use craft_core::{HandSpec, JointAngles, JointId};

/// A pose halfway between the limits of every joint.
pub fn mid_pose(spec: &HandSpec) -> JointAngles {
    let mut q = JointAngles::zeros();
    for id in JointId::all() {
        let [lo, hi] = spec.limits(id);
        q[id] = 0.5 * (lo + hi);
    }
    craft_core::project_coupling(&q)
}

pub fn sweep_frames() -> Vec<KeypointFrame> {
    SyntheticHand::default().calibration_sweep(60, 30.0)
}

pub fn profile(spec: &HandSpec, frames: &[KeypointFrame]) -> CalibrationProfile {
    let cal = calibrate_operator(frames).expect("synthetic sweep calibrates");
    CalibrationProfile::new(spec_robot_limits(spec), cal.range).expect("valid profile")
}

/// A byte stream of back-to-back sync-write frames, about `bytes` long.
pub fn frame_stream(bytes: usize) -> Vec<u8> {
    let goals: Vec<u8> = (1..=15u8).flat_map(|id| [id, 0x10, 0x20, 0x00, 0x00]).collect();
    let mut params = vec![116, 0, 4, 0];
    params.extend(goals);
    let one = encode_frame(&BusFrame::new(0xFE, Instruction::SyncWrite, params)).expect("encodes");
    one.iter().copied().cycle().take(bytes / one.len() * one.len()).collect()
}
