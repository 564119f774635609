//! Operator keypoints to robot joint targets.
//!
//! Per tick: [`keypoints_to_angles`] extracts 15 operator angles,
//! [`retarget`] maps each through the calibrated ranges, and [`Ema`]
//! smooths the result.

mod calibrate;
mod keypoints;
mod map;
mod profile;

pub use calibrate::{
    calibrate_operator, calibrate_robot, spec_robot_limits, Calibrator, OperatorCalibration, OperatorRange,
    MIN_CONFIDENCE, MIN_RANGE_WIDTH,
};
pub use keypoints::{
    digit_landmarks, keypoints_to_angles, keypoints_to_full_angles, palm_frame, read_keypoint_stream,
    write_keypoint_stream, KeypointFrame, OperatorAngles, SyntheticHand, WristPose, LANDMARK_COUNT,
    STREAM_SCHEMA, STREAM_VERSION, THUMB_REFERENCE_RPY, WRIST,
};
pub use map::{lerp_clamped, normalize, retarget, retarget_wrist, smooth, Ema, WristTarget};
pub use profile::{CalibrationProfile, WorkspaceMap, DEFAULT_EMA_ALPHA, PROFILE_FORMAT, PROFILE_VERSION};
