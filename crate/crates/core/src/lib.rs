//! Digital twin of a tendon-driven anthropomorphic hand.
//!
//! * [`hand`]: joints, links, rolling-contact geometry, forward and inverse
//!   kinematics, and the hand-spec file.
//! * [`tendon`]: joint ↔ spool maps, capstan friction and holding torques.
//! * [`retarget`]: operator keypoints → calibrated robot joint targets.
//! * [`bus`]: servo-bus codec and a virtual bus of simulated motors.
//! * [`sim`]: quasi-static simulator and the structural test harnesses.
//! * [`grasp`]: the 33-grasp preset library and its geometric checks.
//! * [`teleop`]: the fixed-rate control pipeline and session recording.

pub mod bus;
pub mod error;
pub mod grasp;
pub mod hand;
pub mod retarget;
pub mod sim;
pub mod teleop;
pub mod tendon;

pub use error::{Error, Result};
pub use hand::{project_coupling, Digit, HandSpec, JointAngles, JointId, Slot};
pub use tendon::{MotorId, SpoolAngles};
