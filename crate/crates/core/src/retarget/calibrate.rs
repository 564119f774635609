use serde::{Deserialize, Serialize};

use super::keypoints::{keypoints_to_angles, KeypointFrame, OperatorAngles};
use crate::error::{Error, Result};
use crate::hand::{HandSpec, JointAngles, JointId};

/// Frames below this confidence are ignored during calibration.
pub const MIN_CONFIDENCE: f64 = 0.5;
/// Joints whose observed range is narrower than this are reported.
pub const MIN_RANGE_WIDTH: f64 = 0.05;

/// Observed operator envelope per active joint, actuator order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorRange(pub [[f64; 2]; JointId::ACTIVE_COUNT]);

impl OperatorRange {
    pub fn get(&self, id: JointId) -> [f64; 2] {
        self.0[id.active_index().expect("active joint")]
    }

    /// Joints whose envelope is narrower than [`MIN_RANGE_WIDTH`].
    pub fn under_calibrated(&self) -> Vec<JointId> {
        JointId::active()
            .filter(|&id| {
                let [lo, hi] = self.get(id);
                hi - lo < MIN_RANGE_WIDTH
            })
            .collect()
    }
}

/// Running min/max accumulator. Owned by one writer; the finished range is
/// a plain value.
#[derive(Debug, Clone, Default)]
pub struct Calibrator {
    envelope: Option<[[f64; 2]; JointId::ACTIVE_COUNT]>,
    accepted: usize,
    low_confidence: usize,
    rejected: usize,
}

/// Outcome of [`calibrate_operator`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCalibration {
    pub range: OperatorRange,
    /// Joints that never moved enough; non-empty means a warning.
    pub under_calibrated: Vec<JointId>,
    pub accepted: usize,
    pub skipped: usize,
}

impl Calibrator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds one frame in. Returns whether it contributed.
    pub fn observe(&mut self, frame: &KeypointFrame) -> bool {
        if frame.confidence < MIN_CONFIDENCE {
            self.low_confidence += 1;
            return false;
        }
        match keypoints_to_angles(frame) {
            Ok(a) => {
                self.observe_angles(&a);
                true
            }
            Err(_) => {
                self.rejected += 1;
                false
            }
        }
    }

    pub fn observe_angles(&mut self, a: &OperatorAngles) {
        self.accepted += 1;
        let env = self.envelope.get_or_insert_with(|| a.0.map(|v| [v, v]));
        for (e, &v) in env.iter_mut().zip(&a.0) {
            e[0] = e[0].min(v);
            e[1] = e[1].max(v);
        }
    }

    pub fn range(&self) -> Option<OperatorRange> {
        self.envelope.map(OperatorRange)
    }

    pub fn finish(&self) -> Result<OperatorCalibration> {
        let range = self
            .range()
            .ok_or_else(|| Error::Calibration("no valid frames observed".into()))?;
        Ok(OperatorCalibration {
            under_calibrated: range.under_calibrated(),
            range,
            accepted: self.accepted,
            skipped: self.low_confidence + self.rejected,
        })
    }
}

pub fn calibrate_operator<'a>(frames: impl IntoIterator<Item = &'a KeypointFrame>) -> Result<OperatorCalibration> {
    let mut c = Calibrator::new();
    for f in frames {
        c.observe(f);
    }
    c.finish()
}

/// Robot limits from joint readings taken while each joint is driven to its
/// extremes.
pub fn calibrate_robot<'a>(samples: impl IntoIterator<Item = &'a JointAngles>) -> Result<[[f64; 2]; JointId::ACTIVE_COUNT]> {
    let mut env: Option<[[f64; 2]; JointId::ACTIVE_COUNT]> = None;
    for q in samples {
        let a = q.active();
        let e = env.get_or_insert_with(|| a.map(|v| [v, v]));
        for (e, v) in e.iter_mut().zip(a) {
            e[0] = e[0].min(v);
            e[1] = e[1].max(v);
        }
    }
    let env = env.ok_or_else(|| Error::Calibration("no robot samples".into()))?;
    if let Some(i) = env.iter().position(|[lo, hi]| hi <= lo) {
        return Err(Error::Calibration(format!(
            "robot joint {} never moved",
            JointId::from_active_index(i)
        )));
    }
    Ok(env)
}

/// Robot limits straight from the hand spec.
pub fn spec_robot_limits(spec: &HandSpec) -> [[f64; 2]; JointId::ACTIVE_COUNT] {
    std::array::from_fn(|i| spec.limits(JointId::from_active_index(i)))
}
