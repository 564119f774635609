use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion};

use super::keypoints::{OperatorAngles, WristPose};
use super::profile::CalibrationProfile;
use crate::error::{Error, Result};
use crate::hand::{project_coupling, JointAngles, JointId};

/// Linear map from `[lo, hi]` to `[a, b]` by the normalized coordinate `u`.
/// Lands on `a` and `b` exactly at the ends and never leaves `[a, b]`.
pub fn lerp_clamped(a: f64, b: f64, u: f64) -> f64 {
    if u >= 1.0 {
        b
    } else if u <= 0.0 {
        a
    } else {
        (a + u * (b - a)).clamp(a, b)
    }
}

/// Normalized position of `theta` in the operator range, clamped to [0, 1].
pub fn normalize(theta: f64, [lo, hi]: [f64; 2]) -> Result<f64> {
    let width = hi - lo;
    if !(width > 0.0) {
        return Err(Error::Calibration(format!("zero-width operator range [{lo}, {hi}]")));
    }
    Ok(((theta - lo) / width).clamp(0.0, 1.0))
}

/// Robot joint targets for operator angles. Followers copy their leaders.
pub fn retarget(profile: &CalibrationProfile, operator: &OperatorAngles) -> Result<JointAngles> {
    let mut q = JointAngles::zeros();
    for id in JointId::active() {
        let u = normalize(operator[id], profile.operator_range.get(id))
            .map_err(|e| Error::Calibration(format!("{id}: {e}")))?;
        let [a, b] = profile.robot(id);
        q[id] = lerp_clamped(a, b, u);
    }
    Ok(project_coupling(&q))
}

/// One exponential-moving-average update, per joint.
pub fn smooth(prev: &JointAngles, new: &JointAngles, alpha: f64) -> JointAngles {
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
    let mut out = JointAngles::zeros();
    for (id, n) in new.iter() {
        out[id] = alpha * n + (1.0 - alpha) * prev[id];
    }
    out
}

/// Stateful EMA that passes its first input through.
#[derive(Debug, Clone)]
pub struct Ema {
    alpha: f64,
    state: Option<JointAngles>,
}

impl Ema {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        Ema { alpha, state: None }
    }

    pub fn update(&mut self, new: &JointAngles) -> JointAngles {
        let out = match &self.state {
            Some(prev) => smooth(prev, new, self.alpha),
            None => *new,
        };
        self.state = Some(out);
        out
    }

    pub fn value(&self) -> Option<&JointAngles> {
        self.state.as_ref()
    }

    pub fn reset(&mut self) {
        self.state = None;
    }
}

/// Robot end-effector target for a wrist pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WristTarget {
    pub pose: Isometry3<f64>,
    /// The mapped position fell outside the workspace box and was moved
    /// onto its surface.
    pub clamped: bool,
}

pub fn retarget_wrist(profile: &CalibrationProfile, wrist: &WristPose) -> WristTarget {
    let ws = &profile.workspace;
    let input = wrist.to_isometry();
    let p = ws.linear_matrix() * input.translation.vector + ws.offset_vector();
    let mut clamped = false;
    let mut out = Point3::origin();
    for k in 0..3 {
        let v = p[k].clamp(ws.box_min[k], ws.box_max[k]);
        clamped |= v != p[k];
        out[k] = v;
    }
    let rotation = UnitQuaternion::from_rotation_matrix(&ws.mount_rotation()) * input.rotation;
    WristTarget {
        pose: Isometry3::from_parts(Translation3::from(out.coords), rotation),
        clamped,
    }
}
