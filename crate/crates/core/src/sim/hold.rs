use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::report::{Sample, TestKind, TestReport};
use crate::bus::{MotorParams, VirtualMotor};
use crate::error::Result;
use crate::hand::{digit_jacobian, Digit, HandSpec, JointAngles, JointId, Slot};
use crate::tendon::{hold_torques_for, joint_to_motor, motor_to_joint, MotorId, SpoolAngles};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoldConfig {
    pub mass_kg: f64,
    pub duration_s: f64,
    pub dt: f64,
    /// Fraction of the load carried by each digit, thumb first. The default
    /// thumb closes over the fingers and carries none of the weight.
    pub digit_share: [f64; 5],
    /// Direction of the load on the fingertips, palm frame.
    pub load_direction: [f64; 3],
    /// MCP flex and PIP angles of the hook grip, as fractions of the upper
    /// limits.
    pub grip: [f64; 2],
    pub motor: MotorParams,
    pub assist_friction: bool,
}

impl Default for HoldConfig {
    fn default() -> Self {
        HoldConfig {
            mass_kg: 2.27,
            duration_s: 3600.0,
            dt: 1.0,
            digit_share: [0.0, 0.25, 0.25, 0.25, 0.25],
            load_direction: [1.0, 0.0, 0.0],
            grip: [0.0, 0.1],
            motor: MotorParams::default(),
            assist_friction: true,
        }
    }
}

impl HoldConfig {
    pub fn pose(&self, spec: &HandSpec) -> JointAngles {
        let mut q = JointAngles::zeros();
        for d in Digit::ALL {
            let flex = spec.limits(JointId::new(d, Slot::McpFlex))[1];
            let pip = spec.limits(JointId::new(d, Slot::Pip))[1];
            q[(d, Slot::McpFlex)] = self.grip[0] * flex;
            q[(d, Slot::Pip)] = self.grip[1] * pip;
            q[(d, Slot::Dip)] = self.grip[1] * pip;
        }
        q
    }

    /// Generalized torque per digit that holds the load at `q`. Return
    /// springs are left out so both drives see the same gravity-only demand.
    pub fn required_torques(&self, spec: &HandSpec, q: &JointAngles) -> [Vector3<f64>; 5] {
        let dir = Vector3::from(self.load_direction).normalize();
        let weight = self.mass_kg * GRAVITY;
        Digit::ALL.map(|d| {
            let f = dir * weight * self.digit_share[d.index()];
            -(digit_jacobian(spec, d, q).transpose() * f)
        })
    }
}

/// Holds a hanging mass for `duration_s` with the tendon hand and with a
/// direct-drive reference carrying the same load on the same motors, logging
/// every motor current.
pub fn run_holding_test(spec: &HandSpec, cfg: &HoldConfig) -> Result<TestReport> {
    assert!(cfg.mass_kg >= 0.0, "mass must be non-negative");
    assert!(cfg.dt > 0.0 && cfg.duration_s >= cfg.dt, "bad holding schedule");
    let q = cfg.pose(spec);
    let required = cfg.required_torques(spec, &q);
    let commanded = q.active().to_vec();
    let steps = (cfg.duration_s / cfg.dt).round() as usize;
    let mut samples = Vec::with_capacity(2 * steps);

    let spools = joint_to_motor(spec, &q)?;
    let hold = hold_torques_for(spec, &required, cfg.assist_friction);
    let mut tendon: Vec<VirtualMotor> = MotorId::all()
        .map(|m| {
            let mut v = VirtualMotor::new(m.0, cfg.motor);
            v.goal_position = spools.get(m);
            v.present_position = spools.get(m);
            v.load_torque = hold.get(m);
            v
        })
        .collect();
    for k in 1..=steps {
        let mut failed = !hold.slack.is_empty();
        for m in tendon.iter_mut() {
            m.advance(cfg.dt);
            failed |= m.is_saturated();
        }
        let now = SpoolAngles(std::array::from_fn(|i| tendon[i].present_position));
        samples.push(Sample {
            t: k as f64 * cfg.dt,
            series: "tendon".into(),
            load: cfg.mass_kg,
            commanded: commanded.clone(),
            achieved: motor_to_joint(spec, &now).q.active().to_vec(),
            currents_ma: tendon.iter().map(|m| m.present_current).collect(),
            failed,
        });
    }

    // direct drive: one motor per driven coordinate, in active-joint order
    let mut direct: Vec<VirtualMotor> = JointId::active()
        .enumerate()
        .map(|(i, id)| {
            let mut v = VirtualMotor::new(i as u8 + 1, cfg.motor);
            v.goal_position = q[id];
            v.present_position = q[id];
            let k = Slot::ACTIVE.iter().position(|s| *s == id.slot).unwrap_or(0);
            v.load_torque = required[id.digit.index()][k];
            v
        })
        .collect();
    for k in 1..=steps {
        let mut failed = false;
        for m in direct.iter_mut() {
            m.advance(cfg.dt);
            failed |= m.is_saturated();
        }
        samples.push(Sample {
            t: k as f64 * cfg.dt,
            series: "direct".into(),
            load: cfg.mass_kg,
            commanded: commanded.clone(),
            achieved: direct.iter().map(|m| m.present_position).collect(),
            currents_ma: direct.iter().map(|m| m.present_current).collect(),
            failed,
        });
    }
    Ok(TestReport::new(TestKind::Holding, serde_json::to_value(cfg)?, samples))
}
