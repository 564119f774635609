//! Quasi-static simulation and the structural test harnesses.
//!
//! Each [`step`] slews the motors, maps spools to joints through the
//! transmission, bends every joint by its external torque over its
//! stiffness, and projects the follower joints onto their leaders.

mod hold;
mod pullout;
mod repeat;
mod report;
mod revolute;
mod sphere;

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::bus::{MotorParams, VirtualMotor};
use crate::error::Result;
use crate::hand::{joint_jacobian, project_coupling, Digit, HandSpec, JointAngles, JointId, Slot};
use crate::tendon::{joint_to_motor, motor_to_joint, static_hold_torque, MotorId, SpoolAngles};

pub use hold::{run_holding_test, HoldConfig, GRAVITY};
pub use pullout::{pullout_comparison, run_pullout_test, snap_fit_pops_at, Drive, PulloutConfig, PulloutPoint};
pub use repeat::{run_repeatability_test, RepeatConfig};
pub use report::{ReportLine, Sample, TestKind, TestReport, REPORT_SCHEMA};
pub use revolute::{revolute_approximation, Hinge, HingeAxis, RevoluteDigit, RevoluteModel};
pub use sphere::{check_sphere_grasp, check_sphere_grasp_with, max_angular_gap, DigitContact, SphereContact, CONTACT_TOLERANCE};

/// Per-slot joint stiffness, snap-fit threshold and motor constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Torsional stiffness of the compliant joints, N·m/rad, in slot order
    /// (MCP flex, MCP abd, PIP, DIP).
    pub joint_stiffness: [f64; 4],
    /// External MCP torque above which the snap-fit joint pops out, N·m.
    pub snap_fit_torque: f64,
    pub motor: MotorParams,
    /// Whether tendon friction helps the motors hold.
    pub assist_friction: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            joint_stiffness: [2.0; 4],
            snap_fit_torque: 0.8,
            motor: MotorParams::default(),
            assist_friction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimFlags {
    /// Joints held at a limit by the transmission or a hard stop.
    pub saturation: Vec<JointId>,
    /// Digits whose MCP snap-fit has popped out.
    pub snap_fit_fault: Vec<Digit>,
    /// Single-tendon routes that went slack.
    pub slack: Vec<MotorId>,
    /// Motors that cannot supply their load and are being backdriven.
    pub overload: Vec<MotorId>,
}

impl SimFlags {
    pub fn is_clear(&self) -> bool {
        self.saturation.is_empty() && self.snap_fit_fault.is_empty() && self.slack.is_empty() && self.overload.is_empty()
    }
}

/// Snapshot of the simulated hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub time: f64,
    pub q: JointAngles,
    /// Motors in id order 1..=15.
    pub motors: Vec<VirtualMotor>,
    /// External force on each fingertip, N, palm frame.
    pub tip_forces: [[f64; 3]; 5],
    pub flags: SimFlags,
    /// MCP flex/abd held by a popped snap-fit, per digit.
    pub frozen_mcp: [Option<[f64; 2]>; 5],
}

impl SimState {
    /// Settled state at `q`: motors at rest on the matching spool angles and
    /// `q` replaced by the transmission's exact image of those spools.
    pub fn at_pose(spec: &HandSpec, cfg: &SimConfig, q: &JointAngles) -> Result<SimState> {
        let spools = joint_to_motor(spec, &project_coupling(q))?;
        let motors = MotorId::all()
            .map(|m| {
                let mut v = VirtualMotor::new(m.0, cfg.motor);
                v.goal_position = spools.get(m);
                v.present_position = spools.get(m);
                v
            })
            .collect();
        let m2j = motor_to_joint(spec, &spools);
        Ok(SimState {
            time: 0.0,
            q: m2j.q,
            motors,
            tip_forces: [[0.0; 3]; 5],
            flags: SimFlags {
                saturation: m2j.saturated,
                ..SimFlags::default()
            },
            frozen_mcp: [None; 5],
        })
    }

    pub fn spools(&self) -> SpoolAngles {
        SpoolAngles(std::array::from_fn(|i| self.motors[i].present_position))
    }

    pub fn goals(&self) -> SpoolAngles {
        SpoolAngles(std::array::from_fn(|i| self.motors[i].goal_position))
    }

    /// Present current per motor, mA.
    pub fn currents(&self) -> [f64; MotorId::COUNT] {
        std::array::from_fn(|i| self.motors[i].present_current)
    }

    pub fn tip_force_vectors(&self) -> [Vector3<f64>; 5] {
        self.tip_forces.map(Vector3::from)
    }

    pub fn reset_snap_fit(&mut self, d: Digit) {
        self.frozen_mcp[d.index()] = None;
        self.flags.snap_fit_fault.retain(|x| *x != d);
    }
}

/// External torque on each physical joint of each digit, `[digit][slot]`.
pub fn external_joint_torques(spec: &HandSpec, q: &JointAngles, forces: &[Vector3<f64>; 5]) -> [[f64; 4]; 5] {
    Digit::ALL.map(|d| {
        let t = joint_jacobian(spec, d, q).transpose() * forces[d.index()];
        [t[0], t[1], t[2], t[3]]
    })
}

/// Advances `state` by `dt` seconds. `commands` are new spool goals; `None`
/// keeps the previous goals. Pure: identical inputs give identical output.
pub fn step(spec: &HandSpec, cfg: &SimConfig, state: &SimState, commands: Option<&SpoolAngles>, dt: f64) -> SimState {
    assert!(dt > 0.0, "time step must be positive");
    let mut next = state.clone();
    next.time = state.time + dt;
    let forces = state.tip_force_vectors();

    let hold = static_hold_torque(spec, &state.q, &forces, cfg.assist_friction);
    for (i, m) in next.motors.iter_mut().enumerate() {
        if let Some(c) = commands {
            m.goal_position = c.0[i];
        }
        m.load_torque = hold.motor_torque[i];
        m.advance(dt);
    }

    let m2j = motor_to_joint(spec, &next.spools());
    let torques = external_joint_torques(spec, &m2j.q, &forces);
    let mut q = m2j.q;
    let mut saturation = m2j.saturated;
    let mut faults = state.flags.snap_fit_fault.clone();

    for d in Digit::ALL {
        let tau = torques[d.index()];
        if state.frozen_mcp[d.index()].is_none() && tau[0].hypot(tau[1]) > cfg.snap_fit_torque {
            // pops out holding the MCP pose it had before this step
            next.frozen_mcp[d.index()] = Some([state.q[(d, Slot::McpFlex)], state.q[(d, Slot::McpAbd)]]);
            faults.push(d);
        }
        for (k, slot) in Slot::ALL.into_iter().enumerate() {
            let id = JointId::new(d, slot);
            let k_joint = cfg.joint_stiffness[k];
            if k_joint.is_finite() && tau[k] != 0.0 {
                q[id] += tau[k] / k_joint;
            }
            if slot != Slot::Dip {
                let [lo, hi] = spec.limits(id);
                let c = q[id].clamp(lo, hi);
                if c != q[id] && !saturation.contains(&id) {
                    saturation.push(id);
                }
                q[id] = c;
            }
        }
        if let Some([flex, abd]) = next.frozen_mcp[d.index()] {
            q[(d, Slot::McpFlex)] = flex;
            q[(d, Slot::McpAbd)] = abd;
        }
    }
    next.q = project_coupling(&q);
    saturation.sort();
    faults.sort();
    faults.dedup();
    next.flags = SimFlags {
        saturation,
        snap_fit_fault: faults,
        slack: hold.slack,
        overload: MotorId::all()
            .filter(|m| next.motors[m.slot()].is_saturated())
            .collect(),
    };
    next
}

/// Owns a simulation and publishes every new state to its observers.
#[derive(Debug)]
pub struct Simulator {
    spec: Arc<HandSpec>,
    cfg: SimConfig,
    state: Arc<SimState>,
    observers: Vec<Sender<Arc<SimState>>>,
}

impl Simulator {
    pub fn new(spec: Arc<HandSpec>, cfg: SimConfig, q: &JointAngles) -> Result<Self> {
        let state = SimState::at_pose(&spec, &cfg, q)?;
        Ok(Simulator {
            spec,
            cfg,
            state: Arc::new(state),
            observers: Vec::new(),
        })
    }

    pub fn state(&self) -> Arc<SimState> {
        Arc::clone(&self.state)
    }

    pub fn spec(&self) -> &HandSpec {
        &self.spec
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn subscribe(&mut self) -> Receiver<Arc<SimState>> {
        let (tx, rx) = channel();
        tx.send(self.state()).ok();
        self.observers.push(tx);
        rx
    }

    pub fn set_tip_force(&mut self, d: Digit, force: [f64; 3]) {
        Arc::make_mut(&mut self.state).tip_forces[d.index()] = force;
    }

    pub fn reset_snap_fit(&mut self, d: Digit) {
        Arc::make_mut(&mut self.state).reset_snap_fit(d);
    }

    pub fn step(&mut self, commands: Option<&SpoolAngles>, dt: f64) -> Arc<SimState> {
        self.state = Arc::new(step(&self.spec, &self.cfg, &self.state, commands, dt));
        let snapshot = self.state();
        self.observers.retain(|tx| tx.send(Arc::clone(&snapshot)).is_ok());
        snapshot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::forward_kinematics_unchecked;

    fn flexed() -> JointAngles {
        let mut q = JointAngles::zeros();
        for d in Digit::ALL {
            q[(d, Slot::McpFlex)] = 0.6;
            q[(d, Slot::McpAbd)] = 0.1;
            q[(d, Slot::Pip)] = 0.7;
        }
        project_coupling(&q)
    }

    #[test]
    fn neutral_idle_is_a_fixed_point() {
        let spec = HandSpec::default();
        let cfg = SimConfig::default();
        let s0 = SimState::at_pose(&spec, &cfg, &JointAngles::zeros()).unwrap();
        let s1 = step(&spec, &cfg, &s0, None, 0.01);
        let mut expect = s0.clone();
        expect.time = s1.time;
        assert_eq!(s1, expect);
    }

    #[test]
    fn settled_pose_is_held_exactly() {
        let spec = HandSpec::default();
        let cfg = SimConfig::default();
        let s0 = SimState::at_pose(&spec, &cfg, &flexed()).unwrap();
        let mut s = s0.clone();
        for _ in 0..100 {
            s = step(&spec, &cfg, &s, None, 0.01);
            assert_eq!(s.q, s0.q);
        }
        assert_eq!(s.q, motor_to_joint(&spec, &s.spools()).q);
    }

    #[test]
    fn steps_are_deterministic() {
        let spec = HandSpec::default();
        let cfg = SimConfig::default();
        let mut s = SimState::at_pose(&spec, &cfg, &flexed()).unwrap();
        s.tip_forces[2] = [0.3, -0.2, 0.5];
        let goals = joint_to_motor(&spec, &JointAngles::zeros()).unwrap();
        let a = step(&spec, &cfg, &s, Some(&goals), 0.02);
        let b = step(&spec, &cfg, &s, Some(&goals), 0.02);
        assert_eq!(a, b);
    }

    /// Oracle: central-difference Jacobian of the FK, transposed onto a 1 N
    /// tip load.
    #[test]
    fn tip_load_deflects_by_torque_over_stiffness() {
        let spec = HandSpec::default();
        let cfg = SimConfig::default();
        let mut s = SimState::at_pose(&spec, &cfg, &flexed()).unwrap();
        let f = Vector3::new(0.0, 0.0, 1.0);
        s.tip_forces[Digit::Index.index()] = f.into();
        let next = step(&spec, &cfg, &s, None, 1e-3);

        let base = motor_to_joint(&spec, &next.spools()).q;
        let h = 1e-6;
        for slot in [Slot::McpFlex, Slot::McpAbd, Slot::Pip] {
            let (mut p, mut m) = (base, base);
            p[(Digit::Index, slot)] += h;
            m[(Digit::Index, slot)] -= h;
            let dp = forward_kinematics_unchecked(&spec, &p).tip(Digit::Index)
                - forward_kinematics_unchecked(&spec, &m).tip(Digit::Index);
            let tau = (dp / (2.0 * h)).dot(&f);
            let got = next.q[(Digit::Index, slot)] - base[(Digit::Index, slot)];
            assert!((got - tau / 2.0).abs() < 1e-8, "{slot:?}: {got} vs {}", tau / 2.0);
        }
        assert_eq!(next.q.coupling_residual(), 0.0);
    }

    #[test]
    fn snap_fit_pops_and_freezes() {
        let spec = HandSpec::default();
        let cfg = SimConfig::default();
        let mut s = SimState::at_pose(&spec, &cfg, &flexed()).unwrap();
        s.tip_forces[1] = [0.0, 0.0, 40.0];
        let s1 = step(&spec, &cfg, &s, None, 1e-3);
        assert_eq!(s1.flags.snap_fit_fault, vec![Digit::Index]);
        assert_eq!(s1.q[(Digit::Index, Slot::McpFlex)], s.q[(Digit::Index, Slot::McpFlex)]);
        let goals = joint_to_motor(&spec, &JointAngles::zeros()).unwrap();
        let mut s2 = s1.clone();
        s2.tip_forces[1] = [0.0; 3];
        for _ in 0..50 {
            s2 = step(&spec, &cfg, &s2, Some(&goals), 0.01);
        }
        assert_eq!(s2.q[(Digit::Index, Slot::McpFlex)], s.q[(Digit::Index, Slot::McpFlex)]);
        assert_eq!(s2.q[(Digit::Middle, Slot::McpFlex)], 0.0);
        s2.reset_snap_fit(Digit::Index);
        s2 = step(&spec, &cfg, &s2, Some(&goals), 0.01);
        assert_eq!(s2.q[(Digit::Index, Slot::McpFlex)], 0.0);
    }

    #[test]
    fn observers_receive_snapshots() {
        let spec = Arc::new(HandSpec::default());
        let mut sim = Simulator::new(spec, SimConfig::default(), &JointAngles::zeros()).unwrap();
        let rx = sim.subscribe();
        sim.step(None, 0.1);
        sim.step(None, 0.1);
        let times: Vec<f64> = rx.try_iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 3);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }
}
