use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::report::{Sample, TestKind, TestReport};
use super::{step, SimConfig, SimState};
use crate::error::Result;
use crate::hand::{joint_jacobian, Digit, HandSpec, JointAngles, JointId, Slot};
use crate::tendon::{joint_to_motor, motor_to_joint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepeatConfig {
    pub cycles: usize,
    /// Duration of one grasp-release cycle, s.
    pub period: f64,
    pub rate_hz: f64,
    /// Joint-space deadband between the spool and the joint encoder, rad.
    pub backlash: f64,
    /// Standard deviation of the joint encoder noise, rad.
    pub encoder_noise: f64,
    pub seed: u64,
    /// Fraction of the closing stroke at which the fingers meet the object.
    pub contact_fraction: f64,
    /// Tip force per unit of closing stroke past contact, N.
    pub object_stiffness: f64,
    /// Closed pose as a fraction of each driven joint's upper limit.
    pub closure: f64,
    pub sim: SimConfig,
}

impl Default for RepeatConfig {
    fn default() -> Self {
        RepeatConfig {
            cycles: 1000,
            period: 3.6,
            rate_hz: 30.0,
            backlash: 0.002,
            encoder_noise: 0.001,
            seed: 7,
            contact_fraction: 0.6,
            object_stiffness: 2.0,
            closure: 0.7,
            sim: SimConfig::default(),
        }
    }
}

struct Backlash {
    width: f64,
    out: [f64; JointId::ACTIVE_COUNT],
}

impl Backlash {
    fn apply(&mut self, input: &[f64; JointId::ACTIVE_COUNT]) -> [f64; JointId::ACTIVE_COUNT] {
        let half = self.width / 2.0;
        for (y, x) in self.out.iter_mut().zip(input) {
            if x - *y > half {
                *y = x - half;
            } else if *y - x > half {
                *y = x + half;
            }
        }
        self.out
    }
}

fn closed_pose(spec: &HandSpec, closure: f64) -> JointAngles {
    let mut q = JointAngles::zeros();
    for d in Digit::ALL {
        for slot in [Slot::McpFlex, Slot::Pip, Slot::Dip] {
            q[(d, slot)] = closure * spec.limits(JointId::new(d, slot))[1];
        }
    }
    q
}

/// Runs `cfg.cycles` grasp-release cycles on a plush-like object and logs,
/// per control tick, the commanded active angles against the angles read
/// back from the joint encoders.
pub fn run_repeatability_test(spec: &HandSpec, cfg: &RepeatConfig) -> Result<TestReport> {
    assert!(cfg.cycles >= 1, "at least one cycle is required");
    let dt = 1.0 / cfg.rate_hz;
    let ticks_per_cycle = (cfg.period * cfg.rate_hz).round() as usize;
    let open = JointAngles::zeros();
    let closed = closed_pose(spec, cfg.closure);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.encoder_noise).map_err(|e| crate::Error::Parse(e.to_string()))?;
    let mut state = SimState::at_pose(spec, &cfg.sim, &open)?;
    let mut backlash = Backlash {
        width: cfg.backlash,
        out: state.q.active(),
    };

    let mut samples = Vec::with_capacity(cfg.cycles * ticks_per_cycle);
    for tick in 1..=cfg.cycles * ticks_per_cycle {
        let phase = (tick % ticks_per_cycle) as f64 / ticks_per_cycle as f64;
        let s = 0.5 * (1.0 - (2.0 * PI * phase).cos());
        let mut target = JointAngles::zeros();
        for id in JointId::all() {
            target[id] = open[id] + s * (closed[id] - open[id]);
        }
        let goals = joint_to_motor(spec, &target)?;

        let squeeze = cfg.object_stiffness * (s - cfg.contact_fraction).max(0.0);
        for d in Digit::ALL {
            let opening = -joint_jacobian(spec, d, &state.q).column(0).normalize();
            state.tip_forces[d.index()] = (opening * squeeze).into();
        }
        state = step(spec, &cfg.sim, &state, Some(&goals), dt);

        let read = motor_to_joint(spec, &state.spools()).q.active();
        let mut achieved = backlash.apply(&read);
        if cfg.encoder_noise > 0.0 {
            for a in achieved.iter_mut() {
                *a += noise.sample(&mut rng);
            }
        }
        samples.push(Sample {
            t: state.time,
            series: "hand".into(),
            load: squeeze,
            commanded: target.active().to_vec(),
            achieved: achieved.to_vec(),
            currents_ma: state.currents().to_vec(),
            failed: false,
        });
    }
    Ok(TestReport::new(TestKind::Repeatability, serde_json::to_value(cfg)?, samples))
}
