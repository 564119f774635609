use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::report::{Sample, TestKind, TestReport};
use crate::bus::MotorParams;
use crate::error::Result;
use crate::hand::{joint_jacobian, Digit, HandSpec, JointAngles, JointId, Slot};
use crate::tendon::{hold_torques_for, required_joint_torques};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    /// Spools pull the joints through the routed tendons.
    Tendon,
    /// One motor sits on each driven coordinate.
    Direct,
}

impl Drive {
    pub fn name(self) -> &'static str {
        match self {
            Drive::Tendon => "tendon",
            Drive::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PulloutConfig {
    pub digit: Digit,
    /// N·m/rad per slot; `"inf"` for a rigid joint.
    #[serde(with = "inf_array")]
    pub joint_stiffness: [f64; 4],
    /// Largest torque a motor holds before slipping, N·m; `"inf"` for none.
    #[serde(with = "inf_scalar")]
    pub torque_limit: f64,
    pub force_step: f64,
    pub force_cap: f64,
    /// Largest per-joint deflection still counted as holding, rad.
    pub deflection_limit: f64,
    /// Leading moment arm over spool radius for the tested digit's routes.
    /// `None` keeps the hand spec's spools.
    pub spool_advantage: Option<f64>,
    pub assist_friction: bool,
    pub snap_fit_torque: f64,
}

impl Default for PulloutConfig {
    fn default() -> Self {
        let motor = MotorParams::default();
        PulloutConfig {
            digit: Digit::Index,
            joint_stiffness: [2.0; 4],
            torque_limit: motor.torque_constant * motor.current_limit_ma / 1000.0,
            force_step: 0.1,
            force_cap: 50.0,
            deflection_limit: 15f64.to_radians(),
            spool_advantage: None,
            assist_friction: true,
            snap_fit_torque: 0.8,
        }
    }
}

/// Outcome of one sweep entry of [`pullout_comparison`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulloutPoint {
    pub spool_advantage: f64,
    pub tendon_force: f64,
    pub direct_force: f64,
}

/// Ramps a tip force opposing flexion on a fully flexed digit until a motor
/// slips or a joint deflects past the limit. Both drives are run against the
/// same motors and compliance and logged as separate series.
pub fn run_pullout_test(spec: &HandSpec, cfg: &PulloutConfig) -> Result<TestReport> {
    let spec = match cfg.spool_advantage {
        Some(adv) => with_spool_advantage(spec, cfg.digit, adv)?,
        None => spec.clone(),
    };
    let mut samples = Vec::new();
    for drive in [Drive::Tendon, Drive::Direct] {
        ramp(&spec, cfg, drive, &mut samples);
    }
    Ok(TestReport::new(TestKind::Pullout, serde_json::to_value(cfg)?, samples))
}

/// Tendon and direct-drive pull-out force for each spool advantage.
pub fn pullout_comparison(spec: &HandSpec, cfg: &PulloutConfig, advantages: &[f64]) -> Result<Vec<PulloutPoint>> {
    advantages
        .iter()
        .map(|&adv| {
            let cfg = PulloutConfig {
                spool_advantage: Some(adv),
                ..cfg.clone()
            };
            let r = run_pullout_test(spec, &cfg)?;
            Ok(PulloutPoint {
                spool_advantage: adv,
                tendon_force: r.get("tendon.pullout_force_n"),
                direct_force: r.get("direct.pullout_force_n"),
            })
        })
        .collect()
}

fn with_spool_advantage(spec: &HandSpec, digit: Digit, adv: f64) -> Result<HandSpec> {
    assert!(adv > 0.0, "spool advantage must be positive");
    spec.map_routes(|r| {
        if r.digit == digit {
            let lead = r.moment_arms.values().fold(0.0, |m: f64, a| m.max(a.abs()));
            r.spool_radius = lead / adv;
        }
    })
}

fn flexed_pose(spec: &HandSpec, d: Digit) -> JointAngles {
    let mut q = JointAngles::zeros();
    for slot in [Slot::McpFlex, Slot::Pip, Slot::Dip] {
        q[(d, slot)] = spec.limits(JointId::new(d, slot))[1];
    }
    q
}

fn ramp(spec: &HandSpec, cfg: &PulloutConfig, drive: Drive, out: &mut Vec<Sample>) {
    let d = cfg.digit;
    let q = flexed_pose(spec, d);
    let jac = joint_jacobian(spec, d, &q);
    let dir = -jac.column(0).normalize();
    let commanded: Vec<f64> = Slot::ALL.iter().map(|s| q[(d, *s)]).collect();
    let kt = MotorParams::default().torque_constant;

    let steps = (cfg.force_cap / cfg.force_step).round() as usize;
    for k in 0..=steps {
        let f = (k as f64 * cfg.force_step).min(cfg.force_cap);
        let force = dir * f;
        let tau = jac.transpose() * force;

        let mut forces = [Vector3::zeros(); 5];
        forces[d.index()] = force;
        let required = required_joint_torques(spec, &q, &forces);
        let motor_torques: Vec<f64> = match drive {
            Drive::Tendon => {
                let hold = hold_torques_for(spec, &required, cfg.assist_friction);
                let mut slack = false;
                let torques = spec
                    .digit(d)
                    .routes
                    .iter()
                    .map(|r| {
                        slack |= hold.slack.contains(&r.motor);
                        hold.get(r.motor)
                    })
                    .collect::<Vec<_>>();
                if slack {
                    // a slack tendon leaves its joints unheld
                    torques.into_iter().map(|_| f64::INFINITY).collect()
                } else {
                    torques
                }
            }
            Drive::Direct => required[d.index()].iter().copied().collect(),
        };
        let slipped = motor_torques.iter().any(|t| t.abs() > cfg.torque_limit);

        let achieved: Vec<f64> = (0..4)
            .map(|j| {
                let k_joint = cfg.joint_stiffness[j];
                let delta = if k_joint.is_infinite() { 0.0 } else { tau[j] / k_joint };
                commanded[j] + delta
            })
            .collect();
        let deflection = commanded
            .iter()
            .zip(&achieved)
            .map(|(c, a)| (c - a).abs())
            .fold(0.0, f64::max);
        let failed = slipped || deflection > cfg.deflection_limit;

        out.push(Sample {
            t: k as f64,
            series: drive.name().into(),
            load: f,
            commanded: commanded.clone(),
            achieved,
            currents_ma: motor_torques.iter().map(|t| t / kt * 1000.0).collect(),
            failed,
        });
        if failed {
            break;
        }
    }
}

/// Whether the snap-fit of `cfg.digit` would pop at tip force `f`.
pub fn snap_fit_pops_at(spec: &HandSpec, cfg: &PulloutConfig, f: f64) -> bool {
    let q = flexed_pose(spec, cfg.digit);
    let jac = joint_jacobian(spec, cfg.digit, &q);
    let tau = jac.transpose() * (-jac.column(0).normalize() * f);
    tau[0].hypot(tau[1]) > cfg.snap_fit_torque
}

pub(crate) mod inf_scalar {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Repr {
        Num(f64),
        Text(String),
    }

    pub(crate) fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            Repr::Text("-inf".into())
        } else {
            Repr::Num(v)
        }
    }

    pub(crate) fn from_repr<E: de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Text(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(s) => Err(E::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

pub(crate) mod inf_array {
    use super::inf_scalar::{from_repr, to_repr, Repr};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; 4], s: S) -> Result<S::Ok, S::Error> {
        v.map(to_repr).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 4], D::Error> {
        let reprs = <[Repr; 4]>::deserialize(d)?;
        let mut out = [0.0; 4];
        for (o, r) in out.iter_mut().zip(reprs) {
            *o = from_repr::<D::Error>(r)?;
        }
        Ok(out)
    }
}

pub(crate) mod inf_vec {
    use super::inf_scalar::{from_repr, to_repr, Repr};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr::<D::Error>).collect()
    }
}
