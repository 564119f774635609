use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::calibrate::OperatorRange;
use crate::error::{Error, Result};
use crate::hand::JointId;
use crate::tendon::MotorId;

pub const PROFILE_FORMAT: &str = "craft-calibration";
pub const PROFILE_VERSION: u32 = 1;
pub const DEFAULT_EMA_ALPHA: f64 = 0.3;

/// Torso-frame wrist position → robot-base position, plus the fixed mount
/// rotation applied to orientations and the reachable box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceMap {
    /// Row-major 3×3 linear part.
    pub linear: [[f64; 3]; 3],
    pub offset: [f64; 3],
    pub mount_rpy: [f64; 3],
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
}

impl Default for WorkspaceMap {
    fn default() -> Self {
        WorkspaceMap {
            linear: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            offset: [0.0; 3],
            mount_rpy: [0.0; 3],
            box_min: [-1.0; 3],
            box_max: [1.0; 3],
        }
    }
}

impl WorkspaceMap {
    pub fn linear_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.linear[r][c])
    }

    pub fn offset_vector(&self) -> Vector3<f64> {
        Vector3::from(self.offset)
    }

    pub fn mount_rotation(&self) -> Rotation3<f64> {
        let [r, p, y] = self.mount_rpy;
        Rotation3::from_euler_angles(r, p, y)
    }

    fn validate(&self) -> Result<()> {
        let all = self
            .linear
            .iter()
            .flatten()
            .chain(&self.offset)
            .chain(&self.mount_rpy)
            .chain(&self.box_min)
            .chain(&self.box_max);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Calibration("workspace map is not finite".into()));
        }
        if (0..3).any(|k| self.box_min[k] > self.box_max[k]) {
            return Err(Error::Calibration("workspace box min exceeds max".into()));
        }
        Ok(())
    }
}

/// Everything needed to turn operator angles into robot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile {
    pub version: u32,
    pub robot_limits: [[f64; 2]; JointId::ACTIVE_COUNT],
    pub operator_range: OperatorRange,
    pub workspace: WorkspaceMap,
    pub ema_alpha: f64,
    /// Spool zero per motor, radians, motor-id order.
    pub spool_offsets: [f64; MotorId::COUNT],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    format: String,
    version: u32,
    ema_alpha: f64,
    workspace: WorkspaceMap,
    joint: Vec<RawJoint>,
    motor: Vec<RawMotor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    name: String,
    robot: [f64; 2],
    operator: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotor {
    id: u8,
    spool_offset: f64,
}

impl CalibrationProfile {
    pub fn new(robot_limits: [[f64; 2]; JointId::ACTIVE_COUNT], operator_range: OperatorRange) -> Result<Self> {
        let p = CalibrationProfile {
            version: PROFILE_VERSION,
            robot_limits,
            operator_range,
            workspace: WorkspaceMap::default(),
            ema_alpha: DEFAULT_EMA_ALPHA,
            spool_offsets: [0.0; MotorId::COUNT],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn robot(&self, id: JointId) -> [f64; 2] {
        self.robot_limits[id.active_index().expect("active joint")]
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PROFILE_VERSION {
            return Err(Error::Calibration(format!("unsupported profile version {}", self.version)));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return Err(Error::Calibration(format!("ema_alpha {} outside (0, 1]", self.ema_alpha)));
        }
        for id in JointId::active() {
            let [lo, hi] = self.robot(id);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Calibration(format!("{id}: robot limits [{lo}, {hi}]")));
            }
            let [lo, hi] = self.operator_range.get(id);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Calibration(format!("{id}: operator range [{lo}, {hi}]")));
            }
        }
        if self.spool_offsets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Calibration("spool offset is not finite".into()));
        }
        self.workspace.validate()
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawProfile {
            format: PROFILE_FORMAT.into(),
            version: self.version,
            ema_alpha: self.ema_alpha,
            workspace: self.workspace,
            joint: JointId::active()
                .map(|id| RawJoint {
                    name: id.to_string(),
                    robot: self.robot(id),
                    operator: self.operator_range.get(id),
                })
                .collect(),
            motor: MotorId::all()
                .map(|m| RawMotor {
                    id: m.0,
                    spool_offset: self.spool_offsets[m.slot()],
                })
                .collect(),
        };
        toml::to_string(&raw).expect("profile serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawProfile = toml::from_str(text)?;
        if raw.format != PROFILE_FORMAT {
            return Err(Error::Calibration(format!("unexpected format {:?}", raw.format)));
        }
        let mut robot = [[f64::NAN; 2]; JointId::ACTIVE_COUNT];
        let mut operator = [[f64::NAN; 2]; JointId::ACTIVE_COUNT];
        let mut seen = [false; JointId::ACTIVE_COUNT];
        for j in &raw.joint {
            let id: JointId = j.name.parse()?;
            let i = id
                .active_index()
                .ok_or_else(|| Error::Calibration(format!("{id} is not an active joint")))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Calibration(format!("{id} listed twice")));
            }
            robot[i] = j.robot;
            operator[i] = j.operator;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Calibration(format!("missing joint {}", JointId::from_active_index(i))));
        }
        let mut offsets = [f64::NAN; MotorId::COUNT];
        for m in &raw.motor {
            if !(1..=MotorId::COUNT as u8).contains(&m.id) {
                return Err(Error::Calibration(format!("motor id {} out of range", m.id)));
            }
            offsets[MotorId(m.id).slot()] = m.spool_offset;
        }
        let p = CalibrationProfile {
            version: raw.version,
            robot_limits: robot,
            operator_range: OperatorRange(operator),
            workspace: raw.workspace,
            ema_alpha: raw.ema_alpha,
            spool_offsets: offsets,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }
}
