//! Hand-spec file: the single source of geometry, limits, routing and motor
//! bindings. See `docs/hand-spec.md` for the schema.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::{Isometry3, Matrix3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Digit, JointId, Slot};
use crate::error::{Error, Result};
use crate::tendon::{MotorId, RouteFunction, TendonRoute};

pub const SPEC_FORMAT: &str = "craft-hand-spec";
pub const SPEC_VERSION: u32 = 1;

const DEFAULT_SPEC: &str = include_str!("../../data/hand_spec.toml");

/// Rigid transform as written in the file: translation plus roll/pitch/yaw
/// (radians, applied as `Rz(yaw)·Ry(pitch)·Rx(roll)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: [f64; 3],
    pub rpy: [f64; 3],
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        translation: [0.0; 3],
        rpy: [0.0; 3],
    };

    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.translation;
        let [r, p, yaw] = self.rpy;
        Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::from_euler_angles(r, p, yaw),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JointKind {
    Revolute,
    RollingContact { radius: f64 },
}

impl JointKind {
    /// Offset between the joint's rest contact point and its circle center
    /// on either side; zero for a plain revolute joint.
    pub fn radius(self) -> f64 {
        match self {
            JointKind::Revolute => 0.0,
            JointKind::RollingContact { radius } => radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activity {
    Active,
    PassiveFollower(JointId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSpec {
    pub id: JointId,
    pub kind: JointKind,
    pub limits: [f64; 2],
    pub activity: Activity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Metacarpal,
    Proximal,
    Middle,
    Distal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub digit: Digit,
    pub segment: Segment,
    pub length: f64,
    /// `None` means the link hangs off the palm root.
    pub parent_joint: Option<JointId>,
}

/// Elastic band returning the PIP/DIP pair to neutral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSpring {
    pub digit: Digit,
    pub rest_angle: f64,
    pub stiffness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitSpec {
    pub digit: Digit,
    /// Palm frame → base (MCP/CMC) joint frame.
    pub mount: Isometry3<f64>,
    pub mount_pose: Pose,
    /// Proximal, middle, distal phalanx lengths.
    pub phalanges: [f64; 3],
    /// Indexed by `Slot as usize`.
    pub joints: [JointSpec; 4],
    /// Indexed by `RouteFunction::index()`.
    pub routes: [TendonRoute; 3],
    pub spring: ReturnSpring,
}

impl DigitSpec {
    pub fn joint(&self, slot: Slot) -> &JointSpec {
        &self.joints[slot as usize]
    }

    pub fn route(&self, f: RouteFunction) -> &TendonRoute {
        &self.routes[f.index()]
    }

    pub fn length(&self) -> f64 {
        self.phalanges.iter().sum()
    }
}

/// Static kinematic and transmission description of the hand.
#[derive(Debug, Clone, PartialEq)]
pub struct HandSpec {
    pub version: u32,
    pub mass: f64,
    pub palm_length: f64,
    pub finger_length: f64,
    pub palm_frame: Isometry3<f64>,
    pub palm_pose: Pose,
    pub ratchet_step: f64,
    pub digits: [DigitSpec; 5],
    /// Per digit: tendon excursion per unit active joint angle (rows follow
    /// route functions, columns follow active slots) and its inverse.
    arm_matrices: [Matrix3<f64>; 5],
    arm_inverses: [Matrix3<f64>; 5],
}

impl Default for HandSpec {
    fn default() -> Self {
        HandSpec::from_toml_str(DEFAULT_SPEC).expect("bundled hand spec is valid")
    }
}

impl HandSpec {
    pub fn default_toml() -> &'static str {
        DEFAULT_SPEC
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text)?;
        raw.into_spec()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&RawSpec::from_spec(self)).expect("hand spec serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn digit(&self, d: Digit) -> &DigitSpec {
        &self.digits[d.index()]
    }

    pub fn joint(&self, id: JointId) -> &JointSpec {
        self.digit(id.digit).joint(id.slot)
    }

    pub fn thumb_mount(&self) -> &Isometry3<f64> {
        &self.digit(Digit::Thumb).mount
    }

    pub fn joints(&self) -> impl Iterator<Item = &JointSpec> {
        self.digits.iter().flat_map(|d| d.joints.iter())
    }

    pub fn routes(&self) -> impl Iterator<Item = &TendonRoute> {
        self.digits.iter().flat_map(|d| d.routes.iter())
    }

    pub fn route_for_motor(&self, motor: MotorId) -> Option<&TendonRoute> {
        self.routes().find(|r| r.motor == motor)
    }

    pub fn links(&self) -> Vec<LinkSpec> {
        let mut out = Vec::with_capacity(20);
        for d in &self.digits {
            let digit = d.digit;
            out.push(LinkSpec {
                digit,
                segment: Segment::Metacarpal,
                length: d.mount.translation.vector.norm(),
                parent_joint: None,
            });
            let parents = [Slot::McpFlex, Slot::Pip, Slot::Dip];
            let segments = [Segment::Proximal, Segment::Middle, Segment::Distal];
            for k in 0..3 {
                out.push(LinkSpec {
                    digit,
                    segment: segments[k],
                    length: d.phalanges[k],
                    parent_joint: Some(JointId::new(digit, parents[k])),
                });
            }
        }
        out
    }

    pub fn limits(&self, id: JointId) -> [f64; 2] {
        self.joint(id).limits
    }

    pub(crate) fn arm_matrix(&self, d: Digit) -> &Matrix3<f64> {
        &self.arm_matrices[d.index()]
    }

    pub(crate) fn arm_inverse(&self, d: Digit) -> &Matrix3<f64> {
        &self.arm_inverses[d.index()]
    }

    /// Returns a copy with every phalanx of every digit scaled by `factor`.
    pub fn with_scaled_phalanges(&self, factor: f64) -> Result<HandSpec> {
        self.with_scaled_digit_phalanges([factor; 5])
    }

    /// Returns a copy with each digit's phalanges scaled by its own factor.
    pub fn with_scaled_digit_phalanges(&self, factors: [f64; 5]) -> Result<HandSpec> {
        let mut raw = RawSpec::from_spec(self);
        // the configured finger length only constrains unscaled specs
        raw.finger_length = None;
        for (d, f) in raw.digit.iter_mut().zip(factors) {
            d.proximal *= f;
            d.middle *= f;
            d.distal *= f;
        }
        raw.into_spec()
    }

    /// Replaces the routes of every digit via `f`, revalidating the result.
    pub fn map_routes(&self, mut f: impl FnMut(&mut TendonRoute)) -> Result<HandSpec> {
        let mut spec = self.clone();
        for d in spec.digits.iter_mut() {
            for r in d.routes.iter_mut() {
                f(r);
            }
        }
        spec.revalidate()
    }

    /// Re-runs validation (and recomputes derived matrices) after direct edits.
    pub fn revalidate(&self) -> Result<HandSpec> {
        RawSpec::from_spec(self).into_spec()
    }
}

// ---------------------------------------------------------------------------
// file model


#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum RawKind {
    Revolute,
    Rolling,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawJoint {
    slot: String,
    kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    limits: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    follows: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRoute {
    function: RouteFunction,
    motor: u8,
    moment_arms: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    antagonist_arms: Option<BTreeMap<String, f64>>,
    spool_radius: f64,
    friction_mu: f64,
    wrap_angle: f64,
    #[serde(default)]
    slack_offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDigit {
    name: Digit,
    mount: Pose,
    proximal: f64,
    middle: f64,
    distal: f64,
    spring_stiffness: f64,
    joints: Vec<RawJoint>,
    routes: Vec<RawRoute>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpec {
    format: String,
    version: u32,
    mass: f64,
    palm_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    finger_length: Option<f64>,
    ratchet_step_deg: f64,
    palm_frame: Pose,
    digit: Vec<RawDigit>,
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::Spec(msg.into())
}

fn parse_slot(digit: Digit, s: &str) -> Result<Slot> {
    let id: JointId = format!("{digit}.{s}").parse()?;
    Ok(id.slot)
}

fn slot_name(digit: Digit, slot: Slot) -> &'static str {
    if digit == Digit::Thumb {
        slot.thumb_alias()
    } else {
        slot.name()
    }
}

fn parse_arms(digit: Digit, raw: &BTreeMap<String, f64>) -> Result<BTreeMap<JointId, f64>> {
    raw.iter()
        .map(|(k, &v)| {
            if !v.is_finite() {
                return Err(spec_err(format!("{digit}: moment arm `{k}` is not finite")));
            }
            Ok((JointId::new(digit, parse_slot(digit, k)?), v))
        })
        .collect()
}

fn arms_to_raw(arms: &BTreeMap<JointId, f64>) -> BTreeMap<String, f64> {
    arms.iter()
        .map(|(id, &v)| (slot_name(id.digit, id.slot).to_string(), v))
        .collect()
}

impl RawSpec {
    fn from_spec(spec: &HandSpec) -> Self {
        let digit = spec
            .digits
            .iter()
            .map(|d| RawDigit {
                name: d.digit,
                mount: d.mount_pose,
                proximal: d.phalanges[0],
                middle: d.phalanges[1],
                distal: d.phalanges[2],
                spring_stiffness: d.spring.stiffness,
                joints: d
                    .joints
                    .iter()
                    .map(|j| RawJoint {
                        slot: slot_name(d.digit, j.id.slot).to_string(),
                        kind: match j.kind {
                            JointKind::Revolute => RawKind::Revolute,
                            JointKind::RollingContact { .. } => RawKind::Rolling,
                        },
                        radius: match j.kind {
                            JointKind::Revolute => None,
                            JointKind::RollingContact { radius } => Some(radius),
                        },
                        limits: j.limits,
                        follows: match j.activity {
                            Activity::Active => None,
                            Activity::PassiveFollower(l) => {
                                Some(slot_name(l.digit, l.slot).to_string())
                            }
                        },
                    })
                    .collect(),
                routes: d
                    .routes
                    .iter()
                    .map(|r| RawRoute {
                        function: r.function,
                        motor: r.motor.0,
                        moment_arms: arms_to_raw(&r.moment_arms),
                        antagonist_arms: r.antagonist_arms.as_ref().map(arms_to_raw),
                        spool_radius: r.spool_radius,
                        friction_mu: r.friction_mu,
                        wrap_angle: r.wrap_angle_total,
                        slack_offset: r.slack_offset,
                    })
                    .collect(),
            })
            .collect();
        RawSpec {
            format: SPEC_FORMAT.to_string(),
            version: spec.version,
            mass: spec.mass,
            palm_length: spec.palm_length,
            finger_length: Some(spec.finger_length),
            ratchet_step_deg: spec.ratchet_step.to_degrees(),
            palm_frame: spec.palm_pose,
            digit,
        }
    }

    fn into_spec(self) -> Result<HandSpec> {
        if self.format != SPEC_FORMAT {
            return Err(spec_err(format!("unexpected format tag `{}`", self.format)));
        }
        if self.version != SPEC_VERSION {
            return Err(spec_err(format!("unsupported version {}", self.version)));
        }
        if !(self.mass > 0.0) {
            return Err(spec_err("mass must be positive"));
        }
        if !(self.palm_length > 0.0) {
            return Err(spec_err("palm_length must be positive"));
        }
        if !(self.ratchet_step_deg > 0.0) {
            return Err(spec_err("ratchet_step_deg must be positive"));
        }
        if self.digit.len() != 5 {
            return Err(spec_err(format!("expected 5 digits, found {}", self.digit.len())));
        }
        let mut seen_digits = BTreeSet::new();
        let mut seen_motors = BTreeSet::new();
        let mut digits = Vec::with_capacity(5);
        for raw in &self.digit {
            if !seen_digits.insert(raw.name) {
                return Err(spec_err(format!("digit `{}` listed twice", raw.name)));
            }
            digits.push(build_digit(raw, &mut seen_motors)?);
        }
        digits.sort_by_key(|d| d.digit);
        let digits: [DigitSpec; 5] = digits.try_into().expect("five digits");

        let finger_length = match self.finger_length {
            Some(len) => {
                for d in &digits {
                    if (d.length() - len).abs() > 1e-9 {
                        return Err(spec_err(format!(
                            "{}: phalanges sum to {} m, configured finger length is {} m",
                            d.digit,
                            d.length(),
                            len
                        )));
                    }
                }
                len
            }
            None => digits[Digit::Index.index()].length(),
        };

        // the thumb must not share a base with any finger
        let thumb_base = digits[0].mount.translation.vector;
        for d in &digits[1..] {
            if (d.mount.translation.vector - thumb_base).norm() < 1e-6 {
                return Err(spec_err(format!("thumb mount coincides with {} base", d.digit)));
            }
        }

        let mut arm_matrices = [Matrix3::zeros(); 5];
        let mut arm_inverses = [Matrix3::zeros(); 5];
        for d in &digits {
            let a = crate::tendon::arm_matrix(d);
            let scale = a.abs().max();
            let inv = if scale > 0.0 && a.determinant().abs() > 1e-9 * scale.powi(3) {
                a.try_inverse()
            } else {
                None
            };
            let inv = inv.ok_or_else(|| {
                Error::Routing(format!("{}: moment-arm matrix is singular", d.digit))
            })?;
            arm_matrices[d.digit.index()] = a;
            arm_inverses[d.digit.index()] = inv;
        }

        Ok(HandSpec {
            version: self.version,
            mass: self.mass,
            palm_length: self.palm_length,
            finger_length,
            palm_frame: self.palm_frame.to_isometry(),
            palm_pose: self.palm_frame,
            ratchet_step: self.ratchet_step_deg.to_radians(),
            digits,
            arm_matrices,
            arm_inverses,
        })
    }
}

fn build_digit(raw: &RawDigit, seen_motors: &mut BTreeSet<u8>) -> Result<DigitSpec> {
    let digit = raw.name;
    let phalanges = [raw.proximal, raw.middle, raw.distal];
    if phalanges.iter().any(|l| !(*l > 0.0)) {
        return Err(spec_err(format!("{digit}: phalanx lengths must be positive")));
    }
    if !(raw.spring_stiffness > 0.0) {
        return Err(spec_err(format!("{digit}: spring stiffness must be positive")));
    }

    let mut joints: [Option<JointSpec>; 4] = [None; 4];
    for j in &raw.joints {
        let slot = parse_slot(digit, &j.slot)?;
        let id = JointId::new(digit, slot);
        if joints[slot as usize].is_some() {
            return Err(spec_err(format!("{id} listed twice")));
        }
        let [lo, hi] = j.limits;
        if !(lo < hi) {
            return Err(spec_err(format!("{id}: limits must satisfy min < max")));
        }
        let kind = match (j.kind, j.radius) {
            (RawKind::Revolute, None) => JointKind::Revolute,
            (RawKind::Revolute, Some(_)) => {
                return Err(spec_err(format!("{id}: radius given for a revolute joint")))
            }
            (RawKind::Rolling, Some(r)) if r > 0.0 => JointKind::RollingContact { radius: r },
            (RawKind::Rolling, _) => {
                return Err(spec_err(format!("{id}: rolling joint needs a positive radius")))
            }
        };
        if matches!(slot, Slot::McpFlex | Slot::McpAbd) && kind != JointKind::Revolute {
            return Err(spec_err(format!("{id}: base joint must be revolute")));
        }
        let activity = match &j.follows {
            None => Activity::Active,
            Some(l) => Activity::PassiveFollower(JointId::new(digit, parse_slot(digit, l)?)),
        };
        let expected = match slot {
            Slot::Dip => Activity::PassiveFollower(JointId::new(digit, Slot::Pip)),
            _ => Activity::Active,
        };
        if activity != expected {
            return Err(spec_err(format!(
                "{id}: only the distal joint follows, and it follows the middle joint"
            )));
        }
        joints[slot as usize] = Some(JointSpec {
            id,
            kind,
            limits: [lo, hi],
            activity,
        });
    }
    let joints: [JointSpec; 4] = match joints {
        [Some(a), Some(b), Some(c), Some(d)] => [a, b, c, d],
        _ => return Err(spec_err(format!("{digit}: all four joints must be listed"))),
    };
    if joints[Slot::Dip as usize].limits != joints[Slot::Pip as usize].limits {
        return Err(spec_err(format!("{digit}: follower limits must equal leader limits")));
    }

    let r_pip = joints[Slot::Pip as usize].kind.radius();
    let r_dip = joints[Slot::Dip as usize].kind.radius();
    if phalanges[0] <= r_pip || phalanges[1] <= r_pip + r_dip || phalanges[2] <= r_dip {
        return Err(spec_err(format!("{digit}: phalanges too short for the rolling radii")));
    }

    let mut routes: [Option<TendonRoute>; 3] = [None, None, None];
    for r in &raw.routes {
        let f = r.function;
        if routes[f.index()].is_some() {
            return Err(spec_err(format!("{digit}: two routes for {f:?}")));
        }
        if !(1..=15).contains(&r.motor) || !seen_motors.insert(r.motor) {
            return Err(spec_err(format!("{digit}: motor id {} invalid or reused", r.motor)));
        }
        if !(r.spool_radius > 0.0) {
            return Err(spec_err(format!("{digit}: spool radius must be positive")));
        }
        if !(r.friction_mu >= 0.0) || !(r.wrap_angle >= 0.0) {
            return Err(spec_err(format!("{digit}: friction and wrap angle must be non-negative")));
        }
        let moment_arms = parse_arms(digit, &r.moment_arms)?;
        let antagonist_arms = r
            .antagonist_arms
            .as_ref()
            .map(|a| parse_arms(digit, a))
            .transpose()?;
        if f == RouteFunction::PipDipFlex {
            let pip = moment_arms.get(&JointId::new(digit, Slot::Pip)).copied().unwrap_or(0.0);
            let dip = moment_arms.get(&JointId::new(digit, Slot::Dip)).copied().unwrap_or(0.0);
            if pip == 0.0 || dip == 0.0 {
                return Err(spec_err(format!(
                    "{digit}: coupled flexion route needs arms at both joints"
                )));
            }
        }
        routes[f.index()] = Some(TendonRoute {
            id: format!("{digit}.{}", f.name()),
            digit,
            function: f,
            moment_arms,
            antagonist_arms,
            wrap_angle_total: r.wrap_angle,
            friction_mu: r.friction_mu,
            motor: MotorId(r.motor),
            spool_radius: r.spool_radius,
            slack_offset: r.slack_offset,
        });
    }
    let routes: [TendonRoute; 3] = match routes {
        [Some(a), Some(b), Some(c)] => [a, b, c],
        _ => return Err(spec_err(format!("{digit}: needs exactly one route per function"))),
    };

    Ok(DigitSpec {
        digit,
        mount: raw.mount.to_isometry(),
        mount_pose: raw.mount,
        phalanges,
        joints,
        routes,
        spring: ReturnSpring {
            digit,
            rest_angle: 0.0,
            stiffness: raw.spring_stiffness,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_matches_published_dimensions() {
        let spec = HandSpec::default();
        assert_eq!(spec.mass, 0.8);
        assert_eq!(spec.palm_length, 0.095);
        assert_eq!(spec.finger_length, 0.103);
        for d in &spec.digits {
            assert!((d.length() - 0.103).abs() < 1e-12);
            assert_eq!(d.phalanges, [0.045, 0.033, 0.025]);
        }
        let active = spec
            .joints()
            .filter(|j| j.activity == Activity::Active)
            .count();
        assert_eq!(active, 15);
        assert_eq!(spec.links().len(), 20);
    }

    #[test]
    fn toml_roundtrip_is_stable() {
        let spec = HandSpec::default();
        let text = spec.to_toml_string();
        let back = HandSpec::from_toml_str(&text).unwrap();
        assert_eq!(back.to_toml_string(), text);
        assert_eq!(back.content_hash(), spec.content_hash());
    }

    #[test]
    fn rejects_bad_limits() {
        let text = HandSpec::default_toml().replace("limits = [0.0, 1.57]", "limits = [1.57, 0.0]");
        assert!(matches!(HandSpec::from_toml_str(&text), Err(Error::Spec(_))));
    }

    #[test]
    fn rejects_duplicate_motor() {
        let text = HandSpec::default_toml().replacen("motor = 2\n", "motor = 1\n", 1);
        let err = HandSpec::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("motor id 1"), "{err}");
    }

    #[test]
    fn rejects_wrong_version() {
        let text = HandSpec::default_toml().replace("version = 1", "version = 7");
        assert!(HandSpec::from_toml_str(&text).is_err());
    }

    #[test]
    fn singular_arm_matrix_fails_at_load() {
        let spec = HandSpec::default();
        let err = spec
            .map_routes(|r| {
                if r.digit == Digit::Ring && r.function == RouteFunction::McpAbdAdd {
                    r.moment_arms.clear();
                    r.moment_arms.insert(JointId::new(Digit::Ring, Slot::McpFlex), 0.008);
                }
            })
            .unwrap_err();
        assert!(matches!(err, Error::Routing(_)), "{err}");
    }

    #[test]
    fn scaled_spec_keeps_structure() {
        let spec = HandSpec::default().with_scaled_phalanges(1.1).unwrap();
        assert!((spec.digit(Digit::Index).length() - 0.1133).abs() < 1e-12);
    }
}
