//! Static description of the hand and its kinematics.
//!
//! The hand has five digits with four joints each. Every digit has a 2-DoF
//! base joint (MCP, or CMC on the thumb) and two coupled rolling-contact
//! joints (PIP/DIP, or MP/IP on the thumb) where the distal joint follows the
//! proximal one with equal rotation. That gives 20 joints, 15 of them driven.

mod ik;
mod kinematics;
mod rolling;
mod spec;

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use ik::{fingertip_ik, IkOptions};
pub use kinematics::{
    check_pose, digit_jacobian, digit_jacobian_numeric, forward_kinematics, forward_kinematics_unchecked, joint_jacobian,
    DigitFrames, HandKinematics,
};
pub use rolling::{rolling_joint_transform, rolling_joint_isometry, PlanarPose};
pub use spec::{
    Activity, DigitSpec, HandSpec, JointKind, JointSpec, LinkSpec, Pose, ReturnSpring, Segment, SPEC_FORMAT,
    SPEC_VERSION,
};

/// Fixed digit order; also the order of actuator groups on the bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Digit {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Digit {
    pub const ALL: [Digit; 5] = [
        Digit::Thumb,
        Digit::Index,
        Digit::Middle,
        Digit::Ring,
        Digit::Pinky,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Digit::Thumb => "thumb",
            Digit::Index => "index",
            Digit::Middle => "middle",
            Digit::Ring => "ring",
            Digit::Pinky => "pinky",
        }
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Digit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Digit::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown digit `{s}`")))
    }
}

/// Joint slot within a digit. The thumb uses the anatomical aliases
/// CMC flex/abd, MP and IP for the same four slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    McpFlex,
    McpAbd,
    Pip,
    Dip,
}

impl Slot {
    pub const ALL: [Slot; 4] = [Slot::McpFlex, Slot::McpAbd, Slot::Pip, Slot::Dip];
    /// The three driven slots, in actuator order.
    pub const ACTIVE: [Slot; 3] = [Slot::McpFlex, Slot::McpAbd, Slot::Pip];

    pub fn name(self) -> &'static str {
        match self {
            Slot::McpFlex => "mcp_flex",
            Slot::McpAbd => "mcp_abd",
            Slot::Pip => "pip",
            Slot::Dip => "dip",
        }
    }

    pub fn thumb_alias(self) -> &'static str {
        match self {
            Slot::McpFlex => "cmc_flex",
            Slot::McpAbd => "cmc_abd",
            Slot::Pip => "mp",
            Slot::Dip => "ip",
        }
    }

    fn parse(s: &str) -> Option<Slot> {
        Slot::ALL
            .into_iter()
            .find(|slot| slot.name() == s || slot.thumb_alias() == s)
    }
}

/// One of the 20 joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointId {
    pub digit: Digit,
    pub slot: Slot,
}

impl JointId {
    pub const COUNT: usize = 20;
    pub const ACTIVE_COUNT: usize = 15;

    pub const fn new(digit: Digit, slot: Slot) -> Self {
        JointId { digit, slot }
    }

    /// Dense index in `0..20`: digit-major, slot-minor.
    pub fn index(self) -> usize {
        self.digit as usize * 4 + self.slot as usize
    }

    pub fn from_index(i: usize) -> JointId {
        JointId::new(Digit::ALL[i / 4], Slot::ALL[i % 4])
    }

    /// All 20 joints in dense order.
    pub fn all() -> impl Iterator<Item = JointId> {
        (0..Self::COUNT).map(JointId::from_index)
    }

    /// The 15 driven joints in actuator order: for each digit (thumb first),
    /// MCP flex, MCP abd, PIP.
    pub fn active() -> impl Iterator<Item = JointId> {
        Digit::ALL
            .into_iter()
            .flat_map(|d| Slot::ACTIVE.into_iter().map(move |s| JointId::new(d, s)))
    }

    /// Position in actuator order, or `None` for the passive followers.
    pub fn active_index(self) -> Option<usize> {
        let k = match self.slot {
            Slot::McpFlex => 0,
            Slot::McpAbd => 1,
            Slot::Pip => 2,
            Slot::Dip => return None,
        };
        Some(self.digit as usize * 3 + k)
    }

    pub fn from_active_index(i: usize) -> JointId {
        JointId::new(Digit::ALL[i / 3], Slot::ACTIVE[i % 3])
    }

    pub fn is_follower(self) -> bool {
        self.slot == Slot::Dip
    }

    /// The joint a follower copies; `None` for active joints.
    pub fn leader(self) -> Option<JointId> {
        self.is_follower()
            .then_some(JointId::new(self.digit, Slot::Pip))
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slot = if self.digit == Digit::Thumb {
            self.slot.thumb_alias()
        } else {
            self.slot.name()
        };
        write!(f, "{}.{}", self.digit, slot)
    }
}

impl FromStr for JointId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, slot) = s
            .split_once('.')
            .ok_or_else(|| Error::Parse(format!("joint id `{s}` is not `digit.slot`")))?;
        let digit: Digit = d.parse()?;
        let slot = Slot::parse(slot).ok_or_else(|| Error::Parse(format!("unknown slot in `{s}`")))?;
        Ok(JointId::new(digit, slot))
    }
}

impl Serialize for JointId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for JointId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Angles for all 20 joints, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles(pub [f64; JointId::COUNT]);

impl JointAngles {
    pub fn zeros() -> Self {
        JointAngles([0.0; JointId::COUNT])
    }

    pub fn get(&self, id: JointId) -> f64 {
        self.0[id.index()]
    }

    pub fn set(&mut self, id: JointId, value: f64) {
        self.0[id.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (JointId, f64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &v)| (JointId::from_index(i), v))
    }

    /// The 15 driven angles in actuator order.
    pub fn active(&self) -> [f64; JointId::ACTIVE_COUNT] {
        let mut out = [0.0; JointId::ACTIVE_COUNT];
        for (k, id) in JointId::active().enumerate() {
            out[k] = self.get(id);
        }
        out
    }

    /// Builds angles from the 15 driven values; followers copy their leader.
    pub fn from_active(active: &[f64; JointId::ACTIVE_COUNT]) -> Self {
        let mut q = JointAngles::zeros();
        for (k, id) in JointId::active().enumerate() {
            q.set(id, active[k]);
        }
        project_coupling(&q)
    }

    /// Largest `|dip - pip|` over all digits.
    pub fn coupling_residual(&self) -> f64 {
        Digit::ALL
            .into_iter()
            .map(|d| (self[(d, Slot::Dip)] - self[(d, Slot::Pip)]).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<JointId> for JointAngles {
    type Output = f64;

    fn index(&self, id: JointId) -> &f64 {
        &self.0[id.index()]
    }
}

impl IndexMut<JointId> for JointAngles {
    fn index_mut(&mut self, id: JointId) -> &mut f64 {
        &mut self.0[id.index()]
    }
}

impl Index<(Digit, Slot)> for JointAngles {
    type Output = f64;

    fn index(&self, (d, s): (Digit, Slot)) -> &f64 {
        &self.0[JointId::new(d, s).index()]
    }
}

impl IndexMut<(Digit, Slot)> for JointAngles {
    fn index_mut(&mut self, (d, s): (Digit, Slot)) -> &mut f64 {
        &mut self.0[JointId::new(d, s).index()]
    }
}

impl Serialize for JointAngles {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(JointId::COUNT))?;
        for (id, v) in self.iter() {
            map.serialize_entry(&id, &v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for JointAngles {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = std::collections::BTreeMap::<JointId, f64>::deserialize(d)?;
        if map.len() != JointId::COUNT {
            return Err(serde::de::Error::custom(format!(
                "expected {} joint angles, found {}",
                JointId::COUNT,
                map.len()
            )));
        }
        let mut q = JointAngles::zeros();
        for (id, v) in map {
            q.set(id, v);
        }
        Ok(q)
    }
}

/// Enforces the PIP/DIP linkage: each follower takes its leader's angle.
/// All other entries are copied unchanged.
pub fn project_coupling(q_raw: &JointAngles) -> JointAngles {
    let mut q = *q_raw;
    for d in Digit::ALL {
        q[(d, Slot::Dip)] = q[(d, Slot::Pip)];
    }
    q
}
