use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::hand::{Digit, HandSpec, JointAngles, JointId, JointKind, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HingeAxis {
    Y,
    Z,
}

/// One pin joint of the approximation. Its angle is `ratio` times the angle
/// of `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hinge {
    pub name: String,
    pub axis: HingeAxis,
    /// Distance along the parent link's x axis from the previous hinge.
    pub offset: f64,
    pub source: JointId,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevoluteDigit {
    pub digit: Digit,
    pub mount: Isometry3<f64>,
    pub hinges: Vec<Hinge>,
    /// From the last hinge to the fingertip.
    pub tip_offset: f64,
    /// Pairs of hinge indices whose angles must stay equal.
    pub equalities: Vec<(usize, usize)>,
}

/// Pin-joint stand-in for the hand. Every rolling joint becomes two pins of
/// half the joint angle, one at each circle center, tied together by an
/// equality constraint; the distal pair is tied to the middle pair the same
/// way. A simulator that only supports pin joints can load this model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevoluteModel {
    pub digits: Vec<RevoluteDigit>,
}

pub fn revolute_approximation(spec: &HandSpec) -> RevoluteModel {
    let digits = Digit::ALL
        .map(|d| {
            let ds = spec.digit(d);
            let id = |s| JointId::new(d, s);
            let mut hinges = vec![
                Hinge {
                    name: format!("{}_abd", d),
                    axis: HingeAxis::Z,
                    offset: 0.0,
                    source: id(Slot::McpAbd),
                    ratio: 1.0,
                },
                Hinge {
                    name: format!("{}_flex", d),
                    axis: HingeAxis::Y,
                    offset: 0.0,
                    source: id(Slot::McpFlex),
                    ratio: 1.0,
                },
            ];
            let mut equalities = Vec::new();
            // distance still to travel along the current link before its
            // next hinge
            let mut carry = 0.0;
            let mut pair_heads = Vec::new();
            for (slot, link) in [(Slot::Pip, ds.phalanges[0]), (Slot::Dip, ds.phalanges[1])] {
                let head = hinges.len();
                pair_heads.push(head);
                match ds.joint(slot).kind {
                    JointKind::Revolute => {
                        hinges.push(Hinge {
                            name: format!("{}_{}", d, slot.name()),
                            axis: HingeAxis::Y,
                            offset: carry + link,
                            source: id(slot),
                            ratio: 1.0,
                        });
                        carry = 0.0;
                    }
                    JointKind::RollingContact { radius } => {
                        for (k, offset) in [(0, carry + link - radius), (1, 2.0 * radius)] {
                            hinges.push(Hinge {
                                name: format!("{}_{}_{}", d, slot.name(), k),
                                axis: HingeAxis::Y,
                                offset,
                                source: id(slot),
                                ratio: 0.5,
                            });
                        }
                        equalities.push((head, head + 1));
                        carry = -radius;
                    }
                }
            }
            equalities.push((pair_heads[0], pair_heads[1]));
            RevoluteDigit {
                digit: d,
                mount: spec.palm_frame * ds.mount,
                hinges,
                tip_offset: carry + ds.phalanges[2],
                equalities,
            }
        })
        .to_vec();
    RevoluteModel { digits }
}

impl RevoluteModel {
    pub fn digit(&self, d: Digit) -> &RevoluteDigit {
        &self.digits[d.index()]
    }

    /// Pin angles driven by joint angles `q`.
    pub fn hinge_angles(&self, d: Digit, q: &JointAngles) -> Vec<f64> {
        self.digit(d).hinges.iter().map(|h| h.ratio * q[h.source]).collect()
    }

    /// Largest violation of the digit's equality constraints.
    pub fn constraint_residual(&self, d: Digit, angles: &[f64]) -> f64 {
        self.digit(d)
            .equalities
            .iter()
            .map(|&(a, b)| (angles[a] - angles[b]).abs())
            .fold(0.0, f64::max)
    }

    pub fn tip(&self, d: Digit, angles: &[f64]) -> Point3<f64> {
        let rd = self.digit(d);
        let mut frame = rd.mount;
        for (h, &a) in rd.hinges.iter().zip(angles) {
            let axis = match h.axis {
                HingeAxis::Y => Vector3::y_axis(),
                HingeAxis::Z => Vector3::z_axis(),
            };
            frame = frame
                * Isometry3::from_parts(Translation3::new(h.offset, 0.0, 0.0), UnitQuaternion::from_axis_angle(&axis, a));
        }
        frame * Point3::new(rd.tip_offset, 0.0, 0.0)
    }

    pub fn tips(&self, q: &JointAngles) -> [Point3<f64>; 5] {
        Digit::ALL.map(|d| self.tip(d, &self.hinge_angles(d, q)))
    }
}
