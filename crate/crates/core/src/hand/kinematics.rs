//! Serial-chain forward kinematics and the fingertip Jacobian.
//!
//! Chain for one digit, all frames in the palm frame:
//!
//! ```text
//! metacarpal = palm · mount
//! proximal   = metacarpal · Rz(abd) · Ry(flex)
//! middle     = proximal · Tx(Lp - r1) · J(pip, r1) · Tx(-r1)
//! distal     = middle   · Tx(Lm - r2) · J(dip, r2) · Tx(-r2)
//! fingertip  = distal   · Tx(Ld)
//! ```
//!
//! `J` is the rolling transform for rolling joints (radius `r`) and a plain
//! `Ry` for revolute ones (`r = 0`). Each link frame sits at the point that
//! was the contact point in the straight pose, so a straight finger has its
//! tip exactly `Lp + Lm + Ld` along the mount axis.

use nalgebra::{Isometry3, Matrix3, Matrix3x4, Point3, Translation3, UnitQuaternion, Vector3};

use super::rolling::rolling_isometry_unchecked;
use super::{Digit, HandSpec, JointAngles, JointId, JointKind, Slot};
use crate::error::{Error, Result};

/// Tolerance used when checking angles against joint limits.
pub const LIMIT_TOLERANCE: f64 = 1e-9;
/// Largest allowed `|dip - pip|` for a pose to count as coupled.
pub const COUPLING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitFrames {
    pub metacarpal: Isometry3<f64>,
    pub proximal: Isometry3<f64>,
    pub middle: Isometry3<f64>,
    pub distal: Isometry3<f64>,
    pub fingertip: Isometry3<f64>,
}

impl DigitFrames {
    pub fn tip(&self) -> Point3<f64> {
        self.fingertip.translation.vector.into()
    }

    /// Origins of the base joint, the two coupled joints and the tip; enough
    /// to draw a skeleton.
    pub fn polyline(&self) -> [Point3<f64>; 4] {
        [
            self.proximal.translation.vector.into(),
            self.middle.translation.vector.into(),
            self.distal.translation.vector.into(),
            self.tip(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandKinematics {
    pub digits: [DigitFrames; 5],
}

impl HandKinematics {
    pub fn digit(&self, d: Digit) -> &DigitFrames {
        &self.digits[d.index()]
    }

    pub fn tip(&self, d: Digit) -> Point3<f64> {
        self.digit(d).tip()
    }
}

/// Checks limits and the coupling constraint, then evaluates every chain.
pub fn forward_kinematics(spec: &HandSpec, q: &JointAngles) -> Result<HandKinematics> {
    check_pose(spec, q)?;
    Ok(forward_kinematics_unchecked(spec, q))
}

pub fn check_pose(spec: &HandSpec, q: &JointAngles) -> Result<()> {
    for d in Digit::ALL {
        let residual = (q[(d, Slot::Dip)] - q[(d, Slot::Pip)]).abs();
        if !(residual <= COUPLING_TOLERANCE) {
            return Err(Error::Coupling { digit: d, residual });
        }
    }
    for j in spec.joints() {
        let v = q[j.id];
        let [min, max] = j.limits;
        if !(v >= min - LIMIT_TOLERANCE && v <= max + LIMIT_TOLERANCE) {
            return Err(Error::JointLimit {
                joint: j.id,
                value: v,
                min,
                max,
            });
        }
    }
    Ok(())
}

/// Forward kinematics without precondition checks. Used by solvers that
/// probe poses slightly outside the limits.
pub fn forward_kinematics_unchecked(spec: &HandSpec, q: &JointAngles) -> HandKinematics {
    HandKinematics {
        digits: Digit::ALL.map(|d| digit_frames(spec, d, q)),
    }
}

fn tx(x: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::new(x, 0.0, 0.0), UnitQuaternion::identity())
}

fn rot(axis: nalgebra::Unit<Vector3<f64>>, angle: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&axis, angle))
}

fn joint_motion(kind: JointKind, theta: f64) -> Isometry3<f64> {
    match kind {
        JointKind::Revolute => rot(Vector3::y_axis(), theta),
        JointKind::RollingContact { radius } => {
            tx(-radius) * rolling_isometry_unchecked(theta, radius) * tx(-radius)
        }
    }
}

pub(crate) fn digit_frames(spec: &HandSpec, d: Digit, q: &JointAngles) -> DigitFrames {
    let ds = spec.digit(d);
    let [lp, lm, ld] = ds.phalanges;
    let pip = ds.joint(Slot::Pip).kind;
    let dip = ds.joint(Slot::Dip).kind;

    let metacarpal = spec.palm_frame * ds.mount;
    let proximal = metacarpal
        * rot(Vector3::z_axis(), q[(d, Slot::McpAbd)])
        * rot(Vector3::y_axis(), q[(d, Slot::McpFlex)]);
    let middle = proximal * tx(lp) * joint_motion(pip, q[(d, Slot::Pip)]);
    let distal = middle * tx(lm) * joint_motion(dip, q[(d, Slot::Dip)]);
    let fingertip = distal * tx(ld);
    DigitFrames {
        metacarpal,
        proximal,
        middle,
        distal,
        fingertip,
    }
}

/// Rotation axes (world) with their pivot points and weights that make up
/// one coupled joint's contribution to tip velocity. A rolling joint turning
/// by `θ` is two half-rotations, one about each circle center.
fn coupled_pivots(kind: JointKind, before: &Isometry3<f64>, after: &Isometry3<f64>) -> [(Point3<f64>, f64); 2] {
    match kind {
        JointKind::Revolute => [(before.translation.vector.into(), 1.0), (Point3::origin(), 0.0)],
        JointKind::RollingContact { radius } => {
            let c1 = before * Point3::new(-radius, 0.0, 0.0);
            let c2 = after * Point3::new(radius, 0.0, 0.0);
            [(c1, 0.5), (c2, 0.5)]
        }
    }
}

/// Analytic Jacobian of the fingertip position with respect to the digit's
/// three driven coordinates (MCP flex, MCP abd, coupled PIP/DIP), columns in
/// that order. The DIP follower is folded into the PIP column.
pub fn digit_jacobian(spec: &HandSpec, d: Digit, q: &JointAngles) -> Matrix3<f64> {
    let j = joint_jacobian(spec, d, q);
    let mut jac = Matrix3::zeros();
    jac.set_column(0, &j.column(0));
    jac.set_column(1, &j.column(1));
    jac.set_column(2, &(j.column(2) + j.column(3)));
    jac
}

/// Fingertip Jacobian with one column per physical joint: MCP flex, MCP abd,
/// PIP, DIP. `Jᵀ F` gives the torque a tip force puts on each joint.
pub fn joint_jacobian(spec: &HandSpec, d: Digit, q: &JointAngles) -> Matrix3x4<f64> {
    let frames = digit_frames(spec, d, q);
    let ds = spec.digit(d);
    let p = frames.tip();
    let mut jac = Matrix3x4::zeros();

    let mcp_origin: Point3<f64> = frames.proximal.translation.vector.into();
    let abd_axis = frames.metacarpal.rotation * Vector3::z();
    let flex_axis = frames.proximal.rotation * Vector3::y();
    jac.set_column(0, &flex_axis.cross(&(p - mcp_origin)));
    jac.set_column(1, &abd_axis.cross(&(p - mcp_origin)));

    // the PIP joint frame before motion is proximal·Tx(Lp); after motion its
    // distal side is `middle`. Same for DIP.
    let pip_before = frames.proximal * tx(ds.phalanges[0]);
    let dip_before = frames.middle * tx(ds.phalanges[1]);
    for (k, kind, before, after) in [
        (2, ds.joint(Slot::Pip).kind, pip_before, frames.middle),
        (3, ds.joint(Slot::Dip).kind, dip_before, frames.distal),
    ] {
        // every pivot of a coupled joint rotates about the local y axis,
        // which is the same direction on both sides of the joint
        let axis = after.rotation * Vector3::y();
        let mut col = Vector3::zeros();
        for (c, w) in coupled_pivots(kind, &before, &after) {
            if w != 0.0 {
                col += w * axis.cross(&(p - c));
            }
        }
        jac.set_column(k, &col);
    }
    jac
}

/// Central-difference Jacobian of the fingertip over the same coordinates as
/// [`digit_jacobian`].
pub fn digit_jacobian_numeric(spec: &HandSpec, d: Digit, q: &JointAngles, h: f64) -> Matrix3<f64> {
    let mut jac = Matrix3::zeros();
    for (k, slot) in Slot::ACTIVE.into_iter().enumerate() {
        let mut plus = *q;
        let mut minus = *q;
        plus[(d, slot)] += h;
        minus[(d, slot)] -= h;
        if slot == Slot::Pip {
            plus[(d, Slot::Dip)] += h;
            minus[(d, Slot::Dip)] -= h;
        }
        let pp = digit_frames(spec, d, &plus).tip();
        let pm = digit_frames(spec, d, &minus).tip();
        jac.set_column(k, &((pp - pm) / (2.0 * h)));
    }
    jac
}

pub(crate) fn active_limits(spec: &HandSpec, d: Digit) -> [[f64; 2]; 3] {
    Slot::ACTIVE.map(|s| spec.limits(JointId::new(d, s)))
}
