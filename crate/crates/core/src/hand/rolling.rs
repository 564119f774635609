//! Rolling-contact joint geometry.
//!
//! Two circles of equal radius `r` roll on each other without slipping. The
//! proximal circle is fixed at the origin of the joint plane; at zero flexion
//! the distal circle sits on top of it with its center at `(0, 2r)`.
//!
//! Planar coordinates: `y` runs along the straight link, `x` points to the
//! flexion side, and angles are positive in the flexion sense (clockwise when
//! drawn with `y` up). In 3D the joint plane is the finger's x–z plane with
//! planar `y` → `+x` and planar `x` → `-z`, so flexion is a positive rotation
//! about `+y`.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Rigid transform in the joint plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    /// Rotation in the flexion sense, radians.
    pub angle: f64,
}

impl PlanarPose {
    pub const IDENTITY: PlanarPose = PlanarPose {
        x: 0.0,
        y: 0.0,
        angle: 0.0,
    };

    pub fn new(x: f64, y: f64, angle: f64) -> Self {
        PlanarPose { x, y, angle }
    }

    /// Rotates a vector by `angle` in the flexion sense: `(0, 1)` maps to
    /// `(sin a, cos a)`.
    pub fn rotate(angle: f64, (x, y): (f64, f64)) -> (f64, f64) {
        let (s, c) = angle.sin_cos();
        (x * c + y * s, -x * s + y * c)
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (rx, ry) = Self::rotate(self.angle, p);
        (self.x + rx, self.y + ry)
    }

    /// `self ∘ other`: `other` is expressed in `self`'s frame.
    pub fn compose(&self, other: &PlanarPose) -> PlanarPose {
        let (x, y) = self.apply((other.x, other.y));
        PlanarPose::new(x, y, self.angle + other.angle)
    }

    pub fn inverse(&self) -> PlanarPose {
        let (x, y) = Self::rotate(-self.angle, (-self.x, -self.y));
        PlanarPose::new(x, y, -self.angle)
    }
}

fn check_domain(theta: f64, r: f64) -> Result<()> {
    if !theta.is_finite() || theta.abs() > PI {
        return Err(Error::RollingDomain { theta });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::RollingRadius { radius: r });
    }
    Ok(())
}

/// Pose of the distal circle's frame (origin at its center) in the proximal
/// circle's frame after rolling through `theta`.
///
/// The center sits at `2r·(sin(θ/2), cos(θ/2))` and the body is rotated by
/// `θ`; each surface has traversed an arc of `r·θ/2`.
pub fn rolling_joint_transform(theta: f64, r: f64) -> Result<PlanarPose> {
    check_domain(theta, r)?;
    let (s, c) = (0.5 * theta).sin_cos();
    Ok(PlanarPose::new(2.0 * r * s, 2.0 * r * c, theta))
}

/// The same transform embedded in 3D: rotation `R_y(θ)`, translation
/// `R_y(θ/2)·(2r, 0, 0)`.
pub fn rolling_joint_isometry(theta: f64, r: f64) -> Result<Isometry3<f64>> {
    check_domain(theta, r)?;
    Ok(rolling_isometry_unchecked(theta, r))
}

pub(crate) fn rolling_isometry_unchecked(theta: f64, r: f64) -> Isometry3<f64> {
    let half = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 0.5 * theta);
    let t = half * Vector3::new(2.0 * r, 0.0, 0.0);
    Isometry3::from_parts(Translation3::from(t), half * half)
}
