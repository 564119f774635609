use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::revolute::revolute_approximation;
use crate::hand::{Digit, HandSpec, JointAngles};

/// Largest fingertip-to-surface distance counted as touching, m.
pub const CONTACT_TOLERANCE: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitContact {
    pub digit: Digit,
    /// Tip distance outside the sphere surface; negative inside.
    pub distance: f64,
    /// Outward surface normal nearest the tip.
    pub normal: [f64; 3],
    pub touching: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereContact {
    pub digits: Vec<DigitContact>,
    pub contacts: usize,
    /// Widest angular gap between touching normals projected onto the palm
    /// plane; below π they positively span it.
    pub max_normal_gap: f64,
    pub closed: bool,
}

/// Fingertip contacts of pose `q` with a sphere, using the pin-joint model.
pub fn check_sphere_grasp(spec: &HandSpec, q: &JointAngles, center: Point3<f64>, radius: f64) -> SphereContact {
    check_sphere_grasp_with(spec, q, center, radius, CONTACT_TOLERANCE)
}

/// [`check_sphere_grasp`] with a custom contact tolerance.
pub fn check_sphere_grasp_with(
    spec: &HandSpec,
    q: &JointAngles,
    center: Point3<f64>,
    radius: f64,
    tolerance: f64,
) -> SphereContact {
    assert!(radius > 0.0, "sphere radius must be positive");
    let tips = revolute_approximation(spec).tips(q);
    let digits: Vec<DigitContact> = Digit::ALL
        .iter()
        .map(|&d| {
            let v = tips[d.index()] - center;
            let n = v.try_normalize(0.0).unwrap_or_else(Vector3::z);
            let distance = v.norm() - radius;
            DigitContact {
                digit: d,
                distance,
                normal: n.into(),
                touching: distance.abs() <= tolerance,
            }
        })
        .collect();
    let angles: Vec<f64> = digits
        .iter()
        .filter(|c| c.touching)
        .filter(|c| c.normal[0].hypot(c.normal[1]) > 1e-9)
        .map(|c| c.normal[1].atan2(c.normal[0]))
        .collect();
    let contacts = digits.iter().filter(|c| c.touching).count();
    let max_normal_gap = max_angular_gap(angles);
    SphereContact {
        closed: contacts >= 3 && max_normal_gap < PI,
        digits,
        contacts,
        max_normal_gap,
    }
}

/// Largest empty arc between directions on the circle; 2π with fewer than
/// two directions.
pub fn max_angular_gap(mut angles: Vec<f64>) -> f64 {
    if angles.len() < 2 {
        return 2.0 * PI;
    }
    angles.sort_by(f64::total_cmp);
    let wrap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
}
