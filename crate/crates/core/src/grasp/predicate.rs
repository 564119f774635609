use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::hand::{Digit, HandKinematics, JointAngles, Segment, Slot};
use crate::sim::max_angular_gap;

/// Geometric condition an authored pose must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// Every pair of the listed fingertips closer than `eps`.
    Pinch { digits: Vec<Digit>, eps: f64 },
    /// Thumb tip within `eps` of the centroid of the listed fingertips.
    Opposition { digits: Vec<Digit>, eps: f64 },
    /// Thumb tip within `eps` of a segment of another digit.
    LateralOpposition { target: Digit, segment: Segment, eps: f64 },
    /// Proximal links of two neighbours closer than `max_gap`.
    AdductionGap { a: Digit, b: Digit, max_gap: f64 },
    /// Listed fingertip heights (palm z) within `tol` of their mean.
    Plane { digits: Vec<Digit>, tol: f64 },
    /// Listed fingertips at least `depth` below the palm.
    PalmSide { digits: Vec<Digit>, depth: f64 },
    /// Sum of the listed joint angles inside `[min, max]` for every digit.
    Flexion {
        digits: Vec<Digit>,
        slots: Vec<Slot>,
        min: f64,
        max: f64,
    },
    /// Listed fingertips on a common sphere near `radius`, with contact
    /// normals spanning the palm plane.
    Sphere { digits: Vec<Digit>, radius: f64, tol: f64 },
}

/// One scalar condition `value <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub limit: f64,
    /// Typical magnitude; residuals divided by it are comparable across units.
    pub scale: f64,
}

impl Check {
    pub fn residual(&self) -> f64 {
        self.value - self.limit
    }

    pub fn passes(&self) -> bool {
        self.value <= self.limit
    }
}

/// Radius band a fitted sphere may take, relative to the nominal radius.
pub const SPHERE_RADIUS_BAND: [f64; 2] = [0.7, 1.3];

impl Predicate {
    pub fn name(&self) -> &'static str {
        match self {
            Predicate::Pinch { .. } => "pinch",
            Predicate::Opposition { .. } => "opposition",
            Predicate::LateralOpposition { .. } => "lateral_opposition",
            Predicate::AdductionGap { .. } => "adduction_gap",
            Predicate::Plane { .. } => "plane",
            Predicate::PalmSide { .. } => "palm_side",
            Predicate::Flexion { .. } => "flexion",
            Predicate::Sphere { .. } => "sphere",
        }
    }

    /// Evaluates the predicate. `relax` multiplies every length tolerance.
    pub fn checks(&self, fk: &HandKinematics, q: &JointAngles, relax: f64) -> Vec<Check> {
        let mut out = Vec::new();
        let mut push = |label: String, value: f64, limit: f64, scale: f64| {
            out.push(Check {
                label,
                value,
                limit,
                scale,
            })
        };
        let tip = |d: Digit| fk.tip(d);
        match self {
            Predicate::Pinch { digits, eps } => {
                for (i, a) in digits.iter().enumerate() {
                    for b in &digits[i + 1..] {
                        push(format!("{a}-{b} tip distance"), (tip(*a) - tip(*b)).norm(), eps * relax, *eps);
                    }
                }
            }
            Predicate::Opposition { digits, eps } => {
                let c = centroid(digits.iter().map(|d| tip(*d)));
                push(format!("thumb to centroid of {}", names(digits)), (tip(Digit::Thumb) - c).norm(), eps * relax, *eps);
            }
            Predicate::LateralOpposition { target, segment, eps } => {
                let (a, b) = segment_points(fk, *target, *segment);
                let d = point_segment_distance(tip(Digit::Thumb), a, b);
                push(format!("thumb to {target} {segment:?} link"), d, eps * relax, *eps);
            }
            Predicate::AdductionGap { a, b, max_gap } => {
                let (a0, a1) = segment_points(fk, *a, Segment::Proximal);
                let (b0, b1) = segment_points(fk, *b, Segment::Proximal);
                push(format!("{a}-{b} proximal gap"), segment_distance(a0, a1, b0, b1), max_gap * relax, *max_gap);
            }
            Predicate::Plane { digits, tol } => {
                let mean = digits.iter().map(|d| tip(*d).z).sum::<f64>() / digits.len() as f64;
                for d in digits {
                    push(format!("{d} tip off plane"), (tip(*d).z - mean).abs(), tol * relax, *tol);
                }
            }
            Predicate::PalmSide { digits, depth } => {
                for d in digits {
                    push(format!("{d} tip height"), tip(*d).z, -depth, *depth);
                }
            }
            Predicate::Flexion { digits, slots, min, max } => {
                for d in digits {
                    let v: f64 = slots.iter().map(|s| q[(*d, *s)]).sum();
                    push(format!("{d} flexion below min"), -v, -min, 0.1);
                    push(format!("{d} flexion above max"), v, *max, 0.1);
                }
            }
            Predicate::Sphere { digits, radius, tol } => {
                let tips: Vec<Point3<f64>> = digits.iter().map(|d| tip(*d)).collect();
                let hint = centroid(digits.iter().map(|d| fk.digit(*d).proximal.translation.vector.into()));
                let fit = fit_sphere(&tips, *radius, hint);
                for (d, p) in digits.iter().zip(&tips) {
                    push(format!("{d} off sphere"), ((p - fit.center).norm() - fit.radius).abs(), tol * relax, *tol);
                }
                let [lo, hi] = SPHERE_RADIUS_BAND;
                push("fitted radius below band".into(), -fit.radius / radius, -lo, 0.1);
                push("fitted radius above band".into(), fit.radius / radius, hi, 0.1);
                let angles = tips
                    .iter()
                    .map(|p| p - fit.center)
                    .filter(|n| n.x.hypot(n.y) > 1e-9)
                    .map(|n| n.y.atan2(n.x))
                    .collect();
                // strictly below π: the normals positively span the plane
                push("normal gap".into(), max_angular_gap(angles), PI - 1e-6, 0.5);
            }
        }
        out
    }
}

fn names(digits: &[Digit]) -> String {
    digits.iter().map(|d| d.name()).collect::<Vec<_>>().join("+")
}

fn centroid(points: impl Iterator<Item = Point3<f64>>) -> Point3<f64> {
    let (sum, n) = points.fold((Vector3::zeros(), 0usize), |(s, n), p| (s + p.coords, n + 1));
    Point3::from(sum / n as f64)
}

fn segment_points(fk: &HandKinematics, d: Digit, s: Segment) -> (Point3<f64>, Point3<f64>) {
    let p = fk.digit(d).polyline();
    match s {
        Segment::Metacarpal => (fk.digit(d).metacarpal.translation.vector.into(), p[0]),
        Segment::Proximal => (p[0], p[1]),
        Segment::Middle => (p[1], p[2]),
        Segment::Distal => (p[2], p[3]),
    }
}

pub(crate) fn point_segment_distance(p: Point3<f64>, a: Point3<f64>, b: Point3<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Closest distance between segments `[p0, p1]` and `[q0, q1]`.
pub(crate) fn segment_distance(p0: Point3<f64>, p1: Point3<f64>, q0: Point3<f64>, q1: Point3<f64>) -> f64 {
    let (d1, d2, r) = (p1 - p0, q1 - q0, p0 - q0);
    let (a, e, f) = (d1.norm_squared(), d2.norm_squared(), d2.dot(&r));
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-18 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    pub center: Point3<f64>,
    pub radius: f64,
}

/// Least-squares sphere through `points`. With three points the radius is
/// held at `nominal`; with more it is fitted, weakly pulled toward
/// `nominal` so coplanar sets stay well posed. The center starts on the side
/// of the points facing `inside`.
pub fn fit_sphere(points: &[Point3<f64>], nominal: f64, inside: Point3<f64>) -> SphereFit {
    let c0 = centroid(points.iter().copied());
    let spread = (points.iter().map(|p| (p - c0).norm_squared()).sum::<f64>() / points.len() as f64).sqrt();
    let toward = (inside - c0).try_normalize(1e-12).unwrap_or_else(Vector3::z);
    let mut x = DVector::from_vec(vec![0.0; 4]);
    let start = c0 + toward * (nominal * nominal - spread * spread).max(0.0).sqrt();
    x.fixed_rows_mut::<3>(0).copy_from(&start.coords);
    x[3] = nominal;
    let free_radius = points.len() >= 4;
    let prior = 1e-4;

    let residuals = |x: &DVector<f64>| -> DVector<f64> {
        let c = Vector3::new(x[0], x[1], x[2]);
        let mut r: Vec<f64> = points.iter().map(|p| (p.coords - c).norm() - x[3]).collect();
        r.push(prior * (x[3] - nominal));
        DVector::from_vec(r)
    };
    let mut lambda = 1e-3;
    let mut cost = residuals(&x).norm_squared();
    for _ in 0..100 {
        let r = residuals(&x);
        let cols = if free_radius { 4 } else { 3 };
        let c = Vector3::new(x[0], x[1], x[2]);
        let mut jac = DMatrix::zeros(r.len(), cols);
        for (i, p) in points.iter().enumerate() {
            let u = (c - p.coords).try_normalize(1e-15).unwrap_or_else(Vector3::x);
            jac[(i, 0)] = u.x;
            jac[(i, 1)] = u.y;
            jac[(i, 2)] = u.z;
            if free_radius {
                jac[(i, 3)] = -1.0;
            }
        }
        if free_radius {
            jac[(points.len(), 3)] = prior;
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..10 {
            let mut a = jtj.clone();
            for k in 0..cols {
                a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.lu().solve(&(-&g)) else { break };
            let mut trial = x.clone();
            for k in 0..cols {
                trial[k] += step[k];
            }
            let c_new = residuals(&trial).norm_squared();
            if c_new < cost {
                x = trial;
                cost = c_new;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || cost < 1e-30 {
            break;
        }
    }
    SphereFit {
        center: Point3::new(x[0], x[1], x[2]),
        radius: x[3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_cases() {
        let p = |x, y, z| Point3::new(x, y, z);
        // parallel, offset by 2
        assert!((segment_distance(p(0., 0., 0.), p(1., 0., 0.), p(0., 2., 0.), p(1., 2., 0.)) - 2.0).abs() < 1e-12);
        // crossing skew lines 1 apart
        assert!((segment_distance(p(-1., 0., 0.), p(1., 0., 0.), p(0., -1., 1.), p(0., 1., 1.)) - 1.0).abs() < 1e-12);
        // endpoints nearest
        let d = segment_distance(p(0., 0., 0.), p(1., 0., 0.), p(2., 1., 0.), p(3., 1., 0.));
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sphere_fit_recovers_known_sphere() {
        let c = Point3::new(0.05, 0.01, -0.04);
        let r = 0.037;
        let dirs = [
            Vector3::new(1.0, 0.2, 0.3),
            Vector3::new(-0.4, 1.0, 0.1),
            Vector3::new(0.3, -1.0, 0.5),
            Vector3::new(-0.8, -0.3, 0.6),
            Vector3::new(0.1, 0.1, 1.0),
        ];
        let pts: Vec<Point3<f64>> = dirs.iter().map(|d| c + d.normalize() * r).collect();
        let fit = fit_sphere(&pts, 0.03, Point3::new(0.05, 0.0, -0.1));
        assert!((fit.center - c).norm() < 1e-6, "{:?}", fit);
        assert!((fit.radius - r).abs() < 1e-6);

        let fit3 = fit_sphere(&pts[..3], r, c + Vector3::new(0.0, 0.0, -0.01));
        for p in &pts[..3] {
            assert!(((p - fit3.center).norm() - r).abs() < 1e-9);
        }
    }
}
