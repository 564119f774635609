use std::io::{BufRead, Write};
use std::ops::{Index, IndexMut};

use nalgebra::{Isometry3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{Digit, JointId, Slot};

pub const LANDMARK_COUNT: usize = 21;
pub const WRIST: usize = 0;
pub const STREAM_SCHEMA: &str = "craft-keypoints";
pub const STREAM_VERSION: u32 = 1;

/// Shortest phalanx accepted by [`keypoints_to_angles`], meters.
pub const MIN_SEGMENT: f64 = 1e-6;

/// Landmark indices of one digit, from its base joint to its tip.
///
/// | digit  | base | joint 1 | joint 2 | tip |
/// |--------|------|---------|---------|-----|
/// | thumb  | 1    | 2       | 3       | 4   |
/// | index  | 5    | 6       | 7       | 8   |
/// | middle | 9    | 10      | 11      | 12  |
/// | ring   | 13   | 14      | 15      | 16  |
/// | pinky  | 17   | 18      | 19      | 20  |
pub fn digit_landmarks(d: Digit) -> [usize; 4] {
    let b = 1 + 4 * d.index();
    [b, b + 1, b + 2, b + 3]
}

/// Orientation of the operator's thumb reference frame relative to the palm
/// frame, as roll/pitch/yaw. Thumb angles are measured in this frame.
pub const THUMB_REFERENCE_RPY: [f64; 3] = [-0.87, 0.0, 0.785];

fn digit_reference(d: Digit) -> Rotation3<f64> {
    match d {
        Digit::Thumb => {
            let [r, p, y] = THUMB_REFERENCE_RPY;
            Rotation3::from_euler_angles(r, p, y)
        }
        _ => Rotation3::identity(),
    }
}

/// Wrist pose relative to the torso. `quaternion` is `[x, y, z, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WristPose {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

impl Default for WristPose {
    fn default() -> Self {
        WristPose {
            position: [0.0; 3],
            quaternion: [0.0, 0.0, 0.0, 1.0],
        }
    }
}

impl WristPose {
    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let q = iso.rotation.coords;
        let t = iso.translation.vector;
        WristPose {
            position: [t.x, t.y, t.z],
            quaternion: [q.x, q.y, q.z, q.w],
        }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z, w] = self.quaternion;
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        let [px, py, pz] = self.position;
        Isometry3::from_parts(Translation3::new(px, py, pz), q)
    }
}

/// One timestamped observation of the operator's hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFrame {
    pub t: f64,
    pub landmarks: [[f64; 3]; LANDMARK_COUNT],
    pub wrist_pose: WristPose,
    pub confidence: f64,
}

impl KeypointFrame {
    pub fn landmark(&self, i: usize) -> Point3<f64> {
        Point3::from(self.landmarks[i])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::FrameRejected(format!("non-finite timestamp {}", self.t)));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::FrameRejected(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        if self.landmarks.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::FrameRejected("non-finite landmark".into()));
        }
        if self.wrist_pose.position.iter().chain(&self.wrist_pose.quaternion).any(|v| !v.is_finite()) {
            return Err(Error::FrameRejected("non-finite wrist pose".into()));
        }
        Ok(())
    }
}

/// Operator joint angles over the 15 active joints, actuator order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatorAngles(pub [f64; JointId::ACTIVE_COUNT]);

impl Index<JointId> for OperatorAngles {
    type Output = f64;
    fn index(&self, id: JointId) -> &f64 {
        &self.0[id.active_index().expect("operator angles cover active joints only")]
    }
}

impl IndexMut<JointId> for OperatorAngles {
    fn index_mut(&mut self, id: JointId) -> &mut f64 {
        &mut self.0[id.active_index().expect("operator angles cover active joints only")]
    }
}

/// Palm frame from the wrist and the index and pinky bases: `x` toward the
/// middle base, `z` out of the back of the hand.
pub fn palm_frame(frame: &KeypointFrame) -> Result<Rotation3<f64>> {
    let w = frame.landmark(WRIST);
    let to = |i: usize| frame.landmark(i) - w;
    let n = to(17).cross(&to(5));
    if n.norm() < MIN_SEGMENT * MIN_SEGMENT {
        return Err(Error::FrameRejected("degenerate palm triangle".into()));
    }
    let n = n.normalize();
    let m = to(9);
    let l = m - n * m.dot(&n);
    if l.norm() < MIN_SEGMENT {
        return Err(Error::FrameRejected("middle base lies on the palm normal".into()));
    }
    let l = l.normalize();
    let a = n.cross(&l);
    Ok(Rotation3::from_basis_unchecked(&[l, a, n]))
}

/// Joint angles of one digit in its reference frame: flexion, abduction,
/// proximal-to-middle flexion, middle-to-distal flexion.
fn digit_angles(frame: &KeypointFrame, palm: &Rotation3<f64>, d: Digit) -> Result<[f64; 4]> {
    let idx = digit_landmarks(d);
    let to_local = (palm * digit_reference(d)).inverse();
    let seg = |i: usize| -> Result<Vector3<f64>> {
        let v = frame.landmark(idx[i + 1]) - frame.landmark(idx[i]);
        if v.norm() < MIN_SEGMENT {
            return Err(Error::FrameRejected(format!(
                "{d}: landmarks {} and {} coincide",
                idx[i],
                idx[i + 1]
            )));
        }
        Ok(to_local * v)
    };
    let (p1, p2, p3) = (seg(0)?, seg(1)?, seg(2)?);
    let abd = p1.y.atan2(p1.x);
    let flex = (-p1.z).atan2(p1.x.hypot(p1.y));
    let axis = Vector3::new(-abd.sin(), abd.cos(), 0.0);
    let bend = |u: &Vector3<f64>, v: &Vector3<f64>| u.cross(v).dot(&axis).atan2(u.dot(v));
    Ok([flex, abd, bend(&p1, &p2), bend(&p2, &p3)])
}

/// Operator angles for the 15 active joints. The coupled joint uses the
/// operator's own middle-joint angle; the distal angle is discarded.
pub fn keypoints_to_angles(frame: &KeypointFrame) -> Result<OperatorAngles> {
    frame.validate()?;
    let palm = palm_frame(frame)?;
    let mut out = OperatorAngles::default();
    for d in Digit::ALL {
        let [flex, abd, pip, _] = digit_angles(frame, &palm, d)?;
        out[JointId::new(d, Slot::McpFlex)] = flex;
        out[JointId::new(d, Slot::McpAbd)] = abd;
        out[JointId::new(d, Slot::Pip)] = pip;
    }
    Ok(out)
}

/// All four angles per digit including the distal joint, `[digit][slot]`.
pub fn keypoints_to_full_angles(frame: &KeypointFrame) -> Result<[[f64; 4]; 5]> {
    frame.validate()?;
    let palm = palm_frame(frame)?;
    let mut out = [[0.0; 4]; 5];
    for d in Digit::ALL {
        out[d.index()] = digit_angles(frame, &palm, d)?;
    }
    Ok(out)
}

/// Geometry of a synthetic operator hand, used to build landmarks from
/// known joint angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticHand {
    /// Base landmark of each digit in the palm frame, meters.
    pub bases: [[f64; 3]; 5],
    /// Bone lengths from base to tip per digit.
    pub bones: [[f64; 3]; 5],
    /// Per digit biological range of `[flex, abd, pip, dip]`.
    pub ranges: [[[f64; 2]; 4]; 5],
}

impl Default for SyntheticHand {
    fn default() -> Self {
        let finger = [[0.0, 1.5], [-0.3, 0.3], [0.0, 1.7], [0.0, 1.3]];
        SyntheticHand {
            bases: [
                [0.025, 0.030, -0.010],
                [0.090, 0.022, 0.0],
                [0.092, 0.0, 0.0],
                [0.088, -0.020, 0.0],
                [0.080, -0.038, 0.0],
            ],
            bones: [
                [0.045, 0.032, 0.028],
                [0.043, 0.025, 0.020],
                [0.047, 0.029, 0.021],
                [0.044, 0.027, 0.020],
                [0.035, 0.020, 0.018],
            ],
            ranges: [
                [[0.0, 1.2], [-0.6, 0.6], [0.0, 1.0], [0.0, 1.2]],
                finger,
                finger,
                finger,
                finger,
            ],
        }
    }
}

impl SyntheticHand {
    /// Landmarks in the palm frame for per-digit `[flex, abd, pip, dip]`.
    pub fn landmarks(&self, angles: &[[f64; 4]; 5]) -> [[f64; 3]; LANDMARK_COUNT] {
        let mut out = [[0.0; 3]; LANDMARK_COUNT];
        for d in Digit::ALL {
            let [flex, abd, pip, dip] = angles[d.index()];
            let idx = digit_landmarks(d);
            let base_rot = digit_reference(d) * Rotation3::from_axis_angle(&Vector3::z_axis(), abd);
            let mut p = Point3::from(self.bases[d.index()]);
            out[idx[0]] = p.coords.into();
            let mut bend = flex;
            for (k, extra) in [0.0, pip, dip].into_iter().enumerate() {
                bend += extra;
                let dir = base_rot * Rotation3::from_axis_angle(&Vector3::y_axis(), bend) * Vector3::x();
                p += dir * self.bones[d.index()][k];
                out[idx[k + 1]] = p.coords.into();
            }
        }
        out
    }

    /// A frame whose landmarks are expressed through `camera` (palm frame to
    /// camera frame).
    pub fn frame(&self, t: f64, angles: &[[f64; 4]; 5], camera: &Isometry3<f64>, wrist: WristPose) -> KeypointFrame {
        let mut lm = self.landmarks(angles);
        for p in lm.iter_mut() {
            *p = (camera * Point3::from(*p)).coords.into();
        }
        KeypointFrame {
            t,
            landmarks: lm,
            wrist_pose: wrist,
            confidence: 1.0,
        }
    }

    /// A calibration stream in which every joint sweeps its full biological
    /// range with a cosine profile, one digit slot at a time, hitting both
    /// ends exactly. `frames_per_sweep` must be even.
    pub fn calibration_sweep(&self, frames_per_sweep: usize, rate_hz: f64) -> Vec<KeypointFrame> {
        let n = frames_per_sweep.max(2) & !1;
        let mut out = Vec::new();
        let mid = |r: [f64; 2]| 0.5 * (r[0] + r[1]);
        let rest: [[f64; 4]; 5] = std::array::from_fn(|d| std::array::from_fn(|s| mid(self.ranges[d][s])));
        for slot in 0..4 {
            for k in 0..=n {
                let c = (std::f64::consts::TAU * k as f64 / n as f64).cos();
                let mut angles = rest;
                for d in 0..5 {
                    let [lo, hi] = self.ranges[d][slot];
                    // k = 0 and k = n land on hi, k = n/2 on lo
                    angles[d][slot] = if k == n / 2 {
                        lo
                    } else if k == 0 || k == n {
                        hi
                    } else {
                        mid([lo, hi]) + 0.5 * (hi - lo) * c
                    };
                }
                let t = out.len() as f64 / rate_hz;
                out.push(self.frame(t, &angles, &Isometry3::identity(), WristPose::default()));
            }
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StreamHeader {
    schema: String,
    version: u32,
}

/// Reads a line-delimited keypoint stream: one header line, then one frame
/// per line. Timestamps must strictly increase.
pub fn read_keypoint_stream(reader: impl BufRead) -> Result<Vec<KeypointFrame>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty keypoint stream".into()))??;
    let header: StreamHeader = serde_json::from_str(&header)?;
    if header.schema != STREAM_SCHEMA || header.version != STREAM_VERSION {
        return Err(Error::Parse(format!(
            "unsupported keypoint stream {} v{}",
            header.schema, header.version
        )));
    }
    let mut frames: Vec<KeypointFrame> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: KeypointFrame = serde_json::from_str(&line)?;
        if let Some(prev) = frames.last() {
            if f.t <= prev.t {
                return Err(Error::Parse(format!("timestamp {} does not increase after {}", f.t, prev.t)));
            }
        }
        frames.push(f);
    }
    Ok(frames)
}

pub fn write_keypoint_stream(mut w: impl Write, frames: &[KeypointFrame]) -> Result<()> {
    let header = StreamHeader {
        schema: STREAM_SCHEMA.into(),
        version: STREAM_VERSION,
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for f in frames {
        writeln!(w, "{}", serde_json::to_string(f)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_angles(hand: &SyntheticHand, rng: &mut impl Rng) -> [[f64; 4]; 5] {
        std::array::from_fn(|d| std::array::from_fn(|s| {
            let [lo, hi] = hand.ranges[d][s];
            rng.random_range(lo..=hi)
        }))
    }

    fn random_camera(rng: &mut impl Rng) -> Isometry3<f64> {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        Isometry3::new(
            Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.3..1.0)),
            axis * rng.random_range(0.0..3.0),
        )
    }

    #[test]
    fn straight_hand_has_zero_flexion() {
        let hand = SyntheticHand::default();
        let f = hand.frame(0.0, &[[0.0; 4]; 5], &Isometry3::identity(), WristPose::default());
        let a = keypoints_to_full_angles(&f).unwrap();
        for d in a {
            for v in d {
                assert!(v.abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn right_angle_at_pip() {
        let hand = SyntheticHand::default();
        let mut angles = [[0.0; 4]; 5];
        angles[1][2] = std::f64::consts::FRAC_PI_2;
        let f = hand.frame(0.0, &angles, &Isometry3::identity(), WristPose::default());
        let a = keypoints_to_angles(&f).unwrap();
        assert!((a[JointId::new(Digit::Index, Slot::Pip)] - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn generator_roundtrip_under_any_camera() {
        let hand = SyntheticHand::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let angles = random_angles(&hand, &mut rng);
            let cam = random_camera(&mut rng);
            let f = hand.frame(0.0, &angles, &cam, WristPose::default());
            let got = keypoints_to_full_angles(&f).unwrap();
            for d in 0..5 {
                for s in 0..4 {
                    assert!((got[d][s] - angles[d][s]).abs() < 1e-9, "{d} {s}: {} vs {}", got[d][s], angles[d][s]);
                }
            }
        }
    }

    #[test]
    fn coincident_points_rejected() {
        let hand = SyntheticHand::default();
        let mut f = hand.frame(0.0, &[[0.3; 4]; 5], &Isometry3::identity(), WristPose::default());
        f.landmarks[7] = f.landmarks[6];
        assert!(matches!(keypoints_to_angles(&f), Err(Error::FrameRejected(_))));
        let mut f = hand.frame(0.0, &[[0.3; 4]; 5], &Isometry3::identity(), WristPose::default());
        f.landmarks[5] = f.landmarks[0];
        assert!(matches!(keypoints_to_angles(&f), Err(Error::FrameRejected(_))));
        f.landmarks[5][0] = f64::NAN;
        assert!(matches!(keypoints_to_angles(&f), Err(Error::FrameRejected(_))));
    }

    #[test]
    fn sweep_hits_range_ends() {
        let hand = SyntheticHand::default();
        let frames = hand.calibration_sweep(20, 30.0);
        assert_eq!(frames.len(), 4 * 21);
        assert!(frames.windows(2).all(|w| w[1].t > w[0].t));
        let pip: Vec<f64> = frames
            .iter()
            .map(|f| keypoints_to_angles(f).unwrap()[JointId::new(Digit::Ring, Slot::Pip)])
            .collect();
        let lo = pip.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pip.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo.abs() < 1e-9 && (hi - 1.7).abs() < 1e-9);
    }

    #[test]
    fn stream_roundtrip_is_exact() {
        let hand = SyntheticHand::default();
        let mut frames = hand.calibration_sweep(6, 30.0);
        frames[3].wrist_pose = WristPose::from_isometry(&Isometry3::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.3, 0.1, -0.2)));
        let mut buf = Vec::new();
        write_keypoint_stream(&mut buf, &frames).unwrap();
        let back = read_keypoint_stream(buf.as_slice()).unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn stream_rejects_bad_order_and_header() {
        let hand = SyntheticHand::default();
        let mut frames = hand.calibration_sweep(4, 30.0);
        frames.swap(1, 2);
        let mut buf = Vec::new();
        write_keypoint_stream(&mut buf, &frames).unwrap();
        assert!(read_keypoint_stream(buf.as_slice()).is_err());
        assert!(read_keypoint_stream(&b"{\"schema\":\"x\",\"version\":1}\n"[..]).is_err());
    }

    #[test]
    fn wrist_pose_isometry_roundtrip() {
        let iso = Isometry3::new(Vector3::new(0.1, -0.2, 0.3), Vector3::new(0.4, 0.0, 1.0));
        let back = WristPose::from_isometry(&iso).to_isometry();
        assert!((back.translation.vector - iso.translation.vector).norm() < 1e-15);
        assert!(back.rotation.angle_to(&iso.rotation) < 1e-12);
    }
}
