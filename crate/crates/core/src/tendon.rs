//! Joint space ↔ spool space.
//!
//! Every digit has three routes: an antagonistic pair for MCP flexion and
//! extension, a pair for abduction and adduction, and a single tendon that
//! flexes the coupled PIP/DIP joints against an elastic return band. Each
//! route winds on one spool. Excursion is linear in the joint angles with
//! constant moment arms, so per digit the map from the three driven
//! coordinates to the three spools is a constant 3×3 matrix.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{digit_jacobian, Digit, DigitSpec, HandSpec, JointAngles, JointId, Slot};

/// Ratchet click used by [`retension`] when none is configured: 5°.
pub const DEFAULT_RATCHET_STEP: f64 = 5.0 * std::f64::consts::PI / 180.0;
/// Allowed disagreement between an agonist and its explicit antagonist, m.
pub const ANTAGONIST_TOLERANCE: f64 = 1e-9;

/// Bus id of a motor, `1..=15`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MotorId(pub u8);

impl MotorId {
    pub const COUNT: usize = 15;

    pub fn all() -> impl Iterator<Item = MotorId> {
        (1..=Self::COUNT as u8).map(MotorId)
    }

    /// Zero-based slot in motor-indexed arrays.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl std::fmt::Display for MotorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "m{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteFunction {
    McpFlexExt,
    McpAbdAdd,
    PipDipFlex,
}

impl RouteFunction {
    pub const ALL: [RouteFunction; 3] = [
        RouteFunction::McpFlexExt,
        RouteFunction::McpAbdAdd,
        RouteFunction::PipDipFlex,
    ];

    /// Row in the per-digit arm matrix; matches the driven slot order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RouteFunction::McpFlexExt => "mcp_flex_ext",
            RouteFunction::McpAbdAdd => "mcp_abd_add",
            RouteFunction::PipDipFlex => "pip_dip_flex",
        }
    }

    /// Single tendons cannot push; paired routes always have one side in
    /// tension.
    pub fn is_antagonistic(self) -> bool {
        self != RouteFunction::PipDipFlex
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TendonRoute {
    pub id: String,
    pub digit: Digit,
    pub function: RouteFunction,
    /// Signed moment arm per joint, meters. Positive arms shorten the tendon
    /// (pull it onto the spool) as the joint angle increases.
    pub moment_arms: BTreeMap<JointId, f64>,
    /// Optional explicit arms of the opposing tendon of a pair. When absent
    /// the antagonist is the exact mirror of the agonist.
    pub antagonist_arms: Option<BTreeMap<JointId, f64>>,
    /// Sum of wrap angles over the guide dowels, radians.
    pub wrap_angle_total: f64,
    pub friction_mu: f64,
    pub motor: MotorId,
    pub spool_radius: f64,
    /// Spool angle at the neutral pose, radians.
    pub slack_offset: f64,
}

impl TendonRoute {
    /// Capstan ratio `e^{μΦ}` over the whole route.
    pub fn capstan(&self) -> f64 {
        (self.friction_mu * self.wrap_angle_total).exp()
    }
}

/// Tendon length change `Σ a_i θ_i` over the route's moment arms.
pub fn excursion(route: &TendonRoute, q: &JointAngles) -> f64 {
    route.moment_arms.iter().map(|(id, a)| a * q[*id]).sum()
}

fn antagonist_excursion(route: &TendonRoute, q: &JointAngles) -> Option<f64> {
    route
        .antagonist_arms
        .as_ref()
        .map(|arms| arms.iter().map(|(id, a)| a * q[*id]).sum())
}

/// Excursion per unit of each driven coordinate; the follower's arm is
/// folded into the PIP column.
pub(crate) fn arm_matrix(d: &DigitSpec) -> Matrix3<f64> {
    let mut a = Matrix3::zeros();
    for route in &d.routes {
        for (id, arm) in &route.moment_arms {
            let col = match id.slot {
                Slot::McpFlex => 0,
                Slot::McpAbd => 1,
                Slot::Pip | Slot::Dip => 2,
            };
            a[(route.function.index(), col)] += arm;
        }
    }
    a
}

/// Spool angles indexed by motor (`MotorId::slot`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpoolAngles(pub [f64; MotorId::COUNT]);

impl SpoolAngles {
    pub fn get(&self, m: MotorId) -> f64 {
        self.0[m.slot()]
    }

    pub fn set(&mut self, m: MotorId, v: f64) {
        self.0[m.slot()] = v;
    }

    /// Every spool at its route's slack offset; maps to the neutral pose.
    pub fn neutral(spec: &HandSpec) -> SpoolAngles {
        let mut s = SpoolAngles::default();
        for r in spec.routes() {
            s.set(r.motor, r.slack_offset);
        }
        s
    }
}

/// Spool angle per motor for pose `q`: `excursion / spool_radius + slack_offset`.
pub fn joint_to_motor(spec: &HandSpec, q: &JointAngles) -> Result<SpoolAngles> {
    let mut out = SpoolAngles::default();
    for route in spec.routes() {
        let e = excursion(route, q);
        if let Some(ant) = antagonist_excursion(route, q) {
            if (e + ant).abs() > ANTAGONIST_TOLERANCE {
                return Err(Error::Routing(format!(
                    "{}: agonist excursion {e} m is not matched by antagonist {ant} m",
                    route.id
                )));
            }
        }
        out.set(route.motor, e / route.spool_radius + route.slack_offset);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotorToJoint {
    pub q: JointAngles,
    /// Driven joints whose exact solution fell outside the limits and were
    /// clamped.
    pub saturated: Vec<JointId>,
}

impl MotorToJoint {
    pub fn is_saturated(&self) -> bool {
        !self.saturated.is_empty()
    }
}

/// Inverse of [`joint_to_motor`]. Total over all spool values: anything
/// outside the reachable box is clamped onto the limits and flagged.
pub fn motor_to_joint(spec: &HandSpec, spools: &SpoolAngles) -> MotorToJoint {
    let mut q = JointAngles::zeros();
    let mut saturated = Vec::new();
    for ds in &spec.digits {
        let d = ds.digit;
        let lengths = Vector3::from_fn(|f, _| {
            let r = &ds.routes[f];
            (spools.get(r.motor) - r.slack_offset) * r.spool_radius
        });
        let active = spec.arm_inverse(d) * lengths;
        for (k, slot) in Slot::ACTIVE.into_iter().enumerate() {
            let id = JointId::new(d, slot);
            let [lo, hi] = spec.limits(id);
            let v = active[k];
            let c = v.clamp(lo, hi);
            if c != v {
                saturated.push(id);
            }
            q[id] = c;
        }
        q[(d, Slot::Dip)] = q[(d, Slot::Pip)];
    }
    MotorToJoint { q, saturated }
}

/// Spool interval swept when the driven joints range over their limits.
pub fn spool_range(spec: &HandSpec, motor: MotorId) -> Option<[f64; 2]> {
    let route = spec.route_for_motor(motor)?;
    let a = spec.arm_matrix(route.digit);
    let row = route.function.index();
    let (mut lo, mut hi) = (0.0, 0.0);
    for (k, slot) in Slot::ACTIVE.into_iter().enumerate() {
        let [jl, jh] = spec.limits(JointId::new(route.digit, slot));
        let (x, y) = (a[(row, k)] * jl, a[(row, k)] * jh);
        lo += x.min(y);
        hi += x.max(y);
    }
    let (s, off) = (route.spool_radius, route.slack_offset);
    Some([lo / s + off, hi / s + off])
}

/// Generalized torque each digit's tendons must supply, per driven
/// coordinate: spring load minus the external tip force mapped through `Jᵀ`.
pub fn required_joint_torques(
    spec: &HandSpec,
    q: &JointAngles,
    tip_forces: &[Vector3<f64>; 5],
) -> [Vector3<f64>; 5] {
    Digit::ALL.map(|d| {
        let ds = spec.digit(d);
        let jac = digit_jacobian(spec, d, q);
        let external = jac.transpose() * tip_forces[d.index()];
        let k = ds.spring.stiffness;
        let rest = ds.spring.rest_angle;
        let spring = k * (q[(d, Slot::Pip)] - rest) + k * (q[(d, Slot::Dip)] - rest);
        Vector3::new(0.0, 0.0, spring) - external
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldTorques {
    /// Signed motor torque, N·m, indexed by `MotorId::slot`.
    pub motor_torque: [f64; MotorId::COUNT],
    /// Tension in the loaded tendon of each route, N. For a pair the sign
    /// tells which side carries it.
    pub tension: [f64; MotorId::COUNT],
    /// Single-tendon routes that would have to push; reported as zero torque.
    pub slack: Vec<MotorId>,
}

impl HoldTorques {
    pub fn get(&self, m: MotorId) -> f64 {
        self.motor_torque[m.slot()]
    }
}

/// Motor torques that hold pose `q` against per-digit tip forces and the
/// return springs.
///
/// Tendon tensions solve `Aᵀ T = τ` for the required generalized torque `τ`.
/// A spool holding tension `T` against friction over wrap `Φ` needs
/// `T·r·e^{-μΦ}` when friction helps it hold (`assist_friction`), or
/// `T·r·e^{+μΦ}` when the tendon must slide through the guides.
pub fn static_hold_torque(
    spec: &HandSpec,
    q: &JointAngles,
    tip_forces: &[Vector3<f64>; 5],
    assist_friction: bool,
) -> HoldTorques {
    hold_torques_for(spec, &required_joint_torques(spec, q, tip_forces), assist_friction)
}

/// Motor torques that supply the generalized torques `required` (per digit,
/// driven-coordinate order). Same tension and friction model as
/// [`static_hold_torque`].
pub fn hold_torques_for(spec: &HandSpec, required: &[Vector3<f64>; 5], assist_friction: bool) -> HoldTorques {
    let mut out = HoldTorques {
        motor_torque: [0.0; MotorId::COUNT],
        tension: [0.0; MotorId::COUNT],
        slack: Vec::new(),
    };
    for ds in &spec.digits {
        let d = ds.digit;
        let tension = spec.arm_inverse(d).transpose() * required[d.index()];
        for route in &ds.routes {
            let t = tension[route.function.index()];
            let m = route.motor;
            if !route.function.is_antagonistic() && t < 0.0 {
                out.slack.push(m);
                continue;
            }
            let capstan = route.capstan();
            let factor = if assist_friction { 1.0 / capstan } else { capstan };
            out.tension[m.slot()] = t;
            out.motor_torque[m.slot()] = t * route.spool_radius * factor;
        }
    }
    out
}

/// Takes up `measured_slack` meters of slack on the ratchet spool with the
/// default 5° ratchet.
pub fn retension(route: &TendonRoute, measured_slack: f64) -> TendonRoute {
    retension_with_step(route, measured_slack, DEFAULT_RATCHET_STEP)
}

/// Advances the slack offset by whole ratchet clicks, rounding up so the
/// tendon is never left looser than measured. Negative slack is ignored.
pub fn retension_with_step(route: &TendonRoute, measured_slack: f64, step: f64) -> TendonRoute {
    let mut out = route.clone();
    let angle = measured_slack.max(0.0) / route.spool_radius;
    // absorb rounding noise on exact multiples of the step
    let clicks = (angle / step - 1e-9).ceil().max(0.0);
    out.slack_offset += clicks * step;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::project_coupling;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(spec: &HandSpec, rng: &mut impl Rng) -> JointAngles {
        let mut q = JointAngles::zeros();
        for id in JointId::active() {
            let [lo, hi] = spec.limits(id);
            q[id] = rng.random_range(lo..=hi);
        }
        project_coupling(&q)
    }

    fn index_route(spec: &HandSpec, f: RouteFunction) -> &TendonRoute {
        spec.digit(Digit::Index).route(f)
    }

    #[test]
    fn neutral_pose_has_zero_excursion() {
        let spec = HandSpec::default();
        for r in spec.routes() {
            assert_eq!(excursion(r, &JointAngles::zeros()), 0.0);
        }
        let s = joint_to_motor(&spec, &JointAngles::zeros()).unwrap();
        assert_eq!(s, SpoolAngles::default());
    }

    #[test]
    fn coupled_excursion_sums_both_joints() {
        let spec = HandSpec::default();
        let mut q = JointAngles::zeros();
        q[(Digit::Index, Slot::Pip)] = 1.0;
        q[(Digit::Index, Slot::Dip)] = 1.0;
        let r = index_route(&spec, RouteFunction::PipDipFlex);
        assert_abs_diff_eq!(excursion(r, &q), 0.010, epsilon = 1e-15);
    }

    #[test]
    fn spool_angle_is_excursion_over_radius() {
        let spec = HandSpec::default()
            .map_routes(|r| {
                if r.function == RouteFunction::PipDipFlex {
                    r.spool_radius = 0.005;
                }
            })
            .unwrap();
        let mut q = JointAngles::zeros();
        q[(Digit::Index, Slot::Pip)] = 1.0;
        q[(Digit::Index, Slot::Dip)] = 1.0;
        let s = joint_to_motor(&spec, &q).unwrap();
        let m = index_route(&spec, RouteFunction::PipDipFlex).motor;
        assert_abs_diff_eq!(s.get(m), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn roundtrip_on_random_poses() {
        let spec = HandSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let q = random_pose(&spec, &mut rng);
            let back = motor_to_joint(&spec, &joint_to_motor(&spec, &q).unwrap());
            assert!(!back.is_saturated());
            for id in JointId::all() {
                assert!((back.q[id] - q[id]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn roundtrip_with_cross_coupled_routing() {
        // the flexion tendon also crosses the MCP
        let spec = HandSpec::default()
            .map_routes(|r| {
                if r.function == RouteFunction::PipDipFlex {
                    r.moment_arms.insert(JointId::new(r.digit, Slot::McpFlex), 0.006);
                }
            })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let q = random_pose(&spec, &mut rng);
            let back = motor_to_joint(&spec, &joint_to_motor(&spec, &q).unwrap());
            for id in JointId::all() {
                assert!((back.q[id] - q[id]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn slack_offsets_map_to_neutral() {
        let spec = HandSpec::default()
            .map_routes(|r| r.slack_offset = 0.3 + r.motor.0 as f64 * 0.01)
            .unwrap();
        let out = motor_to_joint(&spec, &SpoolAngles::neutral(&spec));
        assert!(!out.is_saturated());
        for id in JointId::all() {
            assert_abs_diff_eq!(out.q[id], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_range_spool_clamps_and_flags() {
        let spec = HandSpec::default();
        let m = index_route(&spec, RouteFunction::PipDipFlex).motor;
        let mut s = SpoolAngles::default();
        s.set(m, 100.0);
        let out = motor_to_joint(&spec, &s);
        let pip = JointId::new(Digit::Index, Slot::Pip);
        assert_eq!(out.saturated, vec![pip]);
        assert_eq!(out.q[pip], 1.75);
        assert_eq!(out.q[(Digit::Index, Slot::Dip)], 1.75);
    }

    #[test]
    fn spool_range_covers_limit_box() {
        let spec = HandSpec::default();
        let m = index_route(&spec, RouteFunction::McpAbdAdd).motor;
        let [lo, hi] = spool_range(&spec, m).unwrap();
        assert_abs_diff_eq!(lo, -0.35 * 0.006 / 0.003, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.35 * 0.006 / 0.003, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_antagonist_is_a_routing_error() {
        let spec = HandSpec::default()
            .map_routes(|r| {
                if r.digit == Digit::Middle && r.function == RouteFunction::McpFlexExt {
                    let mut ant = BTreeMap::new();
                    ant.insert(JointId::new(Digit::Middle, Slot::McpFlex), -0.007);
                    r.antagonist_arms = Some(ant);
                }
            })
            .unwrap();
        assert!(joint_to_motor(&spec, &JointAngles::zeros()).is_ok());
        let mut q = JointAngles::zeros();
        q[(Digit::Middle, Slot::McpFlex)] = 0.5;
        assert!(matches!(joint_to_motor(&spec, &q), Err(Error::Routing(_))));

        let mirrored = spec
            .map_routes(|r| {
                if let Some(ant) = r.antagonist_arms.as_mut() {
                    for v in ant.values_mut() {
                        *v = -0.008;
                    }
                }
            })
            .unwrap();
        assert!(joint_to_motor(&mirrored, &q).is_ok());
    }

    #[test]
    fn pip_spool_strictly_increases_with_flexion() {
        let spec = HandSpec::default();
        let m = index_route(&spec, RouteFunction::PipDipFlex).motor;
        let mut last = f64::NEG_INFINITY;
        for k in 0..=50 {
            let mut q = JointAngles::zeros();
            q[(Digit::Index, Slot::Pip)] = 1.75 * k as f64 / 50.0;
            let s = joint_to_motor(&spec, &project_coupling(&q)).unwrap().get(m);
            assert!(s > last);
            last = s;
        }
    }

    fn zero_spring(spec: &HandSpec) -> HandSpec {
        let mut s = spec.clone();
        for d in s.digits.iter_mut() {
            d.spring.stiffness = 1e-300;
        }
        s
    }

    #[test]
    fn no_load_no_torque() {
        let spec = zero_spring(&HandSpec::default());
        let q = project_coupling(&JointAngles::zeros());
        let t = static_hold_torque(&spec, &q, &[Vector3::zeros(); 5], true);
        assert!(t.motor_torque.iter().all(|&x| x == 0.0));
    }

    fn pulled_pose() -> (HandSpec, JointAngles, [Vector3<f64>; 5]) {
        let spec = HandSpec::default();
        let mut q = JointAngles::zeros();
        q[(Digit::Index, Slot::McpFlex)] = 0.8;
        q[(Digit::Index, Slot::Pip)] = 0.9;
        let q = project_coupling(&q);
        let mut f = [Vector3::zeros(); 5];
        f[Digit::Index.index()] = Vector3::new(2.0, 0.0, 0.0);
        (spec, q, f)
    }

    #[test]
    fn frictionless_torque_is_tension_times_radius() {
        let (spec, q, f) = pulled_pose();
        let spec = spec.map_routes(|r| r.friction_mu = 0.0).unwrap();
        let t = static_hold_torque(&spec, &q, &f, true);
        for r in spec.routes() {
            assert_eq!(t.get(r.motor), t.tension[r.motor.slot()] * r.spool_radius);
        }
    }

    #[test]
    fn capstan_ratio_for_point_one_five_over_pi() {
        let (spec, q, f) = pulled_pose();
        let with = spec
            .map_routes(|r| {
                r.friction_mu = 0.15;
                r.wrap_angle_total = std::f64::consts::PI;
            })
            .unwrap();
        let without = spec.map_routes(|r| r.friction_mu = 0.0).unwrap();
        let a = static_hold_torque(&with, &q, &f, true);
        let b = static_hold_torque(&without, &q, &f, true);
        let m = index_route(&spec, RouteFunction::PipDipFlex).motor;
        let ratio = a.get(m) / b.get(m);
        // closed form e^{-0.15 π}
        assert_abs_diff_eq!(ratio, (-0.15 * std::f64::consts::PI).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(ratio, 0.624, epsilon = 5e-4);
    }

    #[test]
    fn assisted_below_frictionless_below_opposed() {
        let (spec, q, f) = pulled_pose();
        let frictionless = spec.map_routes(|r| r.friction_mu = 0.0).unwrap();
        let assisted = static_hold_torque(&spec, &q, &f, true);
        let bare = static_hold_torque(&frictionless, &q, &f, true);
        let opposed = static_hold_torque(&spec, &q, &f, false);
        for r in spec.digit(Digit::Index).routes.iter() {
            let (a, b, c) = (assisted.get(r.motor).abs(), bare.get(r.motor).abs(), opposed.get(r.motor).abs());
            if b > 0.0 {
                assert!(a < b && b < c, "{}: {a} {b} {c}", r.id);
            }
        }
    }

    #[test]
    fn pushing_on_the_flexor_reports_slack() {
        let spec = zero_spring(&HandSpec::default());
        let mut q = JointAngles::zeros();
        q[(Digit::Index, Slot::Pip)] = 0.5;
        let q = project_coupling(&q);
        // a force that flexes the finger further leaves the flexor slack
        let mut f = [Vector3::zeros(); 5];
        f[Digit::Index.index()] = Vector3::new(0.0, 0.0, -3.0);
        let t = static_hold_torque(&spec, &q, &f, true);
        let m = index_route(&spec, RouteFunction::PipDipFlex).motor;
        assert_eq!(t.slack, vec![m]);
        assert_eq!(t.get(m), 0.0);
        assert!(t.tension.iter().all(|&x| x.is_finite()));
    }

    #[test]
    fn retension_rounds_up_to_whole_clicks() {
        let spec = HandSpec::default();
        let r = index_route(&spec, RouteFunction::PipDipFlex).clone();
        assert_eq!(retension(&r, 0.0), r);
        let mut r5 = r.clone();
        r5.spool_radius = 0.005;
        // 0.0005 / 0.005 = 0.1 rad; 5° clicks are 0.0873 rad, so two clicks
        let out = retension(&r5, 0.0005);
        assert_abs_diff_eq!(out.slack_offset, 2.0 * DEFAULT_RATCHET_STEP, epsilon = 1e-15);
        // exactly one click of slack takes exactly one click
        let out = retension(&r5, DEFAULT_RATCHET_STEP * 0.005);
        assert_abs_diff_eq!(out.slack_offset, DEFAULT_RATCHET_STEP, epsilon = 1e-15);
        assert_abs_diff_eq!(DEFAULT_RATCHET_STEP, 0.0873, epsilon = 5e-5);
    }

    proptest! {
        #[test]
        fn excursion_is_linear(a in proptest::array::uniform15(-1.0f64..1.0), b in proptest::array::uniform15(-1.0f64..1.0)) {
            let spec = HandSpec::default();
            let qa = JointAngles::from_active(&a);
            let qb = JointAngles::from_active(&b);
            let mut sum = [0.0; 15];
            for k in 0..15 { sum[k] = a[k] + b[k]; }
            let qs = JointAngles::from_active(&sum);
            for r in spec.routes() {
                let lhs = excursion(r, &qs);
                let rhs = excursion(r, &qa) + excursion(r, &qb);
                prop_assert!((lhs - rhs).abs() < 1e-15);
            }
        }

        #[test]
        fn successive_retension_never_looser(s1 in 0.0f64..0.003, s2 in 0.0f64..0.003) {
            let spec = HandSpec::default();
            let r = index_route(&spec, RouteFunction::McpFlexExt);
            let twice = retension(&retension(r, s1), s2);
            let once = retension(r, s1 + s2);
            prop_assert!(twice.slack_offset >= once.slack_offset - 1e-12);
            prop_assert!(once.slack_offset >= r.slack_offset);
        }

        #[test]
        fn motor_to_joint_is_total(s in proptest::array::uniform15(-50.0f64..50.0)) {
            let spec = HandSpec::default();
            let out = motor_to_joint(&spec, &SpoolAngles(s));
            for id in JointId::all() {
                let [lo, hi] = spec.limits(id);
                prop_assert!(out.q[id] >= lo && out.q[id] <= hi);
            }
            prop_assert_eq!(out.q.coupling_residual(), 0.0);
        }
    }
}
