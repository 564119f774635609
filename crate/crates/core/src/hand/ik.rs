use nalgebra::{Matrix3, Point3, Vector3};

use super::kinematics::{active_limits, digit_frames, digit_jacobian};
use super::{project_coupling, Digit, HandSpec, JointAngles, Slot};
use crate::error::{Error, Result};

/// Damped least-squares settings. Defaults are fixed so results are
/// reproducible; there are no random restarts.
#[derive(Debug, Clone, Copy)]
pub struct IkOptions {
    pub damping: f64,
    pub max_iterations: usize,
    /// A solve succeeds when the residual drops below this, in meters.
    pub tolerance: f64,
    /// Largest joint step per iteration, radians.
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions {
            damping: 1e-3,
            max_iterations: 200,
            tolerance: 1e-4,
            max_step: 0.1,
        }
    }
}

/// Moves one digit's fingertip onto `target` by adjusting its three driven
/// coordinates, starting from `seed`. Other digits are copied from `seed`.
pub fn fingertip_ik(
    spec: &HandSpec,
    digit: Digit,
    target: Point3<f64>,
    seed: &JointAngles,
) -> Result<JointAngles> {
    fingertip_ik_with(spec, digit, target, seed, &IkOptions::default())
}

pub fn fingertip_ik_with(
    spec: &HandSpec,
    digit: Digit,
    target: Point3<f64>,
    seed: &JointAngles,
    opts: &IkOptions,
) -> Result<JointAngles> {
    let mut best = match solve_from(spec, digit, target, seed, opts) {
        Solve::Done(q) => return Ok(q),
        Solve::Outside(residual) => return Err(Error::Unreachable { digit, residual }),
        Solve::Stalled(residual) => residual,
    };
    // The flexion/abduction pair has secondary basins near the gimbal
    // configuration. Retry from a fixed grid over both ranges so results
    // stay deterministic.
    let limits = active_limits(spec, digit);
    let lerp = |k: usize, t: f64| limits[k][0] + t * (limits[k][1] - limits[k][0]);
    for flex in [0.25, 0.75, 0.95] {
        for abd in [0.1, 0.5, 0.9] {
            let mut alt = *seed;
            alt[(digit, Slot::McpFlex)] = lerp(0, flex);
            alt[(digit, Slot::McpAbd)] = lerp(1, abd);
            match solve_from(spec, digit, target, &alt, opts) {
                Solve::Done(q) => return Ok(q),
                Solve::Stalled(r) | Solve::Outside(r) => best = best.min(r),
            }
        }
    }
    Err(Error::Unreachable {
        digit,
        residual: best,
    })
}

enum Solve {
    Done(JointAngles),
    Stalled(f64),
    Outside(f64),
}

fn solve_from(
    spec: &HandSpec,
    digit: Digit,
    target: Point3<f64>,
    seed: &JointAngles,
    opts: &IkOptions,
) -> Solve {
    let limits = active_limits(spec, digit);
    let mut q = project_coupling(seed);
    for (k, slot) in Slot::ACTIVE.into_iter().enumerate() {
        q[(digit, slot)] = q[(digit, slot)].clamp(limits[k][0], limits[k][1]);
    }
    let q = project_coupling(&q);

    let frames = digit_frames(spec, digit, &q);
    let base: Point3<f64> = frames.proximal.translation.vector.into();
    let reach = spec.digit(digit).length();
    let residual = |q: &JointAngles| (target - digit_frames(spec, digit, q).tip()).norm();

    if (target - base).norm() > reach + opts.tolerance {
        return Solve::Outside(residual(&q));
    }

    let mut q = q;
    let mut best = (residual(&q), q);
    // converge well past the acceptance tolerance before stopping
    let stop = opts.tolerance * 1e-3;
    let lambda2 = opts.damping * opts.damping;

    for _ in 0..opts.max_iterations {
        let err: Vector3<f64> = target - digit_frames(spec, digit, &q).tip();
        if err.norm() < stop {
            break;
        }
        let jac = digit_jacobian(spec, digit, &q);
        let current = Slot::ACTIVE.map(|s| q[(digit, s)]);

        let mut free = [true; 3];
        let mut step = Vector3::zeros();
        for _ in 0..3 {
            let mut j = jac;
            for k in 0..3 {
                if !free[k] {
                    j.column_mut(k).fill(0.0);
                }
            }
            let jjt = j * j.transpose() + Matrix3::identity() * lambda2;
            step = match jjt.try_inverse() {
                Some(inv) => j.transpose() * (inv * err),
                None => Vector3::zeros(),
            };
            let mut changed = false;
            for k in 0..3 {
                let [lo, hi] = limits[k];
                let pinned = (current[k] <= lo && step[k] < 0.0) || (current[k] >= hi && step[k] > 0.0);
                if free[k] && pinned {
                    free[k] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let norm = step.amax();
        if norm > opts.max_step {
            step *= opts.max_step / norm;
        }
        // backtrack until the step reduces the residual
        let before = err.norm();
        let mut candidate = q;
        let mut r = f64::INFINITY;
        for _ in 0..8 {
            for (k, slot) in Slot::ACTIVE.into_iter().enumerate() {
                let [lo, hi] = limits[k];
                candidate[(digit, slot)] = (current[k] + step[k]).clamp(lo, hi);
            }
            candidate = project_coupling(&candidate);
            r = residual(&candidate);
            if r < before {
                break;
            }
            step *= 0.5;
        }
        if !(r < before) {
            break;
        }
        q = candidate;
        if r < best.0 {
            best = (r, q);
        }
    }

    if best.0 < opts.tolerance {
        Solve::Done(best.1)
    } else {
        Solve::Stalled(best.0)
    }
}
