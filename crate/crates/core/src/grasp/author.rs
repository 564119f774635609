use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::predicate::Predicate;
use super::{PERTURBATIONS, PERTURBED_RELAX};
use crate::error::Result;
use crate::hand::{forward_kinematics_unchecked, HandSpec, JointAngles, JointId};

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorOptions {
    /// Fraction of each check's scale kept as clearance below its limit.
    pub margin: f64,
    /// Weight pulling the pose toward the seed.
    pub regularization: f64,
    pub iterations: usize,
    /// Extra random starts tried when the seed does not converge.
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for AuthorOptions {
    fn default() -> Self {
        AuthorOptions {
            margin: 0.3,
            regularization: 1e-3,
            iterations: 200,
            restarts: 40,
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Authored {
    pub q: JointAngles,
    /// Largest normalized violation left, including the clearance margin;
    /// zero when every check holds with margin on every hand.
    pub violation: f64,
}

/// Searches for a pose near `seed` that satisfies `predicates` on `spec`
/// and on its perturbed variants, by damped least squares on the hinge
/// residuals of every check.
pub fn author_pose(spec: &HandSpec, predicates: &[Predicate], seed: &JointAngles, opts: &AuthorOptions) -> Result<Authored> {
    let mut hands = vec![(spec.clone(), 1.0)];
    for s in PERTURBATIONS {
        hands.push((spec.with_scaled_phalanges(s)?, PERTURBED_RELAX));
    }
    let limits: Vec<[f64; 2]> = JointId::active().map(|id| spec.limits(id)).collect();
    let problem = Problem {
        hands: &hands,
        predicates,
        seed: seed.active(),
        opts,
    };

    let mut best = problem.solve(seed.active(), &limits);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    for _ in 0..opts.restarts {
        if best.violation == 0.0 {
            break;
        }
        let start: [f64; JointId::ACTIVE_COUNT] = std::array::from_fn(|k| {
            let [lo, hi] = limits[k];
            let t: f64 = rng.random_range(0.0..1.0);
            seed.active()[k] + 0.5 * (lo + t * (hi - lo) - seed.active()[k])
        });
        let trial = problem.solve(start, &limits);
        if trial.violation < best.violation {
            best = trial;
        }
    }
    Ok(best)
}

struct Problem<'a> {
    hands: &'a [(HandSpec, f64)],
    predicates: &'a [Predicate],
    seed: [f64; JointId::ACTIVE_COUNT],
    opts: &'a AuthorOptions,
}

impl Problem<'_> {
    fn hinges(&self, x: &[f64; JointId::ACTIVE_COUNT]) -> Vec<f64> {
        let q = JointAngles::from_active(x);
        let mut out = Vec::new();
        for (spec, relax) in self.hands {
            let fk = forward_kinematics_unchecked(spec, &q);
            for p in self.predicates {
                for c in p.checks(&fk, &q, *relax) {
                    out.push(((c.value - c.limit) / c.scale + self.opts.margin).max(0.0));
                }
            }
        }
        out
    }

    fn residuals(&self, x: &[f64; JointId::ACTIVE_COUNT]) -> DVector<f64> {
        let mut r = self.hinges(x);
        let w = self.opts.regularization.sqrt();
        r.extend(x.iter().zip(&self.seed).map(|(a, b)| w * (a - b)));
        DVector::from_vec(r)
    }

    fn violation(&self, x: &[f64; JointId::ACTIVE_COUNT]) -> f64 {
        self.hinges(x).into_iter().fold(0.0, f64::max)
    }

    fn solve(&self, start: [f64; JointId::ACTIVE_COUNT], limits: &[[f64; 2]]) -> Authored {
        let clamp = |x: &mut [f64; JointId::ACTIVE_COUNT]| {
            for (v, [lo, hi]) in x.iter_mut().zip(limits) {
                *v = v.clamp(*lo, *hi);
            }
        };
        let mut x = start;
        clamp(&mut x);
        let mut r = self.residuals(&x);
        let mut cost = r.norm_squared();
        let mut lambda = 1e-2;
        let h = 1e-6;
        for _ in 0..self.opts.iterations {
            if self.violation(&x) == 0.0 && lambda < 1e-6 {
                break;
            }
            let n = JointId::ACTIVE_COUNT;
            let mut jac = DMatrix::zeros(r.len(), n);
            for k in 0..n {
                let mut xp = x;
                xp[k] += h;
                let rp = self.residuals(&xp);
                jac.set_column(k, &((rp - &r) / h));
            }
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &r;
            let mut improved = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for k in 0..n {
                    a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
                }
                let Some(step) = a.lu().solve(&(-&g)) else { break };
                let mut trial = x;
                for k in 0..n {
                    trial[k] += step[k];
                }
                clamp(&mut trial);
                let rt = self.residuals(&trial);
                let ct = rt.norm_squared();
                if ct < cost {
                    x = trial;
                    r = rt;
                    cost = ct;
                    lambda = (lambda * 0.3).max(1e-9);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        Authored {
            q: JointAngles::from_active(&x),
            violation: self.violation(&x),
        }
    }
}
