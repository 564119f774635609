//! Regenerates `data/grasps.toml` by solving every preset's predicates.
//!
//! Run with `cargo run --release -p craft-core --example author_grasps > crates/core/data/grasps.toml`.

use craft_core::grasp::{
    author_pose, validate_perturbed, validate_preset, AuthorOptions, Category, GraspLibrary, GraspPreset, Predicate, PINCH_EPS,
};
use craft_core::hand::{Digit, HandSpec, JointAngles, Segment, Slot};

use Category::{Intermediate, Power, Precision};
use Digit::{Index as I, Middle as M, Pinky as P, Ring as R, Thumb as T};

const FINGERS: [Digit; 4] = [I, M, R, P];
const CURL: [Slot; 3] = [Slot::McpFlex, Slot::Pip, Slot::Dip];

fn flexion(digits: &[Digit], slots: &[Slot], min: f64, max: f64) -> Predicate {
    Predicate::Flexion {
        digits: digits.to_vec(),
        slots: slots.to_vec(),
        min,
        max,
    }
}

fn curl(digits: &[Digit], min: f64, max: f64) -> Predicate {
    flexion(digits, &CURL, min, max)
}

fn pinch(digits: &[Digit], eps: f64) -> Predicate {
    Predicate::Pinch {
        digits: digits.to_vec(),
        eps,
    }
}

fn opposition(digits: &[Digit], eps: f64) -> Predicate {
    Predicate::Opposition {
        digits: digits.to_vec(),
        eps,
    }
}

fn lateral(target: Digit, segment: Segment, eps: f64) -> Predicate {
    Predicate::LateralOpposition { target, segment, eps }
}

fn plane(digits: &[Digit]) -> Predicate {
    Predicate::Plane {
        digits: digits.to_vec(),
        tol: 0.003,
    }
}

fn palm_side(digits: &[Digit], depth: f64) -> Predicate {
    Predicate::PalmSide {
        digits: digits.to_vec(),
        depth,
    }
}

fn sphere(digits: &[Digit], radius: f64) -> Predicate {
    Predicate::Sphere {
        digits: digits.to_vec(),
        radius,
        tol: 0.002,
    }
}

/// Seed pose: thumb `[flex, abd, mp]`, then `[mcp flex, abd, pip]` for every
/// finger.
fn seed(thumb: [f64; 3], fingers: [f64; 3]) -> JointAngles {
    let mut q = JointAngles::zeros();
    for d in Digit::ALL {
        let v = if d == T { thumb } else { fingers };
        q[(d, Slot::McpFlex)] = v[0];
        q[(d, Slot::McpAbd)] = v[1];
        q[(d, Slot::Pip)] = v[2];
        q[(d, Slot::Dip)] = v[2];
    }
    q
}

fn targets() -> Vec<(&'static str, Category, Vec<Predicate>, JointAngles)> {
    let e = PINCH_EPS;
    vec![
        ("Large Diameter", Power, vec![curl(&FINGERS, 1.6, 2.8), palm_side(&[T, I, M, R, P], 0.025)], seed([0.8, 0.3, 0.4], [0.5, 0.0, 0.6])),
        ("Small Diameter", Power, vec![curl(&FINGERS, 3.2, 4.6), palm_side(&FINGERS, 0.015)], seed([0.9, 0.3, 0.6], [0.9, 0.0, 1.2])),
        ("Medium Wrap", Power, vec![curl(&FINGERS, 2.4, 3.4), palm_side(&[T, I, M, R, P], 0.02)], seed([0.9, 0.3, 0.5], [0.7, 0.0, 0.9])),
        ("Adducted Thumb", Power, vec![curl(&FINGERS, 2.6, 3.8), lateral(I, Segment::Middle, e)], seed([0.3, -0.3, 0.3], [0.8, 0.0, 1.0])),
        ("Light Tool", Power, vec![curl(&FINGERS, 2.2, 3.4), lateral(I, Segment::Distal, e)], seed([0.4, 0.0, 0.3], [0.7, 0.0, 0.9])),
        ("Prismatic 4 Finger", Precision, vec![opposition(&FINGERS, e), plane(&FINGERS)], seed([0.9, 0.4, 0.3], [0.6, 0.0, 0.4])),
        ("Prismatic 3 Finger", Precision, vec![opposition(&[I, M], e), plane(&[I, M]), curl(&[R, P], 0.0, 1.0)], seed([0.9, 0.4, 0.3], [0.6, 0.0, 0.4])),
        ("Prismatic 2 Finger", Precision, vec![pinch(&[T, I], e), curl(&[I], 0.8, 2.2)], seed([0.8, 0.4, 0.3], [0.6, 0.0, 0.3])),
        ("Palmar Pinch", Precision, vec![pinch(&[T, I], e), curl(&[I], 1.6, 2.8), curl(&[M, R, P], 0.0, 0.8)], seed([0.8, 0.4, 0.3], [0.2, 0.0, 0.2])),
        ("Power Disk", Power, vec![curl(&FINGERS, 1.4, 2.4), plane(&FINGERS), palm_side(&[T, I, M, R, P], 0.03)], seed([0.9, 0.5, 0.3], [0.6, 0.0, 0.5])),
        ("Power Sphere", Power, vec![sphere(&[T, I, M, R, P], 0.035), palm_side(&FINGERS, 0.03)], seed([0.9, 0.4, 0.4], [0.6, 0.0, 0.7])),
        ("Precision Disk", Precision, vec![plane(&[T, I, M, R, P]), sphere(&[T, I, M, R, P], 0.04)], seed([0.9, 0.5, 0.3], [0.7, 0.0, 0.3])),
        ("Precision Sphere", Precision, vec![sphere(&[T, I, M, R, P], 0.03), curl(&FINGERS, 0.8, 2.6)], seed([0.9, 0.5, 0.3], [0.7, 0.0, 0.4])),
        ("Tripod", Precision, vec![sphere(&[T, I, M], 0.015), curl(&[R, P], 0.0, 1.2)], seed([0.9, 0.4, 0.3], [0.8, 0.0, 0.4])),
        ("Fixed Hook", Power, vec![flexion(&FINGERS, &[Slot::McpFlex], 0.0, 0.3), flexion(&FINGERS, &[Slot::Pip, Slot::Dip], 2.2, 3.4), flexion(&[T], &[Slot::McpFlex], 0.0, 0.3)], seed([0.1, 0.0, 0.1], [0.1, 0.0, 1.4])),
        ("Lateral", Intermediate, vec![lateral(I, Segment::Middle, e), curl(&[I], 2.6, 4.0), curl(&[M, R, P], 2.8, 4.6)], seed([0.3, -0.3, 0.2], [0.9, 0.0, 1.2])),
        ("Index Finger Extension", Power, vec![curl(&[I], 0.0, 0.4), curl(&[M, R, P], 2.8, 4.6), palm_side(&[M, R, P], 0.02)], seed([0.6, 0.2, 0.5], [0.9, 0.0, 1.2])),
        ("Extension Type", Power, vec![plane(&[T, I, M, R, P]), flexion(&FINGERS, &[Slot::Pip, Slot::Dip], 0.0, 0.5)], seed([0.9, 0.4, 0.2], [0.8, 0.0, 0.1])),
        ("Distal Type", Power, vec![opposition(&[I, M], 0.008), curl(&[R, P], 2.8, 4.6)], seed([0.9, 0.4, 0.3], [0.7, 0.0, 0.5])),
        ("Writing Tripod", Precision, vec![pinch(&[T, I], e), curl(&[M], 1.8, 3.2), curl(&[R, P], 2.8, 4.6)], seed([0.8, 0.4, 0.3], [0.8, 0.0, 0.8])),
        ("Tripod Variation", Intermediate, vec![pinch(&[T, I], 0.01), lateral(M, Segment::Distal, 0.01), curl(&[R, P], 2.0, 4.6)], seed([0.8, 0.4, 0.3], [0.8, 0.0, 0.8])),
        ("Parallel Extension", Precision, vec![plane(&FINGERS), flexion(&FINGERS, &[Slot::Pip, Slot::Dip], 0.0, 0.4), flexion(&FINGERS, &[Slot::McpFlex], 0.5, 1.57), opposition(&[I, M], 0.015)], seed([0.9, 0.5, 0.2], [0.9, 0.0, 0.1])),
        ("Adduction Grip", Intermediate, vec![Predicate::AdductionGap { a: I, b: M, max_gap: 0.008 }, curl(&[I, M], 0.0, 1.0)], seed([0.2, 0.0, 0.2], [0.2, 0.0, 0.2])),
        ("Tip Pinch", Precision, vec![pinch(&[T, I], e), curl(&[I], 2.4, 3.6)], seed([0.8, 0.4, 0.5], [0.6, 0.0, 0.9])),
        ("Lateral Tripod", Intermediate, vec![lateral(M, Segment::Distal, 0.006), curl(&[R, P], 2.8, 4.6), curl(&[I], 1.0, 3.0)], seed([0.7, 0.2, 0.3], [0.8, 0.0, 0.8])),
        ("Sphere 4 Finger", Power, vec![sphere(&[T, I, M, R], 0.035), curl(&[P], 2.0, 4.6)], seed([0.9, 0.4, 0.4], [0.6, 0.0, 0.7])),
        ("Quadpod", Precision, vec![sphere(&[T, I, M, R], 0.022), curl(&[P], 0.0, 2.0)], seed([0.9, 0.4, 0.3], [0.8, 0.0, 0.4])),
        ("Sphere 3 Finger", Power, vec![sphere(&[T, I, M], 0.03), curl(&[R, P], 2.0, 4.6)], seed([0.9, 0.4, 0.4], [0.6, 0.0, 0.7])),
        ("Stick", Intermediate, vec![curl(&FINGERS, 2.4, 4.0), lateral(I, Segment::Proximal, 0.008)], seed([0.3, -0.3, 0.2], [0.7, 0.0, 0.9])),
        ("Palmar", Power, vec![plane(&FINGERS), flexion(&FINGERS, &[Slot::McpFlex], 0.8, 1.57), flexion(&FINGERS, &[Slot::Pip, Slot::Dip], 0.0, 0.6)], seed([0.5, 0.3, 0.2], [1.0, 0.0, 0.2])),
        ("Ring", Power, vec![pinch(&[T, I], e), curl(&[I], 1.8, 3.2), curl(&[M, R, P], 1.8, 4.6)], seed([0.8, 0.4, 0.4], [0.7, 0.0, 0.7])),
        ("Ventral", Intermediate, vec![lateral(I, Segment::Distal, 0.006), curl(&FINGERS, 1.0, 2.6)], seed([0.4, 0.0, 0.3], [0.5, 0.0, 0.5])),
        ("Inferior Pincer", Precision, vec![pinch(&[T, I], e), curl(&[I], 1.2, 2.6), curl(&[M, R, P], 0.0, 1.0)], seed([0.8, 0.4, 0.3], [0.5, 0.0, 0.5])),
    ]
}

/// Rounds to 1e-4 rad so the file stays readable; Dip is re-tied to Pip.
fn rounded(q: &JointAngles, spec: &HandSpec) -> JointAngles {
    let mut out = *q;
    for (id, v) in q.iter() {
        let [lo, hi] = spec.limits(id);
        out[id] = ((v * 1e4).round() / 1e4).clamp(lo, hi);
    }
    for d in Digit::ALL {
        out[(d, Slot::Dip)] = out[(d, Slot::Pip)];
    }
    out
}

fn main() {
    let spec = HandSpec::default();
    let opts = AuthorOptions::default();
    let names = craft_core::grasp::FEIX_NAMES;
    let mut presets = Vec::new();
    let only: Option<String> = std::env::args().nth(1);
    for (name, category, predicates, seed) in targets() {
        if only.as_deref().is_some_and(|o| o != name) {
            continue;
        }
        let authored = author_pose(&spec, &predicates, &seed, &opts).expect("scaled spec is valid");
        eprintln!("{name:<24} violation {:.4}", authored.violation);
        let feix = names.iter().position(|n| *n == name).expect("taxonomy name") as u32 + 1;
        let preset = GraspPreset::new(name, feix, category, rounded(&authored.q, &spec), predicates);
        let mut runs = vec![(1.0, validate_preset(&spec, &preset))];
        runs.extend(validate_perturbed(&spec, &preset).expect("scaled spec is valid"));
        for (scale, v) in runs {
            for c in v.results.iter().flat_map(|r| &r.checks).filter(|c| !c.passes()) {
                eprintln!("    x{scale}: {} {:.5} > {:.5}", c.label, c.value, c.limit);
            }
        }
        presets.push(preset);
    }
    print!("# Authored grasp presets; regenerate with the author_grasps example.\n{}", GraspLibrary::from_presets(presets).to_toml_string());
}
