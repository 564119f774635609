use craft_core::grasp::{
    fit_sphere, load_presets, parse_presets, validate_perturbed, validate_preset, Category, GraspPreset, Predicate,
    FEIX_NAMES, PINCH_EPS, PRESET_COUNT,
};
use craft_core::hand::{check_pose, forward_kinematics, Digit, HandSpec, JointAngles};
use craft_core::sim::check_sphere_grasp;
use craft_core::Error;
use nalgebra::Point3;

fn spec() -> HandSpec {
    HandSpec::default()
}

#[test]
fn thirty_three_presets_load_in_taxonomy_order() {
    let lib = load_presets(&spec()).unwrap();
    assert_eq!(lib.len(), PRESET_COUNT);
    let names: Vec<&str> = lib.names().collect();
    assert_eq!(names, FEIX_NAMES.to_vec());
    for p in lib.presets() {
        check_pose(&spec(), &p.q).unwrap();
        assert_eq!(p.q.coupling_residual(), 0.0);
        assert!(!p.predicates.is_empty(), "{}", p.name);
    }
    let cats = |c| lib.presets().iter().filter(|p| p.category == c).count();
    assert_eq!(cats(Category::Power) + cats(Category::Precision) + cats(Category::Intermediate), 33);
}

#[test]
fn every_preset_validates_on_the_default_hand() {
    let s = spec();
    let lib = load_presets(&s).unwrap();
    for p in lib.presets() {
        let v = validate_preset(&s, p);
        assert!(v.passed, "{}: worst residual {}", p.name, v.worst_residual());
    }
}

#[test]
fn every_preset_survives_ten_percent_phalanx_scaling() {
    let s = spec();
    let lib = load_presets(&s).unwrap();
    for p in lib.presets() {
        for (scale, v) in validate_perturbed(&s, p).unwrap() {
            assert!(v.passed, "{} at x{scale}: worst residual {}", p.name, v.worst_residual());
        }
    }
}

#[test]
fn prismatic_two_finger_tips_meet() {
    let s = spec();
    let lib = load_presets(&s).unwrap();
    let p = lib.get("Prismatic 2 Finger").unwrap();
    let fk = forward_kinematics(&s, &p.q).unwrap();
    let gap = (fk.tip(Digit::Thumb) - fk.tip(Digit::Index)).norm();
    assert!(gap < PINCH_EPS, "{gap}");
}

/// Oracle: brute-force minimum over 400×400 points sampled along the two
/// proximal links.
#[test]
fn adduction_grip_closes_the_proximal_gap() {
    let s = spec();
    let lib = load_presets(&s).unwrap();
    let p = lib.get("Adduction Grip").unwrap();
    let fk = forward_kinematics(&s, &p.q).unwrap();
    let link = |d: Digit| {
        let pl = fk.digit(d).polyline();
        (pl[0], pl[1])
    };
    let ((a0, a1), (b0, b1)) = (link(Digit::Index), link(Digit::Middle));
    let n = 400;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let pa = a0 + (a1 - a0) * (i as f64 / n as f64);
        for j in 0..=n {
            let pb = b0 + (b1 - b0) * (j as f64 / n as f64);
            best = best.min((pa - pb).norm());
        }
    }
    assert!(best < 0.008, "{best}");
}

#[test]
fn extension_type_tips_share_a_plane() {
    let s = spec();
    let lib = load_presets(&s).unwrap();
    let p = lib.get("Extension Type").unwrap();
    let fk = forward_kinematics(&s, &p.q).unwrap();
    let z: Vec<f64> = Digit::ALL.iter().map(|d| fk.tip(*d).z).collect();
    let mean = z.iter().sum::<f64>() / 5.0;
    assert!(z.iter().all(|v| (v - mean).abs() < 0.003), "{z:?}");
}

#[test]
fn sphere_four_finger_closes_on_its_matched_sphere() {
    let s = spec();
    let lib = load_presets(&s).unwrap();
    let p = lib.get("Sphere 4 Finger").unwrap();
    let fk = forward_kinematics(&s, &p.q).unwrap();
    let digits = [Digit::Thumb, Digit::Index, Digit::Middle, Digit::Ring];
    let tips: Vec<Point3<f64>> = digits.iter().map(|d| fk.tip(*d)).collect();
    let inside = Point3::new(0.06, 0.0, -0.03);
    let fit = fit_sphere(&tips, 0.035, inside);
    let contact = check_sphere_grasp(&s, &p.q, fit.center, fit.radius);
    assert!(contact.contacts >= 4, "{contact:?}");
    assert!(contact.closed);

    let shrunk = check_sphere_grasp(&s, &p.q, fit.center, 0.5 * fit.radius);
    assert!(!shrunk.closed);
}

#[test]
fn flat_hand_fails_a_pinch_with_positive_residual() {
    let s = spec();
    let flat = GraspPreset::new(
        "flat",
        0,
        Category::Precision,
        JointAngles::zeros(),
        vec![Predicate::Pinch {
            digits: vec![Digit::Thumb, Digit::Index],
            eps: PINCH_EPS,
        }],
    );
    let v = validate_preset(&s, &flat);
    assert!(!v.passed);
    assert!(v.worst_residual() > 0.0);
}

#[test]
fn duplicate_and_missing_names_are_rejected() {
    let s = spec();
    let text = craft_core::grasp::default_presets_toml();
    let dup = text.replacen("name = \"Small Diameter\"", "name = \"Large Diameter\"", 1);
    match parse_presets(&s, &dup) {
        Err(Error::Presets(msg)) => assert!(msg.contains("duplicate") && msg.contains("Large Diameter"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let renamed = text.replacen("name = \"Small Diameter\"", "name = \"Tiny Diameter\"", 1);
    match parse_presets(&s, &renamed) {
        Err(Error::Presets(msg)) => assert!(msg.contains("Small Diameter") && msg.contains("Tiny Diameter"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn off_limit_pose_is_rejected() {
    let s = spec();
    let text = craft_core::grasp::default_presets_toml();
    let bad = text.replacen("index = [0.5, 0.0, 0.6, 0.6]", "index = [2.5, 0.0, 0.6, 0.6]", 1);
    assert_ne!(bad, text);
    assert!(parse_presets(&s, &bad).is_err());
}

#[test]
fn library_round_trips_through_toml() {
    let s = spec();
    let lib = load_presets(&s).unwrap();
    let again = parse_presets(&s, &lib.to_toml_string()).unwrap();
    assert_eq!(again, lib);
}
