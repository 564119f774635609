//! The 33-grasp preset library.
//!
//! Presets are joint-angle poses authored offline with [`author_pose`] and
//! stored in a versioned TOML file. Each carries geometric predicates that
//! [`validate_preset`] evaluates through forward kinematics.

mod author;
mod predicate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{check_pose, forward_kinematics_unchecked, Digit, HandSpec, JointAngles, Slot};

pub use author::{author_pose, AuthorOptions, Authored};
pub use predicate::{fit_sphere, Check, Predicate, SphereFit, SPHERE_RADIUS_BAND};

pub const PRESET_FORMAT: &str = "craft-grasps";
pub const PRESET_VERSION: u32 = 1;
pub const PRESET_COUNT: usize = 33;
/// Default pinch tolerance, m.
pub const PINCH_EPS: f64 = 0.005;
/// Phalanx scale factors used by [`validate_perturbed`].
pub const PERTURBATIONS: [f64; 2] = [0.9, 1.1];
/// Tolerance multiplier applied on perturbed hands.
pub const PERTURBED_RELAX: f64 = 2.0;

/// The taxonomy's 33 grasp names in canonical order.
pub const FEIX_NAMES: [&str; PRESET_COUNT] = [
    "Large Diameter",
    "Small Diameter",
    "Medium Wrap",
    "Adducted Thumb",
    "Light Tool",
    "Prismatic 4 Finger",
    "Prismatic 3 Finger",
    "Prismatic 2 Finger",
    "Palmar Pinch",
    "Power Disk",
    "Power Sphere",
    "Precision Disk",
    "Precision Sphere",
    "Tripod",
    "Fixed Hook",
    "Lateral",
    "Index Finger Extension",
    "Extension Type",
    "Distal Type",
    "Writing Tripod",
    "Tripod Variation",
    "Parallel Extension",
    "Adduction Grip",
    "Tip Pinch",
    "Lateral Tripod",
    "Sphere 4 Finger",
    "Quadpod",
    "Sphere 3 Finger",
    "Stick",
    "Palmar",
    "Ring",
    "Ventral",
    "Inferior Pincer",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Power,
    Precision,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspPreset {
    pub name: String,
    /// Position in the taxonomy, 1-based.
    pub feix: u32,
    pub category: Category,
    pub q: JointAngles,
    pub predicates: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateResult {
    pub predicate: Predicate,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub name: String,
    pub passed: bool,
    pub results: Vec<PredicateResult>,
}

impl Validation {
    /// Largest check residual; positive when something fails.
    pub fn worst_residual(&self) -> f64 {
        self.results
            .iter()
            .flat_map(|r| r.checks.iter().map(Check::residual))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates every predicate of `preset` on `spec`.
pub fn validate_preset(spec: &HandSpec, preset: &GraspPreset) -> Validation {
    validate_with(spec, preset, 1.0)
}

/// Validation on each phalanx scaling of [`PERTURBATIONS`] with tolerances
/// relaxed by [`PERTURBED_RELAX`].
pub fn validate_perturbed(spec: &HandSpec, preset: &GraspPreset) -> Result<Vec<(f64, Validation)>> {
    PERTURBATIONS
        .iter()
        .map(|&s| Ok((s, validate_with(&spec.with_scaled_phalanges(s)?, preset, PERTURBED_RELAX))))
        .collect()
}

pub fn validate_with(spec: &HandSpec, preset: &GraspPreset, relax: f64) -> Validation {
    let fk = forward_kinematics_unchecked(spec, &preset.q);
    let results: Vec<PredicateResult> = preset
        .predicates
        .iter()
        .map(|p| {
            let checks = p.checks(&fk, &preset.q, relax);
            PredicateResult {
                predicate: p.clone(),
                passed: checks.iter().all(Check::passes),
                checks,
            }
        })
        .collect();
    Validation {
        name: preset.name.clone(),
        passed: results.iter().all(|r| r.passed),
        results,
    }
}

/// The immutable preset set, looked up by name.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspLibrary {
    presets: Vec<GraspPreset>,
}

impl GraspLibrary {
    pub fn presets(&self) -> &[GraspPreset] {
        &self.presets
    }

    pub fn get(&self, name: &str) -> Option<&GraspPreset> {
        self.presets.iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.presets.iter().map(|p| p.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.presets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presets.is_empty()
    }

    pub fn to_toml_string(&self) -> String {
        let file = FileModel {
            format: PRESET_FORMAT.into(),
            version: PRESET_VERSION,
            grasp: self.presets.iter().map(RawPreset::from_preset).collect(),
        };
        toml::to_string(&file).expect("preset file serializes")
    }
}

/// Presets shipped with the crate, checked against `spec`'s joint limits.
pub fn load_presets(spec: &HandSpec) -> Result<GraspLibrary> {
    parse_presets(spec, default_presets_toml())
}

pub fn load_presets_from(spec: &HandSpec, path: impl AsRef<Path>) -> Result<GraspLibrary> {
    parse_presets(spec, &std::fs::read_to_string(path)?)
}

pub fn default_presets_toml() -> &'static str {
    include_str!("../../data/grasps.toml")
}

/// Parses a preset file. Rejects duplicates, names outside the taxonomy,
/// missing grasps, poses off the limits or the coupling, and presets
/// without predicates.
pub fn parse_presets(spec: &HandSpec, text: &str) -> Result<GraspLibrary> {
    let file: FileModel = toml::from_str(text)?;
    if file.format != PRESET_FORMAT || file.version != PRESET_VERSION {
        return Err(Error::Presets(format!(
            "expected {PRESET_FORMAT} v{PRESET_VERSION}, found {} v{}",
            file.format, file.version
        )));
    }
    let mut seen = BTreeSet::new();
    let mut duplicates = Vec::new();
    let mut presets = Vec::with_capacity(file.grasp.len());
    for raw in file.grasp {
        if !seen.insert(raw.name.clone()) {
            duplicates.push(raw.name.clone());
            continue;
        }
        presets.push(raw.into_preset(spec)?);
    }
    if !duplicates.is_empty() {
        return Err(Error::Presets(format!("duplicate presets: {}", duplicates.join(", "))));
    }
    let expected: BTreeSet<String> = FEIX_NAMES.iter().map(|s| s.to_string()).collect();
    let missing: Vec<_> = expected.difference(&seen).cloned().collect();
    let extra: Vec<_> = seen.difference(&expected).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Presets(format!(
            "missing [{}], unexpected [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    presets.sort_by_key(|p| p.feix);
    Ok(GraspLibrary { presets })
}

#[derive(Debug, Serialize, Deserialize)]
struct FileModel {
    format: String,
    version: u32,
    grasp: Vec<RawPreset>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPreset {
    name: String,
    feix: u32,
    category: Category,
    /// Per digit, in slot order.
    angles: BTreeMap<Digit, [f64; 4]>,
    predicates: Vec<Predicate>,
}

impl RawPreset {
    fn from_preset(p: &GraspPreset) -> RawPreset {
        RawPreset {
            name: p.name.clone(),
            feix: p.feix,
            category: p.category,
            angles: Digit::ALL
                .iter()
                .map(|&d| (d, Slot::ALL.map(|s| p.q[(d, s)])))
                .collect(),
            predicates: p.predicates.clone(),
        }
    }

    fn into_preset(self, spec: &HandSpec) -> Result<GraspPreset> {
        let bad = |why: String| Error::Presets(format!("{}: {why}", self.name));
        let mut q = JointAngles::zeros();
        for d in Digit::ALL {
            let a = self.angles.get(&d).ok_or_else(|| bad(format!("no angles for {d}")))?;
            for (slot, v) in Slot::ALL.into_iter().zip(a) {
                q[(d, slot)] = *v;
            }
        }
        check_pose(spec, &q).map_err(|e| bad(e.to_string()))?;
        if self.predicates.is_empty() {
            return Err(bad("no predicates".into()));
        }
        Ok(GraspPreset {
            name: self.name,
            feix: self.feix,
            category: self.category,
            q,
            predicates: self.predicates,
        })
    }
}

impl GraspPreset {
    pub fn new(name: &str, feix: u32, category: Category, q: JointAngles, predicates: Vec<Predicate>) -> Self {
        GraspPreset {
            name: name.into(),
            feix,
            category,
            q,
            predicates,
        }
    }
}

impl GraspLibrary {
    /// Builds a library from presets without the taxonomy checks.
    pub fn from_presets(presets: Vec<GraspPreset>) -> Self {
        GraspLibrary { presets }
    }
}
