//! Scenario documents: species tables, populations, anchors and parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Bounds, Vec2};
use crate::potentials::PotentialParams;
use crate::sampler::SamplerParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub name: String,
    pub mass: f64,
    /// Charge magnitude.
    pub charge: f64,
    pub total_cap: u32,
    /// Per-species bond caps keyed by species name. Missing entries mean 0.
    #[serde(default)]
    pub pair_caps: BTreeMap<String, u32>,
    #[serde(default = "default_color")]
    pub color: String,
}

fn default_color() -> String {
    "#888888".to_string()
}

impl SpeciesSpec {
    pub fn pair_cap(&self, other: &str) -> u32 {
        self.pair_caps.get(other).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSize {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub species: String,
    pub x: f64,
    pub y: f64,
}

impl AnchorSpec {
    pub fn pose(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub world: WorldSize,
    pub sensing_radius: f64,
    pub v_max: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub ticks: u64,
    pub species: Vec<SpeciesSpec>,
    pub population: BTreeMap<String, usize>,
    #[serde(default)]
    pub anchors: Vec<AnchorSpec>,
    #[serde(default)]
    pub sampler: SamplerParams,
    #[serde(default)]
    pub potential: PotentialParams,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_stride")]
    pub metrics_stride: u64,
    /// Maximum separation at which a mutual partition pair counts as a bond.
    /// Defaults to `1.5 * r0`.
    #[serde(default)]
    pub bond_distance_threshold: Option<f64>,
    /// Minimum pairwise separation of the initial placement. Defaults to
    /// `0.3 * sensing_radius`.
    #[serde(default)]
    pub min_separation: Option<f64>,
    /// Whether anchors contribute to the remaining-bond count.
    #[serde(default = "default_true")]
    pub count_anchor_bonds: bool,
}

fn default_dt() -> f64 {
    0.1
}

fn default_stride() -> u64 {
    10
}

fn default_true() -> bool {
    true
}

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} (field `{path}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.message.as_str()).collect::<Vec<_>>().join("; ")
}

/// Dense per-species lookup tables used on hot paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTable {
    pub names: Vec<String>,
    pub mass: Vec<f64>,
    pub charge: Vec<f64>,
    pub total_cap: Vec<u32>,
    /// `pair_cap[a][b]`: how many robots of species `b` a robot of species `a` may bond.
    pub pair_cap: Vec<Vec<u32>>,
}

impl SpeciesTable {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl Scenario {
    /// Parses a scenario document, fills defaults and validates it.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse {
                line: inner.line(),
                column: inner.column(),
                path,
                message: inner.to_string(),
            }
        })?;
        scenario.resolve_defaults();
        let violations = validate_scenario(&scenario);
        if violations.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(violations))
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                ScenarioError::NotFound(path.display().to_string())
            } else {
                ScenarioError::Io {
                    path: path.display().to_string(),
                    source: e,
                }
            }
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Replaces every omitted derived parameter with its concrete default.
    pub fn resolve_defaults(&mut self) {
        let iters = self.sampler.iterations;
        self.sampler.burn_in.get_or_insert(iters / 2);
        self.sampler.proposal_sigma.get_or_insert(crate::sampler::default_sigma(self.v_max));
        let r0 = self.potential.r0;
        self.potential.r_min_clamp.get_or_insert(0.15 * r0);
        self.bond_distance_threshold.get_or_insert(1.5 * r0);
        self.min_separation.get_or_insert(0.3 * self.sensing_radius);
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.world.width, self.world.height)
    }

    pub fn bond_threshold(&self) -> f64 {
        self.bond_distance_threshold.unwrap_or(1.5 * self.potential.r0)
    }

    pub fn initial_separation(&self) -> f64 {
        self.min_separation.unwrap_or(0.3 * self.sensing_radius)
    }

    /// Number of free (non-anchor) robots.
    pub fn free_count(&self) -> usize {
        self.population.values().sum()
    }

    /// Total robot count including anchors.
    pub fn robot_count(&self) -> usize {
        self.free_count() + self.anchors.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn species_table(&self) -> SpeciesTable {
        SpeciesTable {
            names: self.species.iter().map(|s| s.name.clone()).collect(),
            mass: self.species.iter().map(|s| s.mass).collect(),
            charge: self.species.iter().map(|s| s.charge).collect(),
            total_cap: self.species.iter().map(|s| s.total_cap).collect(),
            pair_cap: self
                .species
                .iter()
                .map(|a| self.species.iter().map(|b| a.pair_cap(&b.name)).collect())
                .collect(),
        }
    }

    /// Upper bound on the number of complete molecules for two-species
    /// scenarios where one species only bonds the other: the limiting
    /// species count. `None` when no simple stoichiometric bound applies.
    pub fn molecule_upper_bound(&self) -> Option<usize> {
        if self.species.len() != 2 {
            return None;
        }
        let (a, b) = (&self.species[0], &self.species[1]);
        let na = *self.population.get(&a.name).unwrap_or(&0);
        let nb = *self.population.get(&b.name).unwrap_or(&0);
        // Identify the centre species: bonds only the other species, never its own.
        let bound = |centre: &SpeciesSpec, nc: usize, leaf: &SpeciesSpec, nl: usize| {
            let k = centre.pair_cap(&leaf.name).min(centre.total_cap) as usize;
            if centre.pair_cap(&centre.name) == 0 && k > 0 && leaf.total_cap == 1 {
                Some(nc.min(nl / k))
            } else {
                None
            }
        };
        bound(b, nb, a, na).or_else(|| bound(a, na, b, nb))
    }
}

/// Checks every scenario invariant. Returns an empty list for a valid scenario.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let positive = |v: f64| v.is_finite() && v > 0.0;

    if !positive(s.world.width) || !positive(s.world.height) {
        out.push(Violation::new("world", "world width and height must be > 0"));
    }
    if !positive(s.sensing_radius) {
        out.push(Violation::new("sensing_radius", "sensing_radius must be > 0"));
    }
    if !positive(s.v_max) {
        out.push(Violation::new("v_max", "v_max must be > 0"));
    }
    if !positive(s.dt) {
        out.push(Violation::new("dt", "dt must be > 0"));
    }
    if s.metrics_stride == 0 {
        out.push(Violation::new("metrics_stride", "metrics_stride must be >= 1"));
    }
    if s.species.is_empty() {
        out.push(Violation::new("species", "at least one species is required"));
    }

    let mut seen = std::collections::BTreeSet::new();
    for sp in &s.species {
        if !seen.insert(sp.name.as_str()) {
            out.push(Violation::new("species", format!("species {}: duplicate name", sp.name)));
        }
        if !positive(sp.charge) {
            out.push(Violation::new(
                format!("species.{}.charge", sp.name),
                format!("species {}: charge must be > 0", sp.name),
            ));
        }
        if !positive(sp.mass) {
            out.push(Violation::new(
                format!("species.{}.mass", sp.name),
                format!("species {}: mass must be > 0", sp.name),
            ));
        }
        for other in sp.pair_caps.keys() {
            if s.species_index(other).is_none() {
                out.push(Violation::new(
                    format!("species.{}.pair_caps", sp.name),
                    format!("species {}: unknown species {} in pair_caps", sp.name, other),
                ));
            }
        }
    }

    for name in s.population.keys() {
        if s.species_index(name).is_none() {
            out.push(Violation::new("population", format!("population: unknown species {name}")));
        }
    }
    if s.robot_count() == 0 {
        out.push(Violation::new("population", "empty population"));
    }

    let bounds = s.bounds();
    for (k, a) in s.anchors.iter().enumerate() {
        if s.species_index(&a.species).is_none() {
            out.push(Violation::new(
                format!("anchors[{k}].species"),
                format!("anchor {k}: unknown species {}", a.species),
            ));
        }
        if !a.x.is_finite() || !a.y.is_finite() || !bounds.contains(a.pose()) {
            out.push(Violation::new(format!("anchors[{k}]"), format!("anchor {k} outside bounds")));
        }
    }

    let p = &s.potential;
    if !(p.alpha > 6.0) {
        out.push(Violation::new("potential.alpha", "potential.alpha must be > 6"));
    }
    if !positive(p.r0) {
        out.push(Violation::new("potential.r0", "potential.r0 must be > 0"));
    }
    if !positive(p.epsilon) {
        out.push(Violation::new("potential.epsilon", "potential.epsilon must be > 0"));
    }
    let clamp = p.min_clamp();
    if !(clamp > 0.0 && clamp < p.r0) {
        out.push(Violation::new(
            "potential.r_min_clamp",
            "potential.r_min_clamp must lie in (0, r0)",
        ));
    }

    let sp = &s.sampler;
    if sp.iterations == 0 {
        out.push(Violation::new("sampler.iterations", "sampler.iterations must be >= 1"));
    }
    if let Some(b) = sp.burn_in {
        if b >= sp.iterations {
            out.push(Violation::new("sampler.burn_in", "sampler.burn_in must be < iterations"));
        }
    }
    if let Some(sigma) = sp.proposal_sigma {
        if !positive(sigma) {
            out.push(Violation::new(
                "sampler.proposal_sigma",
                "sampler.proposal_sigma must be > 0",
            ));
        }
    }
    if let Some(t) = s.bond_distance_threshold {
        if !positive(t) {
            out.push(Violation::new(
                "bond_distance_threshold",
                "bond_distance_threshold must be > 0",
            ));
        }
    }
    if let Some(m) = s.min_separation {
        if !(m.is_finite() && m >= 0.0) {
            out.push(Violation::new("min_separation", "min_separation must be >= 0"));
        }
    }
    out
}

/// Scenario documents shipped with the crate.
pub mod presets {
    use super::{Scenario, ScenarioError};

    pub const WATER: &str = include_str!("../scenarios/water.json");
    pub const METHANE: &str = include_str!("../scenarios/methane.json");
    pub const POLYAMINES: &str = include_str!("../scenarios/polyamines.json");
    pub const OXOCARBON: &str = include_str!("../scenarios/oxocarbon.json");
    pub const BRIDGE: &str = include_str!("../scenarios/bridge.json");

    pub const ALL: [(&str, &str); 5] = [
        ("water.json", WATER),
        ("methane.json", METHANE),
        ("polyamines.json", POLYAMINES),
        ("oxocarbon.json", OXOCARBON),
        ("bridge.json", BRIDGE),
    ];

    /// Looks up a bundled preset by file name (`water.json`) or stem (`water`).
    pub fn by_name(name: &str) -> Option<&'static str> {
        let stem = name.trim_end_matches(".json");
        ALL.iter()
            .find(|(n, _)| n.trim_end_matches(".json") == stem)
            .map(|(_, text)| *text)
    }

    pub fn load(name: &str) -> Result<Scenario, ScenarioError> {
        let text = by_name(name).ok_or_else(|| ScenarioError::NotFound(name.to_string()))?;
        Scenario::from_json(text)
    }

    pub fn water() -> Scenario {
        Scenario::from_json(WATER).expect("bundled preset is valid")
    }

    pub fn methane() -> Scenario {
        Scenario::from_json(METHANE).expect("bundled preset is valid")
    }

    pub fn polyamines() -> Scenario {
        Scenario::from_json(POLYAMINES).expect("bundled preset is valid")
    }

    pub fn oxocarbon() -> Scenario {
        Scenario::from_json(OXOCARBON).expect("bundled preset is valid")
    }

    pub fn bridge() -> Scenario {
        Scenario::from_json(BRIDGE).expect("bundled preset is valid")
    }
}
