//! Robot and world state, and seeded world initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Bounds, Vec2};
use crate::rng;
use crate::scenario::Scenario;

/// Placement attempts per robot before giving up.
pub const PLACEMENT_RETRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: usize,
    pub species: usize,
    pub pose: Vec2,
    pub velocity: Vec2,
    pub is_anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub robots: Vec<RobotState>,
    pub bounds: Bounds,
    pub master_seed: u64,
}

impl WorldState {
    pub fn len(&self) -> usize {
        self.robots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    /// The configuration of the random field: every robot's velocity.
    pub fn configuration(&self) -> Vec<Vec2> {
        self.robots.iter().map(|r| r.velocity).collect()
    }

    pub fn anchor_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.robots.iter().filter(|r| r.is_anchor).map(|r| r.id)
    }

    /// Restores dense ids `0..len` after a removal.
    pub(crate) fn renumber(&mut self) {
        for (k, r) in self.robots.iter_mut().enumerate() {
            r.id = k;
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InitError {
    #[error("could not place robot {robot} with separation {separation} m after {retries} attempts")]
    Placement {
        robot: usize,
        separation: f64,
        retries: usize,
    },
    #[error("unknown species {0}")]
    UnknownSpecies(String),
}

/// Places the population uniformly at random with the scenario's minimum
/// pairwise separation, at rest. Anchors keep their configured poses and are
/// appended after the free robots.
pub fn init_world(scenario: &Scenario, seed: u64) -> Result<WorldState, InitError> {
    let bounds = scenario.bounds();
    let sep = scenario.initial_separation();
    let sep_sq = sep * sep;
    let mut rng = rng::stream(seed, rng::INIT_STREAM, 0);

    let mut robots: Vec<RobotState> = Vec::with_capacity(scenario.robot_count());
    let mut occupied: Vec<Vec2> = scenario.anchors.iter().map(|a| a.pose()).collect();

    for (species, spec) in scenario.species.iter().enumerate() {
        let count = scenario.population.get(&spec.name).copied().unwrap_or(0);
        for _ in 0..count {
            let id = robots.len();
            let mut placed = None;
            for _ in 0..PLACEMENT_RETRIES {
                let p = Vec2::new(
                    rng.random::<f64>() * bounds.width,
                    rng.random::<f64>() * bounds.height,
                );
                if occupied.iter().all(|q| (*q - p).norm_sq() >= sep_sq) {
                    placed = Some(p);
                    break;
                }
            }
            let pose = placed.ok_or(InitError::Placement {
                robot: id,
                separation: sep,
                retries: PLACEMENT_RETRIES,
            })?;
            occupied.push(pose);
            robots.push(RobotState {
                id,
                species,
                pose,
                velocity: Vec2::ZERO,
                is_anchor: false,
            });
        }
    }

    for a in &scenario.anchors {
        let species = scenario
            .species_index(&a.species)
            .ok_or_else(|| InitError::UnknownSpecies(a.species.clone()))?;
        robots.push(RobotState {
            id: robots.len(),
            species,
            pose: bounds.clamp(a.pose()),
            velocity: Vec2::ZERO,
            is_anchor: true,
        });
    }

    Ok(WorldState {
        tick: 0,
        robots,
        bounds,
        master_seed: seed,
    })
}
