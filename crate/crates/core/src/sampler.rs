//! Metropolis-Hastings velocity sampling on the bounded velocity disk.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// Maximum re-draws of a proposal that falls outside the velocity disk.
pub const MAX_REPROPOSALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalMode {
    /// Every proposal is centred on the robot's current velocity.
    #[default]
    Independent,
    /// Proposals are centred on the chain's last retained sample.
    Walk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerParams {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Defaults to `iterations / 2`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Isotropic proposal standard deviation. Defaults to `v_max / 3`.
    #[serde(default)]
    pub proposal_sigma: Option<f64>,
    #[serde(default)]
    pub proposal_mode: ProposalMode,
}

pub fn default_sigma(v_max: f64) -> f64 {
    v_max / 3.0
}

fn default_iterations() -> usize {
    100
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            burn_in: None,
            proposal_sigma: None,
            proposal_mode: ProposalMode::Independent,
        }
    }
}

impl SamplerParams {
    /// Concrete settings for a given speed limit.
    pub fn resolve(&self, v_max: f64) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in.unwrap_or(self.iterations / 2),
            sigma: self.proposal_sigma.unwrap_or(default_sigma(v_max)),
            mode: self.proposal_mode,
            v_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub sigma: f64,
    pub mode: ProposalMode,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub velocity: Vec2,
    pub accepted: usize,
}

/// Metropolis-Hastings chain over velocities with the energy cached for the
/// current sample.
pub struct VelocityChain {
    anchor: Vec2,
    state: Vec2,
    energy: f64,
    sigma: f64,
    v_max: f64,
    mode: ProposalMode,
}

impl VelocityChain {
    pub fn new<E: Fn(Vec2) -> f64>(start: Vec2, energy: &E, cfg: &SamplerConfig) -> Self {
        Self {
            anchor: start,
            state: start,
            energy: energy(start),
            sigma: cfg.sigma,
            v_max: cfg.v_max,
            mode: cfg.mode,
        }
    }

    pub fn state(&self) -> Vec2 {
        self.state
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec2> {
        let centre = match self.mode {
            ProposalMode::Independent => self.anchor,
            ProposalMode::Walk => self.state,
        };
        let v_max_sq = self.v_max * self.v_max;
        // A walk proposal that leaves the disk is a rejection. Redrawing it
        // would bias the chain away from the rim.
        let tries = match self.mode {
            ProposalMode::Independent => MAX_REPROPOSALS,
            ProposalMode::Walk => 1,
        };
        for _ in 0..tries {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let v = centre + Vec2::new(dx, dy) * self.sigma;
            if v.norm_sq() <= v_max_sq {
                return Some(v);
            }
        }
        None
    }

    /// Advances one step; returns whether the proposal was accepted.
    pub fn step<E: Fn(Vec2) -> f64, R: Rng + ?Sized>(&mut self, energy: &E, rng: &mut R) -> bool {
        let proposal = self.propose(rng);
        let threshold: f64 = rng.random();
        let Some(candidate) = proposal else {
            return false;
        };
        let u = energy(candidate);
        let delta = u - self.energy;
        if delta < 0.0 || threshold < (-delta).exp() {
            self.state = candidate;
            self.energy = u;
            true
        } else {
            false
        }
    }
}

/// Samples the next velocity of one robot: runs `iterations` chain steps from
/// `current`, drops the first `burn_in` samples and averages the rest.
pub fn sample_velocity<E, R>(current: Vec2, energy: E, cfg: &SamplerConfig, rng: &mut R) -> SampleOutcome
where
    E: Fn(Vec2) -> f64,
    R: Rng + ?Sized,
{
    if cfg.v_max <= 0.0 {
        return SampleOutcome {
            velocity: Vec2::ZERO,
            accepted: 0,
        };
    }
    let start = current.clamp_norm(cfg.v_max);
    let mut chain = VelocityChain::new(start, &energy, cfg);
    let mut accepted = 0;
    let mut sum = Vec2::ZERO;
    let mut kept = 0usize;
    for k in 1..=cfg.iterations {
        if chain.step(&energy, rng) {
            accepted += 1;
        }
        if k > cfg.burn_in {
            sum += chain.state();
            kept += 1;
        }
    }
    let mean = if kept == 0 { chain.state() } else { sum / kept as f64 };
    SampleOutcome {
        velocity: mean.clamp_norm(cfg.v_max),
        accepted,
    }
}
