//! Energy terms of the local Gibbs potential.
//!
//! All pair interactions use an exp-6 (Buckingham) dispersion term plus a
//! Coulomb term whose sign depends on bond membership. Energies are in units
//! of the sampling temperature, which is fixed at one.

use serde::{Deserialize, Serialize};

use crate::bonding::{BondPartition, TickView};
use crate::geom::{Bounds, Vec2};
use crate::scenario::Scenario;

/// Sampling temperature of the Gibbs distribution.
pub const TEMPERATURE: f64 = 1.0;

/// How the kinetic consensus term combines partition velocities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticMode {
    /// `sum_j (v_j - candidate)`, drives the group toward a shared velocity.
    #[default]
    Relative,
    /// `sum_j v_j`, independent of the candidate velocity.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::r0")]
    pub r0: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::coulomb_constant")]
    pub coulomb_constant: f64,
    /// Distance floor for every pair and wall term. Defaults to `0.15 * r0`.
    #[serde(default)]
    pub r_min_clamp: Option<f64>,
    #[serde(default = "defaults::wall_charge")]
    pub wall_charge: f64,
    #[serde(default = "defaults::unit")]
    pub weight_cb: f64,
    #[serde(default = "defaults::unit")]
    pub weight_kinetic: f64,
    #[serde(default)]
    pub kinetic_mode: KineticMode,
}

mod defaults {
    pub fn epsilon() -> f64 {
        1.0
    }
    pub fn r0() -> f64 {
        0.25
    }
    pub fn alpha() -> f64 {
        12.0
    }
    pub fn coulomb_constant() -> f64 {
        0.5
    }
    pub fn wall_charge() -> f64 {
        2.0
    }
    pub fn unit() -> f64 {
        1.0
    }
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self {
            epsilon: defaults::epsilon(),
            r0: defaults::r0(),
            alpha: defaults::alpha(),
            coulomb_constant: defaults::coulomb_constant(),
            r_min_clamp: None,
            wall_charge: defaults::wall_charge(),
            weight_cb: 1.0,
            weight_kinetic: 1.0,
            kinetic_mode: KineticMode::Relative,
        }
    }
}

impl PotentialParams {
    pub fn min_clamp(&self) -> f64 {
        self.r_min_clamp.unwrap_or(0.15 * self.r0)
    }

    pub fn kernel(&self) -> PairKernel {
        PairKernel::new(self)
    }
}

/// Signed charge product: negative (attractive) when `j` is in the
/// observer's bond partition, positive otherwise.
#[inline]
pub fn charge_product(charge_i: f64, charge_j: f64, bonded: bool) -> f64 {
    let magnitude = (charge_i * charge_j).abs();
    if bonded {
        -magnitude
    } else {
        magnitude
    }
}

/// Coulomb-Buckingham pair energy at separation `r` for a signed charge
/// product. Builds a [`PairKernel`] on every call; hot loops should hold one.
pub fn coulomb_buckingham(r: f64, product: f64, params: &PotentialParams) -> f64 {
    PairKernel::new(params).energy(r, product)
}

/// Precomputed exp-6 + Coulomb pair potential.
///
/// Below the inner barrier of the exp-6 bracket the attractive `r^-6` term
/// would dominate and send the energy to minus infinity. Inside that radius
/// the bracket keeps its barrier value and grows with the exponential wall
/// alone, so the energy stays finite and increases monotonically toward
/// contact.
#[derive(Debug, Clone, Copy)]
pub struct PairKernel {
    r0: f64,
    alpha: f64,
    exp_coeff: f64,
    pow_coeff: f64,
    coulomb: f64,
    r_min: f64,
    r_barrier: f64,
    bracket_at_barrier: f64,
    exp_at_barrier: f64,
}

impl PairKernel {
    pub fn new(params: &PotentialParams) -> Self {
        let alpha = params.alpha;
        let r0 = params.r0;
        let exp_coeff = params.epsilon * 6.0 / (alpha - 6.0);
        let pow_coeff = params.epsilon * alpha / (alpha - 6.0);
        let r_min = params.min_clamp();
        let r_barrier = (inner_barrier(alpha) * r0).max(r_min);
        let mut k = Self {
            r0,
            alpha,
            exp_coeff,
            pow_coeff,
            coulomb: params.coulomb_constant,
            r_min,
            r_barrier,
            bracket_at_barrier: 0.0,
            exp_at_barrier: 0.0,
        };
        k.exp_at_barrier = k.exp_term(r_barrier);
        k.bracket_at_barrier = k.exp_at_barrier - k.pow_term(r_barrier);
        k
    }

    #[inline]
    fn exp_term(&self, r: f64) -> f64 {
        self.exp_coeff * (self.alpha * (1.0 - r / self.r0)).exp()
    }

    #[inline]
    fn pow_term(&self, r: f64) -> f64 {
        let s2 = (self.r0 / r) * (self.r0 / r);
        self.pow_coeff * s2 * s2 * s2
    }

    /// The exp-6 bracket with the short-range guard applied.
    #[inline]
    pub fn dispersion(&self, r: f64) -> f64 {
        let r = r.max(self.r_min);
        if r >= self.r_barrier {
            self.exp_term(r) - self.pow_term(r)
        } else {
            self.bracket_at_barrier + (self.exp_term(r) - self.exp_at_barrier)
        }
    }

    /// Full pair energy for a signed charge product.
    #[inline]
    pub fn energy(&self, r: f64, product: f64) -> f64 {
        let r = r.max(self.r_min);
        self.dispersion(r) + self.coulomb * product / r
    }

    /// Purely repulsive wall term at distance `d`.
    #[inline]
    pub fn wall(&self, d: f64, wall_product: f64) -> f64 {
        let d = d.max(self.r_min);
        self.exp_term(d) + self.coulomb * wall_product.abs() / d
    }

    pub fn coulomb_constant(&self) -> f64 {
        self.coulomb
    }

    pub fn barrier_radius(&self) -> f64 {
        self.r_barrier
    }
}

/// Reduced radius `x = r / r0 < 1` where the exp-6 bracket peaks, i.e. the
/// root of `alpha (1 - x) + 7 ln x = 0` below `7 / alpha`. Returns 0 when the
/// bracket has no inner maximum.
pub fn inner_barrier(alpha: f64) -> f64 {
    let g = |x: f64| alpha * (1.0 - x) + 7.0 * x.ln();
    let hi0 = 7.0 / alpha;
    if !(hi0 < 1.0) || g(hi0) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-12_f64, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kinetic consensus energy `0.5 * m * |V|^2` of a candidate velocity
/// against the velocities of the partition members.
///
/// `members` yields `(velocity, mass)` pairs; `m` is the observer's mass plus
/// the member masses.
pub fn kinetic_energy<I>(candidate: Vec2, own_mass: f64, members: I, mode: KineticMode) -> f64
where
    I: IntoIterator<Item = (Vec2, f64)>,
{
    let mut sum = Vec2::ZERO;
    let mut mass = own_mass;
    let mut count = 0usize;
    for (v, m) in members {
        sum += v;
        mass += m;
        count += 1;
    }
    if count == 0 {
        return 0.0;
    }
    let v = match mode {
        KineticMode::Relative => sum - candidate * count as f64,
        KineticMode::Literal => sum,
    };
    0.5 * mass * v.norm_sq()
}

/// Repulsion from every boundary within `sensing_radius` of the predicted
/// position `pose + candidate * dt`.
pub fn wall_potential(
    pose: Vec2,
    candidate: Vec2,
    bounds: &Bounds,
    kernel: &PairKernel,
    wall_product: f64,
    sensing_radius: f64,
    dt: f64,
) -> f64 {
    let p = pose + candidate * dt;
    bounds
        .wall_distances(p)
        .iter()
        .filter(|&&d| d <= sensing_radius)
        .map(|&d| kernel.wall(d, wall_product))
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct PairTerm {
    /// Neighbor's predicted position relative to the observer's current pose.
    predicted: Vec2,
    /// `weight_cb * k_e * C(i, j)` folded into one coefficient.
    product: f64,
}

/// Everything one robot needs to evaluate its local Hamiltonian for any
/// candidate velocity during one tick.
#[derive(Debug, Clone)]
pub struct LocalEnergy {
    pose: Vec2,
    dt: f64,
    kernel: PairKernel,
    weight_cb: f64,
    weight_kinetic: f64,
    pairs: Vec<PairTerm>,
    kin_mode: KineticMode,
    kin_sum: Vec2,
    kin_count: f64,
    kin_mass: f64,
    bounds: Bounds,
    wall_product: f64,
    sensing_radius: f64,
}

impl LocalEnergy {
    /// Builds the evaluator for robot `id` from an immutable tick view.
    pub fn new(view: &TickView<'_>, id: usize, scenario: &Scenario) -> Self {
        let world = view.world;
        let table = &view.table;
        let robot = &world.robots[id];
        let params = &scenario.potential;
        let kernel = view.kernel;
        let dt = scenario.dt;
        let ci = table.charge[robot.species];
        let nbhd = &view.neighborhoods[id];
        let partition = &view.partitions[id];

        let pairs = nbhd
            .entries
            .iter()
            .map(|obs| {
                let bonded = partition.contains(obs.id);
                let cj = table.charge[obs.species];
                let vj = robot.velocity + obs.rel_vel;
                PairTerm {
                    predicted: obs.rel_pos + vj * dt,
                    product: charge_product(ci, cj, bonded),
                }
            })
            .collect();

        let mut kin_sum = Vec2::ZERO;
        let mut kin_mass = table.mass[robot.species];
        let mut kin_count = 0.0;
        for obs in partition.members() {
            kin_sum += robot.velocity + obs.rel_vel;
            kin_mass += table.mass[obs.species];
            kin_count += 1.0;
        }

        Self {
            pose: robot.pose,
            dt,
            kernel,
            weight_cb: params.weight_cb,
            weight_kinetic: params.weight_kinetic,
            pairs,
            kin_mode: params.kinetic_mode,
            kin_sum,
            kin_count,
            kin_mass,
            bounds: world.bounds,
            wall_product: ci * params.wall_charge,
            sensing_radius: scenario.sensing_radius,
        }
    }

    pub fn kinetic(&self, candidate: Vec2) -> f64 {
        if self.kin_count == 0.0 {
            return 0.0;
        }
        let v = match self.kin_mode {
            KineticMode::Relative => self.kin_sum - candidate * self.kin_count,
            KineticMode::Literal => self.kin_sum,
        };
        0.5 * self.kin_mass * v.norm_sq()
    }

    pub fn pair_sum(&self, candidate: Vec2) -> f64 {
        let shift = candidate * self.dt;
        self.pairs
            .iter()
            .map(|p| self.kernel.energy((p.predicted - shift).norm(), p.product))
            .sum()
    }

    pub fn walls(&self, candidate: Vec2) -> f64 {
        wall_potential(
            self.pose,
            candidate,
            &self.bounds,
            &self.kernel,
            self.wall_product,
            self.sensing_radius,
            self.dt,
        )
    }

    #[inline]
    pub fn energy(&self, candidate: Vec2) -> f64 {
        self.weight_kinetic * self.kinetic(candidate)
            + self.walls(candidate)
            + self.weight_cb * self.pair_sum(candidate)
    }
}

/// Local Hamiltonian of robot `id` for a candidate velocity.
pub fn local_hamiltonian(id: usize, candidate: Vec2, view: &TickView<'_>, scenario: &Scenario) -> f64 {
    LocalEnergy::new(view, id, scenario).energy(candidate)
}

/// Sum of pair energies over all sensed pairs at current positions, counting
/// each unordered pair once from the lower id's perspective.
pub fn swarm_pair_energy(view: &TickView<'_>) -> f64 {
    let world = view.world;
    let mut total = 0.0;
    for (i, nbhd) in view.neighborhoods.iter().enumerate() {
        let ci = view.table.charge[world.robots[i].species];
        let part: &BondPartition = &view.partitions[i];
        for obs in nbhd.entries.iter().filter(|o| o.id > i) {
            let cj = view.table.charge[obs.species];
            total += view.kernel.energy(obs.distance, charge_product(ci, cj, part.contains(obs.id)));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> PotentialParams {
        PotentialParams {
            epsilon: 1.0,
            r0: 1.0,
            alpha: 12.0,
            ..PotentialParams::default()
        }
    }

    #[test]
    fn charge_product_sign_follows_membership() {
        assert_eq!(charge_product(4.0, 1.0, true), -4.0);
        assert_eq!(charge_product(4.0, 1.0, false), 4.0);
        assert_eq!(charge_product(2.0, 2.0, true), -4.0);
    }

    #[test]
    fn minimum_energy_distance_gives_minus_epsilon() {
        for (eps, alpha) in [(1.0, 12.0), (2.5, 8.0), (0.3, 20.0)] {
            let p = PotentialParams {
                epsilon: eps,
                alpha,
                ..PotentialParams::default()
            };
            let e = coulomb_buckingham(p.r0, 0.0, &p);
            assert!((e + eps).abs() < 1e-12, "{e} vs {}", -eps);
        }
    }

    #[test]
    fn scalar_value_at_twice_r0() {
        // e^{-12} - 2 / 64 evaluated by hand.
        let expected = (-12.0f64).exp() - 2.0 / 64.0;
        let e = coulomb_buckingham(2.0, 0.0, &unit_params());
        assert!((e - expected).abs() < 1e-15);
        assert!((e + 0.031244).abs() < 1e-6);
    }

    #[test]
    fn repulsive_tail_decays_from_above() {
        let p = PotentialParams::default();
        let far = [5.0, 10.0, 50.0].map(|r| coulomb_buckingham(r, 4.0, &p));
        assert!(far.iter().all(|&e| e > 0.0));
        assert!(far[0] > far[1] && far[1] > far[2]);
        assert!(far[2] < 0.05);
    }

    #[test]
    fn finite_and_monotone_below_barrier() {
        let p = PotentialParams::default();
        let k = p.kernel();
        let mut prev = f64::INFINITY;
        let mut r = 0.0;
        while r < k.barrier_radius() {
            let e = k.dispersion(r);
            assert!(e.is_finite());
            assert!(e <= prev + 1e-9);
            prev = e;
            r += 1e-4;
        }
        assert!(coulomb_buckingham(0.0, -4.0, &p).is_finite());
    }

    #[test]
    fn inner_barrier_is_a_stationary_point() {
        let x = inner_barrier(12.0);
        assert!((x - 0.302).abs() < 0.01, "{x}");
        let g = 12.0 * (1.0 - x) + 7.0 * x.ln();
        assert!(g.abs() < 1e-9);
        assert_eq!(inner_barrier(6.5), 0.0);
    }

    #[test]
    fn kinetic_consensus_cases() {
        let v = Vec2::new(0.3, -0.1);
        assert_eq!(kinetic_energy(v, 1.0, [(v, 1.0), (v, 16.0)], KineticMode::Relative), 0.0);
        assert_eq!(kinetic_energy(v, 1.0, std::iter::empty(), KineticMode::Relative), 0.0);
        let e = kinetic_energy(Vec2::ZERO, 1.0, [(Vec2::new(1.0, 0.0), 1.0)], KineticMode::Relative);
        assert!((e - 1.0).abs() < 1e-15);
        let lit = kinetic_energy(Vec2::new(5.0, 5.0), 1.0, [(Vec2::new(1.0, 0.0), 1.0)], KineticMode::Literal);
        assert!((lit - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wall_term_at_r0_without_coulomb() {
        let p = PotentialParams {
            r0: 0.25,
            coulomb_constant: 0.0,
            ..PotentialParams::default()
        };
        let k = p.kernel();
        assert!((k.wall(0.25, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wall_potential_range_and_direction() {
        let p = PotentialParams::default();
        let k = p.kernel();
        let b = Bounds::new(10.0, 10.0);
        let centre = wall_potential(Vec2::new(5.0, 5.0), Vec2::ZERO, &b, &k, 2.0, 0.5, 0.1);
        assert_eq!(centre, 0.0);
        let pose = Vec2::new(9.9, 5.0);
        let toward = wall_potential(pose, Vec2::new(0.5, 0.0), &b, &k, 2.0, 0.5, 0.1);
        let away = wall_potential(pose, Vec2::new(-0.5, 0.0), &b, &k, 2.0, 0.5, 0.1);
        assert!(toward > away);
    }
}
