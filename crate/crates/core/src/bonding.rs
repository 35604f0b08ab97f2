//! Neighborhood sensing, bond partitions and the mutual bond graph.
//!
//! A robot admits a neighbor into its partition only if it has room for that
//! neighbor's species and, judging from what the robot itself can sense, the
//! neighbor still has room for the robot's species. Admitted neighbors are
//! then ranked by charge (descending) and distance (ascending) and cut at the
//! robot's total bond cap.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::potentials::PairKernel;
use crate::scenario::{Scenario, SpeciesTable};
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborObservation {
    pub id: usize,
    pub species: usize,
    pub rel_pos: Vec2,
    pub rel_vel: Vec2,
    pub distance: f64,
}

fn by_distance_then_id(a: &NeighborObservation, b: &NeighborObservation) -> Ordering {
    a.distance
        .partial_cmp(&b.distance)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderedNeighborhood {
    pub observer: usize,
    pub entries: Vec<NeighborObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondGroup {
    pub charge: f64,
    pub members: Vec<NeighborObservation>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BondPartition {
    pub observer: usize,
    pub groups: Vec<BondGroup>,
}

impl BondPartition {
    pub fn members(&self) -> impl Iterator<Item = &NeighborObservation> {
        self.groups.iter().flat_map(|g| g.members.iter())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.iter().all(|g| g.members.is_empty())
    }

    pub fn contains(&self, id: usize) -> bool {
        self.members().any(|m| m.id == id)
    }

    pub fn ids(&self) -> Vec<usize> {
        self.members().map(|m| m.id).collect()
    }
}

/// Undirected graph of mutual bonds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BondGraph {
    /// Sorted `(i, j)` pairs with `i < j`.
    pub edges: Vec<(usize, usize)>,
    /// Sorted neighbor ids per robot.
    pub adjacency: Vec<Vec<usize>>,
}

impl BondGraph {
    pub fn from_edges(n: usize, mut edges: Vec<(usize, usize)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in adjacency.iter_mut() {
            adj.sort_unstable();
        }
        Self { edges, adjacency }
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }
}

/// Robots within the sensing radius of `robot`, nearest first.
pub fn sense_neighbors(world: &WorldState, robot: usize, sensing_radius: f64) -> OrderedNeighborhood {
    let me = &world.robots[robot];
    let r_sq = sensing_radius * sensing_radius;
    let mut entries: Vec<NeighborObservation> = world
        .robots
        .iter()
        .filter(|o| o.id != robot)
        .filter_map(|o| {
            let rel_pos = o.pose - me.pose;
            let d_sq = rel_pos.norm_sq();
            (d_sq <= r_sq).then(|| NeighborObservation {
                id: o.id,
                species: o.species,
                rel_pos,
                rel_vel: o.velocity - me.velocity,
                distance: d_sq.sqrt(),
            })
        })
        .collect();
    entries.sort_by(by_distance_then_id);
    OrderedNeighborhood {
        observer: robot,
        entries,
    }
}

/// Neighborhoods of every robot, computed with one pass over all pairs.
pub fn sense_all(world: &WorldState, sensing_radius: f64) -> Vec<OrderedNeighborhood> {
    let n = world.len();
    let r_sq = sensing_radius * sensing_radius;
    let mut out: Vec<OrderedNeighborhood> = (0..n)
        .map(|observer| OrderedNeighborhood {
            observer,
            entries: Vec::new(),
        })
        .collect();
    for i in 0..n {
        let a = &world.robots[i];
        for j in (i + 1)..n {
            let b = &world.robots[j];
            let rel = b.pose - a.pose;
            let d_sq = rel.norm_sq();
            if d_sq <= r_sq {
                let distance = d_sq.sqrt();
                let rel_vel = b.velocity - a.velocity;
                out[i].entries.push(NeighborObservation {
                    id: j,
                    species: b.species,
                    rel_pos: rel,
                    rel_vel,
                    distance,
                });
                out[j].entries.push(NeighborObservation {
                    id: i,
                    species: a.species,
                    rel_pos: -rel,
                    rel_vel: -rel_vel,
                    distance,
                });
            }
        }
    }
    for nb in out.iter_mut() {
        nb.entries.sort_by(by_distance_then_id);
    }
    out
}

/// Whether neighbor `j` still has a free slot for the observer's species,
/// judged only from robots the observer can sense: counts robots of the
/// observer's species that sit closer to `j` than the observer does.
fn neighbor_has_room(
    nbhd: &OrderedNeighborhood,
    j: &NeighborObservation,
    observer_species: usize,
    table: &SpeciesTable,
) -> bool {
    let cap = table.pair_cap[j.species][observer_species] as usize;
    if cap == 0 {
        return false;
    }
    // The observer sits at the origin, so its distance to j is j.distance.
    let mut ahead = 0usize;
    for k in &nbhd.entries {
        if k.id == j.id || k.species != observer_species {
            continue;
        }
        let d = (k.rel_pos - j.rel_pos).norm();
        if d < j.distance || (d == j.distance && k.id < nbhd.observer) {
            ahead += 1;
            if ahead >= cap {
                return false;
            }
        }
    }
    true
}

/// Builds the observer's bond partition from its ordered neighborhood.
pub fn bond_partition(nbhd: &OrderedNeighborhood, observer_species: usize, table: &SpeciesTable) -> BondPartition {
    bond_partition_with(nbhd, observer_species, table, |j| neighbor_has_room(nbhd, j, observer_species, table))
}

pub fn bond_partition_with<F: Fn(&NeighborObservation) -> bool>(
    nbhd: &OrderedNeighborhood,
    observer_species: usize,
    table: &SpeciesTable,
    has_room: F,
) -> BondPartition {
    let caps = &table.pair_cap[observer_species];
    let mut per_species = vec![0u32; table.len()];
    let mut admitted: Vec<NeighborObservation> = Vec::new();

    for j in &nbhd.entries {
        if !has_room(j) {
            continue;
        }
        if per_species[j.species] < caps[j.species] {
            per_species[j.species] += 1;
            admitted.push(*j);
        }
    }

    admitted.sort_by(|a, b| {
        table.charge[b.species]
            .partial_cmp(&table.charge[a.species])
            .unwrap_or(Ordering::Equal)
            .then_with(|| by_distance_then_id(a, b))
    });
    admitted.truncate(table.total_cap[observer_species] as usize);

    let mut groups: Vec<BondGroup> = Vec::new();
    for obs in admitted {
        let charge = table.charge[obs.species];
        match groups.last_mut() {
            Some(g) if g.charge == charge => g.members.push(obs),
            _ => groups.push(BondGroup {
                charge,
                members: vec![obs],
            }),
        }
    }
    BondPartition {
        observer: nbhd.observer,
        groups,
    }
}

/// Mutual-bond graph: `(i, j)` is an edge when each is in the other's
/// partition and they are within the bond distance threshold.
pub fn bond_graph(world: &WorldState, scenario: &Scenario) -> BondGraph {
    TickView::build(world, scenario).graph(scenario.bond_threshold())
}

/// Immutable per-tick picture shared by every robot's decision.
pub struct TickView<'a> {
    pub world: &'a WorldState,
    pub table: SpeciesTable,
    pub kernel: PairKernel,
    pub neighborhoods: Vec<OrderedNeighborhood>,
    pub partitions: Vec<BondPartition>,
}

impl<'a> TickView<'a> {
    pub fn build(world: &'a WorldState, scenario: &Scenario) -> Self {
        let table = scenario.species_table();
        let neighborhoods = sense_all(world, scenario.sensing_radius);
        let partitions = neighborhoods
            .iter()
            .map(|nb| bond_partition(nb, world.robots[nb.observer].species, &table))
            .collect();
        Self {
            world,
            table,
            kernel: scenario.potential.kernel(),
            neighborhoods,
            partitions,
        }
    }

    pub fn graph(&self, threshold: f64) -> BondGraph {
        let mut edges = Vec::new();
        for (i, part) in self.partitions.iter().enumerate() {
            for m in part.members() {
                if m.id > i && m.distance <= threshold && self.partitions[m.id].contains(i) {
                    edges.push((i, m.id));
                }
            }
        }
        BondGraph::from_edges(self.world.len(), edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets;
    use crate::world::RobotState;

    fn robot(id: usize, species: usize, x: f64, y: f64) -> RobotState {
        RobotState {
            id,
            species,
            pose: Vec2::new(x, y),
            velocity: Vec2::ZERO,
            is_anchor: false,
        }
    }

    fn world(robots: Vec<RobotState>) -> WorldState {
        WorldState {
            tick: 0,
            robots,
            bounds: crate::geom::Bounds::new(10.0, 10.0),
            master_seed: 0,
        }
    }

    #[test]
    fn lone_robot_has_no_neighbors() {
        let w = world(vec![robot(0, 0, 5.0, 5.0)]);
        assert!(sense_neighbors(&w, 0, 0.5).entries.is_empty());
    }

    #[test]
    fn neighbors_sorted_by_distance() {
        let w = world(vec![robot(0, 0, 5.0, 5.0), robot(1, 0, 5.4, 5.0), robot(2, 0, 5.0, 5.2)]);
        let nb = sense_neighbors(&w, 0, 0.5);
        let ids: Vec<_> = nb.entries.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![2, 1]);
        assert_eq!(sense_all(&w, 0.5)[0], nb);
    }

    #[test]
    fn carbon_keeps_four_nearest_hydrogens() {
        let s = presets::methane();
        let t = s.species_table();
        let c = s.species_index("C").unwrap();
        let h = s.species_index("H").unwrap();
        let mut robots = vec![robot(0, c, 5.0, 5.0)];
        // Hydrogens spread around the carbon so none shadows another.
        for k in 0..5 {
            let angle = k as f64 * std::f64::consts::TAU / 5.0;
            let d = 0.1 * (k + 1) as f64;
            robots.push(robot(k + 1, h, 5.0 + d * angle.cos(), 5.0 + d * angle.sin()));
        }
        let w = world(robots);
        let nb = sense_neighbors(&w, 0, 0.5);
        let part = bond_partition(&nb, c, &t);
        assert_eq!(part.ids(), vec![1, 2, 3, 4]);
        assert_eq!(part.groups.len(), 1);
    }

    #[test]
    fn empty_neighborhood_empty_partition() {
        let t = presets::water().species_table();
        let part = bond_partition(&OrderedNeighborhood::default(), 0, &t);
        assert!(part.is_empty());
    }

    #[test]
    fn two_hydrogens_bond_mutually() {
        let s = presets::water();
        let h = s.species_index("H").unwrap();
        let w = world(vec![robot(0, h, 5.0, 5.0), robot(1, h, 5.2, 5.0)]);
        let g = bond_graph(&w, &s);
        assert_eq!(g.edges, vec![(0, 1)]);
    }
}
