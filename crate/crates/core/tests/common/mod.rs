//! Reference implementations and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use grfswarm::bonding::{BondGraph, NeighborObservation, OrderedNeighborhood};
use grfswarm::geom::{Bounds, Vec2};
use grfswarm::scenario::SpeciesTable;
use grfswarm::world::{RobotState, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random species table with 1..=4 species, small integer charges and caps.
pub fn random_table<R: Rng>(rng: &mut R) -> SpeciesTable {
    let n = rng.random_range(1..=4);
    let names = (0..n).map(|k| format!("S{k}")).collect();
    let mass = (0..n).map(|_| rng.random_range(1..=16) as f64).collect();
    let charge = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
    let total_cap: Vec<u32> = (0..n).map(|_| rng.random_range(0..=4)).collect();
    let pair_cap = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(0..=3)).collect())
        .collect();
    SpeciesTable {
        names,
        mass,
        charge,
        total_cap,
        pair_cap,
    }
}

/// Random world of `n` robots in a `size`-square box. Positions are
/// quantized so equal distances (and therefore id tie-breaks) occur.
pub fn random_world<R: Rng>(rng: &mut R, n: usize, species: usize, size: f64) -> WorldState {
    let grid = 32.0;
    let robots = (0..n)
        .map(|id| RobotState {
            id,
            species: rng.random_range(0..species),
            pose: Vec2::new(
                (rng.random_range(0.0..size) * grid).round() / grid,
                (rng.random_range(0.0..size) * grid).round() / grid,
            ),
            velocity: Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            is_anchor: false,
        })
        .collect();
    WorldState {
        tick: 0,
        robots,
        bounds: Bounds::new(size, size),
        master_seed: 0,
    }
}

/// Neighborhood of robot 0 built by hand from an explicit list of robots.
pub fn neighborhood_of(world: &WorldState, observer: usize, radius: f64) -> OrderedNeighborhood {
    let me = &world.robots[observer];
    let mut entries: Vec<NeighborObservation> = world
        .robots
        .iter()
        .filter(|r| r.id != observer)
        .filter_map(|r| {
            let rel = r.pose - me.pose;
            let distance = rel.norm();
            (distance <= radius).then_some(NeighborObservation {
                id: r.id,
                species: r.species,
                rel_pos: rel,
                rel_vel: r.velocity - me.velocity,
                distance,
            })
        })
        .collect();
    entries.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap().then(a.id.cmp(&b.id)));
    OrderedNeighborhood { observer, entries }
}

/// Direct reading of the bonding rules, with no shared code:
///
/// 1. Walk the neighborhood nearest first. A neighbor `j` is admissible when
///    fewer than `pair_cap[s_j][s_i]` robots of the observer's species that
///    the observer can see are closer to `j` than the observer is, and the
///    observer still has room for `j`'s species.
/// 2. Bucket admitted robots by charge, highest first, each bucket by
///    distance then id, and keep the first `total_cap` overall.
///
/// Returns `(charge, member ids)` per non-empty bucket.
pub fn reference_partition(
    nbhd: &OrderedNeighborhood,
    observer_species: usize,
    table: &SpeciesTable,
) -> Vec<(f64, Vec<usize>)> {
    let mut taken: BTreeMap<usize, u32> = BTreeMap::new();
    let mut admitted: Vec<&NeighborObservation> = Vec::new();
    for j in &nbhd.entries {
        let reciprocal_cap = table.pair_cap[j.species][observer_species];
        let competitors = nbhd
            .entries
            .iter()
            .filter(|k| k.id != j.id && k.species == observer_species)
            .filter(|k| {
                let dx = k.rel_pos.x - j.rel_pos.x;
                let dy = k.rel_pos.y - j.rel_pos.y;
                let d = (dx * dx + dy * dy).sqrt();
                d < j.distance || (d == j.distance && k.id < nbhd.observer)
            })
            .count() as u32;
        if competitors >= reciprocal_cap {
            continue;
        }
        let used = taken.entry(j.species).or_insert(0);
        if *used < table.pair_cap[observer_species][j.species] {
            *used += 1;
            admitted.push(j);
        }
    }

    // Charges are small integers in the fuzzed tables, so bucketing on the
    // bit pattern is exact.
    let mut buckets: BTreeMap<std::cmp::Reverse<u64>, Vec<&NeighborObservation>> = BTreeMap::new();
    for j in admitted {
        let c = table.charge[j.species];
        buckets.entry(std::cmp::Reverse(c.to_bits())).or_default().push(j);
    }
    let mut budget = table.total_cap[observer_species] as usize;
    let mut out = Vec::new();
    for (std::cmp::Reverse(bits), mut members) in buckets {
        members.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap().then(a.id.cmp(&b.id)));
        let keep: Vec<usize> = members.iter().take(budget).map(|m| m.id).collect();
        budget -= keep.len();
        if !keep.is_empty() {
            out.push((f64::from_bits(bits), keep));
        }
    }
    out
}

/// Random simple graph on `n` vertices.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> BondGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    BondGraph::from_edges(n, edges)
}

/// Molecules by breadth-first search over an adjacency matrix: connected
/// sets of two or more vertices in which every vertex has exactly its cap.
pub fn bfs_molecules(n: usize, edges: &[(usize, usize)], caps: &[usize]) -> (usize, Vec<Vec<usize>>) {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let degree: Vec<usize> = (0..n).map(|i| adj[i].iter().filter(|&&x| x).count()).collect();
    let mut seen = vec![false; n];
    let mut molecules = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for w in 0..n {
                if adj[v][w] && !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        if comp.len() >= 2 && comp.iter().all(|&v| degree[v] == caps[v]) {
            comp.sort();
            molecules.push(comp);
        }
    }
    (molecules.len(), molecules)
}
