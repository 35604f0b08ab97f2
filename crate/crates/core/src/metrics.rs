//! Swarm-level evaluation metrics and batch aggregation.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::bonding::BondGraph;
use crate::geom::Vec2;
use crate::scenario::{Scenario, SpeciesTable};
use crate::world::WorldState;

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.576;

pub const METRICS_HEADER: &str = "tick,velocity_error,remaining_bonds,molecule_count";

/// Species-count signature such as `H:2,O:1` mapped to how many molecules have it.
pub type Composition = BTreeMap<String, usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub tick: u64,
    pub velocity_error: f64,
    pub remaining_bonds: u64,
    pub molecule_count: usize,
    pub composition: Composition,
}

impl MetricsFrame {
    pub fn compute(world: &WorldState, graph: &BondGraph, scenario: &Scenario) -> Self {
        let table = scenario.species_table();
        let (molecule_count, composition) = count_molecules(world, graph, &table);
        Self {
            tick: world.tick,
            velocity_error: velocity_consensus_error(world, graph),
            remaining_bonds: remaining_bonds(world, graph, &table, scenario.count_anchor_bonds),
            molecule_count,
            composition,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.tick, self.velocity_error, self.remaining_bonds, self.molecule_count
        )
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Members of every component, each sorted, ordered by smallest member.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for x in 0..n {
            let r = self.find(x);
            by_root.entry(r).or_default().push(x);
        }
        let mut comps: Vec<Vec<usize>> = by_root.into_values().collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }
}

pub fn components(graph: &BondGraph) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(graph.len());
    for &(a, b) in &graph.edges {
        uf.union(a, b);
    }
    uf.components()
}

/// Mean over bonded components (two or more robots) of the mean deviation of
/// member velocities from the component's mean velocity.
pub fn velocity_consensus_error(world: &WorldState, graph: &BondGraph) -> f64 {
    let mut total = 0.0;
    let mut groups = 0usize;
    for comp in components(graph).into_iter().filter(|c| c.len() >= 2) {
        let n = comp.len() as f64;
        // Work relative to one member so identical velocities give exactly zero.
        let base = world.robots[comp[0]].velocity;
        let rel = |i: usize| world.robots[i].velocity - base;
        let mean = comp.iter().fold(Vec2::ZERO, |acc, &i| acc + rel(i)) / n;
        let dev: f64 = comp.iter().map(|&i| (rel(i) - mean).norm()).sum::<f64>() / n;
        total += dev;
        groups += 1;
    }
    if groups == 0 {
        0.0
    } else {
        total / groups as f64
    }
}

/// Unfilled bond slots summed over robots.
pub fn remaining_bonds(world: &WorldState, graph: &BondGraph, table: &SpeciesTable, count_anchors: bool) -> u64 {
    world
        .robots
        .iter()
        .filter(|r| count_anchors || !r.is_anchor)
        .map(|r| (table.total_cap[r.species] as u64).saturating_sub(graph.degree(r.id) as u64))
        .sum()
}

/// Signature of a multiset of species, e.g. `H:2,O:1`.
pub fn signature(species: impl IntoIterator<Item = usize>, table: &SpeciesTable) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in species {
        *counts.entry(table.names[s].as_str()).or_default() += 1;
    }
    counts
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Counts molecules: components of two or more robots where every member's
/// degree equals its total cap.
pub fn count_molecules(world: &WorldState, graph: &BondGraph, table: &SpeciesTable) -> (usize, Composition) {
    let mut hist = Composition::new();
    let mut count = 0;
    for comp in components(graph) {
        if comp.len() < 2 {
            continue;
        }
        let saturated = comp
            .iter()
            .all(|&i| graph.degree(i) == table.total_cap[world.robots[i].species] as usize);
        if saturated {
            count += 1;
            let sig = signature(comp.iter().map(|&i| world.robots[i].species), table);
            *hist.entry(sig).or_default() += 1;
        }
    }
    (count, hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// `None` when fewer than two runs contributed.
    pub ci: Option<(f64, f64)>,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, ci: None };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let half = Z_99 * var.sqrt() / n.sqrt();
        Self {
            mean,
            ci: Some((mean - half, mean + half)),
        }
    }

    pub fn half_width(&self) -> Option<f64> {
        self.ci.map(|(lo, hi)| 0.5 * (hi - lo))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub tick: u64,
    pub velocity_error: Estimate,
    pub remaining_bonds: Estimate,
    pub molecule_count: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub rows: Vec<AggregateRow>,
}

impl Aggregate {
    pub fn ci_defined(&self) -> bool {
        self.runs >= 2
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "tick,velocity_error_mean,velocity_error_ci_lo,velocity_error_ci_hi,\
remaining_bonds_mean,remaining_bonds_ci_lo,remaining_bonds_ci_hi,\
molecule_count_mean,molecule_count_ci_lo,molecule_count_ci_hi"
        )?;
        let cell = |e: &Estimate| match e.ci {
            Some((lo, hi)) => format!("{},{},{}", e.mean, lo, hi),
            None => format!("{},,", e.mean),
        };
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.tick,
                cell(&r.velocity_error),
                cell(&r.remaining_bonds),
                cell(&r.molecule_count)
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&AggregateRow> {
        self.rows.last()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AggregateError {
    #[error("no runs to aggregate")]
    Empty,
    #[error("run {run} does not share the tick grid of run 0")]
    GridMismatch { run: usize },
}

/// Per-tick mean and 99% normal confidence interval across runs.
pub fn aggregate_runs(series: &[Vec<MetricsFrame>]) -> Result<Aggregate, AggregateError> {
    let first = series.first().ok_or(AggregateError::Empty)?;
    for (run, s) in series.iter().enumerate() {
        if s.len() != first.len() || s.iter().zip(first).any(|(a, b)| a.tick != b.tick) {
            return Err(AggregateError::GridMismatch { run });
        }
    }
    let rows = (0..first.len())
        .map(|k| {
            let col = |f: &dyn Fn(&MetricsFrame) -> f64| -> Vec<f64> { series.iter().map(|s| f(&s[k])).collect() };
            AggregateRow {
                tick: first[k].tick,
                velocity_error: Estimate::from_samples(&col(&|m| m.velocity_error)),
                remaining_bonds: Estimate::from_samples(&col(&|m| m.remaining_bonds as f64)),
                molecule_count: Estimate::from_samples(&col(&|m| m.molecule_count as f64)),
            }
        })
        .collect();
    Ok(Aggregate {
        runs: series.len(),
        rows,
    })
}

pub fn write_metrics_csv<W: Write>(mut w: W, frames: &[MetricsFrame]) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for f in frames {
        writeln!(w, "{}", f.csv_row())?;
    }
    Ok(())
}
