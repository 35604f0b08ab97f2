//! How one robot chooses its bonding partners.
//!
//! An oxygen robot sees hydrogens at 0.1, 0.2 and 0.3 m and another oxygen
//! at 0.15 m. Oxygen bonds at most two hydrogens and no oxygen, so only the
//! two nearest hydrogens are kept. A carbon robot with five hydrogens in view
//! keeps its four nearest.

use grfswarm::bonding::{bond_partition, NeighborObservation, OrderedNeighborhood};
use grfswarm::{presets, Vec2};

fn seen(id: usize, species: usize, x: f64, y: f64) -> NeighborObservation {
    let rel_pos = Vec2::new(x, y);
    NeighborObservation { id, species, rel_pos, rel_vel: Vec2::ZERO, distance: rel_pos.norm() }
}

fn show(label: &str, nbhd: &OrderedNeighborhood, species: usize, s: &grfswarm::Scenario) {
    let table = s.species_table();
    let p = bond_partition(nbhd, species, &table);
    println!("{label}");
    for e in &nbhd.entries {
        let mark = if p.contains(e.id) { "bond" } else { "-" };
        println!("  {}{} at {:.2} m  {mark}", table.names[e.species], e.id, e.distance);
    }
    for g in &p.groups {
        println!("  group charge {}: {:?}", g.charge, g.members.iter().map(|m| m.id).collect::<Vec<_>>());
    }
}

fn main() {
    let water = presets::water();
    let (h, o) = (water.species_index("H").unwrap(), water.species_index("O").unwrap());
    let nbhd = OrderedNeighborhood {
        observer: 0,
        entries: vec![seen(1, h, 0.1, 0.0), seen(2, o, -0.15, 0.0), seen(3, h, 0.2, 0.0), seen(4, h, 0.0, 0.3)],
    };
    show("oxygen", &nbhd, o, &water);

    let methane = presets::methane();
    let (h, c) = (methane.species_index("H").unwrap(), methane.species_index("C").unwrap());
    let nbhd = OrderedNeighborhood {
        observer: 0,
        entries: (1..=5).map(|k| seen(k, h, 0.0, 0.1 * k as f64)).collect(),
    };
    show("carbon", &nbhd, c, &methane);
}
