//! Anchored chain: alternating oxygen and carbon robots link two fixed anchors,
//! then one anchor is moved and the chain re-forms.
//!
//! ```text
//! cargo run --release --example bridge -- [seed]
//! ```

use grfswarm::metrics::components;
use grfswarm::{presets, CommandKind, Simulation, Vec2};

fn connected(sim: &Simulation) -> bool {
    let anchors: Vec<usize> = sim.world().anchor_ids().collect();
    components(&sim.graph()).iter().any(|c| anchors.iter().all(|a| c.contains(a)))
}

fn chain_of(sim: &Simulation) -> usize {
    let anchors: Vec<usize> = sim.world().anchor_ids().collect();
    components(&sim.graph())
        .into_iter()
        .find(|c| c.contains(&anchors[0]))
        .map_or(0, |c| c.len())
}

fn settle(sim: &mut Simulation, limit: u64) -> Option<u64> {
    for t in 0..=limit {
        if t % 10 == 0 && connected(sim) {
            return Some(t);
        }
        sim.step();
    }
    None
}

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(0);
    let mut sim = Simulation::new(presets::bridge(), seed)?;
    let anchors: Vec<usize> = sim.world().anchor_ids().collect();
    for &a in &anchors {
        let p = sim.world().robots[a].pose;
        println!("anchor {a} at ({:.1}, {:.1})", p.x, p.y);
    }

    match settle(&mut sim, 10_000) {
        Some(t) => println!("anchors joined after {t} ticks, chain of {} robots", chain_of(&sim)),
        None => println!("no bridge within 10000 ticks"),
    }

    let id = anchors[1];
    let to = sim.world().robots[id].pose + Vec2::new(0.0, 1.5);
    sim.apply(&CommandKind::MoveAnchor { id, x: to.x, y: to.y })?;
    println!("moved anchor {id} to ({:.1}, {:.1})", to.x, to.y);

    match settle(&mut sim, 10_000) {
        Some(t) => println!("re-joined after {t} ticks, chain of {} robots", chain_of(&sim)),
        None => println!("not re-joined within 10000 ticks"),
    }
    Ok(())
}
