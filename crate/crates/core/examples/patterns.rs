//! Runs each bundled chemistry at a reduced scale and prints the molecule
//! shapes that formed.
//!
//! Water and methane saturate into small molecules; polyamines and
//! oxocarbons grow chains, so their molecule counts stay low.

use grfswarm::{presets, run, RunOptions, Scenario};

fn shrink(mut s: Scenario, factor: usize) -> Scenario {
    for n in s.population.values_mut() {
        *n /= factor;
    }
    let side = (s.world.width * s.world.height / factor as f64).sqrt();
    s.world.width = side;
    s.world.height = side;
    s
}

fn main() -> anyhow::Result<()> {
    let ticks = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(4000);
    for preset in [presets::water(), presets::methane(), presets::polyamines(), presets::oxocarbon()] {
        let s = shrink(preset, 5);
        let r = run(&s, 7, &RunOptions { ticks: Some(ticks), ..Default::default() }, &mut [])?;
        let last = r.metrics_series.last().unwrap();
        println!(
            "{:<11} robots {:>3}  molecules {:>3}  remaining bonds {:>3}",
            s.name,
            s.robot_count(),
            last.molecule_count,
            last.remaining_bonds
        );
        for (signature, count) in &last.composition {
            println!("    {signature:<16} x{count}");
        }
    }
    Ok(())
}
