//! Water at desk scale: 24 hydrogen and 12 oxygen robots in a 4 x 4 m box.
//!
//! ```text
//! cargo run --release --example water -- [ticks] [seed]
//! ```

use grfswarm::{presets, run, RunOptions};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let ticks: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(5000);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1);

    let mut scenario = presets::water();
    scenario.world.width = 4.0;
    scenario.world.height = 4.0;
    scenario.population.insert("H".into(), 24);
    scenario.population.insert("O".into(), 12);
    scenario.metrics_stride = 500;

    let result = run(&scenario, seed, &RunOptions { ticks: Some(ticks), ..Default::default() }, &mut [])?;
    println!("{:>6} {:>9} {:>9} {:>14}", "tick", "molecules", "remaining", "velocity_error");
    for f in &result.metrics_series {
        println!("{:>6} {:>9} {:>9} {:>14.4}", f.tick, f.molecule_count, f.remaining_bonds, f.velocity_error);
    }
    let last = result.metrics_series.last().unwrap();
    println!("composition: {:?}", last.composition);
    println!("{:.1}s", result.wall_time);
    Ok(())
}
