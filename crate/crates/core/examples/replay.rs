//! Replays a logged operator session headlessly. The same commands at the
//! same ticks reproduce the same run, so the final states match.

use grfswarm::{presets, run, Command, CommandKind, RunOptions};

fn main() -> anyhow::Result<()> {
    let scenario = presets::bridge();
    let anchor = scenario.free_count() + 1;
    let session = vec![
        Command::new(CommandKind::MoveAnchor { id: anchor, x: 3.5, y: 3.0 }, 400),
        Command::new(CommandKind::AddAnchor { species: "A".into(), x: 2.0, y: 0.5 }, 900),
        Command::new(CommandKind::RemoveAnchor { id: anchor + 1 }, 1500),
    ];
    let log: String = session.iter().map(|c| serde_json::to_string(c).unwrap() + "\n").collect();
    print!("session log:\n{log}");

    let commands: Vec<Command> = log.lines().map(serde_json::from_str).collect::<Result<_, _>>()?;
    let options = RunOptions { ticks: Some(2000), commands };
    let a = run(&scenario, 5, &options, &mut [])?;
    let b = run(&scenario, 5, &options, &mut [])?;
    println!("robots at end: {}", a.final_state.len());
    println!("identical replays: {}", a.final_state == b.final_state && a.metrics_series == b.metrics_series);
    Ok(())
}
