//! Building a scenario from JSON: a valid two-species mix, then a broken
//! document to show that validation reports every problem at once.

use grfswarm::scenario::ScenarioError;
use grfswarm::{run, RunOptions, Scenario};

const HYDROGEN_FLUORIDE: &str = r##"{
  "name": "hydrogen-fluoride",
  "world": { "width": 3.0, "height": 3.0 },
  "sensing_radius": 0.5,
  "v_max": 1.0,
  "ticks": 3000,
  "species": [
    { "name": "H", "mass": 1.0, "charge": 1.0, "total_cap": 1, "pair_caps": { "F": 1, "H": 0 }, "color": "#9e9e9e" },
    { "name": "F", "mass": 19.0, "charge": 1.0, "total_cap": 1, "pair_caps": { "H": 1, "F": 0 }, "color": "#2a9d8f" }
  ],
  "population": { "H": 10, "F": 10 },
  "rng_seed": 4
}"##;

fn main() -> anyhow::Result<()> {
    let s = Scenario::from_json(HYDROGEN_FLUORIDE)?;
    let r = run(&s, s.rng_seed, &RunOptions::default(), &mut [])?;
    let last = r.metrics_series.last().unwrap();
    println!("{}: {} molecules {:?}", s.name, last.molecule_count, last.composition);

    let broken = HYDROGEN_FLUORIDE
        .replace(r#""v_max": 1.0"#, r#""v_max": -1.0"#)
        .replace(r#""mass": 19.0"#, r#""mass": 0.0"#)
        .replace(r#""F": 10"#, r#""Ne": 10"#);
    match Scenario::from_json(&broken) {
        Err(ScenarioError::Invalid(violations)) => {
            for v in violations {
                println!("  {}: {}", v.field, v.message);
            }
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
