//! Several seeds of desk-scale water, aggregated into per-tick means with
//! 99% confidence intervals. Writes the batch layout to a temp directory.

use grfswarm::batch::{run_batch, BatchSpec};
use grfswarm::presets;

fn main() -> anyhow::Result<()> {
    let mut scenario = presets::water();
    scenario.world.width = 4.0;
    scenario.world.height = 4.0;
    scenario.population.insert("H".into(), 24);
    scenario.population.insert("O".into(), 12);
    scenario.metrics_stride = 250;

    let out = std::env::temp_dir().join("grfswarm-batch-example");
    let spec = BatchSpec {
        scenario,
        runs: 6,
        base_seed: 100,
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ticks: Some(2000),
    };
    let outcome = run_batch(&spec, &out)?;
    let agg = outcome.aggregate.expect("at least one run");

    println!("{:>5}  {:>22}  {:>22}", "tick", "molecules (99% CI)", "velocity error (99% CI)");
    for row in &agg.rows {
        let m = &row.molecule_count;
        let v = &row.velocity_error;
        let (mlo, mhi) = m.ci.unwrap_or((m.mean, m.mean));
        let (vlo, vhi) = v.ci.unwrap_or((v.mean, v.mean));
        println!(
            "{:>5}  {:>6.2} [{:>5.2}, {:>5.2}]  {:>6.3} [{:>5.3}, {:>5.3}]",
            row.tick, m.mean, mlo, mhi, v.mean, vlo, vhi
        );
    }
    println!("scenario sha256 {}", outcome.manifest.scenario_sha256);
    println!("files in {}", out.display());
    Ok(())
}
