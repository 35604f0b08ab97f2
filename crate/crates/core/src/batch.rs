//! Multi-seed batches and their on-disk layout.
//!
//! A batch runs seeds `base_seed .. base_seed + runs` on a pool of `jobs`
//! threads and writes, under the output directory:
//!
//! - `metrics_seed_<seed>.csv` and `composition_seed_<seed>.json` per run
//! - `aggregate.csv` with the per-tick mean and 99% interval
//! - `manifest.json` describing the scenario, seeds and failures
//!
//! Output bytes do not depend on `jobs`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{run, RunOptions, RunResult};
use crate::metrics::{aggregate_runs, write_metrics_csv, Aggregate, Composition};
use crate::scenario::Scenario;

#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub scenario: Scenario,
    pub runs: usize,
    pub base_seed: u64,
    pub jobs: usize,
    pub ticks: Option<u64>,
}

impl BatchSpec {
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(move |k| self.base_seed + k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub ticks: u64,
    pub metrics_stride: u64,
    pub seeds: Vec<u64>,
    pub completed: Vec<u64>,
    pub failed: Vec<FailedRun>,
    /// False when fewer than two runs completed and no interval could be formed.
    pub ci_defined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub manifest: Manifest,
    pub results: Vec<(u64, Result<RunResult, String>)>,
    pub aggregate: Option<Aggregate>,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("batch needs at least one run")]
    NoRuns,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BatchError + '_ {
    move |source| BatchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Hex SHA-256 of the scenario's canonical JSON form.
pub fn scenario_digest(scenario: &Scenario) -> String {
    let json = serde_json::to_string(scenario).expect("scenario serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), BatchError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn write_composition(path: &Path, composition: &Composition) -> Result<(), BatchError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, composition)?;
        writeln!(w)
    })
}

/// Runs every seed and writes the batch layout into `out_dir`.
pub fn run_batch(spec: &BatchSpec, out_dir: &Path) -> Result<BatchOutcome, BatchError> {
    if spec.runs == 0 {
        return Err(BatchError::NoRuns);
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.jobs.max(1)).build()?;
    let seeds: Vec<u64> = spec.seeds().collect();
    let options = RunOptions {
        ticks: spec.ticks,
        ..Default::default()
    };

    let results: Vec<(u64, Result<RunResult, String>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let r = run(&spec.scenario, seed, &options, &mut []).map_err(|e| e.to_string());
                if let Err(e) = &r {
                    log::warn!("seed {seed} failed: {e}");
                }
                (seed, r)
            })
            .collect()
    });

    let mut completed = Vec::new();
    let mut failed = Vec::new();
    let mut series = Vec::new();
    for (seed, r) in &results {
        match r {
            Ok(res) => {
                let path = out_dir.join(format!("metrics_seed_{seed}.csv"));
                write_file(&path, |w| write_metrics_csv(w, &res.metrics_series))?;
                let comp = res
                    .metrics_series
                    .last()
                    .map(|f| f.composition.clone())
                    .unwrap_or_default();
                write_composition(&out_dir.join(format!("composition_seed_{seed}.json")), &comp)?;
                completed.push(*seed);
                series.push(res.metrics_series.clone());
            }
            Err(e) => failed.push(FailedRun {
                seed: *seed,
                error: e.clone(),
            }),
        }
    }

    let aggregate = aggregate_runs(&series).ok();
    if let Some(agg) = &aggregate {
        let path = out_dir.join("aggregate.csv");
        write_file(&path, |w| agg.write_csv(w))?;
    }
    let ci_defined = aggregate.as_ref().is_some_and(Aggregate::ci_defined);
    let note = (!ci_defined).then(|| "CI undefined: fewer than two completed runs".to_string());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_name: spec.scenario.name.clone(),
        scenario_sha256: scenario_digest(&spec.scenario),
        ticks: spec.ticks.unwrap_or(spec.scenario.ticks),
        metrics_stride: spec.scenario.metrics_stride,
        seeds,
        completed,
        failed,
        ci_defined,
        note,
    };
    let path = out_dir.join("manifest.json");
    write_file(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })?;

    Ok(BatchOutcome {
        manifest,
        results,
        aggregate,
    })
}

/// Reads the per-seed metrics files of a finished batch back in.
pub fn read_metrics_csv(path: &Path) -> io::Result<Vec<BTreeMap<String, String>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets;

    #[test]
    fn digest_is_stable_hex() {
        let d = scenario_digest(&presets::water());
        assert_eq!(d.len(), 64);
        assert_eq!(d, scenario_digest(&presets::water()));
        assert_ne!(d, scenario_digest(&presets::methane()));
    }

    #[test]
    fn single_run_has_no_interval() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = presets::water();
        s.population.insert("H".into(), 4);
        s.population.insert("O".into(), 2);
        let spec = BatchSpec {
            scenario: s,
            runs: 1,
            base_seed: 5,
            jobs: 1,
            ticks: Some(20),
        };
        let out = run_batch(&spec, dir.path()).unwrap();
        assert!(!out.manifest.ci_defined);
        assert!(out.manifest.note.as_deref().unwrap().contains("CI undefined"));
        let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        assert!(agg.lines().nth(1).unwrap().ends_with(",,"));
        assert!(dir.path().join("metrics_seed_5.csv").exists());
        assert!(dir.path().join("composition_seed_5.json").exists());
    }
}
