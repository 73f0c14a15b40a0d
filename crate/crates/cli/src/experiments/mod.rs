//! Canned experiments. Each one materializes its config (defaults overlaid
//! with an optional config file), writes `config.json` and `manifest.json`
//! into the output directory next to its CSVs, and optionally verifies its
//! acceptance properties under `--check`.

mod active_learning;
mod dirichlet;
mod histograms;
mod objective_mismatch;
mod toy1d;
mod two_moons;

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

use crate::errors::{CliError, Result};

pub const EXPERIMENT_NAMES: [&str; 6] = [
    "two_moons",
    "toy1d",
    "histograms",
    "active_learning",
    "dirichlet",
    "objective_mismatch",
];

pub struct ExperimentContext<'a> {
    pub out_dir: &'a Path,
    pub seed_override: Option<u64>,
    pub jobs: usize,
    pub check: bool,
}

pub fn dispatch(name: &str, config_path: Option<&Path>, ctx: &ExperimentContext) -> Result<()> {
    fs::create_dir_all(ctx.out_dir)?;
    match name {
        "two_moons" => two_moons::run(config_path, ctx),
        "toy1d" => toy1d::run(config_path, ctx),
        "histograms" => histograms::run(config_path, ctx),
        "active_learning" => active_learning::run(config_path, ctx),
        "dirichlet" => dirichlet::run(config_path, ctx),
        "objective_mismatch" => objective_mismatch::run(config_path, ctx),
        other => Err(CliError::Usage(format!(
            "unknown experiment {other:?}; valid names: {}",
            EXPERIMENT_NAMES.join(", ")
        ))),
    }
}

/// Load a config file over the defaults, apply the seed override, and write
/// the effective config plus a manifest recording its hash and seed.
pub fn materialize_config<C>(
    name: &str,
    config_path: Option<&Path>,
    ctx: &ExperimentContext,
    default: C,
    seed_of: impl Fn(&C) -> u64,
    seed_set: impl Fn(&mut C, u64),
) -> Result<C>
where
    C: Serialize + DeserializeOwned,
{
    let mut cfg = match config_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => default,
    };
    if let Some(seed) = ctx.seed_override {
        seed_set(&mut cfg, seed);
    }
    let config_json = serde_json::to_string_pretty(&cfg).expect("serializable");
    fs::write(ctx.out_dir.join("config.json"), &config_json)?;

    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let manifest = serde_json::json!({
        "experiment": name,
        "seed": seed_of(&cfg),
        "config_sha256": format!("{:x}", hasher.finalize()),
        "version": format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
    });
    fs::write(
        ctx.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable"),
    )?;
    Ok(cfg)
}

/// Run one job per seed on up to `jobs` worker threads, preserving seed
/// order in the returned vector.
pub fn map_seeds<T: Send>(
    seeds: &[u64],
    jobs: usize,
    f: impl Fn(u64) -> T + Sync,
) -> Vec<T> {
    let jobs = jobs.max(1);
    if jobs == 1 || seeds.len() <= 1 {
        return seeds.iter().map(|&s| f(s)).collect();
    }
    let mut results: Vec<Option<T>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<Vec<usize>> = (0..jobs)
            .map(|w| (w..seeds.len()).step_by(jobs).collect())
            .collect();
        let mut handles = Vec::new();
        for chunk in chunks {
            let fref = &f;
            handles.push(scope.spawn(move || {
                chunk
                    .into_iter()
                    .map(|i| (i, fref(seeds[i])))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            for (i, v) in h.join().expect("seed worker panicked") {
                results[i] = Some(v);
            }
        }
    });
    results.into_iter().map(|v| v.expect("all seeds ran")).collect()
}
