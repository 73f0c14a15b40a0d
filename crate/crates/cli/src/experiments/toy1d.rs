//! Five-member ensemble on the 1D layout: per-member probabilities and
//! entropies over a grid, plus the ensemble's predictive entropy and mutual
//! information. Under `--check`, replicated ensembles must put more mutual
//! information on the empty gap than on the ambiguous bands, and more
//! predictive entropy on the bands than on the unambiguous clusters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uqlab_core::dataset::{toy_1d, Split, TOY1D_BAND};
use uqlab_core::linalg::Matrix;
use uqlab_core::net::{train, NetConfig, Optimizer};
use uqlab_core::rng::derive_seed;
use uqlab_core::uncertainty::{decompose, entropy, EnsemblePrediction};

use super::{map_seeds, materialize_config, ExperimentContext};
use crate::csvio::write_rows;
use crate::errors::{CliError, Result};
use crate::fmtnum::g17;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Toy1dConfig {
    pub seed: u64,
    pub members: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub check_seeds: u64,
}

impl Default for Toy1dConfig {
    fn default() -> Self {
        Toy1dConfig {
            seed: 42,
            members: 5,
            grid_lo: -6.0,
            grid_hi: 6.0,
            grid_points: 481,
            check_seeds: 5,
        }
    }
}

fn member_net(seed: u64) -> NetConfig {
    // Members stay small so they cannot memorize the coin-flip labels in the
    // ambiguous bands; disagreement then comes from extrapolation into the
    // empty gap, not from fitting label noise.
    NetConfig {
        input_dim: 1,
        width: 16,
        num_blocks: 1,
        num_classes: 2,
        use_residual: true,
        sn_coefficient: None,
        sn_on_head: false,
        leaky_slope: 0.01,
        optimizer: Optimizer::adam(2e-3),
        epochs: 80,
        batch_size: 64,
        seed,
    }
}

struct GridStats {
    xs: Vec<f64>,
    member_p1: Vec<Vec<f64>>,
    member_h: Vec<Vec<f64>>,
    pe: Vec<f64>,
    mi: Vec<f64>,
    expected: Vec<f64>,
}

fn run_ensemble(cfg: &Toy1dConfig, seed: u64) -> Result<GridStats> {
    let ds = toy_1d(derive_seed(seed, 1)).with_split(Split::Train);
    let models: Vec<_> = (0..cfg.members)
        .map(|m| {
            train(&ds, &member_net(derive_seed(seed, 10 + m as u64)))
                .map_err(|e| CliError::Internal(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = (0..cfg.grid_points)
        .map(|i| cfg.grid_lo + (cfg.grid_hi - cfg.grid_lo) * i as f64 / (cfg.grid_points - 1) as f64)
        .collect();
    let mut grid_x = Matrix::zeros(xs.len(), 1);
    for (i, &x) in xs.iter().enumerate() {
        grid_x.set(i, 0, x);
    }
    let member_probs: Vec<Matrix> = models
        .iter()
        .map(|m| {
            m.probs_batch(&grid_x)
                .map_err(|e| CliError::Internal(e.to_string()))
        })
        .collect::<Result<_>>()?;

    let mut stats = GridStats {
        xs,
        member_p1: vec![Vec::new(); cfg.members],
        member_h: vec![Vec::new(); cfg.members],
        pe: Vec::new(),
        mi: Vec::new(),
        expected: Vec::new(),
    };
    for i in 0..stats.xs.len() {
        let mut rows = Matrix::zeros(cfg.members, 2);
        for (m, probs) in member_probs.iter().enumerate() {
            rows.row_mut(m).copy_from_slice(probs.row(i));
            stats.member_p1[m].push(probs.get(i, 1));
            stats.member_h[m].push(entropy(probs.row(i)).unwrap_or(0.0));
        }
        let e = EnsemblePrediction::new(rows).map_err(|e| CliError::Internal(e.to_string()))?;
        let d = decompose(&e);
        stats.pe.push(d.predictive_entropy);
        stats.mi.push(d.mutual_information);
        stats.expected.push(d.expected_entropy);
    }
    Ok(stats)
}

fn region_mean(stats: &GridStats, values: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (&x, &v) in stats.xs.iter().zip(values) {
        if pred(x) {
            sum += v;
            n += 1;
        }
    }
    sum / n.max(1) as f64
}

fn in_gap(x: f64) -> bool {
    x > -2.0 && x < 2.0
}

fn in_band(x: f64) -> bool {
    let a = x.abs();
    (TOY1D_BAND.0..=TOY1D_BAND.1).contains(&a)
}

fn in_cluster(x: f64) -> bool {
    let a = x.abs();
    (2.5..3.4).contains(&a) || (4.6..5.5).contains(&a)
}

pub fn run(config_path: Option<&Path>, ctx: &ExperimentContext) -> Result<()> {
    let cfg: Toy1dConfig = materialize_config(
        "toy1d",
        config_path,
        ctx,
        Toy1dConfig::default(),
        |c| c.seed,
        |c, s| c.seed = s,
    )?;
    let stats = run_ensemble(&cfg, cfg.seed)?;

    // Decomposition identity holds at every grid point.
    for i in 0..stats.xs.len() {
        let gap = (stats.pe[i] - (stats.mi[i] + stats.expected[i])).abs();
        if gap >= 1e-12 {
            return Err(CliError::Internal(format!(
                "entropy decomposition violated at x = {} by {gap}",
                stats.xs[i]
            )));
        }
    }

    let mut header = String::from("x");
    for m in 0..cfg.members {
        header.push_str(&format!(",p1_member{m}"));
    }
    for m in 0..cfg.members {
        header.push_str(&format!(",entropy_member{m}"));
    }
    header.push_str(",predictive_entropy,mutual_information,expected_entropy");
    let rows: Vec<Vec<String>> = (0..stats.xs.len())
        .map(|i| {
            let mut row = vec![g17(stats.xs[i])];
            for m in 0..cfg.members {
                row.push(g17(stats.member_p1[m][i]));
            }
            for m in 0..cfg.members {
                row.push(g17(stats.member_h[m][i]));
            }
            row.push(g17(stats.pe[i]));
            row.push(g17(stats.mi[i]));
            row.push(g17(stats.expected[i]));
            row
        })
        .collect();
    write_rows(&ctx.out_dir.join("ensemble.csv"), &header, &rows)?;

    if ctx.check {
        let seeds: Vec<u64> = (0..cfg.check_seeds).map(|k| derive_seed(cfg.seed, 500 + k)).collect();
        let replicates = map_seeds(&seeds, ctx.jobs, |s| run_ensemble(&cfg, s));
        let mut mi_ok = 0;
        let mut pe_ok = 0;
        for rep in replicates {
            let rep = rep?;
            let mi_gap = region_mean(&rep, &rep.mi, in_gap);
            let mi_band = region_mean(&rep, &rep.mi, in_band);
            let pe_band = region_mean(&rep, &rep.pe, in_band);
            let pe_cluster = region_mean(&rep, &rep.pe, in_cluster);
            mi_ok += usize::from(mi_gap > mi_band);
            pe_ok += usize::from(pe_band > pe_cluster);
            eprintln!(
                "toy1d check: MI gap {mi_gap:.4} vs band {mi_band:.4}; PE band {pe_band:.4} vs cluster {pe_cluster:.4}"
            );
        }
        let majority = (cfg.check_seeds as usize).div_ceil(2);
        if mi_ok < majority {
            return Err(CliError::CheckFailed(format!(
                "ensemble MI ranked the empty gap above the ambiguous bands in only {mi_ok}/{} replicates",
                cfg.check_seeds
            )));
        }
        if pe_ok < majority {
            return Err(CliError::CheckFailed(format!(
                "ensemble PE ranked the ambiguous bands above the clusters in only {pe_ok}/{} replicates",
                cfg.check_seeds
            )));
        }
        eprintln!(
            "toy1d check: MI ordering {mi_ok}/{}, PE ordering {pe_ok}/{}",
            cfg.check_seeds, cfg.check_seeds
        );
    }
    Ok(())
}
