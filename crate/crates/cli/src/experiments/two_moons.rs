//! Uncertainty-map experiment: train the residual spectral-normalized
//! classifier and the plain fully connected ablation on two moons, fit the
//! feature density for each, and evaluate softmax entropy and log-density on
//! a regular grid. Under `--check`, replicate over seeds and require the
//! residual model to reach the accuracy/AUROC floors with the ablation's
//! density AUROC strictly lower in at least 4 of 5 seeds.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uqlab_core::dataset::{two_moons, uniform_ood_box, Dataset, Split};
use uqlab_core::gda::{self, GdaModel};
use uqlab_core::linalg::Matrix;
use uqlab_core::metrics::{accuracy, auroc};
use uqlab_core::net::{train, NetConfig, NetModel};
use uqlab_core::rng::derive_seed;
use uqlab_core::uncertainty::entropy;

use super::{map_seeds, materialize_config, ExperimentContext};
use crate::csvio::write_rows;
use crate::errors::{CliError, Result};
use crate::fmtnum::g17;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoMoonsConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub grid_resolution: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub ood_samples: usize,
    pub ood_min_dist: f64,
    /// Seed replicates used by `--check`.
    pub check_seeds: u64,
}

impl Default for TwoMoonsConfig {
    fn default() -> Self {
        TwoMoonsConfig {
            seed: 42,
            n_train: 2000,
            n_test: 1000,
            noise: 0.1,
            grid_resolution: 200,
            grid_lo: -3.0,
            grid_hi: 3.0,
            ood_samples: 1000,
            ood_min_dist: 0.5,
            check_seeds: 5,
        }
    }
}

struct SeedOutcome {
    accuracy_res: f64,
    auroc_res: f64,
    auroc_fc: f64,
}

fn evaluate_model(
    model: &NetModel,
    train_set: &Dataset,
    test_set: &Dataset,
    ood: &Dataset,
) -> Result<(GdaModel, f64, f64)> {
    let feats_train = model
        .features_batch(&train_set.x)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let g = gda::fit(&feats_train, &train_set.y, 2)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let d_test = g
        .log_density_batch(&model.features_batch(&test_set.x).map_err(|e| CliError::Internal(e.to_string()))?)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let d_ood = g
        .log_density_batch(&model.features_batch(&ood.x).map_err(|e| CliError::Internal(e.to_string()))?)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let a = auroc(&d_test, &d_ood).map_err(|e| CliError::Internal(e.to_string()))?;
    let probs = model
        .probs_batch(&test_set.x)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let preds: Vec<usize> = (0..test_set.len())
        .map(|i| usize::from(probs.get(i, 1) > probs.get(i, 0)))
        .collect();
    let acc = accuracy(&preds, &test_set.y).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok((g, acc, a))
}

fn run_seed(cfg: &TwoMoonsConfig, seed: u64, grids: Option<&Path>) -> Result<SeedOutcome> {
    let train_set = two_moons(cfg.n_train, cfg.noise, derive_seed(seed, 1))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let test_set = two_moons(cfg.n_test, cfg.noise, derive_seed(seed, 2))
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_split(Split::Test);
    let excl = train_set.concat(&test_set);
    let ood = uniform_ood_box(
        cfg.ood_samples,
        &[cfg.grid_lo, cfg.grid_lo],
        &[cfg.grid_hi, cfg.grid_hi],
        &excl,
        cfg.ood_min_dist,
        derive_seed(seed, 3),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let res_model = train(&train_set, &NetConfig::two_moons_default(derive_seed(seed, 4)))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let fc_model = train(&train_set, &NetConfig::fc_net(derive_seed(seed, 4)))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let (g_res, acc_res, auroc_res) = evaluate_model(&res_model, &train_set, &test_set, &ood)?;
    let (g_fc, _, auroc_fc) = evaluate_model(&fc_model, &train_set, &test_set, &ood)?;

    if let Some(dir) = grids {
        for (file, model, g) in [
            ("grid_resffn.csv", &res_model, &g_res),
            ("grid_fcnet.csv", &fc_model, &g_fc),
        ] {
            write_grid(&dir.join(file), cfg, model, g)?;
        }
    }
    Ok(SeedOutcome {
        accuracy_res: acc_res,
        auroc_res,
        auroc_fc,
    })
}

fn write_grid(path: &Path, cfg: &TwoMoonsConfig, model: &NetModel, g: &GdaModel) -> Result<()> {
    let r = cfg.grid_resolution;
    let mut x = Matrix::zeros(r * r, 2);
    for i in 0..r {
        let x1 = cfg.grid_lo + (cfg.grid_hi - cfg.grid_lo) * i as f64 / (r - 1) as f64;
        for j in 0..r {
            let x0 = cfg.grid_lo + (cfg.grid_hi - cfg.grid_lo) * j as f64 / (r - 1) as f64;
            x.set(i * r + j, 0, x0);
            x.set(i * r + j, 1, x1);
        }
    }
    let (features, probs) = model
        .features_and_probs(&x)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let dens = g
        .log_density_batch(&features)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let rows: Vec<Vec<String>> = (0..r * r)
        .map(|i| {
            vec![
                g17(x.get(i, 0)),
                g17(x.get(i, 1)),
                g17(entropy(probs.row(i)).unwrap_or(0.0)),
                g17(dens[i]),
            ]
        })
        .collect();
    write_rows(path, "x0,x1,softmax_entropy,log_density", &rows)
}

pub fn run(config_path: Option<&Path>, ctx: &ExperimentContext) -> Result<()> {
    let cfg: TwoMoonsConfig = materialize_config(
        "two_moons",
        config_path,
        ctx,
        TwoMoonsConfig::default(),
        |c| c.seed,
        |c, s| c.seed = s,
    )?;
    // Datasets of the primary run, reusable as inputs to `uqlab score`.
    {
        let train_set = two_moons(cfg.n_train, cfg.noise, derive_seed(cfg.seed, 1))
            .map_err(|e| CliError::Config(e.to_string()))?;
        let test_set = two_moons(cfg.n_test, cfg.noise, derive_seed(cfg.seed, 2))
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_split(Split::Test);
        let excl = train_set.concat(&test_set);
        let ood = uniform_ood_box(
            cfg.ood_samples,
            &[cfg.grid_lo, cfg.grid_lo],
            &[cfg.grid_hi, cfg.grid_hi],
            &excl,
            cfg.ood_min_dist,
            derive_seed(cfg.seed, 3),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        crate::csvio::write_dataset(&ctx.out_dir.join("train.csv"), &train_set)?;
        crate::csvio::write_dataset(&ctx.out_dir.join("test.csv"), &test_set)?;
        crate::csvio::write_dataset(&ctx.out_dir.join("ood.csv"), &ood)?;
    }
    // Primary run with grid maps.
    let primary = run_seed(&cfg, cfg.seed, Some(ctx.out_dir))?;
    let mut summary = vec![vec![
        cfg.seed.to_string(),
        g17(primary.accuracy_res),
        g17(primary.auroc_res),
        g17(primary.auroc_fc),
    ]];

    if ctx.check {
        let seeds: Vec<u64> = (0..cfg.check_seeds).map(|k| derive_seed(cfg.seed, 1000 + k)).collect();
        let outcomes = map_seeds(&seeds, ctx.jobs, |s| run_seed(&cfg, s, None));
        let mut fc_lower = 0;
        for (s, outcome) in seeds.iter().zip(outcomes) {
            let o = outcome?;
            if o.accuracy_res < 0.95 {
                return Err(CliError::CheckFailed(format!(
                    "seed {s}: residual test accuracy {:.4} below 0.95",
                    o.accuracy_res
                )));
            }
            if o.auroc_res < 0.95 {
                return Err(CliError::CheckFailed(format!(
                    "seed {s}: residual density AUROC {:.4} below 0.95",
                    o.auroc_res
                )));
            }
            fc_lower += usize::from(o.auroc_fc < o.auroc_res);
            summary.push(vec![
                s.to_string(),
                g17(o.accuracy_res),
                g17(o.auroc_res),
                g17(o.auroc_fc),
            ]);
        }
        if fc_lower * 5 < cfg.check_seeds as usize * 4 {
            return Err(CliError::CheckFailed(format!(
                "fc-net density AUROC lower in only {fc_lower}/{} seeds",
                cfg.check_seeds
            )));
        }
        eprintln!(
            "two_moons check: fc-net auroc lower in {fc_lower}/{} seeds",
            cfg.check_seeds
        );
    }
    write_rows(
        &ctx.out_dir.join("summary.csv"),
        "seed,test_accuracy_resffn,density_auroc_resffn,density_auroc_fcnet",
        &summary,
    )
}
