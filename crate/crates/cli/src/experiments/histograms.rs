//! Disentangling histograms: train on a half-clean half-ambiguous pool
//! analog, then tabulate (softmax entropy, log feature density) for held-out
//! clean in-distribution, ambiguous in-distribution, and out-of-distribution
//! samples. Under `--check`, the OoD group must have lower mean log-density
//! than the clean group, and the ambiguous group higher mean entropy.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uqlab_core::dataset::{ambiguous_pool, two_moons, uniform_ood_box, Split};
use uqlab_core::gda;
use uqlab_core::net::{train, NetConfig, Optimizer};
use uqlab_core::rng::derive_seed;
use uqlab_core::uncertainty::entropy;

use super::{materialize_config, ExperimentContext};
use crate::csvio::write_rows;
use crate::errors::{CliError, Result};
use crate::fmtnum::g17;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramsConfig {
    pub seed: u64,
    pub n_clean_train: usize,
    pub n_ambiguous_train: usize,
    pub n_eval: usize,
}

impl Default for HistogramsConfig {
    fn default() -> Self {
        HistogramsConfig {
            seed: 42,
            n_clean_train: 1000,
            n_ambiguous_train: 1000,
            n_eval: 1000,
        }
    }
}

fn hist_net(seed: u64) -> NetConfig {
    NetConfig {
        input_dim: 2,
        width: 64,
        num_blocks: 3,
        num_classes: 2,
        use_residual: true,
        sn_coefficient: Some(3.0),
        sn_on_head: true,
        leaky_slope: 0.01,
        optimizer: Optimizer::adam(1e-3),
        epochs: 100,
        batch_size: 128,
        seed,
    }
}

pub fn run(config_path: Option<&Path>, ctx: &ExperimentContext) -> Result<()> {
    let cfg: HistogramsConfig = materialize_config(
        "histograms",
        config_path,
        ctx,
        HistogramsConfig::default(),
        |c| c.seed,
        |c, s| c.seed = s,
    )?;
    let seed = cfg.seed;
    let train_set = ambiguous_pool(cfg.n_clean_train, cfg.n_ambiguous_train, derive_seed(seed, 1))
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_split(Split::Train);
    let model = train(&train_set, &hist_net(derive_seed(seed, 2)))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let feats_train = model
        .features_batch(&train_set.x)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let g = gda::fit(&feats_train, &train_set.y, 2)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let clean = two_moons(cfg.n_eval, 0.1, derive_seed(seed, 3))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let ambiguous = ambiguous_pool(0, cfg.n_eval, derive_seed(seed, 4))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let excl = train_set.concat(&clean);
    let ood = uniform_ood_box(
        cfg.n_eval,
        &[-3.0, -3.0],
        &[3.0, 3.0],
        &excl,
        0.5,
        derive_seed(seed, 5),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut rows = Vec::new();
    let mut means = Vec::new();
    for (name, ds) in [("clean_id", &clean), ("ambiguous_id", &ambiguous), ("ood", &ood)] {
        let (features, probs) = model
            .features_and_probs(&ds.x)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let dens = g
            .log_density_batch(&features)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let mut sum_h = 0.0;
        let mut sum_d = 0.0;
        for (i, &density) in dens.iter().enumerate() {
            let h = entropy(probs.row(i)).unwrap_or(0.0);
            sum_h += h;
            sum_d += density;
            rows.push(vec![g17(h), g17(density), name.to_string()]);
        }
        means.push((name, sum_h / ds.len() as f64, sum_d / ds.len() as f64));
    }
    write_rows(
        &ctx.out_dir.join("histograms.csv"),
        "entropy,log_density,subset",
        &rows,
    )?;
    let mean_rows: Vec<Vec<String>> = means
        .iter()
        .map(|(n, h, d)| vec![n.to_string(), g17(*h), g17(*d)])
        .collect();
    write_rows(
        &ctx.out_dir.join("subset_means.csv"),
        "subset,mean_entropy,mean_log_density",
        &mean_rows,
    )?;

    if ctx.check {
        let (clean_h, clean_d) = (means[0].1, means[0].2);
        let ambiguous_h = means[1].1;
        let ood_d = means[2].2;
        if ood_d >= clean_d {
            return Err(CliError::CheckFailed(format!(
                "OoD mean log-density {ood_d:.3} not below clean {clean_d:.3}"
            )));
        }
        if ambiguous_h <= clean_h {
            return Err(CliError::CheckFailed(format!(
                "ambiguous mean entropy {ambiguous_h:.4} not above clean {clean_h:.4}"
            )));
        }
        eprintln!(
            "histograms check: density ood {ood_d:.3} < clean {clean_d:.3}; entropy ambiguous {ambiguous_h:.4} > clean {clean_h:.4}"
        );
    }
    Ok(())
}
