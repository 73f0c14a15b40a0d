//! Pool-based acquisition comparison on the ambiguous pool. Writes one curve
//! per (acquisition, seed) plus a summary; under `--check`, density
//! acquisition must accumulate a lower ambiguous fraction and reach the
//! softmax-entropy plateau with fewer acquired labels in at least 4 of 5
//! seeds.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uqlab_core::active::{run as al_run, Acquisition, AlConfig, AlCurve};
use uqlab_core::dataset::{ambiguous_pool, two_moons, Split};
use uqlab_core::net::{NetConfig, Optimizer};
use uqlab_core::rng::derive_seed;

use super::{map_seeds, materialize_config, ExperimentContext};
use crate::csvio::write_rows;
use crate::errors::{CliError, Result};
use crate::fmtnum::g17;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActiveLearningConfig {
    pub seed: u64,
    pub pool_clean: usize,
    pub pool_ambiguous: usize,
    pub n_test: usize,
    pub initial_size: usize,
    pub acquisition_size: usize,
    pub budget: usize,
    pub acquisitions: Vec<String>,
    pub ensemble_size: usize,
    pub check_seeds: u64,
}

impl Default for ActiveLearningConfig {
    fn default() -> Self {
        ActiveLearningConfig {
            seed: 42,
            pool_clean: 1000,
            pool_ambiguous: 60_000,
            n_test: 1000,
            initial_size: 20,
            acquisition_size: 5,
            budget: 300,
            acquisitions: vec!["softmax_entropy".into(), "neg_log_density".into()],
            ensemble_size: 3,
            check_seeds: 5,
        }
    }
}

fn al_net(seed: u64) -> NetConfig {
    NetConfig {
        input_dim: 2,
        width: 32,
        num_blocks: 2,
        num_classes: 2,
        use_residual: true,
        sn_coefficient: Some(3.0),
        sn_on_head: true,
        leaky_slope: 0.01,
        optimizer: Optimizer::adam(2e-3),
        epochs: 60,
        batch_size: 64,
        seed,
    }
}

fn run_pair(cfg: &ActiveLearningConfig, acq: Acquisition, seed: u64) -> Result<AlCurve> {
    let pool = ambiguous_pool(cfg.pool_clean, cfg.pool_ambiguous, derive_seed(seed, 1))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let test = two_moons(cfg.n_test, 0.1, derive_seed(seed, 2))
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_split(Split::Test);
    let al_cfg = AlConfig {
        initial_size: cfg.initial_size,
        acquisition_size: cfg.acquisition_size,
        budget: cfg.budget,
        retrain: al_net(seed),
        acquisition: acq,
        ensemble_size: cfg.ensemble_size,
        seed: derive_seed(seed, 3),
    };
    al_run(&pool, &test, &al_cfg).map_err(|e| CliError::Internal(e.to_string()))
}

fn write_curve(path: &Path, curve: &AlCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .steps
        .iter()
        .enumerate()
        .map(|(step, s)| {
            vec![
                step.to_string(),
                s.labeled_count.to_string(),
                g17(s.test_accuracy),
                s.ambiguous_acquired.to_string(),
            ]
        })
        .collect();
    write_rows(path, "step,labeled,accuracy,ambiguous_acquired", &rows)
}

/// Post-initial curve points; the shared starting model is excluded from
/// plateau and reach comparisons.
fn post_initial(curve: &AlCurve, initial: usize) -> Vec<(usize, f64)> {
    curve
        .steps
        .iter()
        .filter(|s| s.labeled_count > initial)
        .map(|s| (s.labeled_count, s.test_accuracy))
        .collect()
}

pub fn run(config_path: Option<&Path>, ctx: &ExperimentContext) -> Result<()> {
    let cfg: ActiveLearningConfig = materialize_config(
        "active_learning",
        config_path,
        ctx,
        ActiveLearningConfig::default(),
        |c| c.seed,
        |c, s| c.seed = s,
    )?;
    let acquisitions: Vec<Acquisition> = cfg
        .acquisitions
        .iter()
        .map(|name| {
            Acquisition::parse(name)
                .ok_or_else(|| CliError::Config(format!("unknown acquisition {name:?}")))
        })
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    for &acq in &acquisitions {
        let curve = run_pair(&cfg, acq, cfg.seed)?;
        write_curve(
            &ctx.out_dir.join(format!("curve_{}_seed{}.csv", acq.as_str(), cfg.seed)),
            &curve,
        )?;
        summary.push(vec![
            acq.as_str().to_string(),
            cfg.seed.to_string(),
            g17(curve.final_accuracy()),
            g17(curve.ambiguous_acquired_total() as f64 / curve.total_acquired().max(1) as f64),
        ]);
    }

    if ctx.check {
        let seeds: Vec<u64> = (0..cfg.check_seeds).map(|k| derive_seed(cfg.seed, 2000 + k)).collect();
        let outcomes = map_seeds(&seeds, ctx.jobs, |s| -> Result<bool> {
            let se = run_pair(&cfg, Acquisition::SoftmaxEntropy, s)?;
            let nld = run_pair(&cfg, Acquisition::NegLogDensity, s)?;
            let frac_se = se.ambiguous_acquired_total() as f64 / se.total_acquired() as f64;
            let frac_nld = nld.ambiguous_acquired_total() as f64 / nld.total_acquired() as f64;
            let se_curve = post_initial(&se, cfg.initial_size);
            let nld_curve = post_initial(&nld, cfg.initial_size);
            let target = se_curve.iter().map(|&(_, a)| a).fold(f64::MIN, f64::max);
            let first =
                |c: &[(usize, f64)]| c.iter().find(|&&(_, a)| a >= target).map(|&(l, _)| l);
            let labels_se = first(&se_curve).unwrap_or(usize::MAX);
            let ok = frac_nld < frac_se
                && first(&nld_curve).is_some_and(|l| l < labels_se);
            eprintln!(
                "active_learning check seed {s}: amb {frac_nld:.3} vs {frac_se:.3}, reach {:?} vs {labels_se}",
                first(&nld_curve)
            );
            Ok(ok)
        });
        let mut wins = 0;
        for o in outcomes {
            wins += usize::from(o?);
        }
        if wins * 5 < cfg.check_seeds as usize * 4 {
            return Err(CliError::CheckFailed(format!(
                "density acquisition won in only {wins}/{} seeds",
                cfg.check_seeds
            )));
        }
        eprintln!("active_learning check: density acquisition won in {wins}/{} seeds", cfg.check_seeds);
    }
    write_rows(
        &ctx.out_dir.join("summary.csv"),
        "acquisition,seed,final_accuracy,ambiguous_fraction",
        &summary,
    )
}
