//! Dirichlet entropy analytics versus Monte Carlo: for a batch of
//! concentration vectors, tabulate the closed-form expected entropy and
//! entropy variance next to their Monte-Carlo estimates. Under `--check`,
//! every analytic value must sit within three standard errors of its
//! estimate.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uqlab_core::dirichlet::DirichletParams;
use uqlab_core::rng::{derive_seed, Rng};

use super::{materialize_config, ExperimentContext};
use crate::csvio::write_rows;
use crate::errors::{CliError, Result};
use crate::fmtnum::g17;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletConfig {
    pub seed: u64,
    pub num_classes: usize,
    pub num_vectors: usize,
    pub mc_samples: usize,
}

impl Default for DirichletConfig {
    fn default() -> Self {
        DirichletConfig {
            seed: 42,
            num_classes: 3,
            num_vectors: 20,
            mc_samples: 1_000_000,
        }
    }
}

struct McEntropy {
    mean: f64,
    mean_se: f64,
    var: f64,
    var_se: f64,
}

fn mc_entropy(d: &DirichletParams, rng: &mut Rng, n: usize) -> McEntropy {
    let samples = d.sample(rng, n);
    let hs: Vec<f64> = (0..n)
        .map(|i| {
            samples
                .row(i)
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.ln())
                .sum()
        })
        .collect();
    let mean = hs.iter().sum::<f64>() / n as f64;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &h in &hs {
        let c = h - mean;
        m2 += c * c;
        m4 += c * c * c * c;
    }
    m2 /= n as f64;
    m4 /= n as f64;
    McEntropy {
        mean,
        mean_se: (m2 / n as f64).sqrt(),
        var: m2,
        var_se: ((m4 - m2 * m2).max(0.0) / n as f64).sqrt(),
    }
}

pub fn run(config_path: Option<&Path>, ctx: &ExperimentContext) -> Result<()> {
    let cfg: DirichletConfig = materialize_config(
        "dirichlet",
        config_path,
        ctx,
        DirichletConfig::default(),
        |c| c.seed,
        |c, s| c.seed = s,
    )?;
    if cfg.num_classes < 2 {
        return Err(CliError::Config("num_classes must be at least 2".into()));
    }
    let k = cfg.num_classes;
    let mut alpha_rng = Rng::new(derive_seed(cfg.seed, 1));
    let mut vectors: Vec<Vec<f64>> = vec![vec![1.0; k]];
    for _ in 1..cfg.num_vectors.max(1) {
        vectors.push((0..k).map(|_| 0.2 + 5.0 * alpha_rng.uniform()).collect());
    }

    let mut header = String::new();
    for i in 0..k {
        header.push_str(&format!("alpha{i},"));
    }
    header.push_str("expected_entropy,entropy_variance,mc_mean,mc_var,mc_se");

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (idx, alpha) in vectors.iter().enumerate() {
        let d = DirichletParams::new(alpha.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        let mut rng = Rng::new(derive_seed(cfg.seed, 300 + idx as u64));
        let mc = mc_entropy(&d, &mut rng, cfg.mc_samples);
        let analytic_mean = d.expected_entropy();
        let analytic_var = d.entropy_variance();
        let mut row: Vec<String> = alpha.iter().map(|&a| g17(a)).collect();
        row.extend([
            g17(analytic_mean),
            g17(analytic_var),
            g17(mc.mean),
            g17(mc.var),
            g17(mc.mean_se),
        ]);
        rows.push(row);
        if (analytic_mean - mc.mean).abs() > 3.0 * mc.mean_se {
            failures.push(format!(
                "alpha {alpha:?}: expected entropy {analytic_mean} vs MC {} (se {})",
                mc.mean, mc.mean_se
            ));
        }
        if (analytic_var - mc.var).abs() > 3.0 * mc.var_se {
            failures.push(format!(
                "alpha {alpha:?}: entropy variance {analytic_var} vs MC {} (se {})",
                mc.var, mc.var_se
            ));
        }
    }
    write_rows(&ctx.out_dir.join("analysis.csv"), &header, &rows)?;

    if ctx.check {
        if let Some(first) = failures.first() {
            return Err(CliError::CheckFailed(format!(
                "{} of {} comparisons outside 3 SE; first: {first}",
                failures.len(),
                2 * vectors.len()
            )));
        }
        eprintln!(
            "dirichlet check: {} analytic-vs-MC comparisons within 3 SE",
            2 * vectors.len()
        );
    }
    Ok(())
}
