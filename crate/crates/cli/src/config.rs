//! Run configuration files. See `schemas/` in the repository root for the
//! JSON schemas.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uqlab_core::dataset::{
    ambiguous_pool, three_gaussians_label_noise, toy_1d, two_moons, Dataset,
};
use uqlab_core::rng::derive_seed;

use crate::csvio;
use crate::errors::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    TwoMoons { n: usize, noise: f64 },
    ThreeGaussians { n: usize, noise_rate: f64 },
    AmbiguousPool { n_clean: usize, n_ambiguous: usize },
    Toy1d {},
    Csv { path: PathBuf },
}

impl DatasetSpec {
    /// Materialize the dataset; generator kinds draw from a stream derived
    /// from the run seed.
    pub fn build(&self, seed: u64) -> Result<Dataset> {
        let gen_seed = derive_seed(seed, 0xda7a);
        match self {
            DatasetSpec::TwoMoons { n, noise } => two_moons(*n, *noise, gen_seed)
                .map_err(|e| CliError::Config(format!("two_moons: {e}"))),
            DatasetSpec::ThreeGaussians { n, noise_rate } => {
                three_gaussians_label_noise(*n, *noise_rate, gen_seed)
                    .map_err(|e| CliError::Config(format!("three_gaussians: {e}")))
            }
            DatasetSpec::AmbiguousPool {
                n_clean,
                n_ambiguous,
            } => ambiguous_pool(*n_clean, *n_ambiguous, gen_seed)
                .map_err(|e| CliError::Config(format!("ambiguous_pool: {e}"))),
            DatasetSpec::Toy1d {} => Ok(toy_1d(gen_seed)),
            DatasetSpec::Csv { path } => csvio::read_dataset(path),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub net: crate::artifacts::NetConfigJson,
    #[serde(default = "default_density_quantile")]
    pub density_quantile: f64,
    #[serde(default = "default_entropy_quantile")]
    pub entropy_quantile: f64,
}

pub fn default_density_quantile() -> f64 {
    0.01
}

pub fn default_entropy_quantile() -> f64 {
    0.95
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: TrainConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.net.width == 0 {
            return Err(CliError::Config("net.width must be positive".into()));
        }
        if self.net.num_classes < 2 {
            return Err(CliError::Config("net.num_classes must be at least 2".into()));
        }
        if !(self.net.leaky_slope >= 0.0 && self.net.leaky_slope < 1.0) {
            return Err(CliError::Config("net.leaky_slope must lie in [0, 1)".into()));
        }
        if let Some(c) = self.net.sn_coefficient {
            // Written this way so NaN is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(c > 0.0) {
                return Err(CliError::Config("net.sn_coefficient must be positive".into()));
            }
        }
        if self.net.batch_size == 0 {
            return Err(CliError::Config("net.batch_size must be positive".into()));
        }
        for (name, q) in [
            ("density_quantile", self.density_quantile),
            ("entropy_quantile", self.entropy_quantile),
        ] {
            if !(q > 0.0 && q < 1.0) {
                return Err(CliError::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}
