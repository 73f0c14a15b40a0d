//! JSON serialization of trained models, density fits, and thresholds.
//!
//! Model files look like `{config, layers: [{w, b, u}, ...], head}` where
//! `layers[0]` is the input lift and the rest are the residual blocks;
//! density files are `{K, d, classes: [{mean, cov_lower, log_prior}],
//! jitter}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uqlab_core::gda::{GdaClass, GdaModel};
use uqlab_core::linalg::{CholeskyFactor, Matrix};
use uqlab_core::net::{Layer, NetConfig, NetModel, Optimizer};
use uqlab_core::uncertainty::Thresholds;

use crate::errors::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        eps: f64,
    },
    SgdMomentum {
        lr: f64,
        momentum: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_adam_eps() -> f64 {
    1e-8
}

impl From<&Optimizer> for OptimizerSpec {
    fn from(o: &Optimizer) -> Self {
        match *o {
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => OptimizerSpec::Adam {
                lr,
                beta1,
                beta2,
                eps,
            },
            Optimizer::SgdMomentum { lr, momentum } => OptimizerSpec::SgdMomentum { lr, momentum },
        }
    }
}

impl From<&OptimizerSpec> for Optimizer {
    fn from(o: &OptimizerSpec) -> Self {
        match *o {
            OptimizerSpec::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            },
            OptimizerSpec::SgdMomentum { lr, momentum } => Optimizer::SgdMomentum { lr, momentum },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetConfigJson {
    pub input_dim: usize,
    pub width: usize,
    pub num_blocks: usize,
    pub num_classes: usize,
    pub use_residual: bool,
    pub sn_coefficient: Option<f64>,
    #[serde(default = "default_true")]
    pub sn_on_head: bool,
    #[serde(default = "default_leaky_slope")]
    pub leaky_slope: f64,
    pub optimizer: OptimizerSpec,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_leaky_slope() -> f64 {
    0.01
}

impl From<&NetConfig> for NetConfigJson {
    fn from(c: &NetConfig) -> Self {
        NetConfigJson {
            input_dim: c.input_dim,
            width: c.width,
            num_blocks: c.num_blocks,
            num_classes: c.num_classes,
            use_residual: c.use_residual,
            sn_coefficient: c.sn_coefficient,
            sn_on_head: c.sn_on_head,
            leaky_slope: c.leaky_slope,
            optimizer: (&c.optimizer).into(),
            epochs: c.epochs,
            batch_size: c.batch_size,
            seed: c.seed,
        }
    }
}

impl From<&NetConfigJson> for NetConfig {
    fn from(c: &NetConfigJson) -> Self {
        NetConfig {
            input_dim: c.input_dim,
            width: c.width,
            num_blocks: c.num_blocks,
            num_classes: c.num_classes,
            use_residual: c.use_residual,
            sn_coefficient: c.sn_coefficient,
            sn_on_head: c.sn_on_head,
            leaky_slope: c.leaky_slope,
            optimizer: (&c.optimizer).into(),
            epochs: c.epochs,
            batch_size: c.batch_size,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerJson {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    u: Vec<f64>,
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Data("ragged or empty weight matrix".into()));
    }
    let mut data = Vec::with_capacity(r * c);
    for row in rows {
        data.extend_from_slice(row);
    }
    Ok(Matrix::from_vec(r, c, data))
}

impl LayerJson {
    fn from_layer(l: &Layer) -> LayerJson {
        LayerJson {
            w: matrix_to_rows(&l.w),
            b: l.b.clone(),
            u: l.u.clone(),
        }
    }

    fn to_layer(&self) -> Result<Layer> {
        let w = rows_to_matrix(&self.w)?;
        if w.rows() != self.b.len() || w.rows() != self.u.len() {
            return Err(CliError::Data("layer shape mismatch".into()));
        }
        Ok(Layer::from_parts(w, self.b.clone(), self.u.clone()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelJson {
    config: NetConfigJson,
    /// Input lift followed by the residual blocks.
    layers: Vec<LayerJson>,
    head: LayerJson,
}

pub fn save_model(path: &Path, model: &NetModel) -> Result<()> {
    let mut layers = vec![LayerJson::from_layer(&model.lift)];
    layers.extend(model.blocks.iter().map(LayerJson::from_layer));
    let dto = ModelJson {
        config: (&model.config).into(),
        layers,
        head: LayerJson::from_layer(&model.head),
    };
    fs::write(path, serde_json::to_string_pretty(&dto).expect("serializable"))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NetModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let dto: ModelJson = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let config: NetConfig = (&dto.config).into();
    if dto.layers.len() != config.num_blocks + 1 {
        return Err(CliError::Data(format!(
            "{}: expected {} layers, found {}",
            path.display(),
            config.num_blocks + 1,
            dto.layers.len()
        )));
    }
    let mut it = dto.layers.iter();
    let lift = it.next().expect("layer count checked").to_layer()?;
    let blocks = it.map(LayerJson::to_layer).collect::<Result<Vec<_>>>()?;
    let head = dto.head.to_layer()?;
    if lift.w.cols() != config.input_dim
        || lift.w.rows() != config.width
        || head.w.rows() != config.num_classes
        || blocks
            .iter()
            .any(|b| b.w.rows() != config.width || b.w.cols() != config.width)
    {
        return Err(CliError::Data(format!(
            "{}: layer shapes disagree with the config",
            path.display()
        )));
    }
    Ok(NetModel {
        lift,
        blocks,
        head,
        config,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct GdaClassJson {
    mean: Vec<f64>,
    cov_lower: Vec<Vec<f64>>,
    log_prior: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GdaJson {
    #[serde(rename = "K")]
    k: usize,
    d: usize,
    classes: Vec<GdaClassJson>,
    jitter: f64,
}

pub fn save_gda(path: &Path, model: &GdaModel) -> Result<()> {
    let dto = GdaJson {
        k: model.num_classes(),
        d: model.dim,
        classes: model
            .classes
            .iter()
            .map(|c| GdaClassJson {
                mean: c.mean.clone(),
                cov_lower: matrix_to_rows(c.cov_chol.lower()),
                log_prior: c.log_prior,
            })
            .collect(),
        jitter: model.jitter_used,
    };
    fs::write(path, serde_json::to_string_pretty(&dto).expect("serializable"))?;
    Ok(())
}

pub fn load_gda(path: &Path) -> Result<GdaModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let dto: GdaJson = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if dto.classes.len() != dto.k {
        return Err(CliError::Data(format!(
            "{}: K = {} but {} classes present",
            path.display(),
            dto.k,
            dto.classes.len()
        )));
    }
    let classes = dto
        .classes
        .iter()
        .map(|c| {
            let lower = rows_to_matrix(&c.cov_lower)?;
            if lower.rows() != dto.d || c.mean.len() != dto.d {
                return Err(CliError::Data(format!(
                    "{}: class dimensions disagree with d = {}",
                    path.display(),
                    dto.d
                )));
            }
            Ok(GdaClass {
                mean: c.mean.clone(),
                cov_chol: CholeskyFactor::from_lower(lower),
                log_prior: c.log_prior,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GdaModel {
        classes,
        dim: dto.d,
        jitter_used: dto.jitter,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ThresholdsJson {
    pub density_log_threshold: f64,
    pub entropy_threshold: f64,
    pub density_quantile: f64,
    pub entropy_quantile: f64,
}

pub fn save_thresholds(path: &Path, t: &Thresholds, dq: f64, eq: f64) -> Result<()> {
    let dto = ThresholdsJson {
        density_log_threshold: t.density_log_threshold,
        entropy_threshold: t.entropy_threshold,
        density_quantile: dq,
        entropy_quantile: eq,
    };
    fs::write(path, serde_json::to_string_pretty(&dto).expect("serializable"))?;
    Ok(())
}

pub fn load_thresholds(path: &Path) -> Result<Thresholds> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let dto: ThresholdsJson = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Thresholds {
        density_log_threshold: dto.density_log_threshold,
        entropy_threshold: dto.entropy_threshold,
    })
}
