//! Pool-based active learning: train on the labeled set, score the remaining
//! pool with an acquisition function, move the top scorers into the labeled
//! set, and repeat until the label budget is spent.

use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{Dataset, Split};
use crate::gda::{self, GdaModel};
use crate::linalg::Matrix;
use crate::metrics;
use crate::net::{self, NetConfig, NetError, NetModel};
use crate::rng::{derive_seed, Rng};
use crate::uncertainty::{decompose, entropy_unchecked, EnsemblePrediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveError {
    /// The pool cannot cover the label budget.
    PoolExhausted,
    DivergedLoss,
    /// Density acquisition was requested without a fitted density model.
    MissingGda,
    /// The labeled set failed to produce a valid model or density fit.
    DegenerateLabeledSet,
}

impl fmt::Display for ActiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActiveError::PoolExhausted => write!(f, "pool smaller than label budget"),
            ActiveError::DivergedLoss => write!(f, "training diverged during a round"),
            ActiveError::MissingGda => write!(f, "density acquisition needs a density model"),
            ActiveError::DegenerateLabeledSet => write!(f, "labeled set cannot be fitted"),
        }
    }
}

impl core::error::Error for ActiveError {}

impl From<NetError> for ActiveError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::DivergedLoss => ActiveError::DivergedLoss,
            NetError::ShapeMismatch => ActiveError::DegenerateLabeledSet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquisition {
    SoftmaxEntropy,
    NegLogDensity,
    EnsemblePe,
    EnsembleMi,
    Random,
}

impl Acquisition {
    pub fn as_str(self) -> &'static str {
        match self {
            Acquisition::SoftmaxEntropy => "softmax_entropy",
            Acquisition::NegLogDensity => "neg_log_density",
            Acquisition::EnsemblePe => "ensemble_pe",
            Acquisition::EnsembleMi => "ensemble_mi",
            Acquisition::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Acquisition> {
        Some(match s {
            "softmax_entropy" => Acquisition::SoftmaxEntropy,
            "neg_log_density" => Acquisition::NegLogDensity,
            "ensemble_pe" => Acquisition::EnsemblePe,
            "ensemble_mi" => Acquisition::EnsembleMi,
            "random" => Acquisition::Random,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AlConfig {
    pub initial_size: usize,
    pub acquisition_size: usize,
    /// Maximum labeled-set size; the loop stops once it is reached.
    pub budget: usize,
    pub retrain: NetConfig,
    pub acquisition: Acquisition,
    /// Members trained per round for the ensemble acquisitions.
    pub ensemble_size: usize,
    pub seed: u64,
}

impl AlConfig {
    pub fn validate(&self, num_classes: usize) {
        assert!(self.initial_size >= num_classes, "initial set smaller than K");
        assert!(self.acquisition_size >= 1, "acquisition size must be >= 1");
        assert!(self.budget >= self.initial_size, "budget below initial size");
        if matches!(
            self.acquisition,
            Acquisition::EnsemblePe | Acquisition::EnsembleMi
        ) {
            assert!(self.ensemble_size >= 1, "ensemble size must be >= 1");
        }
    }
}

/// One recorded acquisition round.
#[derive(Debug, Clone)]
pub struct AlStep {
    pub labeled_count: usize,
    pub test_accuracy: f64,
    /// Pool indices acquired after this evaluation (empty on the final step).
    pub acquired: Vec<usize>,
    pub ambiguous_acquired: usize,
}

/// Learning curve plus per-step acquisition records.
#[derive(Debug, Clone)]
pub struct AlCurve {
    pub steps: Vec<AlStep>,
}

impl AlCurve {
    /// Total ambiguous-flagged acquisitions over all rounds (the initial set
    /// is not counted).
    pub fn ambiguous_acquired_total(&self) -> usize {
        self.steps.iter().map(|s| s.ambiguous_acquired).sum()
    }

    pub fn total_acquired(&self) -> usize {
        self.steps.iter().map(|s| s.acquired.len()).sum()
    }

    /// Smallest labeled count whose accuracy reaches `target`.
    pub fn labels_to_reach(&self, target: f64) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| s.test_accuracy >= target)
            .map(|s| s.labeled_count)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.test_accuracy)
    }

    pub fn max_accuracy(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.test_accuracy)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Acquisition scores for a batch of candidate rows; higher scores are
/// acquired first.
pub fn acquisition_scores(
    models: &[NetModel],
    gda_model: Option<&GdaModel>,
    pool_x: &Matrix,
    kind: Acquisition,
    rng: &mut Rng,
) -> Result<Vec<f64>, ActiveError> {
    let n = pool_x.rows();
    match kind {
        Acquisition::SoftmaxEntropy => {
            let model = models.first().ok_or(ActiveError::DegenerateLabeledSet)?;
            let probs = model
                .probs_batch(pool_x)
                .map_err(|_| ActiveError::DegenerateLabeledSet)?;
            Ok((0..n).map(|i| entropy_unchecked(probs.row(i))).collect())
        }
        Acquisition::NegLogDensity => {
            let model = models.first().ok_or(ActiveError::DegenerateLabeledSet)?;
            let g = gda_model.ok_or(ActiveError::MissingGda)?;
            let features = model
                .features_batch(pool_x)
                .map_err(|_| ActiveError::DegenerateLabeledSet)?;
            let dens = g
                .log_density_batch(&features)
                .map_err(|_| ActiveError::DegenerateLabeledSet)?;
            Ok(dens.iter().map(|&d| -d).collect())
        }
        Acquisition::EnsemblePe | Acquisition::EnsembleMi => {
            let mut member_probs = Vec::with_capacity(models.len());
            for m in models {
                member_probs.push(
                    m.probs_batch(pool_x)
                        .map_err(|_| ActiveError::DegenerateLabeledSet)?,
                );
            }
            let k = member_probs[0].cols();
            let mut scores = Vec::with_capacity(n);
            for i in 0..n {
                let mut rows = Matrix::zeros(models.len(), k);
                for (m, probs) in member_probs.iter().enumerate() {
                    rows.row_mut(m).copy_from_slice(probs.row(i));
                }
                let e = EnsemblePrediction::new(rows)
                    .map_err(|_| ActiveError::DegenerateLabeledSet)?;
                let d = decompose(&e);
                scores.push(match kind {
                    Acquisition::EnsemblePe => d.predictive_entropy,
                    _ => d.mutual_information,
                });
            }
            Ok(scores)
        }
        Acquisition::Random => Ok((0..n).map(|_| rng.uniform()).collect()),
    }
}

/// Indices of the `k` largest scores, ties broken toward the lowest index.
fn top_k_by_score(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// The mean ensemble prediction (single model: its own probabilities).
fn predict_labels(models: &[NetModel], x: &Matrix) -> Result<Vec<usize>, ActiveError> {
    let mut mean: Option<Matrix> = None;
    for m in models {
        let p = m
            .probs_batch(x)
            .map_err(|_| ActiveError::DegenerateLabeledSet)?;
        mean = Some(match mean {
            None => p,
            Some(mut acc) => {
                for (a, &b) in acc.data_mut().iter_mut().zip(p.data()) {
                    *a += b;
                }
                acc
            }
        });
    }
    let mean = mean.ok_or(ActiveError::DegenerateLabeledSet)?;
    Ok((0..mean.rows())
        .map(|i| {
            let row = mean.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Run the acquisition loop. The initial labeled set is drawn uniformly from
/// the clean (non-ambiguous) pool rows; models are retrained from scratch
/// each round with a fresh per-round seed, and the density model for
/// `NegLogDensity` is refitted on the current labeled features each round.
pub fn run(pool: &Dataset, test: &Dataset, cfg: &AlConfig) -> Result<AlCurve, ActiveError> {
    let k = cfg.retrain.num_classes;
    cfg.validate(k);
    if pool.len() < cfg.budget {
        return Err(ActiveError::PoolExhausted);
    }

    let mut rng = Rng::new(derive_seed(cfg.seed, 0xac9));
    // Initial labeled set: random clean rows (all rows when nothing is
    // flagged clean).
    let clean: Vec<usize> = (0..pool.len()).filter(|&i| !pool.ambiguous[i]).collect();
    let source = if clean.len() >= cfg.initial_size {
        clean
    } else {
        (0..pool.len()).collect()
    };
    let mut picks = source;
    rng.shuffle(&mut picks);
    let mut labeled: Vec<usize> = picks[..cfg.initial_size].to_vec();
    labeled.sort_unstable();
    let mut in_labeled = alloc::vec![false; pool.len()];
    for &i in &labeled {
        in_labeled[i] = true;
    }

    let mut steps = Vec::new();
    let mut round = 0u64;
    loop {
        // Retrain from scratch on the current labeled set.
        let train_set = pool.subset(&labeled).with_split(Split::Train);
        let num_models = match cfg.acquisition {
            Acquisition::EnsemblePe | Acquisition::EnsembleMi => cfg.ensemble_size,
            _ => 1,
        };
        let mut models = Vec::with_capacity(num_models);
        for member in 0..num_models {
            let mut retrain = cfg.retrain.clone();
            retrain.seed = derive_seed(cfg.seed, 1 + round * 64 + member as u64);
            models.push(net::train(&train_set, &retrain)?);
        }
        let gda_model = if cfg.acquisition == Acquisition::NegLogDensity {
            let model = &models[0];
            let features = model
                .features_batch(&train_set.x)
                .map_err(|_| ActiveError::DegenerateLabeledSet)?;
            Some(gda::fit(&features, &train_set.y, k).map_err(|_| ActiveError::DegenerateLabeledSet)?)
        } else {
            None
        };

        let preds = predict_labels(&models, &test.x)?;
        let test_accuracy =
            metrics::accuracy(&preds, &test.y).map_err(|_| ActiveError::DegenerateLabeledSet)?;

        if labeled.len() >= cfg.budget {
            steps.push(AlStep {
                labeled_count: labeled.len(),
                test_accuracy,
                acquired: Vec::new(),
                ambiguous_acquired: 0,
            });
            break;
        }

        // Score the remaining pool.
        let remaining: Vec<usize> = (0..pool.len()).filter(|&i| !in_labeled[i]).collect();
        let want = cfg.acquisition_size.min(cfg.budget - labeled.len());
        if remaining.len() < want {
            return Err(ActiveError::PoolExhausted);
        }
        let pool_x = pool.subset(&remaining).x;
        let mut score_rng = Rng::new(derive_seed(cfg.seed, 0x5c0 + round));
        let scores = acquisition_scores(
            &models,
            gda_model.as_ref(),
            &pool_x,
            cfg.acquisition,
            &mut score_rng,
        )?;
        let chosen: Vec<usize> = top_k_by_score(&scores, want)
            .into_iter()
            .map(|local| remaining[local])
            .collect();
        let ambiguous_acquired = chosen.iter().filter(|&&i| pool.ambiguous[i]).count();
        for &i in &chosen {
            in_labeled[i] = true;
            labeled.push(i);
        }
        steps.push(AlStep {
            labeled_count: labeled.len() - chosen.len(),
            test_accuracy,
            acquired: chosen,
            ambiguous_acquired,
        });
        round += 1;
    }
    Ok(AlCurve { steps })
}
