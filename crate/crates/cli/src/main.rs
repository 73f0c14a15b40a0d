//! Command-line front end: train a classifier with its feature-density model
//! and thresholds, score inputs into uncertainty reports, and run the canned
//! experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/shape error,
//! 4 usage error, 1 anything else (including failed `--check` properties).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uqlab_core::dataset::Split;
use uqlab_core::gda;
use uqlab_core::net;
use uqlab_core::uncertainty::{compute_thresholds, disentangle, entropy};

use uqlab_cli::errors::{CliError, Result};
use uqlab_cli::fmtnum::g17;
use uqlab_cli::{artifacts, config, csvio, experiments};

#[derive(Parser)]
#[command(
    name = "uqlab",
    about = "Classifier uncertainty toolbox: feature-space density for epistemic uncertainty, softmax entropy for aleatoric uncertainty",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a configured dataset, fit the feature density, and
    /// derive decision thresholds.
    Train {
        /// Training configuration (JSON; see schemas/train_config.schema.json).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for model.json, gda.json, thresholds.json, and
        /// train_log.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a CSV of inputs into per-row uncertainty reports.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        gda: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        /// Input CSV with feature columns x0..xd-1.
        #[arg(long)]
        input: PathBuf,
        /// Output report CSV (entropy,log_density,verdict).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a canned experiment into an output directory.
    Experiment {
        /// One of: two_moons, toy1d, histograms, active_learning, dirichlet,
        /// objective_mismatch.
        name: String,
        /// Optional experiment config (JSON) overriding the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for independent seed replicates.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Verify the experiment's acceptance properties and fail on any
        /// violation.
        #[arg(long, default_value_t = false)]
        check: bool,
    },
}

fn cmd_train(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = config::TrainConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    std::fs::create_dir_all(out)?;
    let dataset = cfg.dataset.build(cfg.seed)?;
    let mut net_cfg: net::NetConfig = (&cfg.net).into();
    net_cfg.seed = cfg.seed;
    net_cfg.input_dim = dataset.dim();
    if dataset.indices_with_split(Split::Train).is_empty() {
        return Err(CliError::Data("dataset has no train-tagged rows".into()));
    }
    if dataset.num_classes() > net_cfg.num_classes {
        return Err(CliError::Data(format!(
            "dataset has {} classes but the net is configured for {}",
            dataset.num_classes(),
            net_cfg.num_classes
        )));
    }

    let (model, losses) =
        net::train_logged(&dataset, &net_cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    let train_idx = dataset.indices_with_split(Split::Train);
    let train_rows = dataset.subset(&train_idx);
    let (features, probs) = model
        .features_and_probs(&train_rows.x)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let gda_model = gda::fit(&features, &train_rows.y, net_cfg.num_classes)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let densities = gda_model
        .log_density_batch(&features)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let entropies: Vec<f64> = (0..train_rows.len())
        .map(|i| entropy(probs.row(i)).unwrap_or(0.0))
        .collect();
    let thresholds = compute_thresholds(
        &densities,
        &entropies,
        cfg.density_quantile,
        cfg.entropy_quantile,
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;

    artifacts::save_model(&out.join("model.json"), &model)?;
    artifacts::save_gda(&out.join("gda.json"), &gda_model)?;
    artifacts::save_thresholds(
        &out.join("thresholds.json"),
        &thresholds,
        cfg.density_quantile,
        cfg.entropy_quantile,
    )?;
    let loss_rows: Vec<Vec<String>> = losses
        .iter()
        .enumerate()
        .map(|(epoch, &loss)| vec![epoch.to_string(), g17(loss)])
        .collect();
    csvio::write_rows(&out.join("train_log.csv"), "epoch,mean_loss", &loss_rows)?;
    Ok(())
}

fn cmd_score(
    model_path: &Path,
    gda_path: &Path,
    thresholds_path: &Path,
    input: &Path,
    out: &Path,
) -> Result<()> {
    let model = artifacts::load_model(model_path)?;
    let gda_model = artifacts::load_gda(gda_path)?;
    let thresholds = artifacts::load_thresholds(thresholds_path)?;
    let data = csvio::read_dataset(input)?;
    if data.dim() != model.config.input_dim {
        return Err(CliError::Data(format!(
            "input has {} features but the model expects {}",
            data.dim(),
            model.config.input_dim
        )));
    }
    if gda_model.dim != model.config.width {
        return Err(CliError::Data(format!(
            "density model dimension {} does not match the feature width {}",
            gda_model.dim, model.config.width
        )));
    }
    let mut reports = Vec::with_capacity(data.len());
    if !data.is_empty() {
        let (features, probs) = model
            .features_and_probs(&data.x)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let densities = gda_model
            .log_density_batch(&features)
            .map_err(|e| CliError::Data(e.to_string()))?;
        for (i, &density) in densities.iter().enumerate() {
            reports.push(disentangle(probs.row(i), density, &thresholds));
        }
    }
    csvio::write_reports(out, &reports)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out, seed } => cmd_train(&config, &out, seed),
        Command::Score {
            model,
            gda,
            thresholds,
            input,
            out,
        } => cmd_score(&model, &gda, &thresholds, &input, &out),
        Command::Experiment {
            name,
            config,
            out,
            seed,
            jobs,
            check,
        } => experiments::dispatch(
            &name,
            config.as_deref(),
            &experiments::ExperimentContext {
                out_dir: &out,
                seed_override: seed,
                jobs,
                check,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(4);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
