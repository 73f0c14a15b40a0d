//! End-to-end training checks on the synthetic datasets.

use uqlab_core::dataset::{toy_1d, two_moons, Split};
use uqlab_core::dirichlet::fit_from_pe_mi;
use uqlab_core::gda;
use uqlab_core::linalg::Matrix;
use uqlab_core::net::{train, NetConfig, Optimizer};
use uqlab_core::uncertainty::{decompose, entropy, EnsemblePrediction};

#[test]
fn two_moons_default_config_fits_the_training_set() {
    let ds = two_moons(2000, 0.1, 42).unwrap();
    let model = train(&ds, &NetConfig::two_moons_default(7)).unwrap();
    let probs = model.probs_batch(&ds.x).unwrap();
    let mut correct = 0;
    for i in 0..ds.len() {
        let pred = usize::from(probs.get(i, 1) > probs.get(i, 0));
        correct += usize::from(pred == ds.y[i]);
    }
    let acc = correct as f64 / ds.len() as f64;
    assert!(acc >= 0.97, "train accuracy {acc}");
}

#[test]
fn feature_density_is_untouched_by_temperature() {
    let ds = two_moons(400, 0.1, 3).unwrap();
    let mut cfg = NetConfig::two_moons_default(3);
    cfg.width = 32;
    cfg.num_blocks = 2;
    cfg.epochs = 40;
    let model = train(&ds, &cfg).unwrap();
    let features = model.features_batch(&ds.x).unwrap();
    let g = gda::fit(&features, &ds.y, 2).unwrap();
    let before = g.log_density_batch(&features).unwrap();
    // Temperature scaling only reinterprets the logits; the feature-space
    // density sees nothing of it.
    let logits = model.logits_batch(&ds.x).unwrap();
    let t = uqlab_core::uncertainty::fit_temperature(&logits, &ds.y).unwrap();
    assert!(t > 0.0);
    let after = g.log_density_batch(&features).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

fn toy1d_net(seed: u64) -> NetConfig {
    NetConfig {
        input_dim: 1,
        width: 24,
        num_blocks: 2,
        num_classes: 2,
        use_residual: true,
        sn_coefficient: None,
        sn_on_head: false,
        leaky_slope: 0.01,
        optimizer: Optimizer::adam(5e-3),
        epochs: 60,
        batch_size: 64,
        seed,
    }
}

#[test]
fn dirichlet_variance_lower_bounds_trained_ensemble_entropy_variance() {
    // Train members on the 1D layout, fit a Dirichlet per grid point from
    // the ensemble's (mean prediction, mutual information), and compare the
    // analytic entropy variance against the empirical member-entropy
    // variance. The analytic value should rarely exceed the empirical one
    // by more than three standard errors of the variance estimate.
    let ds = toy_1d(5).with_split(Split::Train);
    let members = 10;
    let models: Vec<_> = (0..members)
        .map(|m| train(&ds, &toy1d_net(100 + m as u64)).unwrap())
        .collect();

    let grid: Vec<f64> = (0..=240).map(|i| -6.0 + i as f64 * 0.05).collect();
    let mut grid_x = Matrix::zeros(grid.len(), 1);
    for (i, &x) in grid.iter().enumerate() {
        grid_x.set(i, 0, x);
    }
    let member_probs: Vec<Matrix> = models
        .iter()
        .map(|m| m.probs_batch(&grid_x).unwrap())
        .collect();

    let mut checked = 0;
    let mut violations = 0;
    for i in 0..grid.len() {
        let mut rows = Matrix::zeros(members, 2);
        for (m, probs) in member_probs.iter().enumerate() {
            rows.row_mut(m).copy_from_slice(probs.row(i));
        }
        let e = EnsemblePrediction::new(rows).unwrap();
        let d = decompose(&e);
        let h = d.predictive_entropy;
        if d.mutual_information <= 1e-6 || d.mutual_information >= h - 1e-6 {
            continue;
        }
        let fitted = match fit_from_pe_mi(&e.mean_probs(), d.mutual_information) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let analytic = fitted.entropy_variance();

        let entropies: Vec<f64> = (0..members)
            .map(|m| entropy(e.member(m)).unwrap())
            .collect();
        let mean_h: f64 = entropies.iter().sum::<f64>() / members as f64;
        let emp_var = entropies
            .iter()
            .map(|&v| (v - mean_h) * (v - mean_h))
            .sum::<f64>()
            / (members - 1) as f64;
        // Standard error of a sample variance from M draws.
        let se = emp_var * (2.0 / (members as f64 - 1.0)).sqrt();
        checked += 1;
        if analytic > emp_var + 3.0 * se {
            violations += 1;
        }
    }
    assert!(checked > 50, "only {checked} grid points were comparable");
    let rate = violations as f64 / checked as f64;
    assert!(rate <= 0.05, "violation rate {rate} over {checked} points");
}
