//! Gaussian-mixture fits of labeled 2D latents under three objectives --
//! conditional label likelihood, joint likelihood, and marginal (density)
//! likelihood -- plus cross-scoring of any fitted mixture under all three.
//!
//! All three fits share one model family: K full-covariance components with
//! mixture weights. The joint objective has the closed-form per-class fit;
//! the conditional objective runs gradient descent on an unconstrained
//! parameterization (Cholesky factor with log-diagonal); the marginal
//! objective runs EM.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::gda::{self, gaussian_log_pdf, GdaError, GdaModel};
use crate::linalg::{cholesky, CholeskyFactor, Matrix};
use crate::rng::Rng;
use crate::special::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveError {
    Diverged,
    ClassUnderpopulated(usize),
    /// An EM component's weight collapsed below 1e-6.
    DegenerateComponent(usize),
    ShapeMismatch,
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveError::Diverged => write!(f, "objective diverged"),
            ObjectiveError::ClassUnderpopulated(c) => {
                write!(f, "class {c} has fewer than two samples")
            }
            ObjectiveError::DegenerateComponent(c) => {
                write!(f, "component {c} weight collapsed")
            }
            ObjectiveError::ShapeMismatch => write!(f, "dimension mismatch"),
        }
    }
}

impl core::error::Error for ObjectiveError {}

impl From<GdaError> for ObjectiveError {
    fn from(e: GdaError) -> Self {
        match e {
            GdaError::ClassUnderpopulated(c) => ObjectiveError::ClassUnderpopulated(c),
            _ => ObjectiveError::ShapeMismatch,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmComponent {
    pub mean: Vec<f64>,
    pub cov_chol: CholeskyFactor,
    /// Normalized log mixture weight.
    pub log_weight: f64,
}

#[derive(Debug, Clone)]
pub struct GmmParams {
    pub components: Vec<GmmComponent>,
    pub dim: usize,
}

impl GmmParams {
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Per-component joint scores log w_c + log N_c(z).
    fn component_scores(&self, z: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.log_weight + gaussian_log_pdf(&c.mean, &c.cov_chol, z))
            .collect()
    }

    pub fn log_marginal(&self, z: &[f64]) -> f64 {
        log_sum_exp(&self.component_scores(z)).expect("at least one component")
    }

    /// Posterior over component labels given z.
    pub fn posterior(&self, z: &[f64]) -> Vec<f64> {
        let s = self.component_scores(z);
        let lse = log_sum_exp(&s).expect("at least one component");
        s.iter().map(|&v| fmath::exp(v - lse)).collect()
    }
}

/// Mixture converted from a per-class Gaussian fit; shares bit-identical
/// means, factors, and priors-as-weights.
pub fn from_gda(model: &GdaModel) -> GmmParams {
    GmmParams {
        components: model
            .classes
            .iter()
            .map(|c| GmmComponent {
                mean: c.mean.clone(),
                cov_chol: c.cov_chol.clone(),
                log_weight: c.log_prior,
            })
            .collect(),
        dim: model.dim,
    }
}

/// Realized cross-entropies of a fitted mixture on a dataset. Label-dependent
/// scores are absent for unsupervised fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveScores {
    pub cond_nll: Option<f64>,
    pub joint_nll: Option<f64>,
    pub marginal_nll: f64,
}

/// Score a mixture: conditional, joint, and marginal mean NLL. When
/// `supervised` is false the component indices carry no label meaning and
/// only the marginal score is reported.
pub fn score(gmm: &GmmParams, features: &Matrix, labels: &[usize], supervised: bool) -> Result<ObjectiveScores, ObjectiveError> {
    if features.rows() == 0 || features.rows() != labels.len() {
        return Err(ObjectiveError::ShapeMismatch);
    }
    if features.cols() != gmm.dim {
        return Err(ObjectiveError::ShapeMismatch);
    }
    let n = features.rows() as f64;
    let mut joint = 0.0;
    let mut marginal = 0.0;
    for i in 0..features.rows() {
        let s = gmm.component_scores(features.row(i));
        let lse = log_sum_exp(&s).expect("non-empty");
        marginal -= lse;
        if supervised {
            let y = labels[i];
            if y >= s.len() {
                return Err(ObjectiveError::ShapeMismatch);
            }
            joint -= s[y];
        }
    }
    marginal /= n;
    if supervised {
        joint /= n;
        Ok(ObjectiveScores {
            cond_nll: Some(joint - marginal),
            joint_nll: Some(joint),
            marginal_nll: marginal,
        })
    } else {
        Ok(ObjectiveScores {
            cond_nll: None,
            joint_nll: None,
            marginal_nll: marginal,
        })
    }
}

/// Closed-form minimizer of the joint NLL over the family: the per-class
/// Gaussian fit itself.
pub fn fit_joint(features: &Matrix, labels: &[usize], k: usize) -> Result<GmmParams, ObjectiveError> {
    let model = gda::fit(features, labels, k)?;
    Ok(from_gda(&model))
}

/// Settings for the conditional-objective gradient descent.
#[derive(Debug, Clone, Copy)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            learning_rate: 1e-2,
            max_iters: 5000,
            rel_tol: 1e-8,
        }
    }
}

/// Unconstrained parameter block for one component.
#[derive(Debug, Clone)]
struct RawComponent {
    mean: Vec<f64>,
    /// Strictly-lower-triangular entries of L, row-major.
    l_off: Vec<f64>,
    /// log(diag(L)).
    l_log_diag: Vec<f64>,
    logit: f64,
}

fn to_raw(gmm: &GmmParams) -> Vec<RawComponent> {
    gmm.components
        .iter()
        .map(|c| {
            let d = c.mean.len();
            let l = c.cov_chol.lower();
            let mut l_off = Vec::with_capacity(d * (d - 1) / 2);
            let mut l_log_diag = Vec::with_capacity(d);
            for i in 0..d {
                for j in 0..i {
                    l_off.push(l.get(i, j));
                }
                l_log_diag.push(fmath::ln(l.get(i, i)));
            }
            RawComponent {
                mean: c.mean.clone(),
                l_off,
                l_log_diag,
                logit: c.log_weight,
            }
        })
        .collect()
}

fn from_raw(raw: &[RawComponent], dim: usize) -> GmmParams {
    // Normalize logits into log weights.
    let logits: Vec<f64> = raw.iter().map(|c| c.logit).collect();
    let lse = log_sum_exp(&logits).expect("non-empty");
    let components = raw
        .iter()
        .map(|c| {
            let mut l = Matrix::zeros(dim, dim);
            let mut off = c.l_off.iter();
            for i in 0..dim {
                for j in 0..i {
                    l.set(i, j, *off.next().expect("off-diagonal count"));
                }
                l.set(i, i, fmath::exp(c.l_log_diag[i]));
            }
            GmmComponent {
                mean: c.mean.clone(),
                cov_chol: CholeskyFactor::from_lower(l),
                log_weight: c.logit - lse,
            }
        })
        .collect();
    GmmParams { components, dim }
}

/// Mean conditional NLL -(1/N) sum log q(y|z) and its gradient w.r.t. the
/// raw parameters.
fn conditional_nll_and_grad(
    raw: &[RawComponent],
    dim: usize,
    features: &Matrix,
    labels: &[usize],
) -> (f64, Vec<RawComponent>) {
    let k = raw.len();
    let n = features.rows();
    let gmm = from_raw(raw, dim);
    let mut grad: Vec<RawComponent> = raw
        .iter()
        .map(|c| RawComponent {
            mean: vec![0.0; c.mean.len()],
            l_off: vec![0.0; c.l_off.len()],
            l_log_diag: vec![0.0; c.l_log_diag.len()],
            logit: 0.0,
        })
        .collect();
    let mut nll = 0.0;
    for row in 0..n {
        let z = features.row(row);
        let y = labels[row];
        let s = gmm.component_scores(z);
        let lse = log_sum_exp(&s).expect("non-empty");
        nll += lse - s[y];
        for c in 0..k {
            let r_c = fmath::exp(s[c] - lse);
            let coef = (r_c - f64::from(u8::from(c == y))) / n as f64;
            if coef == 0.0 {
                continue;
            }
            let comp = &gmm.components[c];
            // v = L^{-1} (z - mu); u = L^{-T} v = Sigma^{-1} (z - mu).
            let resid: Vec<f64> = z.iter().zip(&comp.mean).map(|(&a, &b)| a - b).collect();
            let v = comp.cov_chol.solve_lower(&resid);
            let u = solve_lower_transpose(comp.cov_chol.lower(), &v);
            let g = &mut grad[c];
            for (gm, &ui) in g.mean.iter_mut().zip(&u) {
                *gm += coef * ui;
            }
            let l = comp.cov_chol.lower();
            let mut off_idx = 0;
            for i in 0..dim {
                for j in 0..i {
                    g.l_off[off_idx] += coef * u[i] * v[j];
                    off_idx += 1;
                }
                let lii = l.get(i, i);
                g.l_log_diag[i] += coef * (u[i] * v[i] * lii - 1.0);
            }
            g.logit += coef;
        }
    }
    (nll / n as f64, grad)
}

/// Solve L^T x = b by back substitution.
fn solve_lower_transpose(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l.get(j, i) * x[j];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Gradient descent on the mean conditional NLL, starting from `init`.
/// The learning rate halves whenever a step would increase the objective;
/// convergence is declared when an accepted step improves the objective by
/// less than `rel_tol` relative.
pub fn fit_conditional(
    features: &Matrix,
    labels: &[usize],
    init: &GmmParams,
    cfg: &GdConfig,
) -> Result<GmmParams, ObjectiveError> {
    if features.rows() == 0 || features.rows() != labels.len() {
        return Err(ObjectiveError::ShapeMismatch);
    }
    let k = init.num_components();
    assert!(labels.iter().all(|&y| y < k), "label out of range");
    let dim = init.dim;
    let mut raw = to_raw(init);
    let (mut current, mut grad) = conditional_nll_and_grad(&raw, dim, features, labels);
    if !current.is_finite() {
        return Err(ObjectiveError::Diverged);
    }
    let mut lr = cfg.learning_rate;
    for _ in 0..cfg.max_iters {
        let proposal: Vec<RawComponent> = raw
            .iter()
            .zip(&grad)
            .map(|(c, g)| RawComponent {
                mean: c.mean.iter().zip(&g.mean).map(|(&p, &gv)| p - lr * gv).collect(),
                l_off: c.l_off.iter().zip(&g.l_off).map(|(&p, &gv)| p - lr * gv).collect(),
                l_log_diag: c
                    .l_log_diag
                    .iter()
                    .zip(&g.l_log_diag)
                    .map(|(&p, &gv)| p - lr * gv)
                    .collect(),
                logit: c.logit - lr * g.logit,
            })
            .collect();
        let (next, next_grad) = conditional_nll_and_grad(&proposal, dim, features, labels);
        if !next.is_finite() {
            return Err(ObjectiveError::Diverged);
        }
        if next > current {
            lr *= 0.5;
            if lr < 1e-15 {
                break;
            }
            continue;
        }
        let improvement = current - next;
        raw = proposal;
        grad = next_grad;
        let done = improvement < cfg.rel_tol * fmath::abs(current).max(1e-12);
        current = next;
        if done {
            break;
        }
    }
    Ok(from_raw(&raw, dim))
}

/// EM settings for the marginal objective.
#[derive(Debug, Clone, Copy)]
pub struct EmConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 1000,
            rel_tol: 1e-8,
        }
    }
}

/// Default EM starting point: the per-class fit with means perturbed by
/// 1e-3 of the per-dimension data standard deviation.
pub fn em_init_from_gda(
    features: &Matrix,
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<GmmParams, ObjectiveError> {
    let mut init = fit_joint(features, labels, k)?;
    let d = features.cols();
    let n = features.rows() as f64;
    let mut mean = vec![0.0; d];
    for i in 0..features.rows() {
        for (m, &v) in mean.iter_mut().zip(features.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; d];
    for i in 0..features.rows() {
        for ((s, &v), &m) in std.iter_mut().zip(features.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    std.iter_mut().for_each(|s| *s = fmath::sqrt(*s / n));
    let mut rng = Rng::new(seed);
    for comp in &mut init.components {
        for (m, &s) in comp.mean.iter_mut().zip(&std) {
            *m += 1e-3 * s * rng.normal();
        }
    }
    Ok(init)
}

/// EM for the marginal likelihood. The mean NLL trace is returned with the
/// fit; it never increases by more than 1e-10 between recorded iterations
/// (a step that would is rolled back and iteration stops).
pub fn fit_marginal_em(
    features: &Matrix,
    k: usize,
    init: &GmmParams,
    cfg: &EmConfig,
) -> Result<(GmmParams, Vec<f64>), ObjectiveError> {
    let n = features.rows();
    let d = features.cols();
    assert!(
        n >= k * (d + 1),
        "need at least K(d+1) samples for a K-component fit"
    );
    assert_eq!(init.num_components(), k, "init component count mismatch");
    let mut gmm = init.clone();
    let mut trace = Vec::new();
    let mut current = mean_marginal_nll(&gmm, features);
    trace.push(current);

    for _ in 0..cfg.max_iters {
        // E-step.
        let mut resp = Matrix::zeros(n, k);
        for i in 0..n {
            let s = gmm.component_scores(features.row(i));
            let lse = log_sum_exp(&s).expect("non-empty");
            for c in 0..k {
                resp.set(i, c, fmath::exp(s[c] - lse));
            }
        }
        // M-step.
        let mut weights = vec![0.0; k];
        for i in 0..n {
            for c in 0..k {
                weights[c] += resp.get(i, c);
            }
        }
        for (c, &w) in weights.iter().enumerate() {
            if w / (n as f64) < 1e-6 {
                return Err(ObjectiveError::DegenerateComponent(c));
            }
        }
        let mut means = vec![vec![0.0; d]; k];
        for i in 0..n {
            let z = features.row(i);
            for c in 0..k {
                let r = resp.get(i, c);
                for (m, &v) in means[c].iter_mut().zip(z) {
                    *m += r * v;
                }
            }
        }
        for c in 0..k {
            let w = weights[c];
            means[c].iter_mut().for_each(|m| *m /= w);
        }
        let mut covs = vec![Matrix::zeros(d, d); k];
        for i in 0..n {
            let z = features.row(i);
            for c in 0..k {
                let r = resp.get(i, c);
                let mu = &means[c];
                for a in 0..d {
                    let da = z[a] - mu[a];
                    for b in 0..=a {
                        let v = covs[c].get(a, b) + r * da * (z[b] - mu[b]);
                        covs[c].set(a, b, v);
                    }
                }
            }
        }
        for c in 0..k {
            let w = weights[c];
            for a in 0..d {
                for b in 0..=a {
                    let v = covs[c].get(a, b) / w;
                    covs[c].set(a, b, v);
                    covs[c].set(b, a, v);
                }
            }
        }
        // Shared jitter ladder, as in the per-class fit.
        let mut jitter = 1e-10;
        let factors = 'ladder: loop {
            let mut fs = Vec::with_capacity(k);
            for cov in &covs {
                let mut m = cov.clone();
                m.add_scaled_identity(jitter);
                match cholesky(&m) {
                    Ok(f) => fs.push(f),
                    Err(_) => {
                        jitter *= 10.0;
                        if jitter > 1e30 {
                            return Err(ObjectiveError::Diverged);
                        }
                        continue 'ladder;
                    }
                }
            }
            break fs;
        };
        let next = GmmParams {
            components: (0..k)
                .map(|c| GmmComponent {
                    mean: means[c].clone(),
                    cov_chol: factors[c].clone(),
                    log_weight: fmath::ln(weights[c] / n as f64),
                })
                .collect(),
            dim: d,
        };
        let next_nll = mean_marginal_nll(&next, features);
        if !next_nll.is_finite() {
            return Err(ObjectiveError::Diverged);
        }
        if next_nll > current + 1e-10 {
            // Monotonicity violated (jitter interaction); keep the previous
            // parameters.
            break;
        }
        let improvement = current - next_nll;
        gmm = next;
        current = next_nll;
        trace.push(current);
        if improvement >= 0.0 && improvement < cfg.rel_tol * fmath::abs(current).max(1e-12) {
            break;
        }
    }
    Ok((gmm, trace))
}

/// Mean marginal NLL -(1/N) sum log q(z).
pub fn mean_marginal_nll(gmm: &GmmParams, features: &Matrix) -> f64 {
    let mut total = 0.0;
    for i in 0..features.rows() {
        total -= gmm.log_marginal(features.row(i));
    }
    total / features.rows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::three_gaussians_label_noise;

    fn separated_data(seed: u64) -> (Matrix, Vec<usize>) {
        let ds = three_gaussians_label_noise(300, 0.0, seed).unwrap();
        (ds.x, ds.y)
    }

    fn noisy_data(seed: u64) -> (Matrix, Vec<usize>) {
        let ds = three_gaussians_label_noise(600, 0.04, seed).unwrap();
        (ds.x, ds.y)
    }

    #[test]
    fn joint_fit_is_bitwise_gda() {
        let (x, y) = noisy_data(1);
        let direct = gda::fit(&x, &y, 3).unwrap();
        let joint = fit_joint(&x, &y, 3).unwrap();
        for (a, b) in direct.classes.iter().zip(&joint.components) {
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.cov_chol.lower().data(), b.cov_chol.lower().data());
            assert_eq!(a.log_prior.to_bits(), b.log_weight.to_bits());
        }
    }

    #[test]
    fn joint_fit_label_permutation_equivariance() {
        let (x, y) = noisy_data(2);
        let perm = [2usize, 0, 1];
        let y_perm: Vec<usize> = y.iter().map(|&c| perm[c]).collect();
        let a = fit_joint(&x, &y, 3).unwrap();
        let b = fit_joint(&x, &y_perm, 3).unwrap();
        for c in 0..3 {
            assert_eq!(a.components[c].mean, b.components[perm[c]].mean);
        }
    }

    #[test]
    fn score_additivity_and_shapes() {
        let (x, y) = noisy_data(3);
        let joint = fit_joint(&x, &y, 3).unwrap();
        let s = score(&joint, &x, &y, true).unwrap();
        let (c, j, m) = (s.cond_nll.unwrap(), s.joint_nll.unwrap(), s.marginal_nll);
        assert!((j - (c + m)).abs() < 1e-8, "{j} != {c} + {m}");
        let unsup = score(&joint, &x, &y, false).unwrap();
        assert!(unsup.cond_nll.is_none() && unsup.joint_nll.is_none());
        assert_eq!(unsup.marginal_nll, m);
    }

    #[test]
    fn conditional_fit_leaves_separated_optimum() {
        let (x, y) = separated_data(4);
        let init = fit_joint(&x, &y, 3).unwrap();
        let before = score(&init, &x, &y, true).unwrap().cond_nll.unwrap();
        let fitted = fit_conditional(&x, &y, &init, &GdConfig::default()).unwrap();
        let after = score(&fitted, &x, &y, true).unwrap().cond_nll.unwrap();
        assert!(before - after < 1e-6, "moved from {before} to {after}");
    }

    #[test]
    fn conditional_nll_zero_for_single_class() {
        let (x, _) = separated_data(5);
        let y = vec![0usize; x.rows()];
        let init = fit_joint(&x, &y, 1).unwrap();
        let s = score(&init, &x, &y, true).unwrap();
        assert!(s.cond_nll.unwrap().abs() < 1e-12);
        let fitted = fit_conditional(&x, &y, &init, &GdConfig::default()).unwrap();
        let s2 = score(&fitted, &x, &y, true).unwrap();
        assert!(s2.cond_nll.unwrap().abs() < 1e-12);
    }

    #[test]
    fn conditional_gradients_match_finite_differences() {
        let mut rng = Rng::new(17);
        let n = 12;
        let mut x = Matrix::zeros(n, 2);
        for v in x.data_mut() {
            *v = rng.normal();
        }
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let init = fit_joint(&x, &y, 2).unwrap();
        let raw = to_raw(&init);
        let (_, grad) = conditional_nll_and_grad(&raw, 2, &x, &y);

        let eps = 1e-5;
        let mut probe = |mutate: &dyn Fn(&mut Vec<RawComponent>, f64), analytic: f64| {
            let mut plus = raw.clone();
            mutate(&mut plus, eps);
            let (fp, _) = conditional_nll_and_grad(&plus, 2, &x, &y);
            let mut minus = raw.clone();
            mutate(&mut minus, -eps);
            let (fm, _) = conditional_nll_and_grad(&minus, 2, &x, &y);
            let numeric = (fp - fm) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "analytic {analytic} numeric {numeric}");
        };

        for c in 0..2 {
            for d in 0..2 {
                probe(&|r, e| r[c].mean[d] += e, grad[c].mean[d]);
                probe(&|r, e| r[c].l_log_diag[d] += e, grad[c].l_log_diag[d]);
            }
            probe(&|r, e| r[c].l_off[0] += e, grad[c].l_off[0]);
            probe(&|r, e| r[c].logit += e, grad[c].logit);
        }
    }

    #[test]
    fn em_single_component_recovers_moments() {
        let mut rng = Rng::new(21);
        let n = 400;
        let mut x = Matrix::zeros(n, 2);
        for i in 0..n {
            x.set(i, 0, 1.0 + rng.normal());
            x.set(i, 1, -2.0 + 0.5 * rng.normal());
        }
        // K = 1: single M-step fixed point with maximum-likelihood moments.
        let init = GmmParams {
            components: vec![GmmComponent {
                mean: vec![0.0, 0.0],
                cov_chol: cholesky(&Matrix::identity(2)).unwrap(),
                log_weight: 0.0,
            }],
            dim: 2,
        };
        let (fitted, trace) = fit_marginal_em(&x, 1, &init, &EmConfig::default()).unwrap();
        let nf = n as f64;
        let mut mean = [0.0; 2];
        for i in 0..n {
            mean[0] += x.get(i, 0) / nf;
            mean[1] += x.get(i, 1) / nf;
        }
        assert!((fitted.components[0].mean[0] - mean[0]).abs() < 1e-10);
        assert!((fitted.components[0].mean[1] - mean[1]).abs() < 1e-10);
        let mut var0 = 0.0;
        for i in 0..n {
            var0 += (x.get(i, 0) - mean[0]) * (x.get(i, 0) - mean[0]) / nf;
        }
        let cov = fitted.components[0].cov_chol.reconstruct();
        assert!((cov.get(0, 0) - var0).abs() < 1e-8, "{} vs {var0}", cov.get(0, 0));
        assert!(trace.len() >= 2);
    }

    #[test]
    fn em_nll_non_increasing() {
        for seed in 0..5 {
            let (x, y) = noisy_data(100 + seed);
            let init = em_init_from_gda(&x, &y, 3, seed).unwrap();
            let (_, trace) = fit_marginal_em(&x, 3, &init, &EmConfig::default()).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "EM increased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn marginal_nll_ordering_on_noisy_data() {
        let (x, y) = noisy_data(7);
        let joint = fit_joint(&x, &y, 3).unwrap();
        let cond = fit_conditional(&x, &y, &joint, &GdConfig::default()).unwrap();
        let init = em_init_from_gda(&x, &y, 3, 7).unwrap();
        let (em, _) = fit_marginal_em(&x, 3, &init, &EmConfig::default()).unwrap();

        let m_em = score(&em, &x, &y, false).unwrap().marginal_nll;
        let m_gda = score(&joint, &x, &y, true).unwrap().marginal_nll;
        let m_cond = score(&cond, &x, &y, true).unwrap().marginal_nll;
        assert!(m_em <= m_gda + 1e-9, "EM {m_em} vs GDA {m_gda}");
        assert!(m_gda <= m_cond + 1e-9, "GDA {m_gda} vs conditional {m_cond}");
    }

    #[test]
    fn diagonal_dominance_of_score_table() {
        let (x, y) = noisy_data(11);
        let joint = fit_joint(&x, &y, 3).unwrap();
        let cond = fit_conditional(&x, &y, &joint, &GdConfig::default()).unwrap();
        let init = em_init_from_gda(&x, &y, 3, 11).unwrap();
        let (em, _) = fit_marginal_em(&x, 3, &init, &EmConfig::default()).unwrap();

        let s_cond = score(&cond, &x, &y, true).unwrap();
        let s_joint = score(&joint, &x, &y, true).unwrap();
        let s_em = score(&em, &x, &y, false).unwrap();

        // Each fit minimizes its own column.
        assert!(s_cond.cond_nll.unwrap() <= s_joint.cond_nll.unwrap() + 1e-6);
        assert!(s_joint.joint_nll.unwrap() <= s_cond.joint_nll.unwrap() + 1e-6);
        assert!(s_em.marginal_nll <= s_joint.marginal_nll + 1e-6);
        assert!(s_em.marginal_nll <= s_cond.marginal_nll + 1e-6);
    }

    #[test]
    fn separated_classes_make_all_fits_agree() {
        let (x, y) = separated_data(13);
        let joint = fit_joint(&x, &y, 3).unwrap();
        let cond = fit_conditional(&x, &y, &joint, &GdConfig::default()).unwrap();
        let init = em_init_from_gda(&x, &y, 3, 13).unwrap();
        let (em, _) = fit_marginal_em(&x, 3, &init, &EmConfig::default()).unwrap();

        let s_cond = score(&cond, &x, &y, true).unwrap();
        let s_joint = score(&joint, &x, &y, true).unwrap();
        let s_em = score(&em, &x, &y, false).unwrap();
        assert!((s_cond.cond_nll.unwrap() - s_joint.cond_nll.unwrap()).abs() < 1e-4);
        assert!((s_cond.joint_nll.unwrap() - s_joint.joint_nll.unwrap()).abs() < 1e-4);
        assert!((s_cond.marginal_nll - s_joint.marginal_nll).abs() < 1e-4);
        assert!((s_em.marginal_nll - s_joint.marginal_nll).abs() < 1e-4);
    }

    #[test]
    fn ambiguous_probe_entropy_gap() {
        // A probe in the saddle between the top and bottom-left clusters is
        // ambiguous under the wide conditional-fit components but confidently
        // classified by the tight per-class fit: the conditional fit spreads
        // covariances to explain the mislabeled points, the per-class fit
        // stays data-tight.
        let probe = [-1.5, 4.125];
        let mut cond_ok = 0;
        let mut joint_ok = 0;
        for seed in 0..5 {
            let (x, y) = noisy_data(200 + seed);
            let joint = fit_joint(&x, &y, 3).unwrap();
            let cond = fit_conditional(&x, &y, &joint, &GdConfig::default()).unwrap();
            let h = |g: &GmmParams| {
                crate::uncertainty::entropy_unchecked(&g.posterior(&probe))
            };
            if h(&cond) > 0.5 {
                cond_ok += 1;
            }
            if h(&joint) < 0.1 {
                joint_ok += 1;
            }
        }
        assert!(cond_ok >= 4, "conditional-fit high entropy in {cond_ok}/5 seeds");
        assert!(joint_ok >= 4, "joint-fit low entropy in {joint_ok}/5 seeds");
    }
}
