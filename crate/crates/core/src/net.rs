//! Residual MLP feature extractor with a softmax head, trained by mini-batch
//! backprop, with optional spectral normalization of the dense layers.
//!
//! The architecture is a linear lift from the input dimension to `width`,
//! followed by `num_blocks` updates `z <- z + leaky_relu(W z + b)` (the
//! residual add is skipped when `use_residual` is off), and a linear head.
//! With spectral normalization active, every weight is used as
//! `W * min(1, c / sigma(W))` where `sigma` is a running power-iteration
//! estimate that advances one step per optimizer update.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{Dataset, Split};
use crate::fmath;
use crate::linalg::{norm2, power_iteration_spectral_norm, Matrix};
use crate::rng::{derive_seed, Rng};
use crate::special::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetError {
    ShapeMismatch,
    DivergedLoss,
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::ShapeMismatch => write!(f, "input shape does not match the model"),
            NetError::DivergedLoss => write!(f, "training loss diverged to NaN or infinity"),
        }
    }
}

impl core::error::Error for NetError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    SgdMomentum {
        lr: f64,
        momentum: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd_momentum(lr: f64, momentum: f64) -> Self {
        Optimizer::SgdMomentum { lr, momentum }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub width: usize,
    pub num_blocks: usize,
    pub num_classes: usize,
    pub use_residual: bool,
    /// Spectral-norm coefficient c; `None` disables spectral normalization.
    pub sn_coefficient: Option<f64>,
    /// Whether the softmax head is spectrally normalized too.
    pub sn_on_head: bool,
    pub leaky_slope: f64,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl NetConfig {
    /// Default two-moons configuration: width 128, 4 residual blocks,
    /// spectral norm with c = 3, Adam at 1e-3 for 150 epochs.
    pub fn two_moons_default(seed: u64) -> Self {
        NetConfig {
            input_dim: 2,
            width: 128,
            num_blocks: 4,
            num_classes: 2,
            use_residual: true,
            sn_coefficient: Some(3.0),
            sn_on_head: true,
            leaky_slope: 0.01,
            optimizer: Optimizer::adam(1e-3),
            epochs: 150,
            batch_size: 128,
            seed,
        }
    }

    /// Same stack without the residual connection or spectral norm; the
    /// feature-collapse ablation architecture.
    pub fn fc_net(seed: u64) -> Self {
        NetConfig {
            use_residual: false,
            sn_coefficient: None,
            ..NetConfig::two_moons_default(seed)
        }
    }

    pub fn validate(&self) {
        assert!(self.width > 0, "width must be positive");
        assert!(self.input_dim > 0, "input_dim must be positive");
        assert!(self.num_classes >= 2, "need at least two classes");
        assert!(
            (0.0..1.0).contains(&self.leaky_slope),
            "leaky_slope must lie in [0, 1)"
        );
        if let Some(c) = self.sn_coefficient {
            assert!(c > 0.0, "sn coefficient must be positive");
        }
        assert!(self.batch_size > 0, "batch_size must be positive");
    }
}

/// A dense layer with its spectral-normalization state: the left-singular
/// -vector estimate `u` and the running spectral-norm estimate `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
    pub sigma: f64,
}

impl Layer {
    fn init(out_dim: usize, in_dim: usize, rng: &mut Rng) -> Layer {
        let limit = fmath::sqrt(6.0 / in_dim as f64);
        let mut w = Matrix::zeros(out_dim, in_dim);
        for v in w.data_mut() {
            *v = rng.uniform_range(-limit, limit);
        }
        let mut u: Vec<f64> = (0..out_dim).map(|_| rng.normal()).collect();
        let n = norm2(&u);
        u.iter_mut().for_each(|x| *x /= n);
        let mut layer = Layer {
            w,
            b: vec![0.0; out_dim],
            u,
            sigma: 0.0,
        };
        layer.power_step();
        layer
    }

    /// Rebuild a layer from serialized parts; `sigma` is estimated from the
    /// stored state without advancing it.
    pub fn from_parts(w: Matrix, b: Vec<f64>, u: Vec<f64>) -> Layer {
        assert_eq!(w.rows(), b.len(), "bias length mismatch");
        assert_eq!(w.rows(), u.len(), "sn state length mismatch");
        let sigma = if w.max_abs() == 0.0 {
            0.0
        } else {
            norm2(&w.matvec_transpose(&u))
        };
        Layer { w, b, u, sigma }
    }

    /// One power-iteration step; refreshes `sigma` and `u`.
    pub fn power_step(&mut self) {
        match power_iteration_spectral_norm(&self.w, &self.u, 1) {
            Ok((sigma, u)) => {
                self.sigma = sigma;
                self.u = u;
            }
            Err(_) => self.sigma = 0.0,
        }
    }

    /// Multiplier `min(1, c / sigma)` applied to the stored weight; scaling
    /// only engages when the estimate exceeds the bound.
    #[inline]
    pub fn scale(&self, c: Option<f64>) -> f64 {
        match c {
            Some(c) if self.sigma > c => c / self.sigma,
            _ => 1.0,
        }
    }

    /// The effective weight `W * scale` seen by the forward pass.
    pub fn effective_weight(&self, c: Option<f64>) -> Matrix {
        let s = self.scale(c);
        let mut w = self.w.clone();
        if s != 1.0 {
            w.data_mut().iter_mut().for_each(|v| *v *= s);
        }
        w
    }
}

/// Features, logits, and softmax probabilities of one input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetModel {
    pub lift: Layer,
    pub blocks: Vec<Layer>,
    pub head: Layer,
    pub config: NetConfig,
}

/// Activation caches from a batched forward pass, kept for backprop.
struct BatchTrace {
    /// Input to each block (index 0 is the lift output).
    block_inputs: Vec<Matrix>,
    /// Pre-activation of each block.
    pre_acts: Vec<Matrix>,
    features: Matrix,
    logits: Matrix,
}

/// Mean-cross-entropy gradients for every parameter tensor.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub lift_w: Matrix,
    pub lift_b: Vec<f64>,
    pub blocks: Vec<(Matrix, Vec<f64>)>,
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl NetModel {
    /// Fresh model with Kaiming-uniform weights and zero biases, drawn from
    /// the config seed.
    pub fn init(config: &NetConfig) -> NetModel {
        config.validate();
        let mut rng = Rng::new(derive_seed(config.seed, 0x1a17));
        let lift = Layer::init(config.width, config.input_dim, &mut rng);
        let blocks = (0..config.num_blocks)
            .map(|_| Layer::init(config.width, config.width, &mut rng))
            .collect();
        let head = Layer::init(config.num_classes, config.width, &mut rng);
        NetModel {
            lift,
            blocks,
            head,
            config: config.clone(),
        }
    }

    fn sn_c(&self) -> Option<f64> {
        self.config.sn_coefficient
    }

    fn head_c(&self) -> Option<f64> {
        if self.config.sn_on_head {
            self.config.sn_coefficient
        } else {
            None
        }
    }

    /// Advance the power-iteration state of every spectrally normalized layer
    /// by one step. No-op when spectral normalization is disabled.
    pub fn apply_spectral_norm(&mut self) {
        if self.sn_c().is_none() {
            return;
        }
        self.lift.power_step();
        for b in &mut self.blocks {
            b.power_step();
        }
        if self.config.sn_on_head {
            self.head.power_step();
        }
    }

    /// Run `steps` maintenance steps so sigma estimates are converged, e.g.
    /// before fitting a density model on the features.
    pub fn settle_spectral_norm(&mut self, steps: usize) {
        for _ in 0..steps {
            self.apply_spectral_norm();
        }
    }

    /// Forward pass for a single input.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace, NetError> {
        if x.len() != self.config.input_dim {
            return Err(NetError::ShapeMismatch);
        }
        let slope = self.config.leaky_slope;
        let s0 = self.lift.scale(self.sn_c());
        let mut z: Vec<f64> = self
            .lift
            .w
            .matvec(x)
            .iter()
            .zip(&self.lift.b)
            .map(|(&v, &b)| s0 * v + b)
            .collect();
        for blk in &self.blocks {
            let s = blk.scale(self.sn_c());
            let a = blk.w.matvec(&z);
            if self.config.use_residual {
                for ((zi, &ai), &bi) in z.iter_mut().zip(&a).zip(&blk.b) {
                    *zi += leaky(s * ai + bi, slope);
                }
            } else {
                for ((zi, &ai), &bi) in z.iter_mut().zip(&a).zip(&blk.b) {
                    *zi = leaky(s * ai + bi, slope);
                }
            }
        }
        let sh = self.head.scale(self.head_c());
        let logits: Vec<f64> = self
            .head
            .w
            .matvec(&z)
            .iter()
            .zip(&self.head.b)
            .map(|(&v, &b)| sh * v + b)
            .collect();
        let probs = softmax(&logits);
        Ok(ForwardTrace {
            features: z,
            logits,
            probs,
        })
    }

    /// Penultimate features for every row of `x`.
    pub fn features_batch(&self, x: &Matrix) -> Result<Matrix, NetError> {
        Ok(self.forward_batch(x)?.features)
    }

    /// Softmax probabilities for every row of `x`.
    pub fn probs_batch(&self, x: &Matrix) -> Result<Matrix, NetError> {
        let trace = self.forward_batch(x)?;
        Ok(softmax_rows(&trace.logits))
    }

    /// Row-wise logits for every row of `x`.
    pub fn logits_batch(&self, x: &Matrix) -> Result<Matrix, NetError> {
        Ok(self.forward_batch(x)?.logits)
    }

    /// Features and probabilities in one pass.
    pub fn features_and_probs(&self, x: &Matrix) -> Result<(Matrix, Matrix), NetError> {
        let trace = self.forward_batch(x)?;
        let probs = softmax_rows(&trace.logits);
        Ok((trace.features, probs))
    }

    fn forward_batch(&self, x: &Matrix) -> Result<BatchTrace, NetError> {
        if x.cols() != self.config.input_dim {
            return Err(NetError::ShapeMismatch);
        }
        let slope = self.config.leaky_slope;

        let s0 = self.lift.scale(self.sn_c());
        let mut z = x.matmul(&self.lift.w.transpose());
        affine_rows(&mut z, s0, &self.lift.b);

        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut pre_acts = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let s = blk.scale(self.sn_c());
            let mut a = z.matmul(&blk.w.transpose());
            affine_rows(&mut a, s, &blk.b);
            block_inputs.push(z.clone());
            if self.config.use_residual {
                for (zi, &ai) in z.data_mut().iter_mut().zip(a.data()) {
                    *zi += leaky(ai, slope);
                }
            } else {
                for (zi, &ai) in z.data_mut().iter_mut().zip(a.data()) {
                    *zi = leaky(ai, slope);
                }
            }
            pre_acts.push(a);
        }

        let sh = self.head.scale(self.head_c());
        let mut logits = z.matmul(&self.head.w.transpose());
        affine_rows(&mut logits, sh, &self.head.b);
        Ok(BatchTrace {
            block_inputs,
            pre_acts,
            features: z,
            logits,
        })
    }

    /// Mean cross-entropy of the batch under the current parameters (with
    /// the spectral-norm scales frozen at their cached estimates).
    pub fn mean_loss(&self, x: &Matrix, y: &[usize]) -> Result<f64, NetError> {
        if y.len() != x.rows() {
            return Err(NetError::ShapeMismatch);
        }
        let trace = self.forward_batch(x)?;
        Ok(mean_nll(&trace.logits, y))
    }

    /// Exact gradients of the mean cross-entropy with respect to every
    /// parameter; spectral-norm scales are treated as fixed within the step.
    pub fn backprop_gradients(&self, x: &Matrix, y: &[usize]) -> Result<Gradients, NetError> {
        Ok(self.backprop_with_loss(x, y)?.0)
    }

    fn backprop_with_loss(&self, x: &Matrix, y: &[usize]) -> Result<(Gradients, f64), NetError> {
        if y.len() != x.rows() || x.rows() == 0 {
            return Err(NetError::ShapeMismatch);
        }
        if y.iter().any(|&c| c >= self.config.num_classes) {
            return Err(NetError::ShapeMismatch);
        }
        let trace = self.forward_batch(x)?;
        let n = x.rows();
        let slope = self.config.leaky_slope;
        let loss = mean_nll(&trace.logits, y);

        // dL/dlogits = (softmax - onehot) / n.
        let mut dlogits = softmax_rows(&trace.logits);
        for i in 0..n {
            dlogits.set(i, y[i], dlogits.get(i, y[i]) - 1.0);
        }
        dlogits.data_mut().iter_mut().for_each(|v| *v /= n as f64);

        let sh = self.head.scale(self.head_c());
        let mut head_w = dlogits.matmul_transpose_a(&trace.features);
        head_w.data_mut().iter_mut().for_each(|v| *v *= sh);
        let head_b = column_sums(&dlogits);

        // dL/dz after the last block.
        let mut dz = dlogits.matmul(&self.head.w);
        dz.data_mut().iter_mut().for_each(|v| *v *= sh);

        let mut block_grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(self.blocks.len());
        for (idx, blk) in self.blocks.iter().enumerate().rev() {
            let s = blk.scale(self.sn_c());
            let a = &trace.pre_acts[idx];
            // dL/da = phi'(a) * dL/d(block output).
            let mut da = Matrix::zeros(dz.rows(), dz.cols());
            for ((d, &g), &pre) in da.data_mut().iter_mut().zip(dz.data()).zip(a.data()) {
                *d = g * if pre > 0.0 { 1.0 } else { slope };
            }
            let mut gw = da.matmul_transpose_a(&trace.block_inputs[idx]);
            gw.data_mut().iter_mut().for_each(|v| *v *= s);
            let gb = column_sums(&da);
            block_grads.push((gw, gb));
            let mut dz_prev = da.matmul(&blk.w);
            dz_prev.data_mut().iter_mut().for_each(|v| *v *= s);
            if self.config.use_residual {
                for (p, &g) in dz_prev.data_mut().iter_mut().zip(dz.data()) {
                    *p += g;
                }
            }
            dz = dz_prev;
        }
        block_grads.reverse();

        let s0 = self.lift.scale(self.sn_c());
        let mut lift_w = dz.matmul_transpose_a(x);
        lift_w.data_mut().iter_mut().for_each(|v| *v *= s0);
        let lift_b = column_sums(&dz);

        Ok((
            Gradients {
                lift_w,
                lift_b,
                blocks: block_grads,
                head_w,
                head_b,
            },
            loss,
        ))
    }
}

#[inline]
fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// `m <- scale * m + bias` applied per row.
fn affine_rows(m: &mut Matrix, scale: f64, bias: &[f64]) {
    debug_assert_eq!(bias.len(), m.cols());
    for i in 0..m.rows() {
        for (v, &b) in m.row_mut(i).iter_mut().zip(bias) {
            *v = scale * *v + b;
        }
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| fmath::exp(v - m)).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = fmath::exp(*v - m);
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

/// Mean negative log-likelihood of the labels under row-wise softmax logits.
pub fn mean_nll(logits: &Matrix, y: &[usize]) -> f64 {
    debug_assert_eq!(logits.rows(), y.len());
    let mut total = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let row = logits.row(i);
        let lse = log_sum_exp(row).expect("non-empty logits");
        total += lse - row[label];
    }
    total / y.len() as f64
}

enum OptState {
    Adam { t: u64, m: Vec<f64>, v: Vec<f64> },
    Sgd { velocity: Vec<f64> },
}

impl OptState {
    fn new(optimizer: &Optimizer, n: usize) -> OptState {
        match optimizer {
            Optimizer::Adam { .. } => OptState::Adam {
                t: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
            Optimizer::SgdMomentum { .. } => OptState::Sgd {
                velocity: vec![0.0; n],
            },
        }
    }

    fn step(&mut self, optimizer: &Optimizer, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        match (self, optimizer) {
            (
                OptState::Adam { t, m, v },
                Optimizer::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                },
            ) => {
                *t += 1;
                let bc1 = 1.0 - fmath::powf(*beta1, *t as f64);
                let bc2 = 1.0 - fmath::powf(*beta2, *t as f64);
                let mut off = 0;
                for (p_slice, g_slice) in params.iter_mut().zip(grads) {
                    for (p, &g) in p_slice.iter_mut().zip(g_slice.iter()) {
                        let mi = beta1 * m[off] + (1.0 - beta1) * g;
                        let vi = beta2 * v[off] + (1.0 - beta2) * g * g;
                        m[off] = mi;
                        v[off] = vi;
                        let mhat = mi / bc1;
                        let vhat = vi / bc2;
                        *p -= lr * mhat / (fmath::sqrt(vhat) + eps);
                        off += 1;
                    }
                }
            }
            (OptState::Sgd { velocity }, Optimizer::SgdMomentum { lr, momentum }) => {
                let mut off = 0;
                for (p_slice, g_slice) in params.iter_mut().zip(grads) {
                    for (p, &g) in p_slice.iter_mut().zip(g_slice.iter()) {
                        velocity[off] = momentum * velocity[off] + g;
                        *p -= lr * velocity[off];
                        off += 1;
                    }
                }
            }
            _ => unreachable!("optimizer state mismatch"),
        }
    }
}

fn num_params(model: &NetModel) -> usize {
    let layer = |l: &Layer| l.w.data().len() + l.b.len();
    layer(&model.lift) + model.blocks.iter().map(layer).sum::<usize>() + layer(&model.head)
}

/// Train on the `train`-tagged rows of the dataset. Returns the final model;
/// use [`train_logged`] to also get per-epoch mean losses.
pub fn train(dataset: &Dataset, config: &NetConfig) -> Result<NetModel, NetError> {
    Ok(train_logged(dataset, config)?.0)
}

/// Mini-batch cross-entropy training, deterministic given the config seed.
/// A spectral-norm step runs after every parameter update when configured,
/// and the estimates get a 10-step settle pass before the model is returned.
pub fn train_logged(
    dataset: &Dataset,
    config: &NetConfig,
) -> Result<(NetModel, Vec<f64>), NetError> {
    config.validate();
    let idx = dataset.indices_with_split(Split::Train);
    assert!(!idx.is_empty(), "train split is empty");
    assert!(
        idx.iter().all(|&i| dataset.y[i] < config.num_classes),
        "label out of range"
    );
    assert_eq!(dataset.dim(), config.input_dim, "input_dim mismatch");

    let mut model = NetModel::init(config);
    let mut state = OptState::new(&config.optimizer, num_params(&model));
    let mut order = idx.clone();
    let mut shuffle_rng = Rng::new(derive_seed(config.seed, 0x0ba7));
    let batch = config.batch_size.min(order.len());
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch) {
            let bx = gather_rows(&dataset.x, chunk);
            let by: Vec<usize> = chunk.iter().map(|&i| dataset.y[i]).collect();
            let (grads, loss) = model.backprop_with_loss(&bx, &by)?;
            if !loss.is_finite() {
                return Err(NetError::DivergedLoss);
            }
            apply_update(&mut model, &mut state, &config.optimizer, &grads);
            model.apply_spectral_norm();
            epoch_loss += loss;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    model.settle_spectral_norm(10);
    Ok((model, epoch_losses))
}

fn apply_update(model: &mut NetModel, state: &mut OptState, optimizer: &Optimizer, g: &Gradients) {
    let mut params: Vec<&mut [f64]> = Vec::new();
    let mut grads: Vec<&[f64]> = Vec::new();
    params.push(model.lift.w.data_mut());
    grads.push(g.lift_w.data());
    params.push(&mut model.lift.b);
    grads.push(&g.lift_b);
    for (blk, (gw, gb)) in model.blocks.iter_mut().zip(&g.blocks) {
        params.push(blk.w.data_mut());
        grads.push(gw.data());
        params.push(&mut blk.b);
        grads.push(gb);
    }
    params.push(model.head.w.data_mut());
    grads.push(g.head_w.data());
    params.push(&mut model.head.b);
    grads.push(&g.head_b);
    state.step(optimizer, &mut params, &grads);
}

fn gather_rows(x: &Matrix, indices: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(indices.len(), x.cols());
    for (k, &i) in indices.iter().enumerate() {
        out.row_mut(k).copy_from_slice(x.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::two_moons;

    fn tiny_config() -> NetConfig {
        NetConfig {
            input_dim: 3,
            width: 4,
            num_blocks: 2,
            num_classes: 3,
            use_residual: true,
            sn_coefficient: Some(3.0),
            sn_on_head: true,
            leaky_slope: 0.01,
            optimizer: Optimizer::adam(1e-3),
            epochs: 10,
            batch_size: 4,
            seed: 5,
        }
    }

    fn zeroed(config: &NetConfig) -> NetModel {
        let mut m = NetModel::init(config);
        m.lift.w.data_mut().fill(0.0);
        m.lift.b.fill(0.0);
        for b in &mut m.blocks {
            b.w.data_mut().fill(0.0);
            b.b.fill(0.0);
        }
        m.head.w.data_mut().fill(0.0);
        m.head.b.fill(0.0);
        m
    }

    #[test]
    fn zero_model_gives_zero_features_and_uniform_probs() {
        let cfg = tiny_config();
        let m = zeroed(&cfg);
        let t = m.forward(&[0.3, -0.2, 1.0]).unwrap();
        assert!(t.features.iter().all(|&v| v == 0.0));
        assert!(t.probs.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn symmetric_logits_give_even_odds() {
        let p = softmax(&[0.0, 0.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let m = NetModel::init(&tiny_config());
        assert!(matches!(
            m.forward(&[1.0, 2.0]),
            Err(NetError::ShapeMismatch)
        ));
    }

    #[test]
    fn single_block_matches_hand_computation() {
        let cfg = NetConfig {
            input_dim: 2,
            width: 2,
            num_blocks: 1,
            num_classes: 2,
            use_residual: true,
            sn_coefficient: None,
            sn_on_head: false,
            leaky_slope: 0.01,
            optimizer: Optimizer::adam(1e-3),
            epochs: 1,
            batch_size: 1,
            seed: 0,
        };
        let mut m = zeroed(&cfg);
        // Lift = identity, block W = [[1, 2], [-1, 0]], b = (0.5, -0.25).
        m.lift.w = Matrix::identity(2);
        m.blocks[0].w = Matrix::from_rows(&[&[1.0, 2.0], &[-1.0, 0.0]]);
        m.blocks[0].b = vec![0.5, -0.25];
        let x = [1.0, -0.5];
        // z0 = x; a = W z0 + b = (1 - 1 + 0.5, -1 - 0.25) = (0.5, -1.25)
        // phi(a) = (0.5, -0.0125); z1 = z0 + phi(a) = (1.5, -0.5125)
        let t = m.forward(&x).unwrap();
        assert!((t.features[0] - 1.5).abs() < 1e-15);
        assert!((t.features[1] + 0.5125).abs() < 1e-15);
    }

    #[test]
    fn batch_forward_matches_single() {
        let cfg = tiny_config();
        let m = NetModel::init(&cfg);
        let rows = [[0.1, 0.2, -0.3], [1.0, -1.0, 0.5], [0.0, 0.0, 0.0]];
        let x = Matrix::from_rows(&[&rows[0], &rows[1], &rows[2]]);
        let (features, probs) = m.features_and_probs(&x).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let single = m.forward(row).unwrap();
            for j in 0..cfg.width {
                assert!((features.get(i, j) - single.features[j]).abs() < 1e-12);
            }
            for k in 0..cfg.num_classes {
                assert!((probs.get(i, k) - single.probs[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_norm_scales_large_weights() {
        let cfg = tiny_config();
        let mut m = NetModel::init(&cfg);
        m.blocks[0].w = Matrix::zeros(4, 4);
        m.blocks[0].w.set(0, 0, 6.0);
        m.blocks[0].w.set(1, 1, 1.0);
        m.settle_spectral_norm(100);
        let w_eff = m.blocks[0].effective_weight(Some(3.0));
        assert!((w_eff.get(0, 0) - 3.0).abs() < 1e-9, "{}", w_eff.get(0, 0));
        assert!((w_eff.get(1, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_no_op_below_bound() {
        let cfg = tiny_config();
        let mut m = NetModel::init(&cfg);
        m.blocks[0].w = Matrix::identity(4); // sigma = 1 < c = 3
        m.settle_spectral_norm(20);
        assert_eq!(m.blocks[0].effective_weight(Some(3.0)), Matrix::identity(4));
    }

    #[test]
    fn sigma_estimate_stays_below_bound_after_maintenance() {
        let cfg = tiny_config();
        let mut m = NetModel::init(&cfg);
        let mut rng = Rng::new(77);
        for v in m.blocks[1].w.data_mut() {
            *v = 3.0 * rng.normal();
        }
        for _ in 0..50 {
            m.apply_spectral_norm();
        }
        // Oracle: converged power iteration on the effective weight.
        let w_eff = m.blocks[1].effective_weight(Some(3.0));
        let u0 = [1.0, 0.2, 0.2, 0.2];
        let (sigma, _) = power_iteration_spectral_norm(&w_eff, &u0, 500).unwrap();
        assert!(sigma <= 3.0 + 1e-6, "effective sigma {sigma}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = tiny_config();
        let mut m = NetModel::init(&cfg);
        m.settle_spectral_norm(30);
        let mut rng = Rng::new(2);
        let mut x = Matrix::zeros(5, 3);
        for v in x.data_mut() {
            *v = rng.normal();
        }
        let y = vec![0, 2, 1, 1, 0];
        let g = m.backprop_gradients(&x, &y).unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;

        // Pull every (analytic gradient, parameter pointer) pair through the
        // same central-difference probe.
        let flat: Vec<(usize, usize, f64)> = {
            let mut out = Vec::new();
            for (idx, &a) in g.lift_w.data().iter().enumerate() {
                out.push((0, idx, a));
            }
            for (idx, &a) in g.lift_b.iter().enumerate() {
                out.push((1, idx, a));
            }
            for (bi, (gw, gb)) in g.blocks.iter().enumerate() {
                for (idx, &a) in gw.data().iter().enumerate() {
                    out.push((2 + 2 * bi, idx, a));
                }
                for (idx, &a) in gb.iter().enumerate() {
                    out.push((3 + 2 * bi, idx, a));
                }
            }
            for (idx, &a) in g.head_w.data().iter().enumerate() {
                out.push((6, idx, a));
            }
            for (idx, &a) in g.head_b.iter().enumerate() {
                out.push((7, idx, a));
            }
            out
        };

        for (which, idx, analytic) in flat {
            let get_set = |m: &mut NetModel, v: Option<f64>| -> f64 {
                let slot: &mut f64 = match which {
                    0 => &mut m.lift.w.data_mut()[idx],
                    1 => &mut m.lift.b[idx],
                    2 => &mut m.blocks[0].w.data_mut()[idx],
                    3 => &mut m.blocks[0].b[idx],
                    4 => &mut m.blocks[1].w.data_mut()[idx],
                    5 => &mut m.blocks[1].b[idx],
                    6 => &mut m.head.w.data_mut()[idx],
                    _ => &mut m.head.b[idx],
                };
                let old = *slot;
                if let Some(v) = v {
                    *slot = v;
                }
                old
            };
            let orig = get_set(&mut m, None);
            get_set(&mut m, Some(orig + eps));
            let lp = m.mean_loss(&x, &y).unwrap();
            get_set(&mut m, Some(orig - eps));
            let lm = m.mean_loss(&x, &y).unwrap();
            get_set(&mut m, Some(orig));
            let numeric = (lp - lm) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn head_bias_gradient_vanishes_at_symmetric_point() {
        let mut cfg = tiny_config();
        cfg.num_classes = 2;
        let m = zeroed(&cfg);
        let x = Matrix::from_rows(&[&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]]);
        let y = vec![0, 1];
        let g = m.backprop_gradients(&x, &y).unwrap();
        assert!(g.head_b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_sample_keeps_mean_gradient() {
        let cfg = tiny_config();
        let m = NetModel::init(&cfg);
        let x1 = Matrix::from_rows(&[&[0.4, -0.1, 0.9]]);
        let x2 = Matrix::from_rows(&[&[0.4, -0.1, 0.9], &[0.4, -0.1, 0.9]]);
        let g1 = m.backprop_gradients(&x1, &[1]).unwrap();
        let g2 = m.backprop_gradients(&x2, &[1, 1]).unwrap();
        assert_eq!(g1.head_w.data(), g2.head_w.data());
        assert_eq!(g1.lift_w.data(), g2.lift_w.data());
    }

    #[test]
    fn training_separates_two_points() {
        let x = Matrix::from_rows(&[&[-1.0, 0.0], &[1.0, 0.0]]);
        let ds = Dataset::new(
            x,
            vec![0, 1],
            vec![false, false],
            vec![Split::Train, Split::Train],
        );
        let cfg = NetConfig {
            input_dim: 2,
            width: 8,
            num_blocks: 1,
            num_classes: 2,
            use_residual: true,
            sn_coefficient: None,
            sn_on_head: false,
            leaky_slope: 0.01,
            optimizer: Optimizer::adam(0.05),
            epochs: 200,
            batch_size: 2,
            seed: 1,
        };
        let (model, losses) = train_logged(&ds, &cfg).unwrap();
        let last = *losses.last().unwrap();
        assert!(last < 0.01, "final loss {last}");
        let t = model.forward(&[-1.0, 0.0]).unwrap();
        assert!(t.probs[0] > 0.9);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = two_moons(64, 0.1, 3).unwrap();
        let mut cfg = tiny_config();
        cfg.input_dim = 2;
        cfg.num_classes = 2;
        cfg.epochs = 5;
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.head.w.data(), b.head.w.data());
    }

    #[test]
    fn lipschitz_bound_holds_with_unit_coefficient() {
        let ds = two_moons(128, 0.1, 9).unwrap();
        let mut cfg = NetConfig::two_moons_default(4);
        cfg.sn_coefficient = Some(1.0);
        cfg.width = 16;
        cfg.epochs = 20;
        let mut model = train(&ds, &cfg).unwrap();
        model.settle_spectral_norm(100);

        // Measured per-layer spectral norms of the effective weights.
        let oracle_sigma = |l: &Layer, c: Option<f64>| {
            let w = l.effective_weight(c);
            let mut u = vec![0.0; w.rows()];
            let mut r = Rng::new(123);
            for v in u.iter_mut() {
                *v = r.normal();
            }
            let n = norm2(&u);
            u.iter_mut().for_each(|v| *v /= n);
            power_iteration_spectral_norm(&w, &u, 300).unwrap().0
        };
        let mut bound = oracle_sigma(&model.lift, Some(1.0));
        for blk in &model.blocks {
            bound *= 1.0 + oracle_sigma(blk, Some(1.0));
        }

        let mut rng = Rng::new(33);
        for _ in 0..1000 {
            let x1 = [rng.uniform_range(-3.0, 3.0), rng.uniform_range(-3.0, 3.0)];
            let x2 = [rng.uniform_range(-3.0, 3.0), rng.uniform_range(-3.0, 3.0)];
            let f1 = model.forward(&x1).unwrap().features;
            let f2 = model.forward(&x2).unwrap().features;
            let df = f1
                .iter()
                .zip(&f2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let dx = ((x1[0] - x2[0]).powi(2) + (x1[1] - x2[1]).powi(2)).sqrt();
            assert!(df <= bound * dx + 1e-9, "{df} > {bound} * {dx}");
        }
    }
}
