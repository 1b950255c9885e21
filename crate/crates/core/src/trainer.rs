//! A small differentiable stack trained on ball labels or sample labels.
//!
//! The feature extractor is a stack of affine layers, each followed by
//! `tanh`. Its output goes through the ball layer (in [`Mode::Gbc`]) and then
//! an affine softmax classifier. Individual-sample training is the special
//! case where every sample is its own ball, and it runs through exactly the
//! same code.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ball::{ClassId, GranularBall};
use crate::ballgen::{generate_rows, SplitConfig};
use crate::error::{Error, Result};
use crate::layer::{backward_balls, centers_of, BackwardMode};
use crate::matrix::Matrix;
use crate::noise::noise_rates_by_labels;
use crate::replay::{ReplayConfig, ReplayPool};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Standard per-sample training.
    Individual,
    /// Train on granular-balls.
    #[default]
    Gbc,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Individual => "individual",
            Mode::Gbc => "gbc",
        })
    }
}

/// How ball losses are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    /// Each ball counts once.
    #[default]
    PerBall,
    /// Each ball counts in proportion to its size.
    SizeWeighted,
}

/// Step decay: multiply by `factor` once each decay point is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    /// Fractions of the total step count.
    pub decay_points: Vec<f64>,
    pub factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 0.1,
            decay_points: vec![0.5, 0.75],
            factor: 0.1,
        }
    }
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            initial: lr,
            decay_points: Vec::new(),
            factor: 1.0,
        }
    }

    pub fn at(&self, step: usize, total: usize) -> f64 {
        let passed = self
            .decay_points
            .iter()
            .filter(|&&p| step >= (p * total as f64).floor() as usize)
            .count();
        self.initial * self.factor.powi(passed as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: LrSchedule,
    pub momentum: f64,
    pub nesterov: bool,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub mode: Mode,
    pub backward_mode: BackwardMode,
    pub loss_weighting: LossWeighting,
    /// Widths of the extractor's hidden layers.
    pub hidden: Vec<usize>,
    /// Width of the extracted feature vectors.
    pub feature_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: LrSchedule::default(),
            momentum: 0.9,
            nesterov: true,
            weight_decay: 1e-4,
            batch_size: 256,
            steps: 1500,
            seed: 0,
            mode: Mode::Gbc,
            backward_mode: BackwardMode::MeanScaled,
            loss_weighting: LossWeighting::PerBall,
            hidden: vec![32],
            feature_dim: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || (self.mode == Mode::Gbc && self.batch_size < 2) {
            return Err(Error::InvalidConfig("batch_size must be >= 2 in gbc mode and >= 1 otherwise".into()));
        }
        if self.feature_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if !(self.lr.initial >= 0.0 && self.momentum >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("lr, momentum and weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// An affine layer `y = W x + b` with `W` stored as `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(out: usize, inp: usize) -> Self {
        Self {
            weights: Matrix::zeros(out, inp),
            bias: vec![0.0; out],
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul_t(&self.weights);
        y.add_row_vector(&self.bias);
        y
    }
}

/// Extractor layers followed by one classifier layer. Also used to hold
/// gradients and momentum, which have the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Dense>,
}

/// Activations saved by the extractor's forward pass.
pub struct ExtractorCache {
    /// Input to each extractor layer.
    inputs: Vec<Matrix>,
    /// `tanh` output of each extractor layer.
    outputs: Vec<Matrix>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], feature_dim: usize, classes: usize, rng: &mut Rng) -> Self {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(feature_dim);
        widths.push(classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (inp, out) = (w[0], w[1]);
                let limit = (6.0 / (inp + out) as f64).sqrt();
                let data = (0..inp * out).map(|_| rng.random_range(-limit..limit)).collect();
                Dense {
                    weights: Matrix::from_vec(out, inp, data).expect("sized"),
                    bias: vec![0.0; out],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weights.rows(), l.weights.cols()))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier().weights.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier().weights.rows()
    }

    fn classifier(&self) -> &Dense {
        self.layers.last().expect("at least one layer")
    }

    fn extractor(&self) -> &[Dense] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// All parameters in layer order, each layer's weights then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut k = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&flat[k..k + w.len()]);
            k += w.len();
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn squared_norm(&self) -> f64 {
        self.to_flat().iter().map(|x| x * x).sum()
    }

    pub fn extract(&self, x: &Matrix) -> (Matrix, ExtractorCache) {
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut h = x.clone();
        for layer in self.extractor() {
            let out = layer.forward(&h).map(f64::tanh);
            inputs.push(h);
            outputs.push(out.clone());
            h = out;
        }
        (h, ExtractorCache { inputs, outputs })
    }

    pub fn classify(&self, features: &Matrix) -> Matrix {
        self.classifier().forward(features)
    }

    /// Per-sample class predictions (no balls).
    pub fn predict(&self, x: &Matrix) -> Vec<ClassId> {
        let (f, _) = self.extract(x);
        let logits = self.classify(&f);
        logits.iter_rows().map(argmax).collect()
    }

    fn extractor_backward(&self, cache: &ExtractorCache, grad_features: Matrix, grads: &mut ModelParams) {
        let mut g = grad_features;
        for (i, layer) in self.extractor().iter().enumerate().rev() {
            let out = &cache.outputs[i];
            // through tanh
            for (gv, y) in g.as_mut_slice().iter_mut().zip(out.as_slice()) {
                *gv *= 1.0 - y * y;
            }
            grads.layers[i].weights = g.t_matmul(&cache.inputs[i]);
            grads.layers[i].bias = g.column_sums();
            if i > 0 {
                g = g.matmul(&layer.weights);
            }
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Weighted softmax cross-entropy and its gradient with respect to the logits.
///
/// `sizes` gives each row's ball size and is required for
/// [`LossWeighting::SizeWeighted`].
pub fn loss_and_grads(
    logits: &Matrix,
    labels: &[ClassId],
    weighting: LossWeighting,
    sizes: Option<&[usize]>,
) -> Result<(f64, Matrix)> {
    let (n, classes) = logits.shape();
    if n == 0 {
        return Err(Error::Empty("loss over no rows"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let weights: Vec<f64> = match weighting {
        LossWeighting::PerBall => vec![1.0 / n as f64; n],
        LossWeighting::SizeWeighted => {
            let sizes = sizes.ok_or_else(|| Error::InvalidConfig("size weighting needs ball sizes".into()))?;
            if sizes.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: sizes.len(),
                });
            }
            let total: usize = sizes.iter().sum();
            sizes.iter().map(|&s| s as f64 / total as f64).collect()
        }
    };

    let mut loss = 0.0;
    let mut grad = Matrix::zeros(n, classes);
    for i in 0..n {
        let label = labels[i];
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += weights[i] * (log_z - row[label]);
        let g = grad.row_mut(i);
        for (j, gz) in g.iter_mut().enumerate() {
            let p = (row[j] - log_z).exp();
            *gz = weights[i] * (p - if j == label { 1.0 } else { 0.0 });
        }
    }
    Ok((loss, grad))
}

/// Loss and parameter gradient for a batch whose ball structure is fixed.
///
/// Ball members are row positions in `x`. Balls may overlap. The returned
/// loss is the data term only; the gradient includes `weight_decay * w`.
pub fn ball_loss_and_gradient(
    params: &ModelParams,
    x: &Matrix,
    balls: &[GranularBall],
    weighting: LossWeighting,
    backward_mode: BackwardMode,
    weight_decay: f64,
) -> Result<(f64, ModelParams)> {
    if balls.is_empty() {
        return Err(Error::Empty("batch without balls"));
    }
    let (features, cache) = params.extract(x);
    let centers = centers_of(&features, balls);
    let logits = params.classify(&centers);
    let labels: Vec<ClassId> = balls.iter().map(|b| b.label).collect();
    let sizes: Vec<usize> = balls.iter().map(GranularBall::size).collect();
    let (loss, dlogits) = loss_and_grads(&logits, &labels, weighting, Some(&sizes))?;

    let mut grads = params.zeros_like();
    let classifier = params.classifier();
    let last = params.layers.len() - 1;
    grads.layers[last].weights = dlogits.t_matmul(&centers);
    grads.layers[last].bias = dlogits.column_sums();
    let dcenters = dlogits.matmul(&classifier.weights);
    let dfeatures = backward_balls(&dcenters, balls, x.rows(), features.cols(), backward_mode)?;
    params.extractor_backward(&cache, dfeatures, &mut grads);

    if weight_decay != 0.0 {
        for (g, p) in grads.layers.iter_mut().zip(&params.layers) {
            for (gv, pv) in g.weights.as_mut_slice().iter_mut().zip(p.weights.as_slice()) {
                *gv += weight_decay * pv;
            }
            for (gv, pv) in g.bias.iter_mut().zip(&p.bias) {
                *gv += weight_decay * pv;
            }
        }
    }
    Ok((loss, grads))
}

/// One singleton ball per row, labeled with that row's label.
pub fn singleton_balls(labels: &[ClassId]) -> Vec<GranularBall> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &label)| GranularBall {
            members: vec![i],
            center: Vec::new(),
            label,
            purity: 1.0,
        })
        .collect()
}

/// SGD with momentum. `v = mu * v + g`, then `w -= lr * (g + mu * v)` with
/// Nesterov or `w -= lr * v` without.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    pub nesterov: bool,
    velocity: ModelParams,
}

impl Sgd {
    pub fn new(params: &ModelParams, momentum: f64) -> Self {
        Self {
            momentum,
            nesterov: false,
            velocity: params.zeros_like(),
        }
    }

    pub fn nesterov(params: &ModelParams, momentum: f64) -> Self {
        Self {
            nesterov: true,
            ..Self::new(params, momentum)
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        let mu = self.momentum;
        let nesterov = self.nesterov;
        for ((p, g), v) in params.layers.iter_mut().zip(&grads.layers).zip(&mut self.velocity.layers) {
            let pairs = p
                .weights
                .as_mut_slice()
                .iter_mut()
                .chain(p.bias.iter_mut())
                .zip(g.weights.as_slice().iter().chain(&g.bias))
                .zip(v.weights.as_mut_slice().iter_mut().chain(v.bias.iter_mut()));
            for ((pv, gv), vv) in pairs {
                *vv = mu * *vv + gv;
                *pv -= if nesterov { lr * (gv + mu * *vv) } else { lr * *vv };
            }
        }
    }
}

/// Training data: features, observed labels, and clean labels if known.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub features: Matrix,
    pub labels: Vec<ClassId>,
    pub clean_labels: Option<Vec<ClassId>>,
    pub num_classes: usize,
}

impl TrainData {
    pub fn from_dataset(d: &crate::ball::Dataset) -> Self {
        Self {
            features: d.features(),
            labels: d.observed_labels(),
            clean_labels: d.clean_labels().ok(),
            num_classes: d.num_classes(),
        }
    }
}

/// What one training step reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub batch_size: usize,
    pub ball_count: usize,
    pub empirical_balls: usize,
    pub admitted: usize,
    pub pool_size: usize,
    /// Noise rates over the freshly drawn samples, when clean labels exist.
    pub noise_before: Option<f64>,
    pub noise_after_sample: Option<f64>,
    pub noise_after_ball: Option<f64>,
}

/// Owns the model, optimizer and replay pool across steps.
pub struct Trainer {
    cfg: TrainConfig,
    split: SplitConfig,
    params: ModelParams,
    sgd: Sgd,
    pool: ReplayPool,
    batch_rng: Rng,
    step: usize,
}

impl Trainer {
    /// Seeds: parameters from `cfg.seed`'s init stream, batches from its
    /// batch stream, ball generation from `split.seed`, replay draws from
    /// `replay.seed`.
    pub fn new(
        input_dim: usize,
        classes: usize,
        cfg: TrainConfig,
        split: SplitConfig,
        replay: ReplayConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        split.validate()?;
        let params = ModelParams::init(
            input_dim,
            &cfg.hidden,
            cfg.feature_dim,
            classes,
            &mut seed::rng(seed::sub_seed(cfg.seed, seed::Stream::Init)),
        );
        Ok(Self {
            sgd: if cfg.nesterov {
                Sgd::nesterov(&params, cfg.momentum)
            } else {
                Sgd::new(&params, cfg.momentum)
            },
            batch_rng: seed::rng(seed::sub_seed(cfg.seed, seed::Stream::Batches)),
            pool: ReplayPool::new(replay)?,
            params,
            split,
            cfg,
            step: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn pool(&self) -> &ReplayPool {
        &self.pool
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn draw_fresh(&mut self, n_total: usize, count: usize, exclude: &[usize]) -> Vec<usize> {
        if exclude.is_empty() {
            let count = count.min(n_total);
            return index::sample(&mut self.batch_rng, n_total, count).into_vec();
        }
        let mut blocked = vec![false; n_total];
        for &e in exclude {
            blocked[e] = true;
        }
        let candidates: Vec<usize> = (0..n_total).filter(|&i| !blocked[i]).collect();
        let count = count.min(candidates.len());
        index::sample(&mut self.batch_rng, candidates.len(), count)
            .into_iter()
            .map(|k| candidates[k])
            .collect()
    }

    /// Run one step: assemble a batch, build balls, update the parameters.
    pub fn train_step(&mut self, data: &TrainData) -> Result<StepMetrics> {
        let n_total = data.features.rows();
        if n_total == 0 {
            return Err(Error::Empty("training set"));
        }
        let step = self.step;
        let lr = self.cfg.lr.at(step, self.cfg.steps);
        let gbc = self.cfg.mode == Mode::Gbc;

        let (drawn, empirical_idx) = if gbc {
            let budget = (self.pool.config().replay_fraction * self.cfg.batch_size as f64).floor() as usize;
            self.pool.sample_within_budget(budget)
        } else {
            (Vec::new(), Vec::new())
        };
        let fresh = self.draw_fresh(n_total, self.cfg.batch_size - empirical_idx.len(), &empirical_idx);
        let n_emp = empirical_idx.len();
        let rows: Vec<usize> = empirical_idx.iter().chain(&fresh).copied().collect();
        let x = data.features.select_rows(&rows);
        let fresh_labels: Vec<ClassId> = fresh.iter().map(|&i| data.labels[i]).collect();

        let mut noise = None;
        let (balls, admitted) = if gbc {
            let row_of: HashMap<usize, usize> = rows.iter().enumerate().map(|(r, &i)| (i, r)).collect();
            let mut balls: Vec<GranularBall> = drawn
                .iter()
                .map(|e| GranularBall {
                    members: e.members.iter().map(|m| row_of[m]).collect(),
                    center: Vec::new(),
                    label: e.label,
                    purity: e.purity_at_admission,
                })
                .collect();

            let (features, _) = self.params.extract(&x);
            let fresh_features = features.select_rows(&(n_emp..rows.len()).collect::<Vec<_>>());
            let split = SplitConfig {
                seed: seed::derive(self.split.seed, step as u64),
                ..self.split.clone()
            };
            let partition = generate_rows(&fresh_features, &fresh_labels, &split)?;
            if let Some(clean) = &data.clean_labels {
                let fresh_clean: Vec<ClassId> = fresh.iter().map(|&i| clean[i]).collect();
                noise = Some(noise_rates_by_labels(&fresh_labels, &fresh_clean, &partition)?);
            }
            let admitted = self.pool.admit_mapped(&partition.balls, step as u64, |m| fresh[m]);
            balls.extend(partition.balls.into_iter().map(|mut b| {
                b.members.iter_mut().for_each(|m| *m += n_emp);
                b
            }));
            (balls, admitted)
        } else {
            if let Some(clean) = &data.clean_labels {
                let wrong = fresh.iter().filter(|&&i| clean[i] != data.labels[i]).count();
                let rate = wrong as f64 / fresh.len() as f64;
                noise = Some(crate::noise::NoiseRates {
                    before: rate,
                    after_sample_weighted: rate,
                    after_ball_level: rate,
                });
            }
            (singleton_balls(&fresh_labels), 0)
        };

        let (loss, grads) = ball_loss_and_gradient(
            &self.params,
            &x,
            &balls,
            self.cfg.loss_weighting,
            self.cfg.backward_mode,
            self.cfg.weight_decay,
        )?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss {loss} at step {step}")));
        }
        self.sgd.step(&mut self.params, &grads, lr);
        if !self.params.is_finite() {
            return Err(Error::NonFinite(format!("parameters after step {step}")));
        }
        self.step += 1;

        Ok(StepMetrics {
            step,
            lr,
            loss,
            batch_size: rows.len(),
            ball_count: balls.len(),
            empirical_balls: drawn.len(),
            admitted,
            pool_size: self.pool.len(),
            noise_before: noise.map(|n| n.before),
            noise_after_sample: noise.map(|n| n.after_sample_weighted),
            noise_after_ball: noise.map(|n| n.after_ball_level),
        })
    }

    /// Run the configured number of steps, handing each step's metrics to `sink`.
    pub fn run(&mut self, data: &TrainData, mut sink: impl FnMut(&StepMetrics) -> Result<()>) -> Result<()> {
        while self.step < self.cfg.steps {
            let m = self.train_step(data)?;
            sink(&m)?;
        }
        Ok(())
    }
}

/// Fraction of samples predicted correctly, every sample its own ball.
pub fn evaluate(params: &ModelParams, x: &Matrix, labels: &[ClassId]) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::Empty("test set"));
    }
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: labels.len(),
        });
    }
    let preds = params.predict(x);
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

const MAGIC: &[u8; 4] = b"GBCK";
const CHECKPOINT_VERSION: u32 = 1;

/// Write parameters in the `GBCK` binary layout (all integers and floats
/// little-endian):
///
/// ```text
/// magic    4 bytes  "GBCK"
/// version  u32      1
/// layers   u32      L
/// dims     L x (rows u32, cols u32)
/// data     for each layer: rows*cols weights (row-major f64), then rows bias f64
/// ```
pub fn write_checkpoint<W: Write>(mut w: W, params: &ModelParams) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(params.layers.len() as u32).to_le_bytes())?;
    for l in &params.layers {
        w.write_all(&(l.weights.rows() as u32).to_le_bytes())?;
        w.write_all(&(l.weights.cols() as u32).to_le_bytes())?;
    }
    for x in params.to_flat() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let read_u32 = |r: &mut R| -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    };
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    if n == 0 {
        return Err(Error::Checkpoint("no layers".into()));
    }
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        layers.push(Dense::zeros(rows, cols));
    }
    for w in layers.windows(2) {
        if w[0].weights.rows() != w[1].weights.cols() {
            return Err(Error::Checkpoint("layer widths do not chain".into()));
        }
    }
    let mut params = ModelParams { layers };
    let mut flat = vec![0.0; params.num_params()];
    let mut b = [0u8; 8];
    for x in &mut flat {
        r.read_exact(&mut b)?;
        *x = f64::from_le_bytes(b);
    }
    params.set_flat(&flat);
    Ok(params)
}
