//! A one-layer mask head: 3×3 convolution (same padding, zeros outside the
//! RoI) → ReLU → 1×1 projection → sigmoid. Small enough to train by hand
//! with exact gradients, big enough to show what the loss weighting does.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{
    edgemask_loss, sigmoid, weighted_bce, LossBreakdown, LossConfig, MaskPrediction, MaskTarget,
    DEFAULT_CLAMP_EPS,
};
use crate::raster::{boundary_band, crop_resample, upsample_mask, BBox, BandPartition, BinaryMask, DensityGrid, PixelGrid};

pub const DEFAULT_CHANNELS: usize = 8;
const TAPS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub channels: usize,
    /// `channels × 9` taps, row-major within each 3×3 kernel.
    pub conv_weights: Vec<f64>,
    pub conv_bias: Vec<f64>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
    pub init_seed: u64,
}

impl ModelParams {
    /// Seeded initialization: uniform conv taps scaled for a fan-in of 9,
    /// a small positive conv bias, uniform head weights in `±1/√C`.
    pub fn init(channels: usize, seed: u64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("channels must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (6.0f64 / TAPS as f64).sqrt();
        let h = 1.0 / (channels as f64).sqrt();
        Ok(Self {
            channels,
            conv_weights: (0..channels * TAPS).map(|_| rng.gen_range(-a..a)).collect(),
            conv_bias: vec![0.01; channels],
            head_weights: (0..channels).map(|_| rng.gen_range(-h..h)).collect(),
            head_bias: 0.0,
            init_seed: seed,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(channels: usize) -> Self {
        Self {
            channels,
            conv_weights: vec![0.0; channels * TAPS],
            conv_bias: vec![0.0; channels],
            head_weights: vec![0.0; channels],
            head_bias: 0.0,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        if c == 0
            || self.conv_weights.len() != c * TAPS
            || self.conv_bias.len() != c
            || self.head_weights.len() != c
        {
            return Err(Error::InvalidParameter(format!(
                "parameter shapes do not match {c} channels"
            )));
        }
        let finite = self
            .conv_weights
            .iter()
            .chain(&self.conv_bias)
            .chain(&self.head_weights)
            .chain(std::iter::once(&self.head_bias))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        Ok(())
    }

    fn axpy(&mut self, alpha: f64, g: &Gradients) {
        for (p, d) in self.conv_weights.iter_mut().zip(&g.conv_weights) {
            *p += alpha * d;
        }
        for (p, d) in self.conv_bias.iter_mut().zip(&g.conv_bias) {
            *p += alpha * d;
        }
        for (p, d) in self.head_weights.iter_mut().zip(&g.head_weights) {
            *p += alpha * d;
        }
        self.head_bias += alpha * g.head_bias;
    }
}

/// Parameter gradients, same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub conv_weights: Vec<f64>,
    pub conv_bias: Vec<f64>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

impl Gradients {
    fn zeros(channels: usize) -> Self {
        Self {
            conv_weights: vec![0.0; channels * TAPS],
            conv_bias: vec![0.0; channels],
            head_weights: vec![0.0; channels],
            head_bias: 0.0,
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (a, b) in self.conv_weights.iter_mut().zip(&other.conv_weights) {
            *a += b;
        }
        for (a, b) in self.conv_bias.iter_mut().zip(&other.conv_bias) {
            *a += b;
        }
        for (a, b) in self.head_weights.iter_mut().zip(&other.head_weights) {
            *a += b;
        }
        self.head_bias += other.head_bias;
    }

    pub fn max_abs(&self) -> f64 {
        self.conv_weights
            .iter()
            .chain(&self.conv_bias)
            .chain(&self.head_weights)
            .chain(std::iter::once(&self.head_bias))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Intermediate values of one forward pass.
struct Activations {
    /// Pre-activation conv outputs, `channels × m²`.
    pre: Vec<f64>,
    logits: Vec<f64>,
}

fn conv_forward(params: &ModelParams, input: &DensityGrid) -> Activations {
    let m = input.side();
    let n = m * m;
    let x = input.values();
    let mut pre = vec![0.0; params.channels * n];
    for c in 0..params.channels {
        let out = &mut pre[c * n..(c + 1) * n];
        out.fill(params.conv_bias[c]);
        for ky in 0..3 {
            for kx in 0..3 {
                let w = params.conv_weights[c * TAPS + ky * 3 + kx];
                // Output (y, x) reads input (y + ky - 1, x + kx - 1).
                let (y_lo, y_hi) = (usize::from(ky == 0), m - usize::from(ky == 2));
                let (x_lo, x_hi) = (usize::from(kx == 0), m - usize::from(kx == 2));
                for y in y_lo..y_hi {
                    let src = (y + ky - 1) * m;
                    let dst = y * m;
                    for xo in x_lo..x_hi {
                        out[dst + xo] += w * x[src + xo + kx - 1];
                    }
                }
            }
        }
    }
    let mut logits = vec![params.head_bias; n];
    for c in 0..params.channels {
        let w = params.head_weights[c];
        for (z, &p) in logits.iter_mut().zip(&pre[c * n..(c + 1) * n]) {
            if p > 0.0 {
                *z += w * p;
            }
        }
    }
    Activations { pre, logits }
}

/// Per-pixel foreground probabilities for one RoI.
pub fn forward(params: &ModelParams, input: &DensityGrid, eps: f64) -> Result<MaskPrediction> {
    let acts = conv_forward(params, input);
    MaskPrediction::from_logits(input.side(), &acts.logits, eps)
}

/// Backpropagate per-pixel logit gradients `dz`.
fn conv_backward(params: &ModelParams, input: &DensityGrid, acts: &Activations, dz: &[f64]) -> Gradients {
    let m = input.side();
    let n = m * m;
    let x = input.values();
    let mut g = Gradients::zeros(params.channels);
    g.head_bias = dz.iter().sum();
    let mut dpre = vec![0.0; n];
    for c in 0..params.channels {
        let pre = &acts.pre[c * n..(c + 1) * n];
        let hw = params.head_weights[c];
        let mut dhw = 0.0;
        let mut db = 0.0;
        for i in 0..n {
            if pre[i] > 0.0 {
                dhw += dz[i] * pre[i];
                dpre[i] = dz[i] * hw;
                db += dpre[i];
            } else {
                dpre[i] = 0.0;
            }
        }
        g.head_weights[c] = dhw;
        g.conv_bias[c] = db;
        for ky in 0..3 {
            for kx in 0..3 {
                let (y_lo, y_hi) = (usize::from(ky == 0), m - usize::from(ky == 2));
                let (x_lo, x_hi) = (usize::from(kx == 0), m - usize::from(kx == 2));
                let mut acc = 0.0;
                for y in y_lo..y_hi {
                    let src = (y + ky - 1) * m;
                    let dst = y * m;
                    for xo in x_lo..x_hi {
                        acc += dpre[dst + xo] * x[src + xo + kx - 1];
                    }
                }
                g.conv_weights[c * TAPS + ky * 3 + kx] = acc;
            }
        }
    }
    g
}

fn logit_grads(logits: &[f64], target: &[bool], boundary: &[bool], lambda: f64) -> Vec<f64> {
    let norm = logits.len() as f64;
    logits
        .iter()
        .zip(target)
        .zip(boundary)
        .map(|((&z, &y), &b)| {
            let w = if b { lambda } else { 1.0 };
            w * (sigmoid(z) - y as u8 as f64) / norm
        })
        .collect()
}

/// Loss of one RoI and its exact gradient with respect to every parameter.
pub fn backward(
    params: &ModelParams,
    input: &DensityGrid,
    target: &MaskTarget,
    band: &BandPartition,
    cfg: &LossConfig,
) -> Result<(Gradients, LossBreakdown)> {
    params.validate()?;
    if input.side() != cfg.m {
        return Err(Error::DimensionMismatch {
            expected: (cfg.m, cfg.m),
            actual: (input.side(), input.side()),
        });
    }
    let acts = conv_forward(params, input);
    let pred = MaskPrediction::from_logits(cfg.m, &acts.logits, cfg.clamp_eps)?;
    let loss = edgemask_loss(&pred, target, band, cfg)?;
    let dz = logit_grads(&acts.logits, target.bits(), band.boundary_bits(), cfg.lambda);
    Ok((conv_backward(params, input, &acts, &dz), loss))
}

/// One training RoI: input densities, binary target and its band.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: DensityGrid,
    pub target: MaskTarget,
    pub band: BandPartition,
}

impl Sample {
    pub fn new(input: DensityGrid, target: MaskTarget, k: usize) -> Result<Self> {
        if input.side() != target.side() {
            return Err(Error::DimensionMismatch {
                expected: (target.side(), target.side()),
                actual: (input.side(), input.side()),
            });
        }
        let band = boundary_band(target.mask(), k)?;
        Ok(Self { input, target, band })
    }
}

fn default_batch_size() -> usize {
    8
}

fn default_channels() -> usize {
    DEFAULT_CHANNELS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub lambda: f64,
    pub k: usize,
    pub m: usize,
    pub proposal_jitter: usize,
    pub seed: u64,
    pub clamp_eps: f64,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            iterations: 2000,
            lambda: 1.0,
            k: 2,
            m: 28,
            proposal_jitter: 4,
            seed: 0,
            clamp_eps: DEFAULT_CLAMP_EPS,
            channels: DEFAULT_CHANNELS,
            batch_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(8..=56).contains(&self.m) {
            return Err(Error::InvalidParameter(format!("m must be in 8..=56, got {}", self.m)));
        }
        if self.batch_size == 0 || self.channels == 0 {
            return Err(Error::InvalidParameter("batch_size and channels must be >= 1".into()));
        }
        self.loss_config().validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            m: self.m,
            k: self.k,
            clamp_eps: self.clamp_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss at each iteration.
    pub loss_trace: Vec<f64>,
    pub initial_mean_loss: f64,
    pub final_mean_loss: f64,
    /// Misclassified fraction of band pixels over the training set.
    pub boundary_error_rate: f64,
    pub interior_error_rate: f64,
    pub wall_time_secs: f64,
}

/// Mean loss over `samples` under `cfg`.
pub fn mean_loss(params: &ModelParams, samples: &[Sample], cfg: &LossConfig) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| {
            let acts = conv_forward(params, &s.input);
            let probs: Vec<f64> = acts
                .logits
                .iter()
                .map(|&z| sigmoid(z).clamp(cfg.clamp_eps, 1.0 - cfg.clamp_eps))
                .collect();
            weighted_bce(&probs, s.target.bits(), s.band.boundary_bits(), cfg.lambda, cfg.m).total
        })
        .sum();
    total / samples.len().max(1) as f64
}

/// Misclassification rates at threshold 0.5 over band and interior pixels.
pub fn pixel_error_rates(params: &ModelParams, samples: &[Sample]) -> (f64, f64) {
    let (mut eb, mut nb, mut ei, mut ni) = (0usize, 0usize, 0usize, 0usize);
    for s in samples {
        let acts = conv_forward(params, &s.input);
        for ((&z, &y), &b) in acts
            .logits
            .iter()
            .zip(s.target.bits())
            .zip(s.band.boundary_bits())
        {
            let wrong = (z > 0.0) != y;
            if b {
                nb += 1;
                eb += wrong as usize;
            } else {
                ni += 1;
                ei += wrong as usize;
            }
        }
    }
    let rate = |e: usize, n: usize| if n == 0 { 0.0 } else { e as f64 / n as f64 };
    (rate(eb, nb), rate(ei, ni))
}

/// Minibatch SGD over seeded reshuffles of `samples`.
///
/// The summed batch gradient is scaled by `m² / Σ(|I| + λ|B|)`, which
/// turns it into a weighted per-pixel mean, so the effective step does
/// not grow with λ.
pub fn train(samples: &[Sample], cfg: &TrainConfig) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for s in samples {
        if s.input.side() != cfg.m || s.band.k() != cfg.k {
            return Err(Error::InvalidParameter(format!(
                "sample built for m={}, k={} but config has m={}, k={}",
                s.input.side(),
                s.band.k(),
                cfg.m,
                cfg.k
            )));
        }
    }
    let start = Instant::now();
    let loss_cfg = cfg.loss_config();
    let mut params = ModelParams::init(cfg.channels, cfg.seed)?;
    let initial_mean_loss = mean_loss(&params, samples, &loss_cfg);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f5a_3b1e);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let m2 = (cfg.m * cfg.m) as f64;
    let mut loss_trace = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let mut grad = Gradients::zeros(cfg.channels);
        let mut weight = 0.0;
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let s = &samples[order[cursor]];
            cursor += 1;
            let acts = conv_forward(&params, &s.input);
            let probs: Vec<f64> = acts
                .logits
                .iter()
                .map(|&z| sigmoid(z).clamp(cfg.clamp_eps, 1.0 - cfg.clamp_eps))
                .collect();
            let lb = weighted_bce(&probs, s.target.bits(), s.band.boundary_bits(), cfg.lambda, cfg.m);
            batch_loss += lb.total;
            let dz = logit_grads(&acts.logits, s.target.bits(), s.band.boundary_bits(), cfg.lambda);
            grad.add(&conv_backward(&params, &s.input, &acts, &dz));
            weight += s.band.interior_count() as f64 + cfg.lambda * s.band.boundary_count() as f64;
        }
        loss_trace.push(batch_loss / cfg.batch_size as f64);
        if weight > 0.0 {
            params.axpy(-cfg.learning_rate * m2 / weight, &grad);
        }
    }

    let final_mean_loss = mean_loss(&params, samples, &loss_cfg);
    let (boundary_error_rate, interior_error_rate) = pixel_error_rates(&params, samples);
    Ok((
        params,
        TrainReport {
            loss_trace,
            initial_mean_loss,
            final_mean_loss,
            boundary_error_rate,
            interior_error_rate,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Shift every edge of every box by an independent uniform integer in
/// `[-j, j]`, clip to the page, and widen anything thinner than 2 px.
pub fn jitter_proposals(gt: &[BBox], j: usize, seed: u64, width: usize, height: usize) -> Vec<BBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = j as i64;
    let mut shift = |v: usize, len: usize| -> usize {
        let d = if j == 0 { 0 } else { rng.gen_range(-j..=j) };
        (v as i64 + d).clamp(0, len as i64) as usize
    };
    gt.iter()
        .map(|b| {
            let (a0, a1) = (shift(b.x0, width), shift(b.x1, width));
            let (c0, c1) = (shift(b.y0, height), shift(b.y1, height));
            let (x0, x1) = widen(a0.min(a1), a0.max(a1), width);
            let (y0, y1) = widen(c0.min(c1), c0.max(c1), height);
            BBox { x0, y0, x1, y1 }
        })
        .collect()
}

fn widen(lo: usize, hi: usize, len: usize) -> (usize, usize) {
    if hi >= lo + 2 {
        return (lo, hi);
    }
    let lo = lo.min(len.saturating_sub(2));
    (lo, (lo + 2).min(len))
}

/// RoI probabilities for one proposal.
pub fn predict_roi(params: &ModelParams, page: &PixelGrid, proposal: &BBox, m: usize, eps: f64) -> Result<MaskPrediction> {
    let input = crop_resample(page, proposal, m)?;
    forward(params, &input, eps)
}

/// Page-coordinate instance mask for one proposal.
pub fn predict_instance(params: &ModelParams, page: &PixelGrid, proposal: &BBox, m: usize, eps: f64) -> Result<BinaryMask> {
    let pred = predict_roi(params, page, proposal, m, eps)?;
    upsample_mask(&pred.to_mask(), proposal, page.width(), page.height())
}

pub const CHECKPOINT_FORMAT: &str = "edgemask-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Parameters plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, params: ModelParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config,
            params,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::malformed("checkpoint", e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::malformed("checkpoint", format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::SchemaVersion {
                what: "checkpoint".into(),
                found: ck.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        ck.params.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
