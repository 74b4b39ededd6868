//! Single-layer LSTM regressor with a linear output unit, trained by
//! backpropagation through time.
//!
//! Each step concatenates `z = [x_t, h_{t-1}]` and computes
//!
//! ```text
//! f = σ(W_f z + b_f)    i = σ(W_i z + b_i)
//! g = tanh(W_g z + b_g) o = σ(W_o z + b_o)
//! C_t = f ⊙ C_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(C_t)
//! ```
//!
//! and a sequence's prediction is `w_y · h_T + b_y`.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMode, ScalerParams, WindowedDataset};

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation at timestep {step}")]
    NonFiniteActivation { step: usize },
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training windows")]
    EmptyDataset,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u64),
    #[error("checkpoint: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LstmError>;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weights of the four gates and the output projection. Also used as the
/// gradient and optimizer-moment container, since all share one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// hidden × (input + hidden)
    pub w_f: Array2<f64>,
    pub w_i: Array2<f64>,
    pub w_o: Array2<f64>,
    pub w_g: Array2<f64>,
    pub b_f: Array1<f64>,
    pub b_i: Array1<f64>,
    pub b_o: Array1<f64>,
    pub b_g: Array1<f64>,
    pub w_y: Array1<f64>,
    pub b_y: f64,
}

pub const TENSOR_NAMES: [&str; 10] = [
    "w_f", "w_i", "w_o", "w_g", "b_f", "b_i", "b_o", "b_g", "w_y", "b_y",
];

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let gate = || Array2::zeros((hidden_size, input_size + hidden_size));
        let bias = || Array1::zeros(hidden_size);
        LstmParams {
            input_size,
            hidden_size,
            w_f: gate(),
            w_i: gate(),
            w_o: gate(),
            w_g: gate(),
            b_f: bias(),
            b_i: bias(),
            b_o: bias(),
            b_g: bias(),
            w_y: bias(),
            b_y: 0.0,
        }
    }

    /// Xavier-uniform weights from a seeded ChaCha stream, forget-gate bias
    /// 1.0 and all other biases 0.
    pub fn init(input_size: usize, hidden_size: usize, seed: u64) -> Self {
        assert!(input_size > 0 && hidden_size > 0, "sizes must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmParams::zeros(input_size, hidden_size);
        let gate_limit = (6.0 / (input_size + 2 * hidden_size) as f64).sqrt();
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_o, &mut p.w_g] {
            w.mapv_inplace(|_| gate_limit * (2.0 * rng.gen::<f64>() - 1.0));
        }
        let out_limit = (6.0 / (hidden_size + 1) as f64).sqrt();
        p.w_y.mapv_inplace(|_| out_limit * (2.0 * rng.gen::<f64>() - 1.0));
        p.b_f.fill(1.0);
        p
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.input_size, self.hidden_size)
    }

    /// Flat views of every tensor, in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[f64]; 10] {
        fn s(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        fn v(a: &Array1<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        [
            s(&self.w_f),
            s(&self.w_i),
            s(&self.w_o),
            s(&self.w_g),
            v(&self.b_f),
            v(&self.b_i),
            v(&self.b_o),
            v(&self.b_g),
            v(&self.w_y),
            std::slice::from_ref(&self.b_y),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.w_f.as_slice_mut().expect("standard layout"),
            self.w_i.as_slice_mut().expect("standard layout"),
            self.w_o.as_slice_mut().expect("standard layout"),
            self.w_g.as_slice_mut().expect("standard layout"),
            self.b_f.as_slice_mut().expect("standard layout"),
            self.b_i.as_slice_mut().expect("standard layout"),
            self.b_o.as_slice_mut().expect("standard layout"),
            self.b_g.as_slice_mut().expect("standard layout"),
            self.w_y.as_slice_mut().expect("standard layout"),
            std::slice::from_mut(&mut self.b_y),
        ]
    }

    pub fn shapes(&self) -> [Vec<usize>; 10] {
        let gate = vec![self.hidden_size, self.input_size + self.hidden_size];
        let bias = vec![self.hidden_size];
        [
            gate.clone(),
            gate.clone(),
            gate.clone(),
            gate,
            bias.clone(),
            bias.clone(),
            bias.clone(),
            bias.clone(),
            bias,
            vec![],
        ]
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &LstmParams, alpha: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm {
            let k = max_norm / norm;
            for t in self.tensors_mut() {
                t.iter_mut().for_each(|x| *x *= k);
            }
        }
        norm
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_size {
            return Err(LstmError::ShapeMismatch(format!(
                "input has {len} features, model expects {}",
                self.input_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Array1<f64>,
    pub h: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            c: Array1::zeros(hidden_size),
            h: Array1::zeros(hidden_size),
        }
    }
}

/// Activations kept from one forward step for the backward pass.
#[derive(Debug, Clone)]
pub struct GateCache {
    pub z: Array1<f64>,
    pub f: Array1<f64>,
    pub i: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub c: Array1<f64>,
}

pub fn cell_forward(
    x: ArrayView1<f64>,
    prev: &LstmState,
    params: &LstmParams,
) -> Result<(LstmState, GateCache)> {
    params.check_input(x.len())?;
    if prev.c.len() != params.hidden_size || prev.h.len() != params.hidden_size {
        return Err(LstmError::ShapeMismatch(format!(
            "state has length {}/{}, model hidden size is {}",
            prev.c.len(),
            prev.h.len(),
            params.hidden_size
        )));
    }
    let mut z = Array1::zeros(params.input_size + params.hidden_size);
    z.slice_mut(ndarray::s![..params.input_size]).assign(&x);
    z.slice_mut(ndarray::s![params.input_size..]).assign(&prev.h);

    let f = (params.w_f.dot(&z) + &params.b_f).mapv_into(sigmoid);
    let i = (params.w_i.dot(&z) + &params.b_i).mapv_into(sigmoid);
    let g = (params.w_g.dot(&z) + &params.b_g).mapv_into(f64::tanh);
    let o = (params.w_o.dot(&z) + &params.b_o).mapv_into(sigmoid);
    let c = &f * &prev.c + &i * &g;
    let h = &o * &c.mapv(f64::tanh);
    if !(c.iter().chain(h.iter()).all(|v| v.is_finite())) {
        return Err(LstmError::NonFiniteActivation { step: 0 });
    }
    let cache = GateCache {
        z,
        f,
        i,
        g,
        o,
        c_prev: prev.c.clone(),
        c: c.clone(),
    };
    Ok((LstmState { c, h }, cache))
}

#[derive(Debug, Clone)]
pub struct SequenceCache {
    pub steps: Vec<GateCache>,
    pub h_last: Array1<f64>,
}

/// Runs a `timesteps × features` sequence from a zero state and projects the
/// final hidden state to a scalar.
pub fn sequence_forward(
    sequence: ArrayView2<f64>,
    params: &LstmParams,
) -> Result<(f64, SequenceCache)> {
    if sequence.nrows() == 0 {
        return Err(LstmError::ShapeMismatch("empty sequence".into()));
    }
    let mut state = LstmState::zeros(params.hidden_size);
    let mut steps = Vec::with_capacity(sequence.nrows());
    for (t, x) in sequence.axis_iter(Axis(0)).enumerate() {
        let (next, cache) = cell_forward(x, &state, params).map_err(|e| match e {
            LstmError::NonFiniteActivation { .. } => LstmError::NonFiniteActivation { step: t },
            other => other,
        })?;
        steps.push(cache);
        state = next;
    }
    let prediction = params.w_y.dot(&state.h) + params.b_y;
    Ok((
        prediction,
        SequenceCache {
            steps,
            h_last: state.h,
        },
    ))
}

/// Exact gradients of a loss with `dL/dprediction = d_prediction`, by
/// backpropagation through every timestep. No clipping is applied here.
pub fn backward(cache: &SequenceCache, d_prediction: f64, params: &LstmParams) -> Result<LstmParams> {
    let mut grads = params.zeros_like();
    accumulate_backward(cache, d_prediction, params, &mut grads)?;
    Ok(grads)
}

/// [`backward`], adding into an existing gradient buffer.
pub fn accumulate_backward(
    cache: &SequenceCache,
    d_prediction: f64,
    params: &LstmParams,
    grads: &mut LstmParams,
) -> Result<()> {
    let hidden = params.hidden_size;
    let input = params.input_size;
    if cache.h_last.len() != hidden
        || cache.steps.iter().any(|s| s.z.len() != input + hidden)
        || grads.hidden_size != hidden
        || grads.input_size != input
    {
        return Err(LstmError::ShapeMismatch("cache does not match parameters".into()));
    }
    grads.w_y.scaled_add(d_prediction, &cache.h_last);
    grads.b_y += d_prediction;

    let mut dh = &params.w_y * d_prediction;
    let mut dc_next = Array1::<f64>::zeros(hidden);
    for step in cache.steps.iter().rev() {
        let tanh_c = step.c.mapv(f64::tanh);
        let d_o = &dh * &tanh_c;
        let dc = &dc_next + &(&dh * &step.o * &tanh_c.mapv(|t| 1.0 - t * t));
        let d_f = &dc * &step.c_prev;
        let d_i = &dc * &step.g;
        let d_g = &dc * &step.i;
        dc_next = &dc * &step.f;

        let pre_f = &d_f * &step.f.mapv(|v| v * (1.0 - v));
        let pre_i = &d_i * &step.i.mapv(|v| v * (1.0 - v));
        let pre_o = &d_o * &step.o.mapv(|v| v * (1.0 - v));
        let pre_g = &d_g * &step.g.mapv(|v| 1.0 - v * v);

        let z_row = step.z.view().insert_axis(Axis(0));
        let mut dz = Array1::<f64>::zeros(input + hidden);
        for (pre, w, dw, db) in [
            (&pre_f, &params.w_f, &mut grads.w_f, &mut grads.b_f),
            (&pre_i, &params.w_i, &mut grads.w_i, &mut grads.b_i),
            (&pre_o, &params.w_o, &mut grads.w_o, &mut grads.b_o),
            (&pre_g, &params.w_g, &mut grads.w_g, &mut grads.b_g),
        ] {
            let col = pre.view().insert_axis(Axis(1));
            *dw += &col.dot(&z_row);
            *db += pre;
            dz += &w.t().dot(pre);
        }
        dh = dz.slice(ndarray::s![input..]).to_owned();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(format!("unknown optimizer `{s}` (expected adam or sgd)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub grad_clip_norm: f64,
    pub optimizer: OptimizerKind,
    pub hidden_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 42,
            grad_clip_norm: 5.0,
            optimizer: OptimizerKind::Adam,
            hidden_size: 32,
        }
    }
}

impl TrainConfig {
    /// Epoch counts of the standard comparison protocol.
    pub const EPOCH_PRESETS: [usize; 3] = [5, 10, 15];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LstmError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
        if !(self.grad_clip_norm > 0.0) {
            return bad("grad_clip_norm must be positive");
        }
        if self.hidden_size == 0 {
            return bad("hidden_size must be positive");
        }
        Ok(())
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[allow(clippy::large_enum_variant)] // one instance per training run
enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: i32,
        m: LstmParams,
        v: LstmParams,
    },
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, like: &LstmParams) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                step: 0,
                m: like.zeros_like(),
                v: like.zeros_like(),
            },
        }
    }

    fn step(&mut self, params: &mut LstmParams, grads: &LstmParams) {
        match self {
            Optimizer::Sgd { lr } => params.add_scaled(grads, -*lr),
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*step);
                let c2 = 1.0 - ADAM_BETA2.powi(*step);
                let tensors = params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(m.tensors_mut().into_iter().zip(v.tensors_mut()));
                for ((p, g), (m, v)) in tensors {
                    for k in 0..p.len() {
                        m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                        v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                        let m_hat = m[k] / c1;
                        let v_hat = v[k] / c2;
                        p[k] -= *lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Trained parameters plus everything needed to reproduce and invert the
/// model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: LstmParams,
    pub config: TrainConfig,
    pub scaler: ScalerParams,
    pub feature_mode: Option<FeatureMode>,
    pub lookback: usize,
    pub loss_history: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u64 = 1;

/// Mean squared error of the model over all windows, in scaled units.
pub fn mean_squared_error(params: &LstmParams, windows: &WindowedDataset) -> Result<f64> {
    if windows.is_empty() {
        return Err(LstmError::EmptyDataset);
    }
    let mut sum = 0.0;
    for (k, &label) in windows.labels.iter().enumerate() {
        let (pred, _) = sequence_forward(windows.sequence(k), params)?;
        sum += (pred - label).powi(2);
    }
    Ok(sum / windows.len() as f64)
}

/// Mini-batch MSE training. Batches are drawn in a seeded shuffled order each
/// epoch; the batch gradient is averaged, clipped to `grad_clip_norm`, then
/// applied. Identical inputs and config give bit-identical checkpoints.
pub fn train(windows: &WindowedDataset, config: &TrainConfig) -> Result<Checkpoint> {
    config.validate()?;
    if windows.is_empty() {
        return Err(LstmError::EmptyDataset);
    }
    if windows.scaler.width() != windows.feature_count() + 1 {
        return Err(LstmError::ShapeMismatch(
            "scaler must cover every feature plus the target".into(),
        ));
    }
    let mut params = LstmParams::init(windows.feature_count(), config.hidden_size, config.seed);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut grads = params.zeros_like();
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.tensors_mut().iter_mut().for_each(|t| t.fill(0.0));
            let scale = 1.0 / batch.len() as f64;
            for &k in batch {
                let (pred, cache) = sequence_forward(windows.sequence(k), &params)
                    .map_err(|_| LstmError::NonFiniteLoss { epoch })?;
                let err = pred - windows.labels[k];
                epoch_loss += err * err;
                accumulate_backward(&cache, 2.0 * err * scale, &params, &mut grads)?;
            }
            if !grads.is_finite() {
                return Err(LstmError::NonFiniteLoss { epoch });
            }
            grads.clip_global_norm(config.grad_clip_norm);
            optimizer.step(&mut params, &grads);
        }
        let mean = epoch_loss / windows.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(LstmError::NonFiniteLoss { epoch });
        }
        loss_history.push(mean);
    }

    Ok(Checkpoint {
        params,
        config: config.clone(),
        scaler: windows.scaler.clone(),
        feature_mode: windows.feature_mode,
        lookback: windows.lookback,
        loss_history,
    })
}

/// Predictions in the target's original units, one per window.
pub fn predict(checkpoint: &Checkpoint, windows: &WindowedDataset) -> Result<Vec<f64>> {
    let params = &checkpoint.params;
    if windows.is_empty() {
        return Ok(Vec::new());
    }
    params.check_input(windows.feature_count())?;
    if let (Some(a), Some(b)) = (checkpoint.feature_mode, windows.feature_mode) {
        if a != b {
            return Err(LstmError::ShapeMismatch(format!(
                "checkpoint was trained in {a} mode, windows are {b} mode"
            )));
        }
    }
    if windows.scaler != checkpoint.scaler {
        return Err(LstmError::ShapeMismatch(
            "windows were scaled with a different scaler than the checkpoint".into(),
        ));
    }
    let target = params.input_size;
    (0..windows.len())
        .into_par_iter()
        .map(|k| {
            let (pred, _) = sequence_forward(windows.sequence(k), params)?;
            Ok(checkpoint.scaler.unscale(target, pred))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u64,
    input_size: usize,
    hidden_size: usize,
    lookback: usize,
    feature_mode: Option<FeatureMode>,
    config: TrainConfig,
    scaler: ScalerParams,
    loss_history: Vec<f64>,
    /// Row-major weights.
    tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn to_json<W: Write>(&self, out: W) -> Result<()> {
        let p = &self.params;
        let tensors = TENSOR_NAMES
            .iter()
            .zip(p.tensors())
            .zip(p.shapes())
            .map(|((name, values), shape)| TensorRecord {
                name: name.to_string(),
                shape,
                values: values.to_vec(),
            })
            .collect();
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            input_size: p.input_size,
            hidden_size: p.hidden_size,
            lookback: self.lookback,
            feature_mode: self.feature_mode,
            config: self.config.clone(),
            scaler: self.scaler.clone(),
            loss_history: self.loss_history.clone(),
            tensors,
        };
        serde_json::to_writer_pretty(out, &file)?;
        Ok(())
    }

    pub fn from_json<R: Read>(input: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(input)?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(CHECKPOINT_VERSION) => {}
            Some(v) => return Err(LstmError::UnsupportedVersion(v)),
            None => {
                return Err(LstmError::ShapeMismatch("checkpoint has no version".into()));
            }
        }
        let file: CheckpointFile = serde_json::from_value(value)?;
        if file.input_size == 0 || file.hidden_size == 0 {
            return Err(LstmError::ShapeMismatch("zero-sized model".into()));
        }
        let mut params = LstmParams::zeros(file.input_size, file.hidden_size);
        let shapes = params.shapes();
        if file.tensors.len() != TENSOR_NAMES.len() {
            return Err(LstmError::ShapeMismatch("wrong number of tensors".into()));
        }
        for (((dst, record), name), shape) in params
            .tensors_mut()
            .into_iter()
            .zip(&file.tensors)
            .zip(TENSOR_NAMES)
            .zip(shapes)
        {
            if record.name != name || record.shape != shape || record.values.len() != dst.len() {
                return Err(LstmError::ShapeMismatch(format!(
                    "tensor `{}` does not match expected `{name}` {shape:?}",
                    record.name
                )));
            }
            dst.copy_from_slice(&record.values);
        }
        if file.scaler.width() != file.input_size + 1 {
            return Err(LstmError::ShapeMismatch("scaler width".into()));
        }
        if file.loss_history.len() != file.config.epochs {
            return Err(LstmError::ShapeMismatch("loss history length != epochs".into()));
        }
        Ok(Checkpoint {
            params,
            config: file.config,
            scaler: file.scaler,
            feature_mode: file.feature_mode,
            lookback: file.lookback,
            loss_history: file.loss_history,
        })
    }
}
