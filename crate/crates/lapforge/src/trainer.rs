//! Training loop: per-record optimizer stepping with scheduled learning rate
//! and constraint weight, plus text checkpoints that resume bit-exactly.
//!
//! One record is one optimizer step (graphs vary in size, so there is no
//! batching). Shuffling draws from a per-epoch derived stream and the
//! optimizer state travels inside the checkpoint, so a run interrupted after
//! any epoch and resumed from disk reproduces the uninterrupted run exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::assignment::{greedy_discretize, precision};
use crate::datagen::{Dataset, SampleRecord};
use crate::error::{LapError, Result};
use crate::graph::build_graph;
use crate::loss::{combined_loss_on_tape, LossConfig};
use crate::model::{forward_on_tape, predict, ModelConfig, ModelParameters};
use crate::autodiff::Tape;
use crate::stream::derive_rng;

const FORMAT_TAG: &str = "lapforge-checkpoint";
const FORMAT_VERSION: &str = "v1";

/// Optimization schedule and optimizer hyperparameters. Defaults: 20 epochs,
/// learning rate 0.003 decayed by 5% every 5 epochs, constraint weight
/// ramping by 0.01 per epoch from 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_initial: f64,
    /// Multiplicative decay applied once per `lr_decay_interval` epochs.
    pub lr_decay: f64,
    pub lr_decay_interval: usize,
    pub alpha_initial: f64,
    /// Constraint-weight increase per epoch.
    pub alpha_step: f64,
    /// First-moment decay of the adaptive optimizer.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator guard of the adaptive optimizer.
    pub epsilon: f64,
    /// Global gradient-norm ceiling; steps above it are rescaled and counted.
    pub grad_clip: f64,
    /// Loss settings. The `alpha` field is ignored: the per-epoch schedule
    /// supplies it.
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr_initial: 0.003,
            lr_decay: 0.95,
            lr_decay_interval: 5,
            alpha_initial: 0.0,
            alpha_step: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: 10.0,
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_finite = |x: f64| x.is_finite() && x > 0.0;
        if !positive_finite(self.lr_initial) {
            return Err(LapError::Config("learning rate must be positive".into()));
        }
        if !(self.lr_decay.is_finite() && 0.0 < self.lr_decay && self.lr_decay <= 1.0) {
            return Err(LapError::Config("lr decay must lie in (0, 1]".into()));
        }
        if self.lr_decay_interval == 0 {
            return Err(LapError::Config("lr decay interval must be at least 1".into()));
        }
        if !(self.alpha_initial.is_finite() && self.alpha_initial >= 0.0)
            || !(self.alpha_step.is_finite() && self.alpha_step >= 0.0)
        {
            return Err(LapError::Config(
                "constraint-weight schedule must be finite and nonnegative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(LapError::Config("moment decays must lie in [0, 1)".into()));
        }
        if !positive_finite(self.epsilon) || !positive_finite(self.grad_clip) {
            return Err(LapError::Config(
                "optimizer epsilon and gradient clip must be positive".into(),
            ));
        }
        self.loss.validate()
    }
}

/// Learning rate during `epoch` (absolute, 0-based).
pub fn learning_rate_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr_initial * cfg.lr_decay.powi((epoch / cfg.lr_decay_interval) as i32)
}

/// Constraint weight during `epoch` (absolute, 0-based).
pub fn alpha_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.alpha_initial + cfg.alpha_step * epoch as f64
}

/// Adaptive-moment optimizer state over the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    /// One bias-corrected update of `params` in place.
    pub fn update(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grads[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

/// Everything needed to continue (or evaluate) a training run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub train_config: TrainConfig,
    pub completed_epochs: usize,
    pub params: ModelParameters,
    pub optimizer: AdamState,
}

impl Checkpoint {
    /// Epoch-zero state: freshly initialized parameters and a zeroed
    /// optimizer.
    pub fn fresh(model_cfg: &ModelConfig, train_cfg: &TrainConfig) -> Result<Self> {
        train_cfg.validate()?;
        let params = ModelParameters::init(model_cfg, train_cfg.seed)?;
        let optimizer = AdamState::new(params.param_count());
        Ok(Checkpoint {
            train_config: *train_cfg,
            completed_epochs: 0,
            params,
            optimizer,
        })
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    /// Mean classification loss over the epoch's records.
    pub mean_bce: f64,
    /// Mean constraint penalty (before the alpha weight).
    pub mean_constraint: f64,
    /// Mean precision on the held-out set after the epoch (NaN if none).
    pub eval_precision: f64,
    /// Steps whose gradient norm was rescaled to the ceiling.
    pub clipped_steps: usize,
}

pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
}

struct StepOutput {
    total: f64,
    bce: f64,
    constraint: f64,
    grads: Vec<f64>,
}

/// Forward + loss + backward for one record; no parameter update.
fn training_step(
    params: &ModelParameters,
    record: &SampleRecord,
    loss_cfg: &LossConfig,
) -> Result<StepOutput> {
    let graph = build_graph(&record.cost, params.config().prune_width)?;
    let (gt, _coverage) = graph.ground_truth_labels(&record.optimal)?;
    let tape = Tape::new();
    let fwd = forward_on_tape(&tape, &graph, params);
    let parts = combined_loss_on_tape(&tape, fwd.logits, fwd.score, &gt, loss_cfg)?;
    let total = tape.value(parts.total).item();
    let bce = tape.value(parts.bce).item();
    let constraint = tape.value(parts.constraint).item();
    let grads = tape.backward(parts.total);
    let mut flat = Vec::with_capacity(params.param_count());
    fwd.bound.gradient_into(&tape, &grads, &mut flat);
    Ok(StepOutput { total, bce, constraint, grads: flat })
}

/// Mean assignment precision of the model over a dataset: predict, greedily
/// discretize, compare against the stored optimum. Per-record work runs in
/// parallel; the aggregation is an ordered sequential sum, so the result is
/// independent of thread count.
pub fn mean_precision(params: &ModelParameters, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(LapError::Degenerate("cannot evaluate on an empty dataset".into()));
    }
    let per_record: Vec<f64> = dataset
        .records
        .par_iter()
        .map(|record| {
            let pred = predict(&record.cost, params)?;
            precision(&greedy_discretize(&pred.score), &record.optimal)
        })
        .collect::<Result<_>>()?;
    Ok(per_record.iter().sum::<f64>() / per_record.len() as f64)
}

/// Run epochs `checkpoint.completed_epochs .. epochs`, invoking `on_epoch`
/// with the post-epoch state (for periodic checkpointing or logging).
pub fn train_with(
    mut checkpoint: Checkpoint,
    train_set: &Dataset,
    eval_set: &Dataset,
    mut on_epoch: impl FnMut(&Checkpoint, &EpochStats) -> Result<()>,
) -> Result<TrainResult> {
    if train_set.is_empty() {
        return Err(LapError::Degenerate("training set is empty".into()));
    }
    let cfg = checkpoint.train_config;
    cfg.validate()?;
    let mut history = Vec::new();
    for epoch in checkpoint.completed_epochs..cfg.epochs {
        let lr = learning_rate_at(&cfg, epoch);
        let alpha = alpha_at(&cfg, epoch);
        let loss_cfg = LossConfig { alpha, ..cfg.loss };

        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = derive_rng(cfg.seed, &["train", "shuffle", &epoch.to_string()]);
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut sum_bce = 0.0;
        let mut sum_constraint = 0.0;
        let mut clipped = 0usize;
        for &index in &order {
            let step = training_step(&checkpoint.params, &train_set.records[index], &loss_cfg)?;
            if !step.total.is_finite() {
                return Err(LapError::Numeric(format!(
                    "non-finite loss at epoch {epoch}, record {index}: \
                     classification {} constraint {}",
                    step.bce, step.constraint
                )));
            }
            sum_bce += step.bce;
            sum_constraint += step.constraint;

            let mut grads = step.grads;
            let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(LapError::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, record {index}"
                )));
            }
            if norm > cfg.grad_clip {
                let scale = cfg.grad_clip / norm;
                for g in &mut grads {
                    *g *= scale;
                }
                clipped += 1;
            }

            let mut flat = checkpoint.params.to_flat();
            checkpoint
                .optimizer
                .update(&mut flat, &grads, lr, cfg.beta1, cfg.beta2, cfg.epsilon);
            checkpoint.params.set_flat(&flat)?;
        }

        checkpoint.completed_epochs = epoch + 1;
        let count = train_set.len() as f64;
        let eval_precision = if eval_set.is_empty() {
            f64::NAN
        } else {
            mean_precision(&checkpoint.params, eval_set)?
        };
        let stats = EpochStats {
            epoch,
            learning_rate: lr,
            alpha,
            mean_bce: sum_bce / count,
            mean_constraint: sum_constraint / count,
            eval_precision,
            clipped_steps: clipped,
        };
        on_epoch(&checkpoint, &stats)?;
        history.push(stats);
    }
    Ok(TrainResult { checkpoint, history })
}

/// Train from scratch with the given configurations.
pub fn train(
    train_set: &Dataset,
    eval_set: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainResult> {
    train_with(Checkpoint::fresh(model_cfg, train_cfg)?, train_set, eval_set, |_, _| Ok(()))
}

/// Continue a loaded checkpoint to its configured epoch count.
pub fn resume(checkpoint: Checkpoint, train_set: &Dataset, eval_set: &Dataset) -> Result<TrainResult> {
    train_with(checkpoint, train_set, eval_set, |_, _| Ok(()))
}

/// Tab-separated history log, one row per epoch.
pub fn history_to_tsv(history: &[EpochStats]) -> String {
    let mut out = String::from(
        "epoch\tlearning_rate\talpha\tmean_classification_loss\tmean_constraint_loss\teval_precision\tclipped_steps\n",
    );
    for row in history {
        let _ = writeln!(
            out,
            "{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{}",
            row.epoch,
            row.learning_rate,
            row.alpha,
            row.mean_bce,
            row.mean_constraint,
            row.eval_precision,
            row.clipped_steps,
        );
    }
    out
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize a checkpoint to the self-describing text format: scalar fields,
/// then every parameter tensor by name and shape, then the optimizer
/// moments, then an `end` sentinel.
pub fn checkpoint_to_text(ckpt: &Checkpoint) -> String {
    let model = ckpt.params.config();
    let train = &ckpt.train_config;
    let mut out = format!("{FORMAT_TAG} {FORMAT_VERSION}\n");
    let _ = writeln!(out, "completed_epochs={}", ckpt.completed_epochs);
    let _ = writeln!(out, "model.latent_dim={}", model.latent_dim);
    let _ = writeln!(out, "model.conv_iterations={}", model.conv_iterations);
    let _ = writeln!(out, "model.prune_width={}", model.prune_width);
    let _ = writeln!(out, "model.hidden_width={}", model.hidden_width);
    let _ = writeln!(out, "model.ablate_channel_attention={}", model.ablate_channel_attention);
    let _ = writeln!(out, "model.ablate_aggregation_weights={}", model.ablate_aggregation_weights);
    let _ = writeln!(out, "train.epochs={}", train.epochs);
    let _ = writeln!(out, "train.lr_initial={}", fmt_f(train.lr_initial));
    let _ = writeln!(out, "train.lr_decay={}", fmt_f(train.lr_decay));
    let _ = writeln!(out, "train.lr_decay_interval={}", train.lr_decay_interval);
    let _ = writeln!(out, "train.alpha_initial={}", fmt_f(train.alpha_initial));
    let _ = writeln!(out, "train.alpha_step={}", fmt_f(train.alpha_step));
    let _ = writeln!(out, "train.beta1={}", fmt_f(train.beta1));
    let _ = writeln!(out, "train.beta2={}", fmt_f(train.beta2));
    let _ = writeln!(out, "train.epsilon={}", fmt_f(train.epsilon));
    let _ = writeln!(out, "train.grad_clip={}", fmt_f(train.grad_clip));
    let _ = writeln!(out, "train.w={}", fmt_f(train.loss.w));
    let _ = writeln!(out, "train.epsilon_log={}", fmt_f(train.loss.epsilon_log));
    let _ = writeln!(out, "train.use_l1={}", train.loss.use_l1);
    let _ = writeln!(out, "train.use_l2={}", train.loss.use_l2);
    let _ = writeln!(out, "train.seed={}", train.seed);
    let _ = writeln!(out, "adam.step={}", ckpt.optimizer.step);

    let mut tensor = |name: &str, rows: usize, cols: usize, values: &[f64]| {
        debug_assert_eq!(rows * cols, values.len());
        let _ = writeln!(out, "tensor {name} {rows} {cols}");
        let mut line = String::new();
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{v:.16e}");
        }
        out.push_str(&line);
        out.push('\n');
    };
    for (name, net) in ckpt.params.named_nets() {
        for (l, layer) in net.layers().iter().enumerate() {
            let (wr, wc) = layer.weight.shape();
            tensor(&format!("{name}.{l}.weight"), wr, wc, layer.weight.data());
            let (br, bc) = layer.bias.shape();
            tensor(&format!("{name}.{l}.bias"), br, bc, layer.bias.data());
        }
    }
    tensor("adam.m", ckpt.optimizer.m.len(), 1, &ckpt.optimizer.m);
    tensor("adam.v", ckpt.optimizer.v.len(), 1, &ckpt.optimizer.v);
    out.push_str("end\n");
    out
}

fn malformed(detail: impl Into<String>) -> LapError {
    LapError::Format(detail.into())
}

struct FieldMap(BTreeMap<String, String>);

impl FieldMap {
    fn take(&mut self, key: &str) -> Result<String> {
        self.0
            .remove(key)
            .ok_or_else(|| malformed(format!("checkpoint is missing field {key:?}")))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.take(key)?;
        raw.parse()
            .map_err(|_| malformed(format!("checkpoint field {key}={raw:?} is malformed")))
    }
}

/// Parse a checkpoint from its text form, validating the version, every
/// field, and every tensor name and shape.
pub fn checkpoint_from_text(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines().peekable();
    let header = lines.next().ok_or_else(|| malformed("empty checkpoint file"))?;
    match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        [FORMAT_TAG, FORMAT_VERSION] => {}
        [FORMAT_TAG, other] => {
            return Err(LapError::Version {
                found: other.to_string(),
                expected: FORMAT_VERSION.to_string(),
            })
        }
        _ => return Err(malformed(format!("unrecognized checkpoint header {header:?}"))),
    }

    let mut fields = FieldMap(BTreeMap::new());
    while let Some(line) = lines.peek() {
        if line.starts_with("tensor ") {
            break;
        }
        let line = lines.next().unwrap();
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| malformed(format!("checkpoint line {line:?} is not key=value")))?;
        fields.0.insert(key.to_string(), value.to_string());
    }

    let model_cfg = ModelConfig {
        latent_dim: fields.parse("model.latent_dim")?,
        conv_iterations: fields.parse("model.conv_iterations")?,
        prune_width: fields.parse("model.prune_width")?,
        hidden_width: fields.parse("model.hidden_width")?,
        ablate_channel_attention: fields.parse("model.ablate_channel_attention")?,
        ablate_aggregation_weights: fields.parse("model.ablate_aggregation_weights")?,
    };
    let train_cfg = TrainConfig {
        epochs: fields.parse("train.epochs")?,
        lr_initial: fields.parse("train.lr_initial")?,
        lr_decay: fields.parse("train.lr_decay")?,
        lr_decay_interval: fields.parse("train.lr_decay_interval")?,
        alpha_initial: fields.parse("train.alpha_initial")?,
        alpha_step: fields.parse("train.alpha_step")?,
        beta1: fields.parse("train.beta1")?,
        beta2: fields.parse("train.beta2")?,
        epsilon: fields.parse("train.epsilon")?,
        grad_clip: fields.parse("train.grad_clip")?,
        loss: LossConfig {
            w: fields.parse("train.w")?,
            alpha: 0.0,
            epsilon_log: fields.parse("train.epsilon_log")?,
            use_l1: fields.parse("train.use_l1")?,
            use_l2: fields.parse("train.use_l2")?,
        },
        seed: fields.parse("train.seed")?,
    };
    let completed_epochs: usize = fields.parse("completed_epochs")?;
    let adam_step: u64 = fields.parse("adam.step")?;
    if let Some(stray) = fields.0.keys().next() {
        return Err(malformed(format!("checkpoint has unknown field {stray:?}")));
    }
    train_cfg.validate()?;

    // The architecture fixes every tensor's name and shape; read them in
    // canonical order against a template.
    let template = ModelParameters::init(&model_cfg, 0)?;
    let mut expected: Vec<(String, usize, usize)> = Vec::new();
    for (name, net) in template.named_nets() {
        for (l, layer) in net.layers().iter().enumerate() {
            let (wr, wc) = layer.weight.shape();
            expected.push((format!("{name}.{l}.weight"), wr, wc));
            let (br, bc) = layer.bias.shape();
            expected.push((format!("{name}.{l}.bias"), br, bc));
        }
    }
    let count = template.param_count();
    expected.push(("adam.m".to_string(), count, 1));
    expected.push(("adam.v".to_string(), count, 1));

    let mut read_tensor = |want: &(String, usize, usize)| -> Result<Vec<f64>> {
        let (want_name, want_rows, want_cols) = want;
        let header = lines
            .next()
            .ok_or_else(|| malformed(format!("checkpoint ends before tensor {want_name}")))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "tensor" {
            return Err(malformed(format!("expected a tensor header, found {header:?}")));
        }
        if parts[1] != want_name {
            return Err(malformed(format!(
                "checkpoint tensor order mismatch: expected {want_name}, found {}",
                parts[1]
            )));
        }
        let rows: usize = parts[2]
            .parse()
            .map_err(|_| malformed(format!("bad tensor shape in {header:?}")))?;
        let cols: usize = parts[3]
            .parse()
            .map_err(|_| malformed(format!("bad tensor shape in {header:?}")))?;
        if rows != *want_rows || cols != *want_cols {
            return Err(malformed(format!(
                "tensor {want_name}: expected shape {want_rows}x{want_cols}, found {rows}x{cols}"
            )));
        }
        let data_line = lines
            .next()
            .ok_or_else(|| malformed(format!("tensor {want_name} has no value line")))?;
        let values: Vec<f64> = data_line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| malformed(format!("tensor {want_name}: bad value {tok:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != rows * cols {
            return Err(malformed(format!(
                "tensor {want_name}: expected {} values, found {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(values)
    };

    let mut flat = Vec::with_capacity(count);
    for want in &expected[..expected.len() - 2] {
        flat.extend(read_tensor(want)?);
    }
    let m = read_tensor(&expected[expected.len() - 2])?;
    let v = read_tensor(&expected[expected.len() - 1])?;
    match lines.next() {
        Some("end") => {}
        _ => return Err(malformed("checkpoint is truncated (missing end sentinel)")),
    }

    let params = ModelParameters::from_flat(&model_cfg, &flat)?;
    Ok(Checkpoint {
        train_config: train_cfg,
        completed_epochs,
        params,
        optimizer: AdamState { m, v, step: adam_step },
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_text(ckpt))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    checkpoint_from_text(&text)
}
