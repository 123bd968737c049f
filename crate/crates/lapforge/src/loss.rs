//! Training objectives: class-balanced cross-entropy over retained edges
//! plus soft one-to-one constraint penalties on the score matrix, combined
//! as L = L_bce + alpha · (L1 + L2).
//!
//! Every loss exists in two forms: a tape builder (differentiable, for
//! training) and a plain-value wrapper (for logging and tests). The
//! wrappers run the same tape code on a throwaway tape, so there is a
//! single definition of each formula.

use std::rc::Rc;

use crate::assignment::ScoreMatrix;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{LapError, Result};
use crate::graph::EdgeLabelVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Positive-class weight in (0, 1); the negative class gets 1 − w.
    pub w: f64,
    /// Constraint-penalty weight.
    pub alpha: f64,
    /// Clamp applied inside logarithms.
    pub epsilon_log: f64,
    /// Include the row/column-sum penalty (off for ablations).
    pub use_l1: bool,
    /// Include the row/column-norm penalty (off for ablations).
    pub use_l2: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            w: 0.9,
            alpha: 0.0,
            epsilon_log: 1e-12,
            use_l1: true,
            use_l2: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(LapError::Config(format!(
                "class weight w must lie in (0,1), got {}",
                self.w
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(LapError::Config(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        if self.epsilon_log <= 0.0 || !self.epsilon_log.is_finite() {
            return Err(LapError::Config(format!(
                "epsilon_log must be positive and finite, got {}",
                self.epsilon_log
            )));
        }
        Ok(())
    }
}

fn check_bce_shapes(tape: &Tape, values: Var, gt: &EdgeLabelVector) -> Result<()> {
    let (rows, cols) = tape.shape(values);
    if cols != 1 || rows != gt.len() {
        return Err(LapError::SizeMismatch {
            left: rows * cols,
            right: gt.len(),
        });
    }
    for &g in &gt.values {
        assert!(g == 0.0 || g == 1.0, "ground-truth labels must be binary, got {g}");
    }
    Ok(())
}

/// Balanced cross-entropy over edges in probability space:
/// −Σ_i [w·g_i·log(y_i) + (1−w)·(1−g_i)·log(1−y_i)], logs clamped at
/// `epsilon_log`. `labels` is an (m×1) tape variable in (0, 1).
///
/// The clamp keeps the value finite when a label saturates, but it also
/// zeroes the gradient there, so training uses
/// [`balanced_bce_logits_on_tape`] instead; this form serves evaluations
/// that only have probabilities.
pub fn balanced_bce_on_tape(
    tape: &Tape,
    labels: Var,
    gt: &EdgeLabelVector,
    cfg: &LossConfig,
) -> Result<Var> {
    check_bce_shapes(tape, labels, gt)?;
    let pos: Vec<f64> = gt.values.iter().map(|&g| cfg.w * g).collect();
    let neg: Vec<f64> = gt.values.iter().map(|&g| (1.0 - cfg.w) * (1.0 - g)).collect();

    let log_y = tape.log_clamped(labels, cfg.epsilon_log);
    let hit = tape.mul_const(log_y, Rc::new(Tensor::column(&pos)));
    let one_minus = tape.add_const(tape.scale(labels, -1.0), 1.0);
    let log_miss = tape.log_clamped(one_minus, cfg.epsilon_log);
    let miss = tape.mul_const(log_miss, Rc::new(Tensor::column(&neg)));
    Ok(tape.scale(tape.sum_all(tape.add(hit, miss)), -1.0))
}

/// The same balanced cross-entropy evaluated from pre-sigmoid scores:
/// with y = σ(z), −log y = softplus(−z) and −log(1 − y) = softplus(z), so
/// L = Σ_i [w·g_i·softplus(−z_i) + (1−w)·(1−g_i)·softplus(z_i)].
///
/// This is the training form: it needs no clamp to stay finite, and its
/// gradient w.r.t. a wrongly saturated logit approaches the full class
/// weight instead of collapsing to zero, so a run that drifts into
/// saturation can recover rather than freeze.
pub fn balanced_bce_logits_on_tape(
    tape: &Tape,
    logits: Var,
    gt: &EdgeLabelVector,
    cfg: &LossConfig,
) -> Result<Var> {
    check_bce_shapes(tape, logits, gt)?;
    let pos: Vec<f64> = gt.values.iter().map(|&g| cfg.w * g).collect();
    let neg: Vec<f64> = gt.values.iter().map(|&g| (1.0 - cfg.w) * (1.0 - g)).collect();

    let hit = tape.mul_const(tape.softplus(tape.scale(logits, -1.0)), Rc::new(Tensor::column(&pos)));
    let miss = tape.mul_const(tape.softplus(logits), Rc::new(Tensor::column(&neg)));
    Ok(tape.sum_all(tape.add(hit, miss)))
}

/// Row/column-sum penalty: ‖1 − rowsums(Y)‖₂ + ‖1 − rowsums(Yᵀ)‖₂.
pub fn constraint_l1_on_tape(tape: &Tape, score: Var) -> Var {
    let deviation = |m: Var| {
        let sums = tape.row_sums(m);
        tape.norm_all(tape.add_const(tape.scale(sums, -1.0), 1.0))
    };
    let by_rows = deviation(score);
    let by_cols = deviation(tape.transpose(score));
    tape.add(by_rows, by_cols)
}

/// Row/column-norm penalty: ‖1 − rownorms(Y)‖₂ + ‖1 − rownorms(Yᵀ)‖₂,
/// which pushes each line of the score matrix toward a one-hot vector.
pub fn constraint_l2_on_tape(tape: &Tape, score: Var) -> Var {
    let deviation = |m: Var| {
        let norms = tape.row_norms(m);
        tape.norm_all(tape.add_const(tape.scale(norms, -1.0), 1.0))
    };
    let by_rows = deviation(score);
    let by_cols = deviation(tape.transpose(score));
    tape.add(by_rows, by_cols)
}

/// The pieces of one combined-loss evaluation, all live on the tape.
pub struct LossBreakdown {
    pub total: Var,
    pub bce: Var,
    /// Sum of the enabled constraint penalties, before the alpha weight;
    /// zero-valued constant when both penalties are disabled.
    pub constraint: Var,
}

/// L = bce + alpha · (L1 + L2), honoring the enable flags. `logits` are the
/// pre-sigmoid edge scores; `score` is the sigmoid-and-scattered matrix the
/// constraint penalties act on.
pub fn combined_loss_on_tape(
    tape: &Tape,
    logits: Var,
    score: Var,
    gt: &EdgeLabelVector,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    let bce = balanced_bce_logits_on_tape(tape, logits, gt, cfg)?;
    let constraint = match (cfg.use_l1, cfg.use_l2) {
        (true, true) => {
            let l1 = constraint_l1_on_tape(tape, score);
            let l2 = constraint_l2_on_tape(tape, score);
            tape.add(l1, l2)
        }
        (true, false) => constraint_l1_on_tape(tape, score),
        (false, true) => constraint_l2_on_tape(tape, score),
        (false, false) => tape.leaf(Tensor::scalar(0.0)),
    };
    let total = tape.add(bce, tape.scale(constraint, cfg.alpha));
    Ok(LossBreakdown { total, bce, constraint })
}

/// Plain-value balanced cross-entropy.
pub fn balanced_bce(y: &EdgeLabelVector, gt: &EdgeLabelVector, cfg: &LossConfig) -> Result<f64> {
    let tape = Tape::new();
    let labels = tape.leaf(Tensor::column(&y.values));
    let loss = balanced_bce_on_tape(&tape, labels, gt, cfg)?;
    Ok(tape.value(loss).item())
}

/// Plain-value row/column-sum penalty.
pub fn constraint_l1(score: &ScoreMatrix) -> f64 {
    let tape = Tape::new();
    let s = tape.leaf(Tensor::new(score.size(), score.size(), score.values().to_vec()));
    let loss = constraint_l1_on_tape(&tape, s);
    tape.value(loss).item()
}

/// Plain-value row/column-norm penalty.
pub fn constraint_l2(score: &ScoreMatrix) -> f64 {
    let tape = Tape::new();
    let s = tape.leaf(Tensor::new(score.size(), score.size(), score.values().to_vec()));
    let loss = constraint_l2_on_tape(&tape, s);
    tape.value(loss).item()
}

/// Plain-value combined loss from probability-space labels.
pub fn combined_loss(
    y: &EdgeLabelVector,
    gt: &EdgeLabelVector,
    score: &ScoreMatrix,
    cfg: &LossConfig,
) -> Result<f64> {
    cfg.validate()?;
    let bce = balanced_bce(y, gt, cfg)?;
    let mut constraint = 0.0;
    if cfg.use_l1 {
        constraint += constraint_l1(score);
    }
    if cfg.use_l2 {
        constraint += constraint_l2(score);
    }
    Ok(bce + cfg.alpha * constraint)
}
