//! Optimizer settings and epoch bookkeeping shared by every trainer.

use serde::{Deserialize, Serialize};

use crate::numeric::{time_embed_into, Activation, AdamConfig, Matrix, MlpNet, Rng};
use crate::{Error, Result};

/// Losses above this abort training as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Step decay: `initial · decay^(epoch / interval)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    #[serde(default = "one")]
    pub decay: f64,
    #[serde(default = "usize_max")]
    pub interval: usize,
}

fn one() -> f64 {
    1.0
}

fn usize_max() -> usize {
    usize::MAX
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            initial: lr,
            decay: 1.0,
            interval: usize::MAX,
        }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        let k = epoch / self.interval.max(1);
        self.initial * self.decay.powi(k.min(i32::MAX as usize) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(self.lr.initial > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        Ok(())
    }
}

/// Hidden widths and activation of a network; input/output widths come
/// from the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub time_embed_width: usize,
}

impl NetConfig {
    pub fn build(&self, inputs: usize, outputs: usize, rng: &mut Rng) -> Result<MlpNet> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(inputs);
        widths.extend_from_slice(&self.hidden);
        widths.push(outputs);
        Ok(MlpNet::new(&widths, self.activation, rng)?.with_time_embed_width(self.time_embed_width))
    }
}

/// Number of time features for an embedding width; width 0 means the raw
/// scalar `t`.
pub(crate) fn time_feature_count(width: usize) -> usize {
    width.max(1)
}

/// Row-wise concatenation `[time_features(t_i), blocks...]`. Times must lie
/// in `[0, 1]`; `ts = None` omits the time features.
pub(crate) fn build_input(ts: Option<&[f64]>, width: usize, blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.first().map_or(0, |b| b.rows());
    let te = if ts.is_some() { time_feature_count(width) } else { 0 };
    let cols = te + blocks.iter().map(|b| b.cols()).sum::<usize>();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        if let Some(ts) = ts {
            if width == 0 {
                data.push(ts[i]);
            } else {
                time_embed_into(ts[i], width, &mut data);
            }
        }
        for b in blocks {
            data.extend_from_slice(b.row(i));
        }
    }
    Matrix::from_vec(rows, cols, data).expect("row lengths are consistent by construction")
}

/// Mean over rows of `‖pred − target‖²`, and its gradient with respect to
/// `pred` scaled by `weight`.
pub(crate) fn mse_with_grad(pred: &Matrix, target: &Matrix, weight: f64) -> (f64, Matrix) {
    let n = pred.rows() as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let r = p - t;
        loss += r * r;
        *g = weight * 2.0 * r / n;
    }
    (loss / n, grad)
}

/// Shuffled index batches covering `0..n` once.
pub(crate) fn epoch_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

/// Tracks the last finite epoch and turns NaN or runaway losses into errors.
#[derive(Debug, Default)]
pub(crate) struct LossGuard {
    last_finite: Option<usize>,
}

impl LossGuard {
    pub fn check(&mut self, epoch: usize, loss: f64) -> Result<()> {
        if loss.is_nan() {
            return Err(Error::NanLoss {
                epoch,
                last_finite_epoch: self.last_finite,
            });
        }
        if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
            return Err(Error::Diverged { epoch, loss });
        }
        self.last_finite = Some(epoch);
        Ok(())
    }

    /// Like `check` but does not mark the epoch finite; used for the
    /// individual batches of an epoch still in progress.
    pub fn check_batch(&self, epoch: usize, loss: f64) -> Result<()> {
        if loss.is_nan() {
            return Err(Error::NanLoss {
                epoch,
                last_finite_epoch: self.last_finite,
            });
        }
        if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
            return Err(Error::Diverged { epoch, loss });
        }
        Ok(())
    }
}
