//! Comparison methods on the same tasks: a noise-prediction diffusion model
//! sampled with deterministic DDIM, and a residual policy that regresses
//! `a1 − a0` on a source draw.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleSet};
use crate::numeric::{Activation, AdamConfig, AdamState, Matrix, MlpGrads, MlpNet, ModelCheckpoint, Rng};
use crate::source::SourcePolicy;
use crate::train::{
    build_input, epoch_batches, mse_with_grad, time_feature_count, LossGuard, LrSchedule, NetConfig, OptimConfig,
};
use crate::{Error, Result};

/// Per-step `β_k`, `α_k = 1 − β_k` and `ᾱ_k = Π_{j≤k} α_j`, `k = 0..K_train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct DdpmSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    betas: Vec<f64>,
}

impl TryFrom<ScheduleRepr> for DdpmSchedule {
    type Error = Error;
    fn try_from(r: ScheduleRepr) -> Result<Self> {
        Self::from_betas(r.betas)
    }
}

impl From<DdpmSchedule> for ScheduleRepr {
    fn from(s: DdpmSchedule) -> Self {
        ScheduleRepr { betas: s.betas }
    }
}

impl DdpmSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::invalid("every beta must lie in (0, 1)"));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    /// `β_k` evenly spaced from `beta_start` to `beta_end`.
    pub fn linear(beta_start: f64, beta_end: f64, k_train: usize) -> Result<Self> {
        if k_train == 0 {
            return Err(Error::invalid("K_train must be >= 1"));
        }
        let betas = (0..k_train)
            .map(|k| {
                if k_train == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * k as f64 / (k_train - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    pub fn k_train(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Network time input for step `k`: `(k + 1) / K_train`.
    pub fn time_of(&self, k: usize) -> f64 {
        (k + 1) as f64 / self.k_train() as f64
    }

    /// `K_infer` training steps spaced evenly and ending at `K_train − 1`,
    /// in increasing order.
    pub fn subsequence(&self, k_infer: usize) -> Result<Vec<usize>> {
        let kt = self.k_train();
        if k_infer == 0 || k_infer > kt {
            return Err(Error::invalid(format!("K_infer must be in 1..={kt}, got {k_infer}")));
        }
        Ok((1..=k_infer)
            .map(|i| ((i * kt) as f64 / k_infer as f64).round() as usize - 1)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpmConfig {
    pub k_train: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub net: NetConfig,
    pub optim: OptimConfig,
}

impl Default for DdpmConfig {
    fn default() -> Self {
        Self {
            k_train: 100,
            beta_start: 1e-4,
            beta_end: 0.1,
            net: NetConfig {
                hidden: vec![118, 118],
                activation: Activation::Tanh,
                time_embed_width: 16,
            },
            optim: OptimConfig {
                epochs: 500,
                batch_size: 256,
                lr: LrSchedule::constant(1e-3),
                adam: AdamConfig::default(),
            },
        }
    }
}

/// Noise predictor `g(time(t_k) ⊕ a_k ⊕ x)` plus its schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpmModel {
    pub g_net: MlpNet,
    pub schedule: DdpmSchedule,
    pub obs_dim: usize,
    pub action_dim: usize,
}

#[derive(Debug, Clone)]
pub struct DdpmTraining {
    pub model: DdpmModel,
    pub epoch_losses: Vec<f64>,
}

impl DdpmModel {
    pub fn new(config: &DdpmConfig, action_dim: usize, obs_dim: usize, rng: &mut Rng) -> Result<Self> {
        let schedule = DdpmSchedule::linear(config.beta_start, config.beta_end, config.k_train)?;
        let inputs = time_feature_count(config.net.time_embed_width) + action_dim + obs_dim;
        let g_net = config.net.build(inputs, action_dim, rng)?;
        Self::from_parts(g_net, schedule, obs_dim, action_dim)
    }

    pub fn from_parts(g_net: MlpNet, schedule: DdpmSchedule, obs_dim: usize, action_dim: usize) -> Result<Self> {
        let inputs = time_feature_count(g_net.time_embed_width()) + action_dim + obs_dim;
        if g_net.input_dim() != inputs || g_net.output_dim() != action_dim {
            return Err(Error::Shape {
                context: "noise net input (time features + action + obs)",
                expected: inputs,
                actual: g_net.input_dim(),
            });
        }
        Ok(Self {
            g_net,
            schedule,
            obs_dim,
            action_dim,
        })
    }

    fn input(&self, ks: &[usize], a: &Matrix, x: &Matrix) -> Matrix {
        let ts: Vec<f64> = ks.iter().map(|&k| self.schedule.time_of(k)).collect();
        build_input(Some(&ts), self.g_net.time_embed_width(), &[a, x])
    }

    /// Noise-prediction loss `mean‖z − g(√ᾱ_k a1 + √(1−ᾱ_k) z, k)‖²` on
    /// frozen `(k, z)`, with its gradient.
    pub fn loss_batch(&self, a1: &Matrix, x: &Matrix, ks: &[usize], z: &Matrix) -> Result<(f64, MlpGrads)> {
        check_rows(a1, x)?;
        if ks.len() != a1.rows() || z.rows() != a1.rows() || z.cols() != a1.cols() {
            return Err(Error::SizeMismatch {
                left: a1.rows(),
                right: ks.len(),
            });
        }
        if let Some(&k) = ks.iter().find(|&&k| k >= self.schedule.k_train()) {
            return Err(Error::invalid(format!("step {k} outside the schedule")));
        }
        let mut noisy = Matrix::zeros(a1.rows(), a1.cols());
        for (i, &k) in ks.iter().enumerate() {
            let ab = self.schedule.alpha_bars[k];
            let (s1, s0) = (ab.sqrt(), (1.0 - ab).sqrt());
            for ((v, a), n) in noisy.row_mut(i).iter_mut().zip(a1.row(i)).zip(z.row(i)) {
                *v = s1 * a + s0 * n;
            }
        }
        let trace = self.g_net.forward_trace(&self.input(ks, &noisy, x))?;
        let (loss, up) = mse_with_grad(trace.output(), z, 1.0);
        let (grads, _) = self.g_net.backward(&trace, &up)?;
        Ok((loss, grads))
    }

    /// Deterministic DDIM from the given terminal noise `a_T`, one row per
    /// observation row.
    pub fn ddim_from_noise(&self, x: &Matrix, a_t: &Matrix, k_infer: usize) -> Result<Matrix> {
        check_rows(a_t, x)?;
        if a_t.cols() != self.action_dim || x.cols() != self.obs_dim {
            return Err(Error::Shape {
                context: "ddim state",
                expected: self.action_dim,
                actual: a_t.cols(),
            });
        }
        let steps = self.schedule.subsequence(k_infer)?;
        let n = a_t.rows();
        let mut a = a_t.clone();
        for i in (0..steps.len()).rev() {
            let k = steps[i];
            let ab = self.schedule.alpha_bars[k];
            let ab_prev = if i == 0 { 1.0 } else { self.schedule.alpha_bars[steps[i - 1]] };
            let g = self.g_net.forward_batch(&self.input(&vec![k; n], &a, x))?;
            for (v, gv) in a.as_mut_slice().iter_mut().zip(g.as_slice()) {
                let x0 = (*v - (1.0 - ab).sqrt() * gv) / ab.sqrt();
                *v = ab_prev.sqrt() * x0 + (1.0 - ab_prev).sqrt() * gv;
            }
            if !a.is_finite() {
                return Err(Error::NonFiniteState { step: steps.len() - 1 - i });
            }
        }
        Ok(a)
    }

    pub fn ddim_sample_batch(&self, x: &Matrix, k_infer: usize, rng: &mut Rng) -> Result<Matrix> {
        let noise = Matrix::from_vec(x.rows(), self.action_dim, rng.normal_vec(x.rows() * self.action_dim))?;
        self.ddim_from_noise(x, &noise, k_infer)
    }

    pub fn ddim_sample(&self, x: &[f64], k_infer: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.ddim_sample_batch(&xm, k_infer, rng)?.into_vec())
    }

    pub fn generate(&self, x: &[f64], n: usize, k_infer: usize, rng: &mut Rng) -> Result<SampleSet> {
        SampleSet::new(self.ddim_sample_batch(&repeat_rows(x, n)?, k_infer, rng)?)
    }

    pub fn to_checkpoint(&self, rng_seed: u64, config_hash: &str) -> Result<ModelCheckpoint> {
        let mut ck = ModelCheckpoint::new("ddpm", rng_seed, config_hash);
        ck.insert_net("g_net", &self.g_net)?;
        ck.insert("schedule", &self.schedule)?;
        ck.insert("dims", &[self.obs_dim, self.action_dim])?;
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        ck.expect_method("ddpm")?;
        let [obs_dim, action_dim]: [usize; 2] = ck.get("dims")?;
        Self::from_parts(ck.net("g_net")?, ck.get("schedule")?, obs_dim, action_dim)
    }
}

pub fn ddpm_train(dataset: &Dataset, config: &DdpmConfig, rng: &mut Rng) -> Result<DdpmTraining> {
    config.optim.validate()?;
    let mut model = DdpmModel::new(config, dataset.action_dim(), dataset.obs_dim(), &mut rng.split(0))?;
    let mut order_rng = rng.split(1);
    let mut draw_rng = rng.split(2);
    let mut adam = AdamState::for_net(&model.g_net, config.optim.adam);
    let mut guard = LossGuard::default();
    let mut epoch_losses = Vec::with_capacity(config.optim.epochs);
    let kt = model.schedule.k_train();
    for epoch in 0..config.optim.epochs {
        let lr = config.optim.lr.at(epoch);
        let batches = epoch_batches(dataset.len(), config.optim.batch_size, &mut order_rng);
        let mut total = 0.0;
        for idx in &batches {
            let a1 = dataset.actions().select_rows(idx);
            let x = dataset.obs().select_rows(idx);
            let ks: Vec<usize> = (0..idx.len()).map(|_| draw_rng.below(kt)).collect();
            let z = Matrix::from_vec(idx.len(), a1.cols(), draw_rng.normal_vec(idx.len() * a1.cols()))?;
            let (loss, grads) = model.loss_batch(&a1, &x, &ks, &z)?;
            guard.check_batch(epoch, loss)?;
            adam.step_net(&mut model.g_net, &grads, lr)?;
            total += loss;
        }
        let mean = total / batches.len() as f64;
        guard.check(epoch, mean)?;
        epoch_losses.push(mean);
    }
    Ok(DdpmTraining { model, epoch_losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidualConfig {
    pub net: NetConfig,
    pub optim: OptimConfig,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            net: NetConfig {
                hidden: vec![126, 126],
                activation: Activation::Tanh,
                time_embed_width: 0,
            },
            optim: OptimConfig {
                epochs: 500,
                batch_size: 256,
                lr: LrSchedule::constant(1e-3),
                adam: AdamConfig::default(),
            },
        }
    }
}

/// `a = a0 + r(a0 ⊕ x)` with `a0` from `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualModel {
    pub r_net: MlpNet,
    pub source: SourcePolicy,
    pub obs_dim: usize,
    pub action_dim: usize,
}

#[derive(Debug, Clone)]
pub struct ResidualTraining {
    pub model: ResidualModel,
    pub epoch_losses: Vec<f64>,
}

impl ResidualModel {
    pub fn new(source: SourcePolicy, config: &ResidualConfig, action_dim: usize, obs_dim: usize, rng: &mut Rng) -> Result<Self> {
        let r_net = config.net.build(action_dim + obs_dim, action_dim, rng)?;
        Self::from_parts(r_net, source, obs_dim, action_dim)
    }

    pub fn from_parts(r_net: MlpNet, source: SourcePolicy, obs_dim: usize, action_dim: usize) -> Result<Self> {
        if r_net.input_dim() != action_dim + obs_dim || r_net.output_dim() != action_dim {
            return Err(Error::Shape {
                context: "residual net input (action + obs)",
                expected: action_dim + obs_dim,
                actual: r_net.input_dim(),
            });
        }
        if source.dim() != action_dim {
            return Err(Error::Shape {
                context: "residual source dimension",
                expected: action_dim,
                actual: source.dim(),
            });
        }
        Ok(Self {
            r_net,
            source,
            obs_dim,
            action_dim,
        })
    }

    /// `mean‖r(a0 ⊕ x) − (a1 − a0)‖²` and its gradient.
    pub fn loss_batch(&self, a0: &Matrix, a1: &Matrix, x: &Matrix) -> Result<(f64, MlpGrads)> {
        check_rows(a0, x)?;
        check_rows(a1, x)?;
        let mut target = a1.clone();
        for (t, p) in target.as_mut_slice().iter_mut().zip(a0.as_slice()) {
            *t -= p;
        }
        let trace = self.r_net.forward_trace(&a0.hstack(x)?)?;
        let (loss, up) = mse_with_grad(trace.output(), &target, 1.0);
        let (grads, _) = self.r_net.backward(&trace, &up)?;
        Ok((loss, grads))
    }

    /// Adds the predicted residual to given source draws.
    pub fn apply(&self, a0: &Matrix, x: &Matrix) -> Result<Matrix> {
        check_rows(a0, x)?;
        let mut out = self.r_net.forward_batch(&a0.hstack(x)?)?;
        for (o, p) in out.as_mut_slice().iter_mut().zip(a0.as_slice()) {
            *o += p;
        }
        Ok(out)
    }

    pub fn sample_batch(&self, x: &Matrix, rng: &mut Rng) -> Result<Matrix> {
        let a0 = self.source.sample_for_obs(x, rng)?;
        self.apply(&a0, x)
    }

    pub fn sample(&self, x: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.sample_batch(&xm, rng)?.into_vec())
    }

    pub fn generate(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<SampleSet> {
        SampleSet::new(self.sample_batch(&repeat_rows(x, n)?, rng)?)
    }

    pub fn to_checkpoint(&self, rng_seed: u64, config_hash: &str) -> Result<ModelCheckpoint> {
        let mut ck = ModelCheckpoint::new("residual", rng_seed, config_hash);
        ck.insert_net("r_net", &self.r_net)?;
        ck.insert("source", &self.source)?;
        ck.insert("dims", &[self.obs_dim, self.action_dim])?;
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        ck.expect_method("residual")?;
        let [obs_dim, action_dim]: [usize; 2] = ck.get("dims")?;
        Self::from_parts(ck.net("r_net")?, ck.get("source")?, obs_dim, action_dim)
    }
}

/// MSE regression of `a1 − a0` with a fresh source draw per item and epoch.
pub fn residual_train(dataset: &Dataset, source: &SourcePolicy, config: &ResidualConfig, rng: &mut Rng) -> Result<ResidualTraining> {
    config.optim.validate()?;
    source.validate()?;
    let mut model = ResidualModel::new(source.clone(), config, dataset.action_dim(), dataset.obs_dim(), &mut rng.split(0))?;
    let mut order_rng = rng.split(1);
    let mut draw_rng = rng.split(2);
    let mut adam = AdamState::for_net(&model.r_net, config.optim.adam);
    let mut guard = LossGuard::default();
    let mut epoch_losses = Vec::with_capacity(config.optim.epochs);
    for epoch in 0..config.optim.epochs {
        let lr = config.optim.lr.at(epoch);
        let batches = epoch_batches(dataset.len(), config.optim.batch_size, &mut order_rng);
        let mut total = 0.0;
        for idx in &batches {
            let a1 = dataset.actions().select_rows(idx);
            let x = dataset.obs().select_rows(idx);
            let a0 = source.sample_for_obs(&x, &mut draw_rng)?;
            let (loss, grads) = model.loss_batch(&a0, &a1, &x)?;
            guard.check_batch(epoch, loss)?;
            adam.step_net(&mut model.r_net, &grads, lr)?;
            total += loss;
        }
        let mean = total / batches.len() as f64;
        guard.check(epoch, mean)?;
        epoch_losses.push(mean);
    }
    Ok(ResidualTraining { model, epoch_losses })
}

fn check_rows(a: &Matrix, x: &Matrix) -> Result<()> {
    if a.rows() != x.rows() {
        return Err(Error::SizeMismatch {
            left: a.rows(),
            right: x.rows(),
        });
    }
    Ok(())
}

fn repeat_rows(x: &[f64], n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    let mut data = Vec::with_capacity(n * x.len());
    for _ in 0..n {
        data.extend_from_slice(x);
    }
    Matrix::from_vec(n, x.len(), data)
}
