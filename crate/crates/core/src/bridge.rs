//! The bridge itself: drift `b`, reparameterized score `ŝ` and velocity `v`
//! networks, their regression losses, joint training, and the forward-SDE
//! sampler `a ← a + b_F·δt + noise`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleSet};
use crate::interpolant::{InterpolantSpec, TimePoint};
use crate::numeric::{Activation, AdamConfig, AdamState, Matrix, MlpGrads, MlpNet, ModelCheckpoint, Rng};
use crate::source::SourcePolicy;
use crate::train::{
    build_input, epoch_batches, mse_with_grad, time_feature_count, LossGuard, LrSchedule, NetConfig, OptimConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub b: f64,
    pub s: f64,
    pub v: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { b: 1.0, s: 1.0, v: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optim: OptimConfig,
    pub net: NetConfig,
    /// Range of the uniform training times; defaults to
    /// `[gamma_floor, 1 − gamma_floor]`.
    #[serde(default)]
    pub t_bounds: Option<[f64; 2]>,
    #[serde(default)]
    pub weights: LossWeights,
    /// Trailing fraction of the dataset held out to monitor `L_v`.
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
}

fn default_holdout() -> f64 {
    0.1
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optim: OptimConfig {
                epochs: 500,
                batch_size: 256,
                lr: LrSchedule::constant(1e-3),
                adam: AdamConfig::default(),
            },
            net: NetConfig {
                hidden: vec![64, 64],
                activation: Activation::Tanh,
                time_embed_width: 16,
            },
            t_bounds: None,
            weights: LossWeights::default(),
            holdout_fraction: default_holdout(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        let w = self.weights;
        if !(w.b >= 0.0 && w.s >= 0.0 && w.v >= 0.0) {
            return Err(Error::invalid("loss weights must be >= 0"));
        }
        if let Some([lo, hi]) = self.t_bounds {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::invalid(format!("t bounds must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]")));
            }
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::invalid("holdout fraction must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn t_range(&self, spec: &InterpolantSpec) -> (f64, f64) {
        match self.t_bounds {
            Some([lo, hi]) => (lo, hi),
            None => (spec.gamma_floor(), 1.0 - spec.gamma_floor()),
        }
    }
}

/// Three networks over `time_features(t) ⊕ a ⊕ x`, all emitting `R^{n_a}`.
/// The score is only ever exposed as `ŝ / γ̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub b_net: MlpNet,
    pub s_hat_net: MlpNet,
    pub v_net: MlpNet,
    pub spec: InterpolantSpec,
    pub obs_dim: usize,
    pub action_dim: usize,
}

/// Raw outputs of the three nets at a batch of states.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutputs {
    pub b: Matrix,
    pub s_hat: Matrix,
    pub v: Matrix,
}

impl FieldModel {
    pub fn new(spec: InterpolantSpec, action_dim: usize, obs_dim: usize, net: &NetConfig, rng: &mut Rng) -> Result<Self> {
        let inputs = time_feature_count(net.time_embed_width) + action_dim + obs_dim;
        let b_net = net.build(inputs, action_dim, &mut rng.split(0))?;
        let s_hat_net = net.build(inputs, action_dim, &mut rng.split(1))?;
        let v_net = net.build(inputs, action_dim, &mut rng.split(2))?;
        Self::from_nets(b_net, s_hat_net, v_net, spec, obs_dim, action_dim)
    }

    pub fn from_nets(
        b_net: MlpNet,
        s_hat_net: MlpNet,
        v_net: MlpNet,
        spec: InterpolantSpec,
        obs_dim: usize,
        action_dim: usize,
    ) -> Result<Self> {
        let width = b_net.time_embed_width();
        let inputs = time_feature_count(width) + action_dim + obs_dim;
        for net in [&b_net, &s_hat_net, &v_net] {
            if net.time_embed_width() != width || net.input_dim() != inputs {
                return Err(Error::Shape {
                    context: "field net input (time features + action + obs)",
                    expected: inputs,
                    actual: net.input_dim(),
                });
            }
            if net.output_dim() != action_dim {
                return Err(Error::Shape {
                    context: "field net output",
                    expected: action_dim,
                    actual: net.output_dim(),
                });
            }
        }
        Ok(Self {
            b_net,
            s_hat_net,
            v_net,
            spec,
            obs_dim,
            action_dim,
        })
    }

    pub fn time_embed_width(&self) -> usize {
        self.b_net.time_embed_width()
    }

    pub fn param_count(&self) -> usize {
        self.b_net.param_count() + self.s_hat_net.param_count() + self.v_net.param_count()
    }

    fn check_batch(&self, a: &Matrix, x: &Matrix) -> Result<()> {
        if a.cols() != self.action_dim {
            return Err(Error::Shape {
                context: "action dimension",
                expected: self.action_dim,
                actual: a.cols(),
            });
        }
        if x.cols() != self.obs_dim {
            return Err(Error::Shape {
                context: "observation dimension",
                expected: self.obs_dim,
                actual: x.cols(),
            });
        }
        if a.rows() != x.rows() {
            return Err(Error::SizeMismatch {
                left: a.rows(),
                right: x.rows(),
            });
        }
        Ok(())
    }

    fn input(&self, ts: &[f64], a: &Matrix, x: &Matrix) -> Matrix {
        build_input(Some(ts), self.time_embed_width(), &[a, x])
    }

    /// All three nets at common time `t` (already clamped by the caller).
    pub fn outputs(&self, t: f64, a: &Matrix, x: &Matrix) -> Result<FieldOutputs> {
        self.check_batch(a, x)?;
        TimePoint::new(t)?;
        let input = self.input(&vec![t; a.rows()], a, x);
        Ok(FieldOutputs {
            b: self.b_net.forward_batch(&input)?,
            s_hat: self.s_hat_net.forward_batch(&input)?,
            v: self.v_net.forward_batch(&input)?,
        })
    }

    /// Score estimate `s = ŝ / max(γ(t), gamma_floor)`.
    pub fn score(&self, t: f64, a: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let t = TimePoint::new(self.spec.clamp(t))?;
        let a = Matrix::from_vec(1, a.len(), a.to_vec())?;
        let x = Matrix::from_vec(1, x.len(), x.to_vec())?;
        self.check_batch(&a, &x)?;
        let input = self.input(&[t.get()], &a, &x);
        let g = self.spec.gamma_tilde(t);
        Ok(self.s_hat_net.forward_batch(&input)?.into_vec().into_iter().map(|v| v / g).collect())
    }

    pub fn to_checkpoint(&self, rng_seed: u64, config_hash: &str) -> Result<ModelCheckpoint> {
        let mut ck = ModelCheckpoint::new("bridger", rng_seed, config_hash);
        ck.insert_net("b_net", &self.b_net)?;
        ck.insert_net("s_hat_net", &self.s_hat_net)?;
        ck.insert_net("v_net", &self.v_net)?;
        ck.insert("spec", &self.spec)?;
        ck.insert("dims", &[self.obs_dim, self.action_dim])?;
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        ck.expect_method("bridger")?;
        let [obs_dim, action_dim]: [usize; 2] = ck.get("dims")?;
        Self::from_nets(
            ck.net("b_net")?,
            ck.net("s_hat_net")?,
            ck.net("v_net")?,
            ck.get("spec")?,
            obs_dim,
            action_dim,
        )
    }
}

/// A frozen draw of `(t, a0, a1, z, x)` for every item of a minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeBatch {
    pub t: Vec<f64>,
    pub a0: Matrix,
    pub a1: Matrix,
    pub z: Matrix,
    pub x: Matrix,
}

impl BridgeBatch {
    /// Pairs each `(x, a1)` with a fresh source draw `a0 ~ π_0(·|x)`
    /// (independent coupling), `t ~ U(t_range)` and `z ~ N(0, I)`.
    pub fn draw(a1: &Matrix, x: &Matrix, source: &SourcePolicy, t_range: (f64, f64), rng: &mut Rng) -> Result<Self> {
        if a1.rows() == 0 {
            return Err(Error::invalid("batch must be nonempty"));
        }
        if source.dim() != a1.cols() {
            return Err(Error::Shape {
                context: "source dimension",
                expected: a1.cols(),
                actual: source.dim(),
            });
        }
        let a0 = source.sample_for_obs(x, rng)?;
        let t = (0..a1.rows()).map(|_| rng.uniform_range(t_range.0, t_range.1)).collect();
        let z = Matrix::from_vec(a1.rows(), a1.cols(), rng.normal_vec(a1.rows() * a1.cols()))?;
        Ok(Self {
            t,
            a0,
            a1: a1.clone(),
            z,
            x: x.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Interpolated states and the three regression targets of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeTargets {
    pub a_t: Matrix,
    /// `∂_t I + γ̇ z`
    pub b: Matrix,
    /// `−z`
    pub s_hat: Matrix,
    /// `∂_t I`
    pub v: Matrix,
}

pub fn bridge_targets(spec: &InterpolantSpec, batch: &BridgeBatch) -> Result<BridgeTargets> {
    let (n, d) = (batch.len(), batch.a1.cols());
    for m in [&batch.a0, &batch.z] {
        if m.rows() != n || m.cols() != d {
            return Err(Error::Shape {
                context: "bridge batch",
                expected: d,
                actual: m.cols(),
            });
        }
    }
    let mut a_t = Matrix::zeros(n, d);
    let mut b = Matrix::zeros(n, d);
    let mut s_hat = Matrix::zeros(n, d);
    let mut v = Matrix::zeros(n, d);
    for i in 0..n {
        let t = TimePoint::new(batch.t[i])?;
        let c = spec.alpha_beta(t);
        let g = spec.gamma(t);
        let gd = spec.gamma_dot(t);
        let (p, q, z) = (batch.a0.row(i), batch.a1.row(i), batch.z.row(i));
        for j in 0..d {
            let dti = c.alpha_dot * p[j] + c.beta_dot * q[j];
            a_t.set(i, j, c.alpha * p[j] + c.beta * q[j] + g * z[j]);
            b.set(i, j, dti + gd * z[j]);
            s_hat.set(i, j, -z[j]);
            v.set(i, j, dti);
        }
    }
    Ok(BridgeTargets { a_t, b, s_hat, v })
}

/// Unweighted losses and gradients (each gradient scaled by its loss weight).
#[derive(Debug, Clone)]
pub struct BridgeLoss {
    pub l_b: f64,
    pub l_s: f64,
    pub l_v: f64,
    pub grad_b: MlpGrads,
    pub grad_s: MlpGrads,
    pub grad_v: MlpGrads,
}

impl BridgeLoss {
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.b * self.l_b + w.s * self.l_s + w.v * self.l_v
    }
}

/// `L_b = mean‖b − (∂_tI + γ̇z)‖²`, `L_ŝ = mean‖ŝ + z‖²`,
/// `L_v = mean‖v − ∂_tI‖²` on a frozen batch.
pub fn loss_batch(model: &FieldModel, batch: &BridgeBatch, weights: &LossWeights) -> Result<BridgeLoss> {
    model.check_batch(&batch.a1, &batch.x)?;
    let targets = bridge_targets(&model.spec, batch)?;
    let input = model.input(&batch.t, &targets.a_t, &batch.x);
    let mut out = Vec::with_capacity(3);
    for (net, target, w) in [
        (&model.b_net, &targets.b, weights.b),
        (&model.s_hat_net, &targets.s_hat, weights.s),
        (&model.v_net, &targets.v, weights.v),
    ] {
        let trace = net.forward_trace(&input)?;
        let (loss, upstream) = mse_with_grad(trace.output(), target, w);
        if !loss.is_finite() {
            return Err(non_finite_loss(&model.spec, batch, trace.output(), target));
        }
        let (grads, _) = net.backward(&trace, &upstream)?;
        out.push((loss, grads));
    }
    let (l_v, grad_v) = out.pop().expect("three nets");
    let (l_s, grad_s) = out.pop().expect("three nets");
    let (l_b, grad_b) = out.pop().expect("three nets");
    Ok(BridgeLoss {
        l_b,
        l_s,
        l_v,
        grad_b,
        grad_s,
        grad_v,
    })
}

fn non_finite_loss(spec: &InterpolantSpec, batch: &BridgeBatch, pred: &Matrix, target: &Matrix) -> Error {
    let row = (0..batch.len())
        .find(|&i| pred.row(i).iter().chain(target.row(i)).any(|v| !v.is_finite()))
        .unwrap_or(0);
    let t = batch.t[row];
    let gamma = TimePoint::new(t).map(|tp| spec.gamma(tp)).unwrap_or(f64::NAN);
    Error::NonFiniteLoss { t, gamma }
}

/// Per-epoch mean losses plus `L_v` on a frozen held-out batch before and
/// after training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub l_b: Vec<f64>,
    pub l_s: Vec<f64>,
    pub l_v: Vec<f64>,
    pub holdout_v_initial: Option<f64>,
    pub holdout_v_final: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: FieldModel,
    pub curves: LossCurves,
}

/// Joint gradient descent on the three nets, one Adam step per net per batch.
pub fn train(
    dataset: &Dataset,
    source: &SourcePolicy,
    spec: &InterpolantSpec,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<TrainOutput> {
    config.validate()?;
    source.validate()?;
    let t_range = config.t_range(spec);
    let (train_set, holdout) = dataset.split_holdout(config.holdout_fraction)?;
    let mut model = FieldModel::new(*spec, dataset.action_dim(), dataset.obs_dim(), &config.net, &mut rng.split(0))?;
    let holdout_batch = match &holdout {
        Some(h) => Some(BridgeBatch::draw(h.actions(), h.obs(), source, t_range, &mut rng.split(1))?),
        None => None,
    };
    let holdout_v = |m: &FieldModel| -> Result<Option<f64>> {
        holdout_batch
            .as_ref()
            .map(|b| loss_batch(m, b, &config.weights).map(|l| l.l_v))
            .transpose()
    };
    let mut curves = LossCurves {
        holdout_v_initial: holdout_v(&model)?,
        ..LossCurves::default()
    };

    let mut order_rng = rng.split(2);
    let mut draw_rng = rng.split(3);
    let mut adam_b = AdamState::for_net(&model.b_net, config.optim.adam);
    let mut adam_s = AdamState::for_net(&model.s_hat_net, config.optim.adam);
    let mut adam_v = AdamState::for_net(&model.v_net, config.optim.adam);
    let mut guard = LossGuard::default();
    for epoch in 0..config.optim.epochs {
        let lr = config.optim.lr.at(epoch);
        let batches = epoch_batches(train_set.len(), config.optim.batch_size, &mut order_rng);
        let (mut sb, mut ss, mut sv) = (0.0, 0.0, 0.0);
        for idx in &batches {
            let a1 = train_set.actions().select_rows(idx);
            let x = train_set.obs().select_rows(idx);
            let batch = BridgeBatch::draw(&a1, &x, source, t_range, &mut draw_rng)?;
            let loss = loss_batch(&model, &batch, &config.weights)?;
            guard.check_batch(epoch, loss.weighted_total(&config.weights))?;
            adam_b.step_net(&mut model.b_net, &loss.grad_b, lr)?;
            adam_s.step_net(&mut model.s_hat_net, &loss.grad_s, lr)?;
            adam_v.step_net(&mut model.v_net, &loss.grad_v, lr)?;
            sb += loss.l_b;
            ss += loss.l_s;
            sv += loss.l_v;
        }
        let nb = batches.len() as f64;
        let (mb, ms, mv) = (sb / nb, ss / nb, sv / nb);
        let w = config.weights;
        guard.check(epoch, w.b * mb + w.s * ms + w.v * mv)?;
        curves.l_b.push(mb);
        curves.l_s.push(ms);
        curves.l_v.push(mv);
    }
    curves.holdout_v_final = holdout_v(&model)?;
    Ok(TrainOutput { model, curves })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityMode {
    /// `b_F = b + ε·ŝ/γ̃`
    Direct,
    /// `b_F = v + (ε/γ̃ − γ̇)·ŝ`
    #[default]
    Decomposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// `sqrt(2ε(t_k)·δt)·z`
    #[default]
    EulerMaruyama,
    /// `sqrt(2ε(t_k))·z`, without the `sqrt(δt)` factor.
    Unscaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub steps: usize,
    #[serde(default)]
    pub velocity_mode: VelocityMode,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    /// Times are clamped into this range before any field evaluation;
    /// defaults to `[gamma_floor, 1 − gamma_floor]`.
    #[serde(default)]
    pub t_clamp: Option<[f64; 2]>,
}

impl SamplerConfig {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            velocity_mode: VelocityMode::default(),
            noise_mode: NoiseMode::default(),
            t_clamp: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("diffusion steps K must be >= 1"));
        }
        if let Some([lo, hi]) = self.t_clamp {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::invalid(format!("t clamp must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn clamp(&self, spec: &InterpolantSpec, t: f64) -> f64 {
        let t = spec.clamp(t);
        match self.t_clamp {
            Some([lo, hi]) => t.clamp(lo, hi),
            None => t,
        }
    }
}

/// Combines raw net outputs into the forward drift at (clamped) time `t`.
pub fn combine_drift(spec: &InterpolantSpec, t: f64, out: &FieldOutputs, mode: VelocityMode) -> Result<Matrix> {
    let tp = TimePoint::new(t)?;
    let g = spec.gamma_tilde(tp);
    let eps = spec.epsilon(tp);
    let (base, coef) = match mode {
        VelocityMode::Direct => (&out.b, eps / g),
        VelocityMode::Decomposed => (&out.v, eps / g - spec.gamma_dot(tp)),
    };
    let mut drift = base.clone();
    for (d, s) in drift.as_mut_slice().iter_mut().zip(out.s_hat.as_slice()) {
        *d += coef * s;
    }
    if !drift.is_finite() {
        return Err(Error::NonFiniteDrift {
            t,
            gamma: g,
            epsilon: eps,
        });
    }
    Ok(drift)
}

/// Forward drift `b_F(t, a, x)` for a batch of states sharing one time.
pub fn drift_batch(model: &FieldModel, t: f64, a: &Matrix, x: &Matrix, mode: VelocityMode) -> Result<Matrix> {
    let t = model.spec.clamp(t);
    combine_drift(&model.spec, t, &model.outputs(t, a, x)?, mode)
}

/// Forward drift at a single state.
pub fn drift_bf(model: &FieldModel, t: f64, a: &[f64], x: &[f64], mode: VelocityMode) -> Result<Vec<f64>> {
    let a = Matrix::from_vec(1, a.len(), a.to_vec())?;
    let x = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(drift_batch(model, t, &a, &x, mode)?.into_vec())
}

fn integrate(
    model: &FieldModel,
    x: &Matrix,
    a0: &Matrix,
    config: &SamplerConfig,
    rng: &mut Rng,
    mut path: Option<&mut Vec<Matrix>>,
) -> Result<Matrix> {
    config.validate()?;
    model.check_batch(a0, x)?;
    let k_steps = config.steps;
    let dt = 1.0 / k_steps as f64;
    let mut a = a0.clone();
    if let Some(p) = path.as_deref_mut() {
        p.push(a.clone());
    }
    for k in 0..k_steps {
        let t = config.clamp(&model.spec, k as f64 * dt);
        let drift = combine_drift(&model.spec, t, &model.outputs(t, &a, x)?, config.velocity_mode)?;
        let eps = model.spec.epsilon(TimePoint::new(t)?);
        let scale = match config.noise_mode {
            NoiseMode::EulerMaruyama => (2.0 * eps * dt).sqrt(),
            NoiseMode::Unscaled => (2.0 * eps).sqrt(),
        };
        for (v, d) in a.as_mut_slice().iter_mut().zip(drift.as_slice()) {
            *v += d * dt;
        }
        if scale > 0.0 {
            for v in a.as_mut_slice() {
                *v += scale * rng.normal();
            }
        }
        if !a.is_finite() {
            return Err(Error::NonFiniteState { step: k });
        }
        if let Some(p) = path.as_deref_mut() {
            p.push(a.clone());
        }
    }
    Ok(a)
}

/// Runs `K` Euler steps on `t_k = k/K` from each row of `a0`.
pub fn sample_batch(model: &FieldModel, x: &Matrix, a0: &Matrix, config: &SamplerConfig, rng: &mut Rng) -> Result<Matrix> {
    integrate(model, x, a0, config, rng, None)
}

/// Like [`sample_batch`], also returning the `K + 1` intermediate states.
pub fn sample_batch_path(
    model: &FieldModel,
    x: &Matrix,
    a0: &Matrix,
    config: &SamplerConfig,
    rng: &mut Rng,
) -> Result<Vec<Matrix>> {
    let mut path = Vec::with_capacity(config.steps + 1);
    integrate(model, x, a0, config, rng, Some(&mut path))?;
    Ok(path)
}

pub fn sample(model: &FieldModel, x: &[f64], a0: &[f64], config: &SamplerConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let am = Matrix::from_vec(1, a0.len(), a0.to_vec())?;
    Ok(sample_batch(model, &xm, &am, config, rng)?.into_vec())
}

pub fn sample_path(model: &FieldModel, x: &[f64], a0: &[f64], config: &SamplerConfig, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let am = Matrix::from_vec(1, a0.len(), a0.to_vec())?;
    Ok(sample_batch_path(model, &xm, &am, config, rng)?
        .into_iter()
        .map(Matrix::into_vec)
        .collect())
}

/// `n` actions at observation `x`, each started from a fresh source draw.
pub fn generate(
    model: &FieldModel,
    source: &SourcePolicy,
    x: &[f64],
    n: usize,
    config: &SamplerConfig,
    rng: &mut Rng,
) -> Result<SampleSet> {
    let a0 = source.sample(x, rng, n)?.into_matrix();
    let mut obs = Vec::with_capacity(n * x.len());
    for _ in 0..n {
        obs.extend_from_slice(x);
    }
    let obs = Matrix::from_vec(n, x.len(), obs)?;
    SampleSet::new(sample_batch(model, &obs, &a0, config, rng)?)
}
