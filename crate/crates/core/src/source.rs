//! Source policies `π_0(a|x)`: sample-only distributions that seed the
//! bridge. No operation here ever needs a density.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleSet};
use crate::numeric::{Activation, AdamConfig, AdamState, Matrix, MlpGrads, MlpNet, ModelCheckpoint, Rng};
use crate::train::{epoch_batches, mse_with_grad, LossGuard, LrSchedule, NetConfig, OptimConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourcePolicy {
    /// Isotropic Gaussian `N(mean, scale²·I)`.
    Gaussian { mean: Vec<f64>, scale: f64 },
    /// Finite Gaussian mixture with full covariances.
    Mixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
    },
    /// Noisy ring (2D) or sphere shell (other dims) around `center`. In 2D
    /// the angle is uniform on `[start_angle, start_angle + angular_spread)`;
    /// elsewhere directions are uniform on the sphere.
    Ring {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "full_turn")]
        angular_spread: f64,
        #[serde(default)]
        start_angle: f64,
        radial_noise: f64,
    },
    /// Decoder of a trained conditional VAE.
    Cvae(Box<CvaeModel>),
}

fn full_turn() -> f64 {
    TAU
}

impl SourcePolicy {
    pub fn gaussian(mean: Vec<f64>, scale: f64) -> Result<Self> {
        let p = SourcePolicy::Gaussian { mean, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn standard_normal(dim: usize) -> Self {
        SourcePolicy::Gaussian {
            mean: vec![0.0; dim],
            scale: 1.0,
        }
    }

    pub fn mixture(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let p = SourcePolicy::Mixture {
            weights,
            means,
            covariances,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn ring(center: Vec<f64>, radius: f64, radial_noise: f64) -> Result<Self> {
        let p = SourcePolicy::Ring {
            center,
            radius,
            angular_spread: TAU,
            start_angle: 0.0,
            radial_noise,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        match self {
            SourcePolicy::Gaussian { mean, .. } => mean.len(),
            SourcePolicy::Mixture { means, .. } => means.first().map_or(0, |m| m.len()),
            SourcePolicy::Ring { center, .. } => center.len(),
            SourcePolicy::Cvae(m) => m.action_dim,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SourcePolicy::Gaussian { .. } => "gaussian",
            SourcePolicy::Mixture { .. } => "mixture",
            SourcePolicy::Ring { .. } => "ring",
            SourcePolicy::Cvae(_) => "cvae",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourcePolicy::Gaussian { mean, scale } => {
                if mean.is_empty() {
                    return Err(Error::invalid("gaussian source needs a mean"));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(format!("gaussian scale must be > 0, got {scale}")));
                }
            }
            SourcePolicy::Mixture {
                weights,
                means,
                covariances,
            } => {
                if weights.is_empty() || weights.len() != means.len() || means.len() != covariances.len() {
                    return Err(Error::invalid("mixture needs matching weights, means and covariances"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::invalid("mixture weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
                }
                let dim = means[0].len();
                if dim == 0 || means.iter().any(|m| m.len() != dim) {
                    return Err(Error::invalid("mixture means must share a positive dimension"));
                }
                for c in covariances {
                    cholesky(c, dim)?;
                }
            }
            SourcePolicy::Ring {
                center,
                radius,
                angular_spread,
                radial_noise,
                ..
            } => {
                if center.is_empty() {
                    return Err(Error::invalid("ring source needs a center"));
                }
                if !(*radius > 0.0) {
                    return Err(Error::invalid(format!("ring radius must be > 0, got {radius}")));
                }
                if !(*radial_noise >= 0.0) || !(*angular_spread > 0.0) {
                    return Err(Error::invalid("ring noise must be >= 0 and angular spread > 0"));
                }
            }
            SourcePolicy::Cvae(m) => {
                if !m.trained {
                    return Err(Error::SourceNotTrained);
                }
            }
        }
        Ok(())
    }

    /// `n` i.i.d. draws given observation `x`.
    pub fn sample(&self, x: &[f64], rng: &mut Rng, n: usize) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::invalid("sample count must be >= 1"));
        }
        let mut obs = Vec::with_capacity(n * x.len());
        for _ in 0..n {
            obs.extend_from_slice(x);
        }
        let obs = Matrix::from_vec(n, x.len(), obs)?;
        SampleSet::new(self.sample_for_obs(&obs, rng)?)
    }

    /// One draw per observation row.
    pub fn sample_for_obs(&self, obs: &Matrix, rng: &mut Rng) -> Result<Matrix> {
        self.validate()?;
        let n = obs.rows();
        let dim = self.dim();
        let mut out = Matrix::zeros(n, dim);
        match self {
            SourcePolicy::Gaussian { mean, scale } => {
                for i in 0..n {
                    for (v, m) in out.row_mut(i).iter_mut().zip(mean) {
                        *v = m + scale * rng.normal();
                    }
                }
            }
            SourcePolicy::Mixture {
                weights,
                means,
                covariances,
            } => {
                let chols = covariances
                    .iter()
                    .map(|c| cholesky(c, dim))
                    .collect::<Result<Vec<_>>>()?;
                for i in 0..n {
                    let k = pick_component(weights, rng.uniform());
                    let z = rng.normal_vec(dim);
                    let shifted = chols[k].matvec(&z)?;
                    for ((v, m), s) in out.row_mut(i).iter_mut().zip(&means[k]).zip(shifted) {
                        *v = m + s;
                    }
                }
            }
            SourcePolicy::Ring {
                center,
                radius,
                angular_spread,
                start_angle,
                radial_noise,
            } => {
                for i in 0..n {
                    let dir = if dim == 2 {
                        let theta = start_angle + angular_spread * rng.uniform();
                        vec![theta.cos(), theta.sin()]
                    } else {
                        random_direction(dim, rng)
                    };
                    let r = radius + radial_noise * rng.normal();
                    for ((v, c), d) in out.row_mut(i).iter_mut().zip(center).zip(dir) {
                        *v = c + r * d;
                    }
                }
            }
            SourcePolicy::Cvae(model) => return model.sample_for_obs(obs, rng),
        }
        Ok(out)
    }
}

fn pick_component(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // rounding can leave u just above the final cumulative sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn random_direction(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v = rng.normal_vec(dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Lower Cholesky factor; fails unless `cov` is symmetric positive definite.
fn cholesky(cov: &[Vec<f64>], dim: usize) -> Result<Matrix> {
    if cov.len() != dim || cov.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid(format!("covariance must be {dim}x{dim}")));
    }
    for i in 0..dim {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * (1.0 + cov[i][j].abs()) {
                return Err(Error::invalid("covariance must be symmetric"));
            }
        }
    }
    let mut l = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::invalid("covariance must be positive definite"));
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvaeConfig {
    pub latent_dim: usize,
    pub net: NetConfig,
    pub kl_weight: f64,
    /// Weight on `‖a − â‖²`; `1/(2σ²)` for a Gaussian decoder of std σ.
    /// Zero gives the KL-only objective.
    pub recon_weight: f64,
    pub optim: OptimConfig,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            net: NetConfig {
                hidden: vec![64, 64],
                activation: Activation::Tanh,
                time_embed_width: 0,
            },
            kl_weight: 1.0,
            recon_weight: 50.0,
            optim: OptimConfig {
                epochs: 2000,
                batch_size: 256,
                lr: LrSchedule::constant(1e-3),
                adam: AdamConfig::default(),
            },
        }
    }
}

/// Conditional VAE: encoder `q(z|a, x)` emitting `(μ, log σ²)` and a
/// deterministic decoder mean `p(a|z, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvaeModel {
    pub encoder: MlpNet,
    pub decoder: MlpNet,
    pub latent_dim: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub trained: bool,
}

/// ELBO terms averaged over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvaeLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone)]
pub struct CvaeTraining {
    pub model: CvaeModel,
    pub epoch_losses: Vec<f64>,
}

impl CvaeModel {
    pub fn new(action_dim: usize, obs_dim: usize, config: &CvaeConfig, rng: &mut Rng) -> Result<Self> {
        if config.latent_dim == 0 {
            return Err(Error::invalid("latent dimension must be >= 1"));
        }
        let encoder = config.net.build(action_dim + obs_dim, 2 * config.latent_dim, rng)?;
        let decoder = config.net.build(config.latent_dim + obs_dim, action_dim, rng)?;
        Self::from_nets(encoder, decoder, config.latent_dim, obs_dim, action_dim)
    }

    pub fn from_nets(encoder: MlpNet, decoder: MlpNet, latent_dim: usize, obs_dim: usize, action_dim: usize) -> Result<Self> {
        if encoder.input_dim() != action_dim + obs_dim || encoder.output_dim() != 2 * latent_dim {
            return Err(Error::Shape {
                context: "cvae encoder widths",
                expected: action_dim + obs_dim,
                actual: encoder.input_dim(),
            });
        }
        if decoder.input_dim() != latent_dim + obs_dim || decoder.output_dim() != action_dim {
            return Err(Error::Shape {
                context: "cvae decoder input (latent + obs)",
                expected: latent_dim + obs_dim,
                actual: decoder.input_dim(),
            });
        }
        Ok(Self {
            encoder,
            decoder,
            latent_dim,
            obs_dim,
            action_dim,
            trained: false,
        })
    }

    fn check_obs(&self, obs: &Matrix) -> Result<()> {
        if obs.cols() != self.obs_dim {
            return Err(Error::Shape {
                context: "cvae observation",
                expected: self.obs_dim,
                actual: obs.cols(),
            });
        }
        Ok(())
    }

    pub fn decode(&self, latents: &Matrix, obs: &Matrix) -> Result<Matrix> {
        self.check_obs(obs)?;
        self.decoder.forward_batch(&latents.hstack(obs)?)
    }

    /// ELBO loss with frozen reparameterization noise `noise` (`B × latent`)
    /// and the gradients of both networks.
    pub fn loss_batch(
        &self,
        actions: &Matrix,
        obs: &Matrix,
        noise: &Matrix,
        kl_weight: f64,
        recon_weight: f64,
    ) -> Result<(CvaeLoss, MlpGrads, MlpGrads)> {
        self.check_obs(obs)?;
        let b = actions.rows();
        let l = self.latent_dim;
        let enc_trace = self.encoder.forward_trace(&actions.hstack(obs)?)?;
        let enc_out = enc_trace.output();
        let mut latents = Matrix::zeros(b, l);
        for i in 0..b {
            let row = enc_out.row(i);
            for j in 0..l {
                let sigma = (0.5 * row[l + j]).exp();
                latents.set(i, j, row[j] + sigma * noise.get(i, j));
            }
        }
        let dec_trace = self.decoder.forward_trace(&latents.hstack(obs)?)?;
        let (recon, d_out) = mse_with_grad(dec_trace.output(), actions, recon_weight);
        let (g_dec, d_dec_in) = self.decoder.backward(&dec_trace, &d_out)?;

        let mut kl = 0.0;
        let mut d_enc = Matrix::zeros(b, 2 * l);
        let inv_b = 1.0 / b as f64;
        for i in 0..b {
            let row = enc_out.row(i);
            for j in 0..l {
                let (mu, lv) = (row[j], row[l + j]);
                let var = lv.exp();
                kl += 0.5 * (mu * mu + var - 1.0 - lv);
                let dz = d_dec_in.get(i, j);
                d_enc.set(i, j, dz + kl_weight * mu * inv_b);
                let d_lv = dz * noise.get(i, j) * 0.5 * var.sqrt() + kl_weight * 0.5 * (var - 1.0) * inv_b;
                d_enc.set(i, l + j, d_lv);
            }
        }
        kl *= inv_b;
        let (g_enc, _) = self.encoder.backward(&enc_trace, &d_enc)?;
        let loss = CvaeLoss {
            total: recon_weight * recon + kl_weight * kl,
            recon,
            kl,
        };
        Ok((loss, g_enc, g_dec))
    }

    pub fn sample_for_obs(&self, obs: &Matrix, rng: &mut Rng) -> Result<Matrix> {
        if !self.trained {
            return Err(Error::SourceNotTrained);
        }
        self.check_obs(obs)?;
        let z = Matrix::from_vec(obs.rows(), self.latent_dim, rng.normal_vec(obs.rows() * self.latent_dim))?;
        self.decode(&z, obs)
    }

    /// `n` draws `z ~ N(0, I)` pushed through the decoder at observation `x`.
    pub fn sample(&self, x: &[f64], rng: &mut Rng, n: usize) -> Result<SampleSet> {
        if x.len() != self.obs_dim {
            return Err(Error::Shape {
                context: "cvae observation",
                expected: self.obs_dim,
                actual: x.len(),
            });
        }
        SourcePolicy::Cvae(Box::new(self.clone())).sample(x, rng, n)
    }

    pub fn to_checkpoint(&self, rng_seed: u64, config_hash: &str) -> Result<ModelCheckpoint> {
        let mut ck = ModelCheckpoint::new("cvae", rng_seed, config_hash);
        ck.insert_net("encoder", &self.encoder)?;
        ck.insert_net("decoder", &self.decoder)?;
        ck.insert(
            "cvae",
            &serde_json::json!({
                "latent_dim": self.latent_dim,
                "obs_dim": self.obs_dim,
                "action_dim": self.action_dim,
                "trained": self.trained,
            }),
        )?;
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        ck.expect_method("cvae")?;
        let meta: serde_json::Value = ck.get("cvae")?;
        let field = |k: &str| -> Result<usize> {
            meta[k]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Checkpoint(format!("cvae section lacks `{k}`")))
        };
        let mut m = Self::from_nets(
            ck.net("encoder")?,
            ck.net("decoder")?,
            field("latent_dim")?,
            field("obs_dim")?,
            field("action_dim")?,
        )?;
        m.trained = meta["trained"].as_bool().unwrap_or(false);
        Ok(m)
    }
}

/// Fits a CVAE by minimizing `recon_weight·‖a − â‖² + kl_weight·KL`.
pub fn train_cvae(dataset: &Dataset, config: &CvaeConfig, rng: &mut Rng) -> Result<CvaeTraining> {
    config.optim.validate()?;
    let mut init_rng = rng.split(0);
    let mut batch_rng = rng.split(1);
    let mut noise_rng = rng.split(2);
    let mut model = CvaeModel::new(dataset.action_dim(), dataset.obs_dim(), config, &mut init_rng)?;
    let mut adam_enc = AdamState::for_net(&model.encoder, config.optim.adam);
    let mut adam_dec = AdamState::for_net(&model.decoder, config.optim.adam);
    let mut guard = LossGuard::default();
    let mut epoch_losses = Vec::with_capacity(config.optim.epochs);
    for epoch in 0..config.optim.epochs {
        let lr = config.optim.lr.at(epoch);
        let mut total = 0.0;
        let batches = epoch_batches(dataset.len(), config.optim.batch_size, &mut batch_rng);
        for idx in &batches {
            let actions = dataset.actions().select_rows(idx);
            let obs = dataset.obs().select_rows(idx);
            let noise = Matrix::from_vec(idx.len(), config.latent_dim, noise_rng.normal_vec(idx.len() * config.latent_dim))?;
            let (loss, g_enc, g_dec) = model.loss_batch(&actions, &obs, &noise, config.kl_weight, config.recon_weight)?;
            guard.check_batch(epoch, loss.total)?;
            adam_enc.step_net(&mut model.encoder, &g_enc, lr)?;
            adam_dec.step_net(&mut model.decoder, &g_dec, lr)?;
            total += loss.total;
        }
        let mean = total / batches.len() as f64;
        guard.check(epoch, mean)?;
        epoch_losses.push(mean);
    }
    model.trained = true;
    Ok(CvaeTraining { model, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Layer;

    #[test]
    fn gaussian_mean_converges() {
        let p = SourcePolicy::gaussian(vec![0.0, 0.0], 1.0).unwrap();
        let s = p.sample(&[], &mut Rng::new(0), 100_000).unwrap();
        for j in 0..2 {
            let m = s.column(j).iter().sum::<f64>() / s.n() as f64;
            assert!(m.abs() < 0.02, "{m}");
        }
    }

    #[test]
    fn ring_radius_matches_parameters() {
        let p = SourcePolicy::ring(vec![0.0, 0.0], 2.0, 0.05).unwrap();
        let s = p.sample(&[], &mut Rng::new(1), 10_000).unwrap();
        let mean_r = s.iter().map(|r| (r[0] * r[0] + r[1] * r[1]).sqrt()).sum::<f64>() / s.n() as f64;
        assert!((1.9..=2.1).contains(&mean_r), "{mean_r}");
    }

    #[test]
    fn ring_in_three_dims_is_a_shell() {
        let p = SourcePolicy::ring(vec![1.0, 1.0, 1.0], 0.5, 0.0).unwrap();
        let s = p.sample(&[], &mut Rng::new(1), 100).unwrap();
        for r in s.iter() {
            let d: f64 = r.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>().sqrt();
            assert!((d - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_frequencies_match_weights() {
        let w = vec![0.2, 0.5, 0.3];
        let means = vec![vec![-10.0], vec![0.0], vec![10.0]];
        let covs = vec![vec![vec![0.01]]; 3];
        let p = SourcePolicy::mixture(w.clone(), means, covs).unwrap();
        let n = 10_000;
        let s = p.sample(&[], &mut Rng::new(5), n).unwrap();
        let mut counts = [0usize; 3];
        for r in s.iter() {
            let k = if r[0] < -5.0 { 0 } else if r[0] > 5.0 { 2 } else { 1 };
            counts[k] += 1;
        }
        for (c, p) in counts.iter().zip(&w) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(SourcePolicy::gaussian(vec![0.0], 0.0).is_err());
        assert!(SourcePolicy::ring(vec![0.0, 0.0], -1.0, 0.1).is_err());
        assert!(SourcePolicy::mixture(vec![0.5, 0.4], vec![vec![0.0], vec![1.0]], vec![vec![vec![1.0]]; 2]).is_err());
        let not_pd = vec![vec![vec![1.0, 2.0], vec![2.0, 1.0]]];
        assert!(SourcePolicy::mixture(vec![1.0], vec![vec![0.0, 0.0]], not_pd).is_err());
    }

    #[test]
    fn untrained_cvae_refuses_to_sample() {
        let m = CvaeModel::new(2, 0, &CvaeConfig::default(), &mut Rng::new(0)).unwrap();
        let p = SourcePolicy::Cvae(Box::new(m));
        assert!(matches!(p.sample(&[], &mut Rng::new(0), 3), Err(Error::SourceNotTrained)));
    }

    #[test]
    fn zero_latent_linear_decoder_is_affine_in_x() {
        let enc = MlpNet::zeros(&[3, 4], Activation::Tanh).unwrap();
        let dec = MlpNet::from_layers(
            vec![Layer {
                weight: Matrix::from_rows(&[[5.0, 5.0, 2.0], [5.0, 5.0, -1.0]]).unwrap(),
                bias: vec![0.5, 0.25],
            }],
            Activation::Tanh,
        )
        .unwrap();
        let m = CvaeModel::from_nets(enc, dec, 2, 1, 2).unwrap();
        let out = m.decode(&Matrix::zeros(1, 2), &Matrix::from_rows(&[[3.0]]).unwrap()).unwrap();
        assert_eq!(out.row(0), &[6.5, -2.75]);
    }

    #[test]
    fn cvae_gradient_matches_finite_differences() {
        let cfg = CvaeConfig {
            net: NetConfig {
                hidden: vec![6],
                activation: Activation::Tanh,
                time_embed_width: 0,
            },
            ..CvaeConfig::default()
        };
        let mut rng = Rng::new(3);
        let m = CvaeModel::new(2, 1, &cfg, &mut rng).unwrap();
        let actions = Matrix::from_rows(&[[0.5, -1.0], [1.5, 0.2], [-0.3, 0.9]]).unwrap();
        let obs = Matrix::from_rows(&[[1.0], [0.0], [-1.0]]).unwrap();
        let noise = Matrix::from_rows(&[[0.3, -0.2], [1.1, 0.4], [-0.7, 0.05]]).unwrap();
        let (kl_w, rec_w) = (0.7, 3.0);
        let (_, g_enc, g_dec) = m.loss_batch(&actions, &obs, &noise, kl_w, rec_w).unwrap();
        let loss = |mm: &CvaeModel| mm.loss_batch(&actions, &obs, &noise, kl_w, rec_w).unwrap().0.total;
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (which, grads) in [(0, &g_enc), (1, &g_dec)] {
            let analytic: Vec<f64> = grads.blocks().into_iter().flatten().copied().collect();
            let mut probe = m.clone();
            let mut k = 0;
            let n_blocks = if which == 0 { probe.encoder.blocks().len() } else { probe.decoder.blocks().len() };
            for bi in 0..n_blocks {
                let len = if which == 0 { probe.encoder.blocks()[bi].1.len() } else { probe.decoder.blocks()[bi].1.len() };
                for j in 0..len {
                    let set = |p: &mut CvaeModel, v: f64| {
                        let net = if which == 0 { &mut p.encoder } else { &mut p.decoder };
                        net.blocks_mut()[bi].1[j] = v;
                    };
                    let orig = if which == 0 { m.encoder.blocks()[bi].1[j] } else { m.decoder.blocks()[bi].1[j] };
                    set(&mut probe, orig + h);
                    let lp = loss(&probe);
                    set(&mut probe, orig - h);
                    let lm = loss(&probe);
                    set(&mut probe, orig);
                    let num = (lp - lm) / (2.0 * h);
                    let a = analytic[k];
                    worst = worst.max((a - num).abs() / a.abs().max(num.abs()).max(1e-6));
                    k += 1;
                }
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = CvaeModel::new(2, 1, &CvaeConfig::default(), &mut Rng::new(0)).unwrap();
        m.trained = true;
        let ck = m.to_checkpoint(0, "x").unwrap();
        let text = serde_json::to_string(&ck).unwrap();
        let back = CvaeModel::from_checkpoint(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
