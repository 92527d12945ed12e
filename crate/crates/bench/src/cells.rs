//! Training and sampling of a single sweep cell: one method, one source,
//! one interpolant, one seed.

use std::path::Path;

use bridger::baselines::{ddpm_train, residual_train, DdpmModel, ResidualModel};
use bridger::bridge::{self, FieldModel, SamplerConfig};
use bridger::data::Dataset;
use bridger::interpolant::InterpolantSpec;
use bridger::numeric::{Matrix, ModelCheckpoint, Rng};
use bridger::source::{train_cvae, SourcePolicy};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Method, SourceEntry, SourceSpec};
use crate::error::{BenchError, Result};

/// Label of the fixed `N(0, I)` noise that DDIM starts from.
pub const DDIM_SOURCE: &str = "standard-normal";

/// Stable 64-bit stream id for a label, independent of config order.
pub fn stream_id(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

// Stream layout under `Rng::new(seed)`: 0 training data, 1 evaluation data,
// 2 model cells, 3 learned sources, 4 raw source draws.
pub fn cell_rng(seed: u64, method: Method, source: &str, interpolant: &str) -> Rng {
    Rng::new(seed)
        .split(2)
        .split(stream_id(&format!("{}/{source}/{interpolant}", method.name())))
}

fn learned_source_rng(seed: u64, source: &str) -> Rng {
    Rng::new(seed).split(3).split(stream_id(source))
}

pub fn raw_source_rng(seed: u64, source: &str) -> Rng {
    Rng::new(seed).split(4).split(stream_id(source))
}

/// Sample-only policy for a config source, training the CVAE if needed.
pub fn resolve_source(entry: &SourceEntry, seed: u64, train_set: &Dataset) -> Result<SourcePolicy> {
    if let Some(p) = entry.spec.fixed_policy()? {
        return Ok(p);
    }
    let SourceSpec::Cvae { cvae } = &entry.spec else {
        unreachable!("only cvae sources need training");
    };
    let trained = train_cvae(train_set, cvae, &mut learned_source_rng(seed, &entry.name))?;
    Ok(SourcePolicy::Cvae(Box::new(trained.model)))
}

#[derive(Debug, Clone)]
pub enum Trained {
    Bridger { model: FieldModel, source: SourcePolicy },
    Ddim(DdpmModel),
    Residual(ResidualModel),
}

impl Trained {
    pub fn method(&self) -> Method {
        match self {
            Trained::Bridger { .. } => Method::Bridger,
            Trained::Ddim(_) => Method::Ddim,
            Trained::Residual(_) => Method::Residual,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Trained::Bridger { model, .. } => model.obs_dim,
            Trained::Ddim(m) => m.obs_dim,
            Trained::Residual(m) => m.obs_dim,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            Trained::Bridger { model, .. } => model.action_dim,
            Trained::Ddim(m) => m.action_dim,
            Trained::Residual(m) => m.action_dim,
        }
    }

    /// Generated actions, one per row of `obs`, after `steps` sampler steps.
    /// Bridger also returns the `steps + 1` intermediate states.
    pub fn generate(&self, obs: &Matrix, steps: usize, sampler: &SamplerConfig, rng: &mut Rng) -> Result<(Matrix, Option<Vec<Matrix>>)> {
        Ok(match self {
            Trained::Bridger { model, source } => {
                let a0 = source.sample_for_obs(obs, rng)?;
                let cfg = SamplerConfig { steps, ..*sampler };
                let path = bridge::sample_batch_path(model, obs, &a0, &cfg, rng)?;
                (path.last().expect("path has K + 1 states").clone(), Some(path))
            }
            Trained::Ddim(m) => (m.ddim_sample_batch(obs, steps, rng)?, None),
            Trained::Residual(m) => (m.sample_batch(obs, rng)?, None),
        })
    }

    pub fn to_checkpoint(&self, seed: u64, config_hash: &str) -> Result<ModelCheckpoint> {
        Ok(match self {
            Trained::Bridger { model, source } => {
                let mut ck = model.to_checkpoint(seed, config_hash)?;
                ck.insert("source", source)?;
                ck
            }
            Trained::Ddim(m) => m.to_checkpoint(seed, config_hash)?,
            Trained::Residual(m) => m.to_checkpoint(seed, config_hash)?,
        })
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        Ok(match ck.method.as_str() {
            "bridger" => Trained::Bridger {
                model: FieldModel::from_checkpoint(ck)?,
                source: ck.get("source")?,
            },
            "ddpm" => Trained::Ddim(DdpmModel::from_checkpoint(ck)?),
            "residual" => Trained::Residual(ResidualModel::from_checkpoint(ck)?),
            other => return Err(BenchError::config(format!("unsupported checkpoint method `{other}`"))),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&ModelCheckpoint::load(path)?)
    }
}

/// Trains one cell. `source` is ignored by DDIM and `spec` by everything but
/// bridger.
pub fn train_cell(
    config: &ExperimentConfig,
    method: Method,
    source: &SourcePolicy,
    spec: Option<&InterpolantSpec>,
    train_set: &Dataset,
    rng: &mut Rng,
) -> Result<Trained> {
    Ok(match method {
        Method::Bridger => {
            let spec = spec.ok_or_else(|| BenchError::config("bridger cells need an interpolant"))?;
            let out = bridge::train(train_set, source, spec, &config.bridger, rng)?;
            Trained::Bridger {
                model: out.model,
                source: source.clone(),
            }
        }
        Method::Ddim => Trained::Ddim(ddpm_train(train_set, &config.ddim, rng)?.model),
        Method::Residual => Trained::Residual(residual_train(train_set, source, &config.residual, rng)?.model),
    })
}
