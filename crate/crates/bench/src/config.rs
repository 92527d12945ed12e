//! Experiment configuration: a single TOML file naming the task, the source
//! policies, interpolants, methods, step counts and seeds of a sweep.

use std::path::Path;

use bridger::baselines::{DdpmConfig, ResidualConfig};
use bridger::bridge::{NoiseMode, SamplerConfig, TrainConfig, VelocityMode};
use bridger::interpolant::InterpolantSpec;
use bridger::metrics::LipschitzProbe;
use bridger::source::{CvaeConfig, SourcePolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};
use crate::tasks::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bridger,
    Ddim,
    Residual,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bridger => "bridger",
            Method::Ddim => "ddim",
            Method::Residual => "residual",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bridger" => Ok(Method::Bridger),
            "ddim" => Ok(Method::Ddim),
            "residual" => Ok(Method::Residual),
            other => Err(BenchError::config(format!("unknown method `{other}`"))),
        }
    }
}

/// Source policy as written in a config. `cvae` is trained per seed on the
/// task's demonstrations before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceSpec {
    Gaussian {
        mean: Vec<f64>,
        scale: f64,
    },
    Mixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
    },
    Ring {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        angular_spread: Option<f64>,
        #[serde(default)]
        start_angle: f64,
        #[serde(default)]
        radial_noise: f64,
    },
    Cvae {
        #[serde(default)]
        cvae: CvaeConfig,
    },
}

impl SourceSpec {
    /// The sample-only policy, or `None` for sources that must be trained.
    pub fn fixed_policy(&self) -> Result<Option<SourcePolicy>> {
        let p = match self {
            SourceSpec::Gaussian { mean, scale } => SourcePolicy::gaussian(mean.clone(), *scale)?,
            SourceSpec::Mixture {
                weights,
                means,
                covariances,
            } => SourcePolicy::mixture(weights.clone(), means.clone(), covariances.clone())?,
            SourceSpec::Ring {
                center,
                radius,
                angular_spread,
                start_angle,
                radial_noise,
            } => {
                let p = SourcePolicy::Ring {
                    center: center.clone(),
                    radius: *radius,
                    angular_spread: angular_spread.unwrap_or(std::f64::consts::TAU),
                    start_angle: *start_angle,
                    radial_noise: *radial_noise,
                };
                p.validate()?;
                p
            }
            SourceSpec::Cvae { .. } => return Ok(None),
        };
        Ok(Some(p))
    }

    fn dim(&self) -> Option<usize> {
        match self {
            SourceSpec::Gaussian { mean, .. } => Some(mean.len()),
            SourceSpec::Mixture { means, .. } => means.first().map(Vec::len),
            SourceSpec::Ring { center, .. } => Some(center.len()),
            SourceSpec::Cvae { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub name: String,
    #[serde(flatten)]
    pub spec: SourceSpec,
}

/// Sampler settings shared by every bridger cell; the step count comes from
/// the sweep's `steps` list.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub velocity_mode: VelocityMode,
    pub noise_mode: NoiseMode,
    pub t_clamp: Option<[f64; 2]>,
}

impl SamplerSettings {
    pub fn with_steps(&self, steps: usize) -> SamplerConfig {
        SamplerConfig {
            velocity_mode: self.velocity_mode,
            noise_mode: self.noise_mode,
            t_clamp: self.t_clamp,
            ..SamplerConfig::new(steps)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Generated and ground-truth samples per EMD evaluation; EMD is exact
    /// on these.
    pub samples: usize,
    /// Independent evaluation batches averaged into each EMD value. Mode
    /// counts in a single batch fluctuate binomially, which dominates EMD when
    /// modes are far apart.
    pub repeats: usize,
    pub lipschitz: LipschitzProbe,
    /// Scatter panels per SVG figure, including source and final state.
    pub panels: usize,
    pub svg: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: 512,
            repeats: 1,
            lipschitz: LipschitzProbe::default(),
            panels: 5,
            svg: true,
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Bridger]
}

fn default_interpolants() -> Vec<InterpolantSpec> {
    let mut out = Vec::new();
    for d in [0.03, 0.3] {
        for c in [1.0, 3.0] {
            out.push(InterpolantSpec::linear(d, c).expect("grid values are valid"));
        }
    }
    out
}

/// `0` asks for rows measured on raw source samples.
fn default_steps() -> Vec<usize> {
    vec![0, 5, 20]
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub sources: Vec<SourceEntry>,
    #[serde(default = "default_interpolants")]
    pub interpolants: Vec<InterpolantSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_steps")]
    pub steps: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub bridger: TrainConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub ddim: DdpmConfig,
    #[serde(default)]
    pub residual: ResidualConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        self.task.validate()?;
        if self.sources.is_empty() && self.methods.iter().any(|m| *m != Method::Ddim) {
            return bad("`sources` must be nonempty".into());
        }
        if self.interpolants.is_empty() && self.methods.contains(&Method::Bridger) {
            return bad("`interpolants` must be nonempty".into());
        }
        if self.methods.is_empty() || self.steps.is_empty() || self.seeds.is_empty() {
            return bad("`methods`, `steps` and `seeds` must be nonempty".into());
        }
        let mut sorted = self.steps.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.steps.len() {
            return bad("`steps` must not repeat a value".into());
        }
        if self.methods.contains(&Method::Ddim) {
            if let Some(&k) = self.steps.iter().find(|&&k| k > self.ddim.k_train) {
                return bad(format!("DDIM cannot take {k} steps with k_train = {}", self.ddim.k_train));
            }
        }
        let na = self.task.action_dim();
        let mut names: Vec<&str> = Vec::new();
        for s in &self.sources {
            if s.name.is_empty() || s.name.contains([',', '/', '\\', '"']) {
                return bad(format!("source name `{}` must be nonempty without , / \\ or quotes", s.name));
            }
            if names.contains(&s.name.as_str()) {
                return bad(format!("duplicate source name `{}`", s.name));
            }
            names.push(&s.name);
            if let Some(d) = s.spec.dim() {
                if d != na {
                    return bad(format!("source `{}` has dimension {d}, task actions have {na}", s.name));
                }
            }
            s.spec.fixed_policy()?;
        }
        if self.eval.samples < 2 || self.eval.samples > bridger::metrics::EMD_MAX_EXACT {
            return bad(format!(
                "eval.samples must be in [2, {}]",
                bridger::metrics::EMD_MAX_EXACT
            ));
        }
        if self.eval.repeats == 0 {
            return bad("eval.repeats must be >= 1".into());
        }
        if self.eval.panels < 2 {
            return bad("eval.panels must be >= 2".into());
        }
        self.bridger.validate()?;
        self.bridger.optim.validate()?;
        self.ddim.optim.validate()?;
        self.residual.optim.validate()?;
        for &k in self.steps.iter().filter(|&&k| k > 0) {
            self.sampler.with_steps(k).validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form: every field after defaults are
    /// applied, in declaration order, floats in shortest round-trip form.
    /// Formatting, comments and key order in the TOML do not change it.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn source(&self, name: &str) -> Result<&SourceEntry> {
        self.sources
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| BenchError::config(format!("no source named `{name}`")))
    }
}

/// Short label used in CSV rows and file names, e.g. `linear-d0.3-c1`.
pub fn interpolant_label(spec: &InterpolantSpec) -> String {
    format!("{}-d{}-c{}", spec.kind_name(), spec.gamma_scale(), spec.epsilon_scale())
}
