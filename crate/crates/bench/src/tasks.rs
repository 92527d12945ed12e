//! Synthetic target distributions for the benchmark.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use bridger::data::Dataset;
use bridger::numeric::{Matrix, Rng};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationMode {
    /// Unconditional: `x` is zero-dimensional.
    #[default]
    None,
    /// `x` is a one-hot label of the generating mode.
    Label,
}

fn default_std() -> f64 {
    0.1
}

fn default_noise() -> f64 {
    0.05
}

fn default_one() -> f64 {
    1.0
}

fn default_cells() -> usize {
    4
}

fn default_length() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    /// Isotropic components `N(center, std²·I)` with optional weights.
    GaussianMixture {
        centers: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default = "default_std")]
        std: f64,
    },
    /// Noisy circle in the plane.
    Ring {
        #[serde(default)]
        center: Option<[f64; 2]>,
        radius: f64,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// Two interleaved half circles, scaled and shifted.
    TwoMoons {
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default = "default_one")]
        scale: f64,
        #[serde(default)]
        offset: Option<[f64; 2]>,
    },
    /// Uniform on the dark squares of a `cells × cells` board centered at
    /// the origin; square `(i, j)` is dark when `i + j` is even.
    Checker {
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default = "default_one")]
        cell_size: f64,
    },
    /// Smooth 1D trajectories of `length` points, one per action:
    /// `a_j = A·sin(2π·j/(length − 1) + φ)`, `A ~ U(0.5, 1.5)`, `φ ~ U(0, 2π)`.
    #[serde(rename = "trajectory-1d")]
    Trajectory1d {
        #[serde(default = "default_length")]
        length: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub observation: ObservationMode,
    pub generator: Generator,
}

impl Generator {
    pub fn action_dim(&self) -> usize {
        match self {
            Generator::GaussianMixture { centers, .. } => centers.first().map_or(0, Vec::len),
            Generator::Ring { .. } | Generator::TwoMoons { .. } | Generator::Checker { .. } => 2,
            Generator::Trajectory1d { length } => *length,
        }
    }

    /// Number of labels in label mode, if the generator has discrete modes.
    pub fn label_count(&self) -> Option<usize> {
        match self {
            Generator::GaussianMixture { centers, .. } => Some(centers.len()),
            Generator::TwoMoons { .. } => Some(2),
            _ => None,
        }
    }

    /// Centers of the dark checker squares.
    pub fn checker_cells(cells: usize, cell_size: f64) -> Vec<[f64; 2]> {
        let half = cells as f64 * cell_size / 2.0;
        let mut out = Vec::new();
        for i in 0..cells {
            for j in 0..cells {
                if (i + j) % 2 == 0 {
                    out.push([
                        -half + (i as f64 + 0.5) * cell_size,
                        -half + (j as f64 + 0.5) * cell_size,
                    ]);
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::config(m.to_string()));
        match self {
            Generator::GaussianMixture { centers, weights, std } => {
                if centers.is_empty() || centers[0].is_empty() || centers.iter().any(|c| c.len() != centers[0].len()) {
                    return bad("gaussian-mixture needs centers of one positive dimension");
                }
                if !(*std > 0.0) {
                    return bad("gaussian-mixture std must be > 0");
                }
                if let Some(w) = weights {
                    let total: f64 = w.iter().sum();
                    if w.len() != centers.len() || w.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                        return bad("gaussian-mixture weights must be nonnegative, one per center, summing to 1");
                    }
                }
            }
            Generator::Ring { radius, noise, .. } => {
                if !(*radius > 0.0) || !(*noise >= 0.0) {
                    return bad("ring radius must be > 0 and noise >= 0");
                }
            }
            Generator::TwoMoons { noise, scale, .. } => {
                if !(*noise >= 0.0) || !(*scale > 0.0) {
                    return bad("two-moons noise must be >= 0 and scale > 0");
                }
            }
            Generator::Checker { cells, cell_size } => {
                if *cells < 2 || !(*cell_size > 0.0) {
                    return bad("checker needs at least 2 cells per side and a positive cell size");
                }
            }
            Generator::Trajectory1d { length } => {
                if *length < 3 {
                    return bad("trajectory-1d length must be >= 3");
                }
            }
        }
        Ok(())
    }

    /// One draw: the mode label (if any) and the action.
    fn draw(&self, rng: &mut Rng) -> (usize, Vec<f64>) {
        match self {
            Generator::GaussianMixture { centers, weights, std } => {
                let k = match weights {
                    Some(w) => {
                        let u = rng.uniform();
                        let mut acc = 0.0;
                        w.iter()
                            .position(|wi| {
                                acc += wi;
                                u < acc
                            })
                            .unwrap_or(w.len() - 1)
                    }
                    None => rng.below(centers.len()),
                };
                (k, centers[k].iter().map(|c| c + std * rng.normal()).collect())
            }
            Generator::Ring { center, radius, noise } => {
                let c = center.unwrap_or([0.0, 0.0]);
                let theta = TAU * rng.uniform();
                let r = radius + noise * rng.normal();
                (0, vec![c[0] + r * theta.cos(), c[1] + r * theta.sin()])
            }
            Generator::TwoMoons { noise, scale, offset } => {
                let o = offset.unwrap_or([0.0, 0.0]);
                let k = rng.below(2);
                let theta = PI * rng.uniform();
                let (x, y) = if k == 0 {
                    (theta.cos(), theta.sin())
                } else {
                    (1.0 - theta.cos(), 0.5 - theta.sin())
                };
                let a = vec![
                    o[0] + scale * (x - 0.5 + noise * rng.normal()),
                    o[1] + scale * (y - 0.25 + noise * rng.normal()),
                ];
                (k, a)
            }
            Generator::Checker { cells, cell_size } => {
                let dark = Self::checker_cells(*cells, *cell_size);
                let c = dark[rng.below(dark.len())];
                let a = vec![
                    c[0] + cell_size * (rng.uniform() - 0.5),
                    c[1] + cell_size * (rng.uniform() - 0.5),
                ];
                (0, a)
            }
            Generator::Trajectory1d { length } => {
                let amp = rng.uniform_range(0.5, 1.5);
                let phase = TAU * rng.uniform();
                let a = (0..*length)
                    .map(|j| amp * (TAU * j as f64 / (*length - 1) as f64 + phase).sin())
                    .collect();
                (0, a)
            }
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(BenchError::config(format!("task `{}` needs n >= 100, got {}", self.name, self.n)));
        }
        self.generator.validate()?;
        if self.observation == ObservationMode::Label && self.generator.label_count().is_none() {
            return Err(BenchError::config(format!(
                "task `{}`: label observations need a generator with discrete modes",
                self.name
            )));
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        self.generator.action_dim()
    }

    pub fn obs_dim(&self) -> usize {
        match self.observation {
            ObservationMode::None => 0,
            ObservationMode::Label => self.generator.label_count().unwrap_or(0),
        }
    }

    /// `n` demonstration pairs drawn from `rng`.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        self.validate()?;
        let (na, nx) = (self.action_dim(), self.obs_dim());
        let mut obs = Matrix::zeros(n, nx);
        let mut actions = Vec::with_capacity(n * na);
        for i in 0..n {
            let (label, a) = self.generator.draw(rng);
            if nx > 0 {
                obs.set(i, label, 1.0);
            }
            actions.extend(a);
        }
        Ok(Dataset::new(obs, Matrix::from_vec(n, na, actions)?)?)
    }

    /// Training set for `seed`.
    pub fn training_set(&self, seed: u64) -> Result<Dataset> {
        self.sample(self.n, &mut Rng::new(seed).split(0))
    }

    /// Independent ground-truth draws for evaluation.
    pub fn evaluation_set(&self, seed: u64, n: usize) -> Result<Dataset> {
        self.sample(n, &mut Rng::new(seed).split(1))
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    x: &'a [f64],
    a: &'a [f64],
}

/// One `{"x": [...], "a": [...]}` object per line.
pub fn write_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for i in 0..dataset.len() {
        serde_json::to_writer(
            &mut buf,
            &JsonRow {
                x: dataset.obs().row(i),
                a: dataset.actions().row(i),
            },
        )?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    f.write_all(&buf).map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

#[derive(Deserialize)]
struct OwnedRow {
    x: Vec<f64>,
    a: Vec<f64>,
}

pub fn read_jsonl(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut obs = Vec::new();
    let mut acts = Vec::new();
    let (mut nx, mut na, mut n) = (None, None, 0);
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: OwnedRow = serde_json::from_str(line)?;
        if *nx.get_or_insert(row.x.len()) != row.x.len() || *na.get_or_insert(row.a.len()) != row.a.len() {
            return Err(BenchError::config(format!("{}: rows have inconsistent widths", path.display())));
        }
        obs.extend(row.x);
        acts.extend(row.a);
        n += 1;
    }
    let (nx, na) = (nx.unwrap_or(0), na.unwrap_or(0));
    Ok(Dataset::new(Matrix::from_vec(n, nx, obs)?, Matrix::from_vec(n, na, acts)?)?)
}

/// Per-dimension mean and standard deviation of the actions.
pub fn summary(dataset: &Dataset) -> Vec<(f64, f64)> {
    let n = dataset.len() as f64;
    (0..dataset.action_dim())
        .map(|j| {
            let col: Vec<f64> = (0..dataset.len()).map(|i| dataset.actions().get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (mean, var.sqrt())
        })
        .collect()
}
