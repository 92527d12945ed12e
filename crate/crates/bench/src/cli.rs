//! Command-line interface. Exit status: 0 on success, 1 when any cell
//! diverged (or a theorem check failed), 2 on configuration errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use bridger::data::SampleSet;
use bridger::metrics::{emd, emd_capped, moments, roughness, Trajectory, EMD_MAX_EXACT};
use bridger::numeric::{Matrix, Rng};
use bridger::theory::{fuzz_theorems, FuzzConfig};
use clap::{Parser, Subcommand};

use crate::cells::{cell_rng, resolve_source, train_cell, Trained};
use crate::config::{interpolant_label, ExperimentConfig, Method, SamplerSettings};
use crate::error::{BenchError, Result};
use crate::report::{relative_improvement, write_report};
use crate::sweep::Sweep;
use crate::tasks::{self, Generator};

#[derive(Debug, Parser)]
#[command(name = "bridger", version, about = "Train, sample and evaluate source-to-target policy bridges")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed; overrides the config's seed list for `sweep`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the task's training set as JSONL and print summary statistics.
    GenData,
    /// Train one cell and write its checkpoint.
    Train {
        #[arg(long, default_value = "bridger")]
        method: String,
        /// Source name from the config (ignored by ddim).
        #[arg(long)]
        source: Option<String>,
        /// Index into the config's interpolant list (bridger only).
        #[arg(long, default_value_t = 0)]
        interpolant: usize,
    },
    /// Draw actions from a checkpoint into `samples.csv`.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 512)]
        n: usize,
        /// Comma-separated observation, required for conditional models.
        #[arg(long, value_delimiter = ',')]
        obs: Vec<f64>,
    },
    /// Compare a samples CSV against fresh ground-truth draws of the task.
    Eval {
        #[arg(long)]
        samples: PathBuf,
    },
    /// Run the full grid of the config.
    Sweep,
    /// Fuzz the source-improvement bounds on random finite-support instances.
    TheoryCheck {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 10)]
        support_max: usize,
        #[arg(long, default_value_t = 20)]
        steps_max: usize,
    },
    /// Relative improvement of each method over its raw source samples.
    Report {
        /// Sweep CSV; defaults to `<out>/sweep.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| BenchError::config("this command needs --config PATH"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

fn write_samples(m: &Matrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.cols()).map(|j| format!("a{j}")))?;
    for r in m.iter_rows() {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<Matrix> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse).collect();
        rows.push(row.map_err(|_| BenchError::config(format!("{}: non-numeric sample", path.display())))?);
    }
    if rows.is_empty() {
        return Err(BenchError::config(format!("{}: no samples", path.display())));
    }
    Ok(Matrix::from_rows(&rows)?)
}

/// Runs one invocation and returns the process exit status.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let seed = cli.seed.unwrap_or(0);
    let io = |e| BenchError::io("stdout", e);
    match &cli.command {
        Command::GenData => {
            let cfg = load_config(cli)?;
            create_dir(&cli.out)?;
            let data = cfg.task.training_set(seed)?;
            let path = cli.out.join(format!("{}-seed{seed}.jsonl", cfg.task.name));
            tasks::write_jsonl(&data, &path)?;
            writeln!(stdout, "wrote {} rows to {}", data.len(), path.display()).map_err(io)?;
            for (j, (mean, std)) in tasks::summary(&data).iter().enumerate() {
                writeln!(stdout, "a{j}: mean {mean:.4} std {std:.4}").map_err(io)?;
            }
        }
        Command::Train {
            method,
            source,
            interpolant,
        } => {
            let cfg = load_config(cli)?;
            let method = Method::parse(method)?;
            let train = cfg.task.training_set(seed)?;
            let (source_name, policy) = match method {
                Method::Ddim => (
                    crate::cells::DDIM_SOURCE.to_string(),
                    bridger::source::SourcePolicy::standard_normal(cfg.task.action_dim()),
                ),
                _ => {
                    let name = source
                        .clone()
                        .or_else(|| cfg.sources.first().map(|s| s.name.clone()))
                        .ok_or_else(|| BenchError::config("no source given"))?;
                    let p = resolve_source(cfg.source(&name)?, seed, &train)?;
                    (name, p)
                }
            };
            let spec = match method {
                Method::Bridger => Some(cfg.interpolants.get(*interpolant).ok_or_else(|| {
                    BenchError::config(format!("interpolant index {interpolant} out of range"))
                })?),
                _ => None,
            };
            let interp = spec.map(interpolant_label).unwrap_or_default();
            let rng = cell_rng(seed, method, &source_name, &interp);
            let trained = train_cell(&cfg, method, &policy, spec, &train, &mut rng.split(0))?;
            let dir = cli.out.join("checkpoints");
            create_dir(&dir)?;
            let path = dir.join(format!(
                "{}__{source_name}__{}__seed{seed}.json",
                method.name(),
                if interp.is_empty() { "none" } else { &interp }
            ));
            trained.to_checkpoint(seed, &cfg.hash()?)?.save(&path)?;
            writeln!(stdout, "{}", path.display()).map_err(io)?;
        }
        Command::Sample {
            checkpoint,
            steps,
            n,
            obs,
        } => {
            let sampler = match cli.config {
                Some(_) => load_config(cli)?.sampler,
                None => SamplerSettings::default(),
            };
            let model = Trained::load(checkpoint)?;
            if obs.len() != model.obs_dim() {
                return Err(BenchError::config(format!(
                    "model expects a {}-dimensional --obs, got {}",
                    model.obs_dim(),
                    obs.len()
                )));
            }
            if *n == 0 || (*steps == 0 && model.method() != Method::Residual) {
                return Err(BenchError::config("--n and --steps must be >= 1"));
            }
            let x = Matrix::from_vec(*n, obs.len(), obs.repeat(*n))?;
            let mut rng = Rng::new(seed).split(5);
            let (samples, _) = model.generate(&x, (*steps).max(1), &sampler.with_steps((*steps).max(1)), &mut rng)?;
            create_dir(&cli.out)?;
            let path = cli.out.join("samples.csv");
            write_samples(&samples, &path)?;
            writeln!(stdout, "wrote {n} samples to {}", path.display()).map_err(io)?;
        }
        Command::Eval { samples } => {
            let cfg = load_config(cli)?;
            let gen = read_samples(samples)?;
            if gen.cols() != cfg.task.action_dim() {
                return Err(BenchError::config(format!(
                    "samples have {} columns, task actions have {}",
                    gen.cols(),
                    cfg.task.action_dim()
                )));
            }
            let truth = cfg.task.evaluation_set(seed, gen.rows())?.action_set();
            let gen_set = SampleSet::new(gen.clone())?;
            let (value, n) = if gen.rows() <= EMD_MAX_EXACT {
                (emd(&gen_set, &truth)?, gen.rows())
            } else {
                let r = emd_capped(&gen_set, &truth, EMD_MAX_EXACT, &mut Rng::new(seed).split(6))?;
                (r.value, r.n)
            };
            let mut metrics = vec![("emd".to_string(), value), ("emd_n".to_string(), n as f64)];
            if matches!(cfg.task.generator, Generator::Trajectory1d { .. }) {
                let mut total = 0.0;
                for r in gen.iter_rows() {
                    total += roughness(&Trajectory::new(Matrix::from_vec(r.len(), 1, r.to_vec())?)?)?;
                }
                metrics.push(("roughness".to_string(), total / gen.rows() as f64));
            }
            let m = moments(&gen_set)?;
            for (j, mean) in m.mean.iter().enumerate() {
                metrics.push((format!("mean_a{j}"), *mean));
                metrics.push((format!("var_a{j}"), m.covariance.get(j, j)));
            }
            create_dir(&cli.out)?;
            let path = cli.out.join("eval.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["metric", "value"])?;
            for (name, v) in &metrics {
                w.write_record([name.clone(), format!("{v:.6}")])?;
                writeln!(stdout, "{name}: {v:.6}").map_err(io)?;
            }
            w.flush().map_err(|e| BenchError::io(&path, e))?;
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            create_dir(&cli.out)?;
            let (record, _) = Sweep::new(&cfg, &cli.out)?.run()?;
            writeln!(
                stdout,
                "{} rows, {} cells, {} divergences, {:.1}s; config {}",
                record.rows,
                record.cells.len(),
                record.divergences.len(),
                record.wall_clock_seconds,
                &record.config_hash[..12]
            )
            .map_err(io)?;
            for d in &record.divergences {
                writeln!(stdout, "diverged: {}/{}/{} seed {} k {:?}: {}", d.method, d.source, d.interpolant, d.seed, d.k, d.message)
                    .map_err(io)?;
            }
            if !record.divergences.is_empty() {
                return Ok(1);
            }
        }
        Command::TheoryCheck {
            instances,
            support_max,
            steps_max,
        } => {
            let report = fuzz_theorems(&FuzzConfig {
                instances: *instances,
                support_max: *support_max,
                steps_max: *steps_max,
                seed,
            })?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?).map_err(io)?;
            if !report.violations.is_empty() {
                return Ok(1);
            }
        }
        Command::Report { input } => {
            let input = input.clone().unwrap_or_else(|| cli.out.join("sweep.csv"));
            let rows = crate::sweep::read_csv(&input)?;
            let out = relative_improvement(&rows)?;
            create_dir(&cli.out)?;
            let path = cli.out.join("relative_improvement.csv");
            write_report(&out, &path)?;
            for r in &out {
                writeln!(
                    stdout,
                    "{}/{}/{} seed {}: {:.4} / {:.4} (k={}) = {:.3}",
                    r.method, r.source, r.interpolant, r.seed, r.source_emd, r.best_emd, r.best_k, r.ratio
                )
                .map_err(io)?;
            }
        }
    }
    Ok(0)
}
