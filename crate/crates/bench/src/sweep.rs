//! Sweep orchestration: train every (method, source, interpolant) cell once
//! per seed, sample at each step count, and write metrics, checkpoints and
//! scatter figures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bridger::data::{Dataset, SampleSet};
use bridger::interpolant::{InterpolantSpec, TimePoint};
use bridger::metrics::{emd, lipschitz_estimate, roughness, Trajectory};
use bridger::numeric::{Matrix, Rng};
use bridger::source::SourcePolicy;
use serde::{Deserialize, Serialize};

use crate::cells::{cell_rng, raw_source_rng, resolve_source, train_cell, Trained, DDIM_SOURCE};
use crate::config::{interpolant_label, ExperimentConfig, Method};
use crate::error::{is_divergence, BenchError, Result};
use crate::svg;
use crate::tasks::Generator;

pub const CSV_COLUMNS: [&str; 10] = [
    "task",
    "method",
    "source",
    "interpolant",
    "k",
    "seed",
    "emd",
    "roughness",
    "lip_b",
    "lip_s",
];

/// One line of the sweep CSV. `k = 0` rows describe raw source samples, with
/// no model in the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub task: String,
    pub method: String,
    pub source: String,
    pub interpolant: String,
    pub k: usize,
    pub seed: u64,
    pub emd: Option<f64>,
    pub roughness: Option<f64>,
    pub lip_b: Option<f64>,
    pub lip_s: Option<f64>,
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.method.clone(),
            self.source.clone(),
            self.interpolant.clone(),
            self.k.to_string(),
            self.seed.to_string(),
            fmt_metric(self.emd),
            fmt_metric(self.roughness),
            fmt_metric(self.lip_b),
            fmt_metric(self.lip_s),
        ]
    }
}

pub fn write_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r.to_record())?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| BenchError::Report(format!("bad metric value `{s}`")))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(BenchError::Report(format!("{}: unexpected columns {header:?}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<u64> {
            rec[i]
                .parse()
                .map_err(|_| BenchError::Report(format!("bad integer `{}` in column {}", &rec[i], CSV_COLUMNS[i])))
        };
        rows.push(MetricRow {
            task: rec[0].to_string(),
            method: rec[1].to_string(),
            source: rec[2].to_string(),
            interpolant: rec[3].to_string(),
            k: num(4)? as usize,
            seed: num(5)?,
            emd: parse_opt(&rec[6])?,
            roughness: parse_opt(&rec[7])?,
            lip_b: parse_opt(&rec[8])?,
            lip_s: parse_opt(&rec[9])?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: String,
    pub source: String,
    pub interpolant: String,
    pub seed: u64,
    pub checkpoint: Option<String>,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub method: String,
    pub source: String,
    pub interpolant: String,
    pub seed: u64,
    /// Step count whose sampling diverged; `None` when training failed.
    pub k: Option<usize>,
    pub message: String,
}

/// Everything a sweep produced. Wall-clock fields live only here, never in
/// the CSV, so the CSV is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub task: String,
    pub csv: String,
    pub rows: usize,
    pub cells: Vec<CellRecord>,
    pub divergences: Vec<Divergence>,
    pub figures: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Everything the sweep needs about one seed.
struct SeedData {
    train: Dataset,
    /// `samples · repeats` ground-truth pairs, consumed in chunks of `samples`.
    eval: Dataset,
    eval_chunks: Vec<SampleSet>,
    sources: BTreeMap<String, std::result::Result<SourcePolicy, String>>,
}

fn obs_row(eval: &Dataset, rows: usize) -> Matrix {
    let x = if eval.obs_dim() > 0 { eval.obs().row(0).to_vec() } else { Vec::new() };
    let mut data = Vec::with_capacity(rows * x.len());
    for _ in 0..rows {
        data.extend_from_slice(&x);
    }
    Matrix::from_vec(rows, x.len(), data).expect("consistent shape")
}

/// Consecutive row blocks of `n` rows each.
fn chunks(m: &Matrix, n: usize) -> Result<Vec<SampleSet>> {
    (0..m.rows() / n)
        .map(|c| {
            let idx: Vec<usize> = (c * n..(c + 1) * n).collect();
            Ok(SampleSet::new(m.select_rows(&idx))?)
        })
        .collect()
}

fn mean_roughness(samples: &Matrix) -> Result<f64> {
    let mut total = 0.0;
    for r in samples.iter_rows() {
        total += roughness(&Trajectory::new(Matrix::from_vec(r.len(), 1, r.to_vec())?)?)?;
    }
    Ok(total / samples.rows() as f64)
}

pub struct Sweep<'a> {
    config: &'a ExperimentConfig,
    out: PathBuf,
    hash: String,
    log: bool,
}

impl<'a> Sweep<'a> {
    pub fn new(config: &'a ExperimentConfig, out: &Path) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            out: out.to_path_buf(),
            hash: config.hash()?,
            log: true,
        })
    }

    pub fn quiet(mut self) -> Self {
        self.log = false;
        self
    }

    fn note(&self, msg: impl AsRef<str>) {
        if self.log {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn seed_data(&self, seed: u64) -> Result<SeedData> {
        let cfg = self.config;
        let train = cfg.task.training_set(seed)?;
        let n = cfg.eval.samples;
        let eval = cfg.task.evaluation_set(seed, n * cfg.eval.repeats)?;
        let eval_chunks = chunks(eval.actions(), n)?;
        let mut sources = BTreeMap::new();
        for entry in &cfg.sources {
            let resolved = match resolve_source(entry, seed, &train) {
                Ok(p) => Ok(p),
                Err(BenchError::Core(e)) if is_divergence(&e) => Err(e.to_string()),
                Err(e) => return Err(e),
            };
            sources.insert(entry.name.clone(), resolved);
        }
        Ok(SeedData {
            train,
            eval,
            eval_chunks,
            sources,
        })
    }

    fn row(&self, method: Method, source: &str, interp: &str, k: usize, seed: u64) -> MetricRow {
        MetricRow {
            task: self.config.task.name.clone(),
            method: method.name().to_string(),
            source: source.to_string(),
            interpolant: interp.to_string(),
            k,
            seed,
            emd: None,
            roughness: None,
            lip_b: None,
            lip_s: None,
        }
    }

    fn sample_metrics(&self, samples: &Matrix, data: &SeedData, row: &mut MetricRow) -> Result<()> {
        let gen = chunks(samples, self.config.eval.samples)?;
        let mut total = 0.0;
        for (g, truth) in gen.iter().zip(&data.eval_chunks) {
            total += emd(g, truth)?;
        }
        row.emd = Some(total / gen.len() as f64);
        if matches!(self.config.task.generator, Generator::Trajectory1d { .. }) {
            row.roughness = Some(mean_roughness(samples)?);
        }
        Ok(())
    }

    /// Lipschitz estimates of `b` and `ŝ/γ̃` in the action at `t = 0.5`,
    /// anchored at ground-truth evaluation actions.
    fn lipschitz(&self, trained: &Trained, data: &SeedData, rng: &Rng) -> Result<(f64, f64)> {
        let Trained::Bridger { model, .. } = trained else {
            unreachable!("lipschitz probes need the bridger fields");
        };
        let t = 0.5;
        let gt = model.spec.gamma_tilde(TimePoint::new(t)?);
        let probe = &self.config.eval.lipschitz;
        let lb = lipschitz_estimate(
            |a| Ok(model.outputs(t, a, &obs_row(&data.eval, a.rows()))?.b),
            &data.eval_chunks[0],
            probe,
            &mut rng.split(0),
        )?;
        let ls = lipschitz_estimate(
            |a| {
                let mut s = model.outputs(t, a, &obs_row(&data.eval, a.rows()))?.s_hat;
                s.as_mut_slice().iter_mut().for_each(|v| *v /= gt);
                Ok(s)
            },
            &data.eval_chunks[0],
            probe,
            &mut rng.split(1),
        )?;
        Ok((lb, ls))
    }

    pub fn run(&self) -> Result<(RunRecord, Vec<MetricRow>)> {
        let start = Instant::now();
        let cfg = self.config;
        let ck_dir = self.out.join("checkpoints");
        let fig_dir = self.out.join("figures");
        std::fs::create_dir_all(&ck_dir).map_err(|e| BenchError::io(&ck_dir, e))?;
        let want_svg = cfg.eval.svg && cfg.task.action_dim() == 2;
        if want_svg {
            std::fs::create_dir_all(&fig_dir).map_err(|e| BenchError::io(&fig_dir, e))?;
        }

        let mut seeds = BTreeMap::new();
        for &seed in &cfg.seeds {
            seeds.insert(seed, self.seed_data(seed)?);
        }

        let mut rows = Vec::new();
        let mut cells = Vec::new();
        let mut divergences = Vec::new();
        let mut figures = Vec::new();
        let bridger_specs: Vec<Option<&InterpolantSpec>> = cfg.interpolants.iter().map(Some).collect();
        for &method in &cfg.methods {
            let source_names: Vec<&str> = match method {
                Method::Ddim => vec![DDIM_SOURCE],
                _ => cfg.sources.iter().map(|s| s.name.as_str()).collect(),
            };
            let specs: &[Option<&InterpolantSpec>] = match method {
                Method::Bridger => &bridger_specs,
                _ => &[None],
            };
            for source_name in &source_names {
                for spec in specs {
                    let interp = spec.map(interpolant_label).unwrap_or_default();
                    for (seed_idx, &seed) in cfg.seeds.iter().enumerate() {
                        let data = &seeds[&seed];
                        let diverged = |k: Option<usize>, message: String| Divergence {
                            method: method.name().to_string(),
                            source: source_name.to_string(),
                            interpolant: interp.clone(),
                            seed,
                            k,
                            message,
                        };
                        let source = match method {
                            Method::Ddim => SourcePolicy::standard_normal(cfg.task.action_dim()),
                            _ => match &data.sources[*source_name] {
                                Ok(p) => p.clone(),
                                Err(msg) => {
                                    divergences.push(diverged(None, format!("source training: {msg}")));
                                    continue;
                                }
                            },
                        };

                        let raw_row = |sw: &Self| -> Result<MetricRow> {
                            let raw = source.sample_for_obs(data.eval.obs(), &mut raw_source_rng(seed, source_name))?;
                            let mut row = sw.row(method, source_name, &interp, 0, seed);
                            sw.sample_metrics(&raw, data, &mut row)?;
                            Ok(row)
                        };
                        let want_raw = cfg.steps.contains(&0);

                        let label = format!("{}/{source_name}/{interp}/seed{seed}", method.name());
                        let rng = cell_rng(seed, method, source_name, &interp);
                        let t0 = Instant::now();
                        let trained = match train_cell(cfg, method, &source, *spec, &data.train, &mut rng.split(0)) {
                            Ok(t) => t,
                            Err(BenchError::Core(e)) if is_divergence(&e) => {
                                self.note(format!("{label}: diverged ({e})"));
                                divergences.push(diverged(None, e.to_string()));
                                if want_raw {
                                    rows.push(raw_row(self)?);
                                }
                                continue;
                            }
                            Err(e) => return Err(e),
                        };
                        let train_seconds = t0.elapsed().as_secs_f64();
                        self.note(format!("{label}: trained in {train_seconds:.1}s"));
                        let ck_name = format!(
                            "{}__{source_name}__{}__seed{seed}.json",
                            method.name(),
                            if interp.is_empty() { "none" } else { &interp }
                        );
                        let ck_path = ck_dir.join(&ck_name);
                        trained.to_checkpoint(seed, &self.hash)?.save(&ck_path)?;
                        cells.push(CellRecord {
                            method: method.name().to_string(),
                            source: source_name.to_string(),
                            interpolant: interp.clone(),
                            seed,
                            checkpoint: Some(format!("checkpoints/{ck_name}")),
                            train_seconds,
                        });

                        let lip = match method {
                            Method::Bridger => Some(self.lipschitz(&trained, data, &rng.split(1))?),
                            _ => None,
                        };
                        let sampler = cfg.sampler.with_steps(1);
                        for &k in &cfg.steps {
                            if k == 0 {
                                rows.push(raw_row(self)?);
                                continue;
                            }
                            let mut srng = rng.split(2).split(k as u64);
                            let (samples, path) = match trained.generate(data.eval.obs(), k, &sampler, &mut srng) {
                                Ok(v) => v,
                                Err(BenchError::Core(e)) if is_divergence(&e) => {
                                    divergences.push(diverged(Some(k), e.to_string()));
                                    continue;
                                }
                                Err(e) => return Err(e),
                            };
                            let mut row = self.row(method, source_name, &interp, k, seed);
                            self.sample_metrics(&samples, data, &mut row)?;
                            row.lip_b = lip.map(|l| l.0);
                            row.lip_s = lip.map(|l| l.1);
                            rows.push(row);

                            if let (true, 0, Some(path)) = (want_svg, seed_idx, path) {
                                let n = cfg.eval.samples;
                                let first: Vec<usize> = (0..n).collect();
                                let shown: Vec<Matrix> = svg::panel_steps(k, cfg.eval.panels)
                                    .into_iter()
                                    .map(|i| path[i].select_rows(&first))
                                    .collect();
                                let mut panels: Vec<(String, &Matrix)> = svg::panel_steps(k, cfg.eval.panels)
                                    .into_iter()
                                    .zip(&shown)
                                    .map(|(i, m)| (format!("k = {i}"), m))
                                    .collect();
                                panels.push(("target".to_string(), data.eval_chunks[0].as_matrix()));
                                let title = format!("{} | {source_name} | {interp} | K = {k} | seed {seed}", cfg.task.name);
                                let name = format!("{source_name}__{interp}__K{k}.svg");
                                let p = fig_dir.join(&name);
                                std::fs::write(&p, svg::scatter_panels(&title, &panels))
                                    .map_err(|e| BenchError::io(&p, e))?;
                                figures.push(format!("figures/{name}"));
                            }
                        }
                    }
                }
            }
        }

        let csv_path = self.out.join("sweep.csv");
        write_csv(&rows, &csv_path)?;
        let record = RunRecord {
            config_hash: self.hash.clone(),
            task: cfg.task.name.clone(),
            csv: "sweep.csv".to_string(),
            rows: rows.len(),
            cells,
            divergences,
            figures,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        let rec_path = self.out.join("run_record.json");
        let text = serde_json::to_string_pretty(&record)?;
        std::fs::write(&rec_path, text + "\n").map_err(|e| BenchError::io(&rec_path, e))?;
        Ok((record, rows))
    }
}

/// Runs the full sweep into `out`, returning the run record and the rows.
pub fn run_sweep(config: &ExperimentConfig, out: &Path) -> Result<(RunRecord, Vec<MetricRow>)> {
    Sweep::new(config, out)?.run()
}
