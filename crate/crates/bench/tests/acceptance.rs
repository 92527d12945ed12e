//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always print; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use bridger::baselines::{DdpmConfig, DdpmModel, ResidualConfig, ResidualModel};
use bridger::bridge::{loss_batch, BridgeBatch, FieldModel, LossWeights};
use bridger::interpolant::{InterpolantSpec, TimePoint};
use bridger::metrics::{emd, roughness, SampleSet, Trajectory};
use bridger::numeric::{Activation, Matrix, MlpNet, Rng};
use bridger::source::{CvaeConfig, CvaeModel, SourcePolicy};
use bridger::theory::{cost_identity_residual, CostVector, DiscreteDist};
use bridger::train::NetConfig;
use bridger_bench::cells::{cell_rng, resolve_source, train_cell};
use bridger_bench::config::{interpolant_label, ExperimentConfig, Method};
use bridger_bench::sweep::{MetricRow, Sweep};

type Check = Result<(bool, String), String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).expect("shipped config parses")
}

fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "median of nothing");
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridger"))
}

// 1
fn theorem_suite() -> Check {
    let start = Instant::now();
    let out = bin()
        .args(["theory-check", "--instances", "1000", "--support-max", "10", "--steps-max", "20"])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let violations = report["violations"].as_array().map_or(usize::MAX, Vec::len);
    let min_slack = report["min_slack"].as_f64().unwrap_or(f64::NAN);
    let instances = report["instances"].as_u64().unwrap_or(0);
    Ok((
        out.status.success() && instances == 1000 && violations == 0 && min_slack >= -1e-9 && elapsed < Duration::from_secs(30),
        format!("{instances} instances, {violations} violations, min slack {min_slack:.3e}, {:.1}s", elapsed.as_secs_f64()),
    ))
}

// 2
fn proof_identity() -> Check {
    let mut rng = Rng::new(2);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let s = 1 + i % 20;
        let p = DiscreteDist::random(s, &mut rng).map_err(|e| e.to_string())?;
        let costs: Vec<f64> = (0..s).map(|_| rng.uniform_range(-5.0, 5.0)).collect();
        let c = CostVector::new(costs.clone()).map_err(|e| e.to_string())?;
        // Independent evaluation of both sides.
        let lhs: f64 = p.probs().iter().zip(&costs).map(|(a, b)| a * b).sum();
        let z: f64 = costs.iter().map(|v| (-v).exp()).sum();
        let h: f64 = p
            .probs()
            .iter()
            .zip(&costs)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, ci)| -pi * ((-ci).exp() / z).ln())
            .sum();
        worst = worst.max((lhs - (-z.ln() + h)).abs());
        worst = worst.max(cost_identity_residual(&p, &c).map_err(|e| e.to_string())?);
    }
    Ok((worst <= 1e-10, format!("max residual {worst:.2e} over 10^4 pairs")))
}

fn fd_net(net: &MlpNet, analytic: &[f64], loss: impl Fn(&MlpNet) -> f64) -> f64 {
    let h = 1e-6;
    let mut probe = net.clone();
    let lens: Vec<usize> = net.blocks().iter().map(|b| b.1.len()).collect();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for (bi, len) in lens.into_iter().enumerate() {
        for j in 0..len {
            let orig = net.blocks()[bi].1[j];
            probe.blocks_mut()[bi].1[j] = orig + h;
            let lp = loss(&probe);
            probe.blocks_mut()[bi].1[j] = orig - h;
            let lm = loss(&probe);
            probe.blocks_mut()[bi].1[j] = orig;
            let num = (lp - lm) / (2.0 * h);
            worst = worst.max((analytic[k] - num).abs() / analytic[k].abs().max(num.abs()).max(1e-6));
            k += 1;
        }
    }
    worst
}

fn flat(g: &bridger::numeric::MlpGrads) -> Vec<f64> {
    g.blocks().into_iter().flatten().copied().collect()
}

fn random(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, rng.normal_vec(rows * cols)).unwrap()
}

// 3
fn gradients() -> Check {
    let net = |te| NetConfig {
        hidden: vec![16, 12],
        activation: Activation::Tanh,
        time_embed_width: te,
    };
    let mut rng = Rng::new(3);
    let mut parts = Vec::new();

    let batch = BridgeBatch {
        t: vec![0.04, 0.3, 0.55, 0.81, 0.97],
        a0: random(&mut rng, 5, 2),
        a1: random(&mut rng, 5, 2),
        z: random(&mut rng, 5, 2),
        x: random(&mut rng, 5, 1),
    };
    for spec in [InterpolantSpec::linear(0.3, 1.0).unwrap(), InterpolantSpec::power3(0.3, 1.0).unwrap()] {
        let model = FieldModel::new(spec, 2, 1, &net(8), &mut rng).map_err(|e| e.to_string())?;
        for (name, w) in [
            ("L_b", LossWeights { b: 1.0, s: 0.0, v: 0.0 }),
            ("L_s", LossWeights { b: 0.0, s: 1.0, v: 0.0 }),
            ("L_v", LossWeights { b: 0.0, s: 0.0, v: 1.0 }),
        ] {
            let l = loss_batch(&model, &batch, &w).map_err(|e| e.to_string())?;
            let (net_ref, grads): (&MlpNet, _) = match name {
                "L_b" => (&model.b_net, &l.grad_b),
                "L_s" => (&model.s_hat_net, &l.grad_s),
                _ => (&model.v_net, &l.grad_v),
            };
            let err = fd_net(net_ref, &flat(grads), |probe| {
                let mut m = model.clone();
                match name {
                    "L_b" => m.b_net = probe.clone(),
                    "L_s" => m.s_hat_net = probe.clone(),
                    _ => m.v_net = probe.clone(),
                }
                loss_batch(&m, &batch, &w).unwrap().weighted_total(&w)
            });
            parts.push((format!("{name}/{}", spec.kind_name()), err));
        }
    }

    let ddpm_cfg = DdpmConfig {
        k_train: 20,
        net: net(8),
        ..DdpmConfig::default()
    };
    let ddpm = DdpmModel::new(&ddpm_cfg, 2, 1, &mut rng).map_err(|e| e.to_string())?;
    let (a1, x, z) = (random(&mut rng, 5, 2), random(&mut rng, 5, 1), random(&mut rng, 5, 2));
    let ks = [0, 7, 19, 3, 12];
    let (_, g) = ddpm.loss_batch(&a1, &x, &ks, &z).map_err(|e| e.to_string())?;
    let err = fd_net(&ddpm.g_net, &flat(&g), |n| {
        DdpmModel::from_parts(n.clone(), ddpm.schedule.clone(), 1, 2)
            .unwrap()
            .loss_batch(&a1, &x, &ks, &z)
            .unwrap()
            .0
    });
    parts.push(("ddpm".into(), err));

    let res_cfg = ResidualConfig {
        net: net(0),
        ..ResidualConfig::default()
    };
    let res = ResidualModel::new(SourcePolicy::standard_normal(2), &res_cfg, 2, 1, &mut rng).map_err(|e| e.to_string())?;
    let a0 = random(&mut rng, 5, 2);
    let (_, g) = res.loss_batch(&a0, &a1, &x).map_err(|e| e.to_string())?;
    let err = fd_net(&res.r_net, &flat(&g), |n| {
        ResidualModel::from_parts(n.clone(), res.source.clone(), 1, 2)
            .unwrap()
            .loss_batch(&a0, &a1, &x)
            .unwrap()
            .0
    });
    parts.push(("residual".into(), err));

    let cvae_cfg = CvaeConfig {
        net: net(0),
        ..CvaeConfig::default()
    };
    let cvae = CvaeModel::new(2, 1, &cvae_cfg, &mut rng).map_err(|e| e.to_string())?;
    let noise = random(&mut rng, 5, cvae.latent_dim);
    let (kw, rw) = (cvae_cfg.kl_weight, cvae_cfg.recon_weight);
    let (_, g_enc, g_dec) = cvae.loss_batch(&a1, &x, &noise, kw, rw).map_err(|e| e.to_string())?;
    let total = |m: &CvaeModel| m.loss_batch(&a1, &x, &noise, kw, rw).unwrap().0.total;
    let err_enc = fd_net(&cvae.encoder, &flat(&g_enc), |n| {
        let mut m = cvae.clone();
        m.encoder = n.clone();
        total(&m)
    });
    let err_dec = fd_net(&cvae.decoder, &flat(&g_dec), |n| {
        let mut m = cvae.clone();
        m.decoder = n.clone();
        total(&m)
    });
    parts.push(("cvae".into(), err_enc.max(err_dec)));

    let worst = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    let detail = parts.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    Ok((worst < 1e-4, format!("max relative error {worst:.2e} ({detail})")))
}

// 4
fn boundaries() -> Check {
    let mut rng = Rng::new(4);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let dim = 1 + i % 6;
        let d = rng.uniform_range(0.0, 3.0);
        let c = rng.uniform_range(0.0, 3.0);
        let spec = if i % 2 == 0 { InterpolantSpec::linear(d, c) } else { InterpolantSpec::power3(d, c) }
            .map_err(|e| e.to_string())?;
        let scale = 10f64.powf(rng.uniform_range(-2.0, 2.0));
        let mut v = || -> Vec<f64> { rng.normal_vec(dim).into_iter().map(|x| x * scale).collect() };
        let (a0, a1, z, x) = (v(), v(), v(), v());
        for (t, want) in [(0.0, &a0), (1.0, &a1)] {
            let p = spec
                .interpolate(TimePoint::new(t).unwrap(), &a0, &a1, &z, &x)
                .map_err(|e| e.to_string())?;
            for (g, w) in p.a_t.iter().zip(want) {
                worst = worst.max((g - w).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max endpoint deviation {worst:.1e} over 10^4 inputs")))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Minimum over all permutations (Heap's algorithm).
fn brute_force(a: &SampleSet, b: &SampleSet) -> f64 {
    let n = a.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| dist(a.row(i), b.row(j))).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

// 5
fn emd_oracle() -> Check {
    let mut rng = Rng::new(5);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let (n, d) = (1 + k % 7, 1 + k % 3);
        let a = SampleSet::new(random(&mut rng, n, d)).unwrap();
        let b = SampleSet::new(random(&mut rng, n, d)).unwrap();
        worst = worst.max((emd(&a, &b).map_err(|e| e.to_string())? - brute_force(&a, &b)).abs());
    }
    Ok((worst <= 1e-9, format!("max |exact - brute force| {worst:.1e} over 200 instances")))
}

// 6
fn one_dim_task() -> Check {
    let cfg = load("gaussian-1d.toml");
    let start = Instant::now();
    let spec = cfg.interpolants[0];
    let (mut means, mut vars) = (Vec::new(), Vec::new());
    for &seed in &cfg.seeds {
        let train = cfg.task.training_set(seed).map_err(|e| e.to_string())?;
        let source = resolve_source(&cfg.sources[0], seed, &train).map_err(|e| e.to_string())?;
        let rng = cell_rng(seed, Method::Bridger, &cfg.sources[0].name, &interpolant_label(&spec));
        let model = train_cell(&cfg, Method::Bridger, &source, Some(&spec), &train, &mut rng.split(0))
            .map_err(|e| e.to_string())?;
        let n = 10_000;
        let (samples, _) = model
            .generate(&Matrix::zeros(n, 0), 20, &cfg.sampler.with_steps(20), &mut rng.split(9))
            .map_err(|e| e.to_string())?;
        let v = samples.as_slice();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        means.push(mean);
        vars.push(var);
    }
    let (m, v) = (median(means.clone()), median(vars.clone()));
    let elapsed = start.elapsed();
    Ok((
        (m - 3.0).abs() <= 0.15 && (v - 0.25).abs() <= 0.1 && elapsed < Duration::from_secs(300),
        format!(
            "median mean {m:.4} (seeds {means:.3?}), median variance {v:.4} (seeds {vars:.3?}), {:.0}s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn emd_median(rows: &[MetricRow], method: &str, source: &str, interpolant: Option<&str>, k: usize) -> f64 {
    median(
        rows.iter()
            .filter(|r| r.method == method && r.source == source && r.k == k)
            .filter(|r| interpolant.is_none_or(|i| r.interpolant == i))
            .filter_map(|r| r.emd)
            .collect(),
    )
}

fn run(config: &ExperimentConfig) -> Result<(Vec<MetricRow>, Duration), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (record, rows) = Sweep::new(config, dir.path()).map_err(|e| e.to_string())?.quiet().run().map_err(|e| e.to_string())?;
    if !record.divergences.is_empty() {
        return Err(format!("{} divergent cells", record.divergences.len()));
    }
    Ok((rows, start.elapsed()))
}

// 11
fn roughness_metric() -> Check {
    let quad: Vec<[f64; 1]> = (0..12).map(|t| [(t * t) as f64]).collect();
    let line: Vec<[f64; 2]> = (0..12).map(|t| [3.0 * t as f64 - 1.0, 0.5 * t as f64]).collect();
    let rq = roughness(&Trajectory::from_points(&quad).unwrap()).map_err(|e| e.to_string())?;
    let rl = roughness(&Trajectory::from_points(&line).unwrap()).map_err(|e| e.to_string())?;
    Ok((rq == 2.0 && rl == 0.0, format!("quadratic {rq}, straight line {rl}")))
}

const TINY: &str = r#"
methods = ["bridger", "ddim", "residual"]
steps = [0, 3]
seeds = [0, 1]

[task]
name = "tiny"
n = 200
[task.generator]
kind = "checker"
cells = 2
cell_size = 1.0

[[sources]]
name = "unit"
kind = "gaussian"
mean = [0.0, 0.0]
scale = 1.0

[[interpolants]]
kind = "power3"
d = 0.3
c = 1.0

[eval]
samples = 64
lipschitz = { anchors = 16, perturbations = 2, radius = 0.05 }

[bridger]
net = { hidden = [8], activation = "tanh", time_embed_width = 4 }
optim = { epochs = 3, batch_size = 64, lr = { initial = 1e-3 } }
[ddim]
k_train = 10
net = { hidden = [8], activation = "tanh", time_embed_width = 4 }
optim = { epochs = 3, batch_size = 64, lr = { initial = 1e-3 } }
[residual]
net = { hidden = [8], activation = "tanh" }
optim = { epochs = 3, batch_size = 64, lr = { initial = 1e-3 } }
"#;

// 12
fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).map_err(|e| e.to_string())?;
    let invoke = |out: &Path, args: &[&str]| -> Result<(), String> {
        let status = bin()
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if status.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))
        }
    };
    let mut compared = Vec::new();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        invoke(out, &["--seed", "7", "gen-data"])?;
        invoke(out, &["sweep"])?;
        invoke(out, &["report"])?;
        let ck = out.join("checkpoints/bridger__unit__power3-d0.3-c1__seed0.json");
        invoke(out, &["--seed", "3", "sample", "--checkpoint", ck.to_str().unwrap(), "--steps", "4", "--n", "50"])?;
        invoke(out, &["--seed", "3", "eval", "--samples", out.join("samples.csv").to_str().unwrap()])?;
    }
    let mut same = true;
    for file in ["tiny-seed7.jsonl", "sweep.csv", "relative_improvement.csv", "samples.csv", "eval.csv"] {
        let x = std::fs::read(a.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let y = std::fs::read(b.join(file)).map_err(|e| format!("{file}: {e}"))?;
        same &= x == y && !x.is_empty();
        compared.push(format!("{file} {}", if x == y { "identical" } else { "DIFFERS" }));
    }
    Ok((same, compared.join(", ")))
}

fn report(id: usize, title: &str, f: impl FnOnce() -> Check) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("criterion {id:>2} [{}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    // `cargo test -- --list` and filters from the libtest harness are not
    // supported; running the target always runs every criterion.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut ok = true;
    ok &= report(1, "theorem suite via theory-check", theorem_suite);
    ok &= report(2, "expected-cost identity", proof_identity);
    ok &= report(3, "finite-difference gradients", gradients);
    ok &= report(4, "interpolant boundary conditions", boundaries);
    ok &= report(5, "EMD against permutation brute force", emd_oracle);
    ok &= report(6, "1D Gaussian transport", one_dim_task);

    let two = load("two-cluster.toml");
    let two_run = run(&two);
    let spec = interpolant_label(&two.interpolants[0]);
    ok &= report(7, "informative source beats N(0, I) at K=5", || {
        let (rows, _) = two_run.clone()?;
        let near = emd_median(&rows, "bridger", "ring-near", Some(&spec), 5);
        let far = emd_median(&rows, "bridger", "gaussian", Some(&spec), 5);
        Ok((near < far, format!("median EMD ring-near {near:.4} vs gaussian {far:.4}")))
    });
    ok &= report(8, "bridger beats DDIM at K=5 with matched parameters", || {
        let (rows, elapsed) = two_run.clone()?;
        let b = emd_median(&rows, "bridger", "ring-near", Some(&spec), 5);
        let d = emd_median(&rows, "ddim", bridger_bench::cells::DDIM_SOURCE, None, 5);
        Ok((
            b < d && elapsed < Duration::from_secs(1800),
            format!("median EMD bridger {b:.4} vs ddim {d:.4}; sweep {:.0}s", elapsed.as_secs_f64()),
        ))
    });
    ok &= report(9, "residual policy trails bridger at every K", || {
        let (rows, _) = two_run.clone()?;
        let mut pass = true;
        let mut parts = Vec::new();
        for k in [5, 20] {
            let r = emd_median(&rows, "residual", "ring-near", None, k);
            let b = emd_median(&rows, "bridger", "ring-near", Some(&spec), k);
            pass &= r > b;
            parts.push(format!("K={k}: residual {r:.4} vs bridger {b:.4}"));
        }
        Ok((pass, parts.join("; ")))
    });
    ok &= report(10, "Power3 no worse than Linear at K=5", || {
        let four = load("four-cluster.toml");
        let (rows, _) = run(&four)?;
        let label = |kind: &str| {
            four.interpolants
                .iter()
                .map(interpolant_label)
                .find(|l| l.starts_with(kind))
                .expect("config lists both kinds")
        };
        let p3 = emd_median(&rows, "bridger", "gaussian", Some(&label("power3")), 5);
        let lin = emd_median(&rows, "bridger", "gaussian", Some(&label("linear")), 5);
        Ok((p3 <= lin + 0.02, format!("median EMD power3 {p3:.4} vs linear {lin:.4} (+0.02)")))
    });
    ok &= report(11, "roughness of analytic trajectories", roughness_metric);
    ok &= report(12, "byte-identical CLI outputs", determinism);
    if !ok {
        std::process::exit(1);
    }
}
