use std::path::Path;
use std::process::{Command, Output};

use bridger::numeric::Rng;
use bridger_bench::report::relative_improvement;
use bridger_bench::sweep::read_csv;
use bridger_bench::tasks::{read_jsonl, Generator, TaskSpec};

fn bridger(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bridger"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

const ORIGIN: &str = r#"
[task]
name = "origin"
n = 10000
[task.generator]
kind = "gaussian-mixture"
centers = [[0.0, 0.0]]
std = 1.0

[[sources]]
name = "unit"
kind = "gaussian"
mean = [0.0, 0.0]
scale = 1.0
"#;

#[test]
fn gen_data_single_component_is_centered() {
    let dir = tempfile::tempdir().unwrap();
    let out = bridger(dir.path(), ORIGIN, &["--seed", "0", "gen-data"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = read_jsonl(&dir.path().join("out/origin-seed0.jsonl")).unwrap();
    assert_eq!(data.len(), 10_000);
    for j in 0..2 {
        let mean = data.actions().iter_rows().map(|r| r[j]).sum::<f64>() / 1e4;
        // standard error is 0.01
        assert!(mean.abs() < 0.05, "dimension {j} mean {mean}");
    }
}

#[test]
fn gen_data_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert!(bridger(d.path(), ORIGIN, &["--seed", "4", "gen-data"]).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("out/origin-seed4.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn checker_fills_every_dark_square() {
    let task = TaskSpec {
        name: "checker".into(),
        n: 10_000,
        observation: Default::default(),
        generator: Generator::Checker { cells: 4, cell_size: 1.0 },
    };
    let data = task.sample(10_000, &mut Rng::new(1)).unwrap();
    let centers = Generator::checker_cells(4, 1.0);
    assert_eq!(centers.len(), 8);
    let mut counts = vec![0usize; centers.len()];
    for r in data.actions().iter_rows() {
        let hit = centers
            .iter()
            .position(|c| (r[0] - c[0]).abs() <= 0.5 && (r[1] - c[1]).abs() <= 0.5)
            .unwrap_or_else(|| panic!("{r:?} is not on a dark square"));
        counts[hit] += 1;
    }
    assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
}

const TINY: &str = r#"
methods = ["bridger"]
steps = [0, 3, 6]
seeds = [0, 1]

[task]
name = "tiny"
n = 200
[task.generator]
kind = "gaussian-mixture"
centers = [[2.0, 0.0], [-2.0, 0.0]]
std = 0.3

[[sources]]
name = "unit"
kind = "gaussian"
mean = [0.0, 0.0]
scale = 1.0

[[interpolants]]
kind = "linear"
d = 0.3
c = 0.3

[eval]
samples = 64
svg = false

[bridger]
net = { hidden = [8], activation = "tanh", time_embed_width = 4 }
optim = { epochs = 5, batch_size = 64, lr = { initial = 3e-3 } }
"#;

#[test]
fn report_matches_an_independent_pass_over_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bridger(dir.path(), TINY, &["sweep"]).status.success());
    assert!(bridger(dir.path(), TINY, &["report"]).status.success());
    let out = dir.path().join("out");

    // Read the raw CSV by column name, not through the library row type.
    let mut reader = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let head = reader.headers().unwrap().clone();
    let col = |name: &str| head.iter().position(|h| h == name).unwrap();
    let (seed_c, k_c, emd_c) = (col("seed"), col("k"), col("emd"));
    let mut expected = Vec::new();
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    for seed in ["0", "1"] {
        let rows: Vec<(usize, f64)> = records
            .iter()
            .filter(|r| &r[seed_c] == seed)
            .map(|r| (r[k_c].parse().unwrap(), r[emd_c].parse().unwrap()))
            .collect();
        let source = rows.iter().find(|r| r.0 == 0).unwrap().1;
        let best = rows.iter().filter(|r| r.0 > 0).map(|r| r.1).fold(f64::INFINITY, f64::min);
        expected.push(source / best);
    }

    let mut reader = csv::Reader::from_path(out.join("relative_improvement.csv")).unwrap();
    let ratio_c = reader.headers().unwrap().iter().position(|h| h == "ratio").unwrap();
    let got: Vec<f64> = reader.records().map(|r| r.unwrap()[ratio_c].parse().unwrap()).collect();
    assert_eq!(got.len(), 2);
    for (g, e) in got.iter().zip(&expected) {
        // Both sides read six-decimal CSV values.
        assert!((g - e).abs() <= 1e-5 * e.max(1.0), "{g} vs {e}");
    }

    let lib = relative_improvement(&read_csv(&out.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(lib.len(), 2);
}

#[test]
fn one_method_one_k_one_seed_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = TINY.replace("steps = [0, 3, 6]", "steps = [3]").replace("seeds = [0, 1]", "seeds = [5]");
    let out = bridger(dir.path(), &config, &["sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].k, rows[0].seed), (3, 5));
    assert!(rows[0].emd.is_some() && rows[0].lip_b.is_some());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_steps = TINY.replace("steps = [0, 3, 6]", "steps = [3, 3]");
    assert_eq!(bridger(dir.path(), &bad_steps, &["sweep"]).status.code(), Some(2));
    assert_eq!(bridger(dir.path(), "not = [toml", &["sweep"]).status.code(), Some(2));
    let wrong_dim = TINY.replace("mean = [0.0, 0.0]", "mean = [0.0]");
    assert_eq!(bridger(dir.path(), &wrong_dim, &["gen-data"]).status.code(), Some(2));
}

#[test]
fn theory_check_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = bridger(dir.path(), TINY, &["theory-check", "--instances", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["instances"], 50);
}
