//! Relative improvement: how much each trained method improves on the raw
//! source samples it started from. For EMD, lower is better, so the ratio is
//! `source / best` and values above 1 mean the method helped.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::sweep::MetricRow;

pub const REPORT_COLUMNS: [&str; 9] = [
    "task",
    "method",
    "source",
    "interpolant",
    "seed",
    "source_emd",
    "best_emd",
    "best_k",
    "ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub task: String,
    pub method: String,
    pub source: String,
    pub interpolant: String,
    pub seed: u64,
    pub source_emd: f64,
    pub best_emd: f64,
    pub best_k: usize,
    pub ratio: f64,
}

type GroupKey = (String, String, String, String, u64);

fn key(r: &MetricRow) -> GroupKey {
    (r.task.clone(), r.method.clone(), r.source.clone(), r.interpolant.clone(), r.seed)
}

fn describe(k: &GroupKey) -> String {
    format!("task {} method {} source {} interpolant `{}` seed {}", k.0, k.1, k.2, k.3, k.4)
}

/// One entry per configuration, in order of first appearance. Rows without
/// an EMD value are ignored; ties for the best step count go to the smaller
/// `k`.
pub fn relative_improvement(rows: &[MetricRow]) -> Result<Vec<Improvement>> {
    let mut groups: Vec<(GroupKey, Option<f64>, Option<(f64, usize)>)> = Vec::new();
    for r in rows {
        let Some(e) = r.emd else { continue };
        let k = key(r);
        let idx = match groups.iter().position(|g| g.0 == k) {
            Some(i) => i,
            None => {
                groups.push((k, None, None));
                groups.len() - 1
            }
        };
        let g = &mut groups[idx];
        if r.k == 0 {
            g.1 = Some(e);
        } else if g.2.is_none_or(|(b, bk)| e < b || (e == b && r.k < bk)) {
            g.2 = Some((e, r.k));
        }
    }
    groups
        .into_iter()
        .map(|(k, source, best)| {
            let source = source.ok_or_else(|| BenchError::Report(format!("missing k=0 row for {}", describe(&k))))?;
            let (best_emd, best_k) =
                best.ok_or_else(|| BenchError::Report(format!("no k>0 rows for {}", describe(&k))))?;
            if !(best_emd > 0.0) {
                return Err(BenchError::Report(format!("best EMD is zero for {}; ratio undefined", describe(&k))));
            }
            let (task, method, src, interpolant, seed) = k;
            Ok(Improvement {
                task,
                method,
                source: src,
                interpolant,
                seed,
                source_emd: source,
                best_emd,
                best_k,
                ratio: source / best_emd,
            })
        })
        .collect()
}

pub fn write_report(rows: &[Improvement], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.task.clone(),
            r.method.clone(),
            r.source.clone(),
            r.interpolant.clone(),
            r.seed.to_string(),
            format!("{:.6}", r.source_emd),
            format!("{:.6}", r.best_emd),
            r.best_k.to_string(),
            format!("{:.6}", r.ratio),
        ])?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(source: &str, k: usize, emd: f64) -> MetricRow {
        MetricRow {
            task: "t".into(),
            method: "bridger".into(),
            source: source.into(),
            interpolant: "linear-d0.3-c1".into(),
            k,
            seed: 0,
            emd: Some(emd),
            roughness: None,
            lip_b: None,
            lip_s: None,
        }
    }

    #[test]
    fn ratio_is_source_over_best() {
        let rows = [row("g", 0, 2.0), row("g", 5, 0.8), row("g", 20, 0.5)];
        let out = relative_improvement(&rows).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].ratio, out[0].best_k), (4.0, 20));
    }

    #[test]
    fn source_equal_to_best_gives_one() {
        let out = relative_improvement(&[row("g", 0, 0.7), row("g", 5, 0.7)]).unwrap();
        assert_eq!(out[0].ratio, 1.0);
    }

    #[test]
    fn missing_source_row_is_an_error() {
        let e = relative_improvement(&[row("g", 0, 1.0), row("g", 5, 0.5), row("h", 5, 0.5)]).unwrap_err();
        assert!(e.to_string().contains("missing k=0 row"), "{e}");
    }
}
