//! Sample-quality instruments: exact-assignment EMD, trajectory roughness,
//! probe-based Lipschitz estimates and moment summaries.

use serde::{Deserialize, Serialize};

pub use crate::data::SampleSet;
use crate::numeric::{Matrix, Rng};
use crate::{Error, Result};

/// Largest set size the exact solver is run on by [`emd_capped`].
pub const EMD_MAX_EXACT: usize = 512;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact optimal-assignment cost between equal-size sets under the
/// Euclidean ground metric, divided by `n`.
pub fn emd(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::invalid(format!(
            "emd needs equal-size sets ({} vs {}); subsample the larger set first",
            a.n(),
            b.n()
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::Shape {
            context: "emd dimension",
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let n = a.n();
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| euclid(a.row(i), b.row(j)))
        .collect();
    let assignment = min_cost_assignment(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmdReport {
    pub value: f64,
    /// Set size actually compared.
    pub n: usize,
}

/// EMD after subsampling both sets (without replacement, seeded) to the
/// smaller of their sizes and `cap`.
pub fn emd_capped(a: &SampleSet, b: &SampleSet, cap: usize, rng: &mut Rng) -> Result<EmdReport> {
    let n = a.n().min(b.n()).min(cap.max(1));
    let pick = |s: &SampleSet, rng: &mut Rng| -> Result<SampleSet> {
        if s.n() == n {
            Ok(s.clone())
        } else {
            s.select(&rng.choose_indices(s.n(), n))
        }
    };
    let (sa, sb) = (pick(a, rng)?, pick(b, rng)?);
    Ok(EmdReport {
        value: emd(&sa, &sb)?,
        n,
    })
}

/// Hungarian algorithm with row/column potentials on a dense `n × n` cost
/// matrix; returns the column assigned to each row.
fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual start column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Ordered points with unit spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct Trajectory(Matrix);

impl TryFrom<Matrix> for Trajectory {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<Trajectory> for Matrix {
    fn from(t: Trajectory) -> Self {
        t.0
    }
}

impl Trajectory {
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::invalid("trajectory needs at least one point of positive dimension"));
        }
        if !points.is_finite() {
            return Err(Error::invalid("trajectory values must be finite"));
        }
        Ok(Self(points))
    }

    pub fn from_points<R: AsRef<[f64]>>(points: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(points)?)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

/// Mean norm of the second difference `a_{i+1} − 2a_i + a_{i−1}`. Values
/// are only comparable between trajectories of equal length.
pub fn roughness(traj: &Trajectory) -> Result<f64> {
    let t = traj.len();
    if t < 3 {
        return Err(Error::invalid(format!("roughness needs at least 3 points, got {t}")));
    }
    let mut total = 0.0;
    for i in 1..t - 1 {
        let (prev, cur, next) = (traj.point(i - 1), traj.point(i), traj.point(i + 1));
        let sq: f64 = (0..traj.dim())
            .map(|j| {
                let d = next[j] - 2.0 * cur[j] + prev[j];
                d * d
            })
            .sum();
        total += sq.sqrt();
    }
    Ok(total / (t - 2) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub anchors: usize,
    pub perturbations: usize,
    pub radius: f64,
}

impl Default for LipschitzProbe {
    fn default() -> Self {
        Self {
            anchors: 256,
            perturbations: 8,
            radius: 0.05,
        }
    }
}

/// Largest finite-difference ratio `‖f(a+δ) − f(a)‖ / ‖δ‖` over anchors
/// drawn (with replacement) from `probes` and perturbations with
/// `‖δ‖ = radius`. `field` maps a batch of actions to a batch of outputs.
/// Anchors and perturbations are drawn sequentially, so raising the anchor
/// count with the same seed only adds pairs.
pub fn lipschitz_estimate<F>(field: F, probes: &SampleSet, probe: &LipschitzProbe, rng: &mut Rng) -> Result<f64>
where
    F: Fn(&Matrix) -> Result<Matrix>,
{
    if !(probe.radius > 0.0) {
        return Err(Error::invalid("lipschitz probe radius must be > 0"));
    }
    let dim = probes.dim();
    let per = probe.perturbations;
    let m = probe.anchors;
    if m == 0 || per == 0 {
        return Ok(0.0);
    }
    let mut base = Matrix::zeros(m, dim);
    let mut moved = Matrix::zeros(m * per, dim);
    for i in 0..m {
        let anchor = probes.row(rng.below(probes.n()));
        base.row_mut(i).copy_from_slice(anchor);
        for k in 0..per {
            let dir = loop {
                let v = rng.normal_vec(dim);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
                }
            };
            for ((o, a), d) in moved.row_mut(i * per + k).iter_mut().zip(anchor).zip(&dir) {
                *o = a + probe.radius * d;
            }
        }
    }
    let f_base = field(&base)?;
    let f_moved = field(&moved)?;
    let mut best: f64 = 0.0;
    for i in 0..m {
        for k in 0..per {
            let r = i * per + k;
            let num = euclid(f_moved.row(r), f_base.row(i));
            let den = euclid(moved.row(r), base.row(i));
            if den > 0.0 {
                best = best.max(num / den);
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::invalid("field produced non-finite outputs"));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    /// Unbiased (`n − 1`) covariance.
    pub covariance: Matrix,
}

pub fn moments(a: &SampleSet) -> Result<Moments> {
    let n = a.n();
    if n < 2 {
        return Err(Error::invalid("covariance needs at least 2 samples"));
    }
    let d = a.dim();
    let mut mean = vec![0.0; d];
    for row in a.iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    for row in a.iter() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                let v = cov.get(i, j) + di * (row[j] - mean[j]);
                cov.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / (n - 1) as f64;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok(Moments { mean, covariance: cov })
}
