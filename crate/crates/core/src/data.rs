//! Sample containers: [`SampleSet`] for generated or demonstrated actions and
//! [`Dataset`] for `(x, a1)` demonstration pairs.

use serde::{Deserialize, Serialize};

use crate::numeric::Matrix;
use crate::{Error, Result};

/// `n × dim` matrix of actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SampleSet(Matrix);

impl SampleSet {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::invalid("a sample set needs at least one sample"));
        }
        if values.cols() == 0 {
            return Err(Error::invalid("samples must have positive dimension"));
        }
        if !values.is_finite() {
            return Err(Error::invalid("sample set contains non-finite values"));
        }
        Ok(Self(values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.0.iter_rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.0.select_rows(indices))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter().map(|r| r[j]).collect()
    }
}

impl TryFrom<Matrix> for SampleSet {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        SampleSet::new(m)
    }
}

impl From<SampleSet> for Matrix {
    fn from(s: SampleSet) -> Matrix {
        s.0
    }
}

/// Demonstration pairs `(x, a1)`. Observations may be zero-dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    obs: Matrix,
    actions: Matrix,
}

impl Dataset {
    pub fn new(obs: Matrix, actions: Matrix) -> Result<Self> {
        if obs.rows() != actions.rows() {
            return Err(Error::Shape {
                context: "dataset rows (observations vs actions)",
                expected: actions.rows(),
                actual: obs.rows(),
            });
        }
        if actions.rows() == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if actions.cols() == 0 {
            return Err(Error::invalid("actions must have positive dimension"));
        }
        if !obs.is_finite() || !actions.is_finite() {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Self { obs, actions })
    }

    /// Unconditional dataset (`n_x = 0`).
    pub fn unconditional(actions: Matrix) -> Result<Self> {
        Self::new(Matrix::zeros(actions.rows(), 0), actions)
    }

    pub fn len(&self) -> usize {
        self.actions.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.rows() == 0
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.cols()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.cols()
    }

    pub fn obs(&self) -> &Matrix {
        &self.obs
    }

    pub fn actions(&self) -> &Matrix {
        &self.actions
    }

    pub fn action_set(&self) -> SampleSet {
        SampleSet(self.actions.clone())
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.obs.select_rows(indices), self.actions.select_rows(indices))
    }

    /// Splits off the last `ceil(fraction · n)` rows (at least one, and only
    /// if at least one row remains for training).
    pub fn split_holdout(&self, fraction: f64) -> Result<(Dataset, Option<Dataset>)> {
        let n = self.len();
        let k = ((fraction * n as f64).ceil() as usize).min(n.saturating_sub(1));
        if fraction <= 0.0 || k == 0 {
            return Ok((self.clone(), None));
        }
        let train: Vec<usize> = (0..n - k).collect();
        let hold: Vec<usize> = (n - k..n).collect();
        Ok((self.select(&train)?, Some(self.select(&hold)?)))
    }
}
