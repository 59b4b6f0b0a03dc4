//! Lightweight regressors standing in for externally trained models.

use nalgebra::{DMatrix, DVector};

use super::LabeledBatch;
use crate::error::{Error, Result};

/// Mean response of the `k` nearest training points (Euclidean distance,
/// ties broken by training index).
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    rows: Vec<f64>,
    responses: Vec<f64>,
    dim: usize,
    k: usize,
}

impl KnnRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let n = self.responses.len();
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, r)| {
                let d = r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d, i)
            })
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < n {
            dist.select_nth_unstable_by(self.k - 1, by_dist);
        }
        let mut nearest: Vec<usize> = dist[..self.k].iter().map(|d| d.1).collect();
        nearest.sort_unstable();
        nearest.iter().map(|&i| self.responses[i]).sum::<f64>() / self.k as f64
    }
}

pub fn fit_knn(train: &LabeledBatch, k: usize) -> Result<KnnRegressor> {
    if train.is_empty() {
        return Err(Error::Data("k-NN needs a non-empty training set".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::param(format!(
            "k must lie in 1..={}, got {k}",
            train.len()
        )));
    }
    let dim = train.covariates.ncols();
    let mut rows = Vec::with_capacity(train.len() * dim);
    for r in train.covariates.row_iter() {
        rows.extend(r.iter());
    }
    Ok(KnnRegressor {
        rows,
        responses: train.responses.clone(),
        dim,
        k,
    })
}

/// Linear model with an unpenalized intercept.
#[derive(Debug, Clone)]
pub struct RidgeRegressor {
    pub intercept: f64,
    pub coefficients: DVector<f64>,
}

impl RidgeRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Solve `(A'A + reg D) beta = A'y` by Cholesky, where `A = [1 | X]` and
/// `D` is the identity with the intercept entry zeroed.
pub fn fit_ridge(train: &LabeledBatch, reg: f64) -> Result<RidgeRegressor> {
    if train.is_empty() {
        return Err(Error::Data("ridge regression needs a non-empty training set".into()));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::param(format!("ridge penalty must be >= 0, got {reg}")));
    }
    let (n, d) = train.covariates.shape();
    let design = DMatrix::from_fn(n, d + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            train.covariates[(i, j - 1)]
        }
    });
    let mut gram = design.transpose() * &design;
    for j in 1..=d {
        gram[(j, j)] += reg;
    }
    let rhs = design.transpose() * DVector::from_column_slice(&train.responses);
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Data(format!(
            "normal equations are singular (penalty {reg}); use a ridge penalty > 0"
        ))
    })?;
    let beta = chol.solve(&rhs);
    Ok(RidgeRegressor {
        intercept: beta[0],
        coefficients: beta.rows(1, d).into_owned(),
    })
}

#[derive(Debug, Clone)]
pub enum PredictionModel {
    Knn(KnnRegressor),
    Ridge(RidgeRegressor),
}

impl PredictionModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            PredictionModel::Knn(m) => m.predict(x),
            PredictionModel::Ridge(m) => m.predict(x),
        }
    }

    /// Raw predictions for every row of a batch.
    pub fn predict_batch(&self, batch: &LabeledBatch) -> Vec<f64> {
        let mut row = vec![0.0; batch.covariates.ncols()];
        (0..batch.len())
            .map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = batch.covariates[(i, j)];
                }
                self.predict(&row)
            })
            .collect()
    }
}
