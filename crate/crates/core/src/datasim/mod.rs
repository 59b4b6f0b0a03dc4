//! Synthetic regression data, built-in predictors and prediction ingestion.
//!
//! The synthetic law draws 20 i.i.d. `U(-1, 1)` covariates and sets
//! `Y = f(X) + noise` with `f(X) = 5 (X1 X2 + exp(X4 - 1))` (1-based indices).
//! Calibration and test pairs are i.i.d. from the same law, so they are
//! exchangeable by construction.

mod ingest;
mod models;

pub use ingest::{load_predictions, CalibrationRow, IngestMode, IngestedData, TestRow};
pub use models::{fit_knn, fit_ridge, KnnRegressor, PredictionModel, RidgeRegressor};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of covariates.
pub const DIM: usize = 20;
/// Homoscedastic noise standard deviation.
pub const SIGMA0: f64 = 0.15;
/// Scale of the heteroscedastic noise standard deviation.
pub const HET_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Homoscedastic,
    Heteroscedastic,
}

impl std::str::FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homoscedastic" => Ok(Noise::Homoscedastic),
            "heteroscedastic" => Ok(Noise::Heteroscedastic),
            other => Err(Error::Config(format!("unknown noise model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_cal: usize,
    pub m: usize,
    pub noise: Noise,
    /// Requirement threshold `c`, shared by every test unit.
    pub c: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_train: 1000,
            n_cal: 1000,
            m: 100,
            noise: Noise::Homoscedastic,
            c: 0.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_cal == 0 || self.m == 0 {
            return Err(Error::param("n_train, n_cal and m must be positive"));
        }
        if !self.c.is_finite() {
            return Err(Error::param("threshold c must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Calibration,
    Test,
}

/// Covariates (one row per unit) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub covariates: DMatrix<f64>,
    pub responses: Vec<f64>,
    pub role: Role,
}

impl LabeledBatch {
    pub fn new(covariates: DMatrix<f64>, responses: Vec<f64>, role: Role) -> Result<Self> {
        if covariates.nrows() != responses.len() {
            return Err(Error::Data(format!(
                "{} covariate rows but {} responses",
                covariates.nrows(),
                responses.len()
            )));
        }
        if covariates.iter().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::Data("batch contains non-finite entries".into()));
        }
        Ok(LabeledBatch {
            covariates,
            responses,
            role,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.covariates.row(i).iter().copied().collect()
    }
}

/// Regression function `5 (x1 x2 + exp(x4 - 1))`.
pub fn regression_fn(x: &[f64]) -> f64 {
    5.0 * (x[0] * x[1] + (x[3] - 1.0).exp())
}

/// Noise standard deviation at a point with regression value `fx`.
///
/// The heteroscedastic form `0.1 (5.5 - |f|) / 2` turns negative for
/// `|f| > 5.5`; only its magnitude matters for a centred normal.
pub fn noise_sd(noise: Noise, fx: f64) -> f64 {
    match noise {
        Noise::Homoscedastic => SIGMA0,
        Noise::Heteroscedastic => (HET_SCALE * (5.5 - fx.abs()) / 2.0).abs(),
    }
}

fn gen_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, noise: Noise, role: Role) -> LabeledBatch {
    let mut x = DMatrix::zeros(n, DIM);
    let mut y = Vec::with_capacity(n);
    let mut row = [0.0; DIM];
    for i in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rng.gen_range(-1.0..1.0);
            x[(i, j)] = *v;
        }
        let fx = regression_fn(&row);
        let z: f64 = rng.sample(StandardNormal);
        y.push(fx + noise_sd(noise, fx) * z);
    }
    LabeledBatch {
        covariates: x,
        responses: y,
        role,
    }
}

/// Draw independent training, calibration and test batches.
pub fn gen_synthetic<R: Rng + ?Sized>(
    cfg: &SyntheticConfig,
    rng: &mut R,
) -> Result<(LabeledBatch, LabeledBatch, LabeledBatch)> {
    cfg.validate()?;
    let train = gen_batch(rng, cfg.n_train, cfg.noise, Role::Train);
    let cal = gen_batch(rng, cfg.n_cal, cfg.noise, Role::Calibration);
    let test = gen_batch(rng, cfg.m, cfg.noise, Role::Test);
    Ok((train, cal, test))
}

/// SHA-256 over the bit patterns of every covariate and response.
pub fn fingerprint(batches: &[&LabeledBatch]) -> [u8; 32] {
    let mut h = Sha256::new();
    for b in batches {
        h.update((b.len() as u64).to_le_bytes());
        for v in b.covariates.iter().chain(&b.responses) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};

    #[test]
    fn regression_fn_example() {
        let mut x = [0.0; DIM];
        x[3] = 1.0;
        assert_eq!(regression_fn(&x), 5.0);
    }

    #[test]
    fn noise_examples() {
        assert!((noise_sd(Noise::Heteroscedastic, 5.0) - 0.025).abs() < 1e-15);
        assert_eq!(noise_sd(Noise::Homoscedastic, 3.0), 0.15);
        assert!(noise_sd(Noise::Heteroscedastic, 9.0) > 0.0);
    }

    #[test]
    fn sizes_and_ranges() {
        let cfg = SyntheticConfig {
            n_train: 30,
            n_cal: 20,
            m: 10,
            ..Default::default()
        };
        let (tr, ca, te) = gen_synthetic(&cfg, &mut substream(1, 0, Purpose::Data)).unwrap();
        assert_eq!((tr.len(), ca.len(), te.len()), (30, 20, 10));
        assert_eq!(tr.covariates.ncols(), DIM);
        assert!(tr.covariates.iter().all(|v| (-1.0..1.0).contains(v)));
        assert_eq!(te.role, Role::Test);
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let cfg = SyntheticConfig {
            n_train: 50,
            n_cal: 40,
            m: 10,
            noise: Noise::Heteroscedastic,
            c: 0.0,
        };
        let a = gen_synthetic(&cfg, &mut substream(9, 4, Purpose::Data)).unwrap();
        let b = gen_synthetic(&cfg, &mut substream(9, 4, Purpose::Data)).unwrap();
        assert_eq!(fingerprint(&[&a.0, &a.1, &a.2]), fingerprint(&[&b.0, &b.1, &b.2]));
        let c = gen_synthetic(&cfg, &mut substream(9, 5, Purpose::Data)).unwrap();
        assert_ne!(fingerprint(&[&a.0]), fingerprint(&[&c.0]));
    }

    #[test]
    fn homoscedastic_noise_moments() {
        let mut rng = substream(3, 0, Purpose::Data);
        let n = 100_000;
        let batch = gen_batch(&mut rng, n, Noise::Homoscedastic, Role::Train);
        let eps: Vec<f64> = (0..n)
            .map(|i| batch.responses[i] - regression_fn(&batch.row(i)))
            .collect();
        let mean = eps.iter().sum::<f64>() / n as f64;
        let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let s2 = SIGMA0 * SIGMA0;
        // SE of the mean is sigma / sqrt(n); SE of the variance is about s2 sqrt(2 / n)
        assert!(mean.abs() < 3.0 * SIGMA0 / (n as f64).sqrt());
        assert!((var - s2).abs() < 3.0 * s2 * (2.0 / n as f64).sqrt());
    }
}
