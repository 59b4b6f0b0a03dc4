//! From a data source to scores, a selection and its realized metrics.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DataSection, Predictor, ScoreSection, SimSection, WeightScheme};
use crate::conformal::{
    e_vector, p_vector, weighted_e, CalibrationScores, EKind, EVector, WeightVector,
};
use crate::datasim::{
    self, fit_knn, fit_ridge, load_predictions, IngestMode, LabeledBatch, PredictionModel,
};
use crate::error::{Error, Result};
use crate::metrics::{fdp, TrialReport};
use crate::rng::{open_closed_unit, substream, Purpose};
use crate::scoring::{normalize_prediction, score_at_threshold, score_value, NormRange, ScoreSpec};
use crate::selection::{
    bh_select, build_path, ebh_select, ph_cs, ph_rcs, SelectionOutcome, SelectionPath, Variant,
};
use crate::utility::UtilitySpec;

/// Everything selection needs from one data draw, plus the labels used to
/// evaluate it afterwards.
#[derive(Debug, Clone)]
pub struct Realization {
    pub cal: CalibrationScores,
    /// Test scores evaluated at each unit's threshold.
    pub test_scores: Vec<f64>,
    /// Test scores at the true responses, when labels are known.
    pub true_scores: Option<Vec<f64>>,
    /// `Y_j <= c_j` per test unit, when labels are known.
    pub nulls: Option<Vec<bool>>,
    /// Externally supplied risk-adjusted e-variables.
    pub external_e: Option<Vec<f64>>,
    /// Externally supplied priority weights.
    pub weights: Option<Vec<f64>>,
    pub spec: ScoreSpec,
    /// Hash of the generated batches (synthetic) or of the scores (files).
    pub fingerprint: [u8; 32],
}

impl Realization {
    pub fn m(&self) -> usize {
        self.test_scores.len()
    }

    pub fn e_values(&self) -> Result<EVector> {
        e_vector(&self.cal, &self.test_scores, EKind::Standard)
    }

    /// Oracle e-variables at the true test scores.
    pub fn oracle_e_values(&self) -> Result<EVector> {
        let s = self
            .true_scores
            .as_ref()
            .ok_or_else(|| Error::Data("oracle e-values need test labels".into()))?;
        e_vector(&self.cal, s, EKind::Oracle)
    }

    /// Risk-adjusted e-variables: the external column when present, the
    /// binary-loss reduction otherwise.
    pub fn risk_e_values(&self) -> Result<EVector> {
        match &self.external_e {
            Some(e) => EVector::new(e.clone(), EKind::RiskAdjusted),
            None => Ok(e_vector(&self.cal, &self.test_scores, EKind::Standard)?
                .with_kind(EKind::RiskAdjusted)),
        }
    }
}

fn fit_model(sim: &SimSection, train: &LabeledBatch) -> Result<PredictionModel> {
    Ok(match sim.predictor {
        Predictor::Knn => PredictionModel::Knn(fit_knn(train, sim.knn_k)?),
        Predictor::Ridge => PredictionModel::Ridge(fit_ridge(train, sim.ridge_reg)?),
    })
}

fn explicit_range(score: &ScoreSection) -> Option<NormRange> {
    match (score.norm_min, score.norm_max) {
        (Some(min), Some(max)) => Some(NormRange { min, max }),
        _ => None,
    }
}

/// Draw one synthetic data set for `(seed, trial)`, fit the configured
/// predictor on its training split and score calibration and test units.
pub fn synthetic_realization(
    sim: &SimSection,
    score: &ScoreSection,
    seed: u64,
    trial: u64,
) -> Result<Realization> {
    let mut rng = substream(seed, trial, Purpose::Data);
    let (train, cal, test) = datasim::gen_synthetic(&sim.synthetic_config(), &mut rng)?;
    let model = fit_model(sim, &train)?;
    let mut spec = score.base_spec(true)?;
    if score.normalize.unwrap_or(true) {
        let range = match explicit_range(score) {
            Some(r) => r,
            None => NormRange::from_predictions(&model.predict_batch(&train))?,
        };
        spec = spec.with_norm(range);
    }
    let c = sim.c;
    let mut cal_scores = Vec::with_capacity(cal.len());
    for (raw, &y) in model.predict_batch(&cal).into_iter().zip(&cal.responses) {
        cal_scores.push(score_value(&spec, normalize_prediction(raw, &spec)?, y, c)?);
    }
    let mut test_scores = Vec::with_capacity(test.len());
    let mut true_scores = Vec::with_capacity(test.len());
    for (raw, &y) in model.predict_batch(&test).into_iter().zip(&test.responses) {
        let mu = normalize_prediction(raw, &spec)?;
        test_scores.push(score_at_threshold(&spec, mu, c)?);
        true_scores.push(score_value(&spec, mu, y, c)?);
    }
    Ok(Realization {
        cal: CalibrationScores::new(cal_scores)?,
        test_scores,
        true_scores: Some(true_scores),
        nulls: Some(test.responses.iter().map(|&y| y <= c).collect()),
        external_e: None,
        weights: None,
        spec,
        fingerprint: datasim::fingerprint(&[&train, &cal, &test]),
    })
}

/// Score externally produced predictions read from CSV files.
pub fn file_realization(data: &DataSection, score: &ScoreSection) -> Result<Realization> {
    let input = load_predictions(&data.calibration, &data.test)?;
    let mut spec = score.base_spec(false)?;
    let normalize = score
        .normalize
        .unwrap_or(input.mode == IngestMode::Regression);
    if normalize {
        let range = match explicit_range(score) {
            Some(r) => r,
            None => {
                let mus: Vec<f64> = input.calibration.iter().map(|r| r.mu).collect();
                NormRange::from_predictions(&mus)?
            }
        };
        spec = spec.with_norm(range);
    }
    let mut cal_scores = Vec::with_capacity(input.calibration.len());
    for row in &input.calibration {
        let mu = normalize_prediction(row.mu, &spec)?;
        cal_scores.push(score_value(&spec, mu, row.y, row.c.unwrap_or(data.c))?);
    }
    let mut test_scores = Vec::with_capacity(input.test.len());
    let mut true_scores = Vec::with_capacity(input.test.len());
    for row in &input.test {
        let mu = normalize_prediction(row.mu, &spec)?;
        test_scores.push(score_at_threshold(&spec, mu, row.c)?);
        if let Some(y) = row.y {
            true_scores.push(score_value(&spec, mu, y, row.c)?);
        }
    }
    let labeled = input.is_labeled();
    let mut h = Sha256::new();
    for s in cal_scores.iter().chain(&test_scores) {
        h.update(s.to_bits().to_le_bytes());
    }
    Ok(Realization {
        cal: CalibrationScores::new(cal_scores)?,
        true_scores: labeled.then_some(true_scores),
        nulls: labeled.then(|| input.test.iter().map(|t| t.y.unwrap() <= t.c).collect()),
        external_e: input
            .has_external_e()
            .then(|| input.test.iter().map(|t| t.e_g.unwrap()).collect()),
        weights: input
            .has_weights()
            .then(|| input.test.iter().map(|t| t.w.unwrap()).collect()),
        test_scores,
        spec,
        fingerprint: h.finalize().into(),
    })
}

/// Priority weights for the synthetic weighted variant.
pub fn synthetic_weights(scheme: WeightScheme, m: usize, seed: u64, trial: u64) -> Result<WeightVector> {
    match scheme {
        WeightScheme::Uniform => Ok(WeightVector::uniform(m)),
        WeightScheme::Random => {
            let mut rng = substream(seed, trial, Purpose::Weights);
            let raw: Vec<f64> = (0..m).map(|_| open_closed_unit(&mut rng)).collect();
            WeightVector::rescaled(&raw)
        }
    }
}

/// Inputs of a selection beyond the data itself.
#[derive(Debug, Clone, Copy)]
pub struct SelectionRequest<'a> {
    pub variant: Variant,
    pub utility: &'a UtilitySpec,
    /// Level for `cs` and `ebh_fixed`.
    pub level: Option<f64>,
    /// Weights for `ph_rcs_weighted`.
    pub weights: Option<&'a WeightVector>,
    pub seed: u64,
    pub trial: u64,
}

/// Run one variant. The candidate path is returned for every e-value based
/// variant and omitted for BH.
pub fn run_variant(
    real: &Realization,
    req: &SelectionRequest<'_>,
) -> Result<(SelectionOutcome, Option<SelectionPath>)> {
    let level = || {
        req.level
            .ok_or_else(|| Error::Config(format!("variant {} needs a fixed level", req.variant)))
    };
    match req.variant {
        Variant::PhCs => {
            let (out, path) = ph_cs(&real.cal, &real.test_scores, req.utility)?;
            Ok((out, Some(path)))
        }
        Variant::PhRcs => {
            let (out, path) = ph_rcs(&real.risk_e_values()?, req.utility)?;
            Ok((out, Some(path)))
        }
        Variant::PhRcsWeighted => {
            let owned;
            let w = match (req.weights, &real.weights) {
                (Some(w), _) => w,
                (None, Some(raw)) => {
                    owned = WeightVector::new(raw.clone())?;
                    &owned
                }
                (None, None) => {
                    return Err(Error::Config(
                        "ph_rcs_weighted needs weights (a 'w' test column or sim.weights)".into(),
                    ))
                }
            };
            let (out, path) = ph_rcs(&weighted_e(&real.risk_e_values()?, w)?, req.utility)?;
            Ok((out, Some(path)))
        }
        Variant::Cs => {
            let mut rng = substream(req.seed, req.trial, Purpose::TieBreak);
            let draws: Vec<f64> = (0..real.m()).map(|_| open_closed_unit(&mut rng)).collect();
            let p = p_vector(&real.cal, &real.test_scores, &draws)?;
            Ok((bh_select(&p, level()?)?, None))
        }
        Variant::EbhFixed => {
            let e = real.e_values()?;
            let out = ebh_select(&e, level()?)?;
            Ok((out, Some(build_path(&e))))
        }
    }
}

/// Realized FDP and `U(|R|, FDP)` of an outcome on a labeled realization.
pub fn realized_metrics(
    real: &Realization,
    outcome: &SelectionOutcome,
    utility: &UtilitySpec,
) -> Result<(f64, f64)> {
    let nulls = real
        .nulls
        .as_ref()
        .ok_or_else(|| Error::Data("realized FDP needs test labels".into()))?;
    let f = fdp(&outcome.members, nulls)?;
    Ok((f, utility.evaluate(outcome.size(), f)?))
}

/// Run a variant on a labeled realization and summarize the trial.
pub fn evaluate_trial(real: &Realization, req: &SelectionRequest<'_>) -> Result<TrialReport> {
    let (outcome, _) = run_variant(real, req)?;
    let (realized_fdp, realized_utility) = realized_metrics(real, &outcome, req.utility)?;
    Ok(TrialReport {
        trial_id: req.trial,
        seed: req.seed,
        variant: req.variant,
        set_size: outcome.size(),
        declared_alpha: outcome.alpha,
        realized_fdp,
        realized_utility,
    })
}

/// Machine-readable result of a single selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub variant: Variant,
    pub m: usize,
    /// 0-based row indices into the test batch.
    pub members: Vec<usize>,
    pub size: usize,
    pub alpha: f64,
    pub k: usize,
    pub utility: Option<f64>,
    pub realized_fdp: Option<f64>,
}

impl SelectionRecord {
    pub fn new(real: &Realization, outcome: &SelectionOutcome) -> Result<Self> {
        let realized_fdp = match &real.nulls {
            Some(n) => Some(fdp(&outcome.members, n)?),
            None => None,
        };
        Ok(SelectionRecord {
            variant: outcome.variant,
            m: real.m(),
            members: outcome.members.clone(),
            size: outcome.size(),
            alpha: outcome.alpha,
            k: outcome.k,
            utility: outcome.utility_value,
            realized_fdp,
        })
    }
}
