//! Conformal p-variables and e-variables.
//!
//! All functions are deterministic: randomized tie-breaking draws are passed
//! in by the caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-negative calibration scores `S_1, ..., S_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationScores {
    values: Vec<f64>,
    sum: f64,
}

impl CalibrationScores {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("at least one calibration score is required".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Data(format!(
                "calibration score {i} must be finite and non-negative, got {v}"
            )));
        }
        let sum = values.iter().sum();
        Ok(CalibrationScores { values, sum })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EKind {
    Standard,
    Oracle,
    RiskAdjusted,
    Weighted,
}

/// Per-test-unit e-variables.
#[derive(Debug, Clone, PartialEq)]
pub struct EVector {
    values: Vec<f64>,
    kind: EKind,
    degenerate: usize,
}

impl EVector {
    pub fn new(values: Vec<f64>, kind: EKind) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Data(format!(
                "e-value {i} must be finite and non-negative, got {v}"
            )));
        }
        Ok(EVector {
            values,
            kind,
            degenerate: 0,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> EKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of units whose e-value was forced to 0 by an all-zero score multiset.
    pub fn degenerate_count(&self) -> usize {
        self.degenerate
    }

    /// Relabel the vector, e.g. to mark binary-loss e-values as risk-adjusted.
    pub fn with_kind(mut self, kind: EKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Per-test-unit p-variables plus the tie-break draws that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PVector {
    values: Vec<f64>,
    tiebreak_draws: Vec<f64>,
}

impl PVector {
    pub fn new(values: Vec<f64>, tiebreak_draws: Vec<f64>) -> Result<Self> {
        if values.len() != tiebreak_draws.len() {
            return Err(Error::param("p-values and tie-break draws differ in length"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::Data(format!("p-value {v} outside (0, 1]")));
        }
        Ok(PVector {
            values,
            tiebreak_draws,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tiebreak_draws(&self) -> &[f64] {
        &self.tiebreak_draws
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Non-negative weights subject to the budget `sum(w) <= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    /// Validates non-negativity and the budget for a batch of `values.len()` units.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(format!(
                "weights must be finite and non-negative, got {v}"
            )));
        }
        let sum: f64 = values.iter().sum();
        let m = values.len();
        // floating slack for weights rescaled to sum exactly to m
        if sum > m as f64 * (1.0 + 1e-12) {
            return Err(Error::Budget { sum, m });
        }
        Ok(WeightVector { values })
    }

    /// Rescale arbitrary non-negative weights so that they sum to `m`.
    pub fn rescaled(raw: &[f64]) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::param("weights must have a positive finite sum"));
        }
        let m = raw.len() as f64;
        WeightVector::new(raw.iter().map(|w| w * m / sum).collect())
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector {
            values: vec![1.0; m],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// An e-value together with a flag marking the all-zero degenerate case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EValue {
    pub value: f64,
    pub degenerate: bool,
}

fn check_score(s: f64) -> Result<()> {
    if s.is_finite() && s >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("score must be finite and non-negative, got {s}")))
    }
}

/// Randomized conformal p-variable `(u (1 + t) + g) / (n + 1)`.
///
/// `g` counts calibration scores strictly above `test_score` and `t` counts
/// ties. The draw `u` must lie in `(0, 1]`, which keeps the result in `(0, 1]`.
pub fn conformal_p(cal: &CalibrationScores, test_score: f64, u: f64) -> Result<f64> {
    check_score(test_score)?;
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::param(format!("tie-break draw must lie in (0, 1], got {u}")));
    }
    let (mut greater, mut ties) = (0usize, 0usize);
    for &s in cal.values() {
        if s > test_score {
            greater += 1;
        } else if s == test_score {
            ties += 1;
        }
    }
    let n = cal.len() as f64;
    Ok((u * (1 + ties) as f64 + greater as f64) / (n + 1.0))
}

/// Score-ratio e-variable `s / ((sum_i S_i + s) / (n + 1))`.
fn ratio_e(cal: &CalibrationScores, s: f64) -> Result<EValue> {
    check_score(s)?;
    let n1 = (cal.len() + 1) as f64;
    let total = cal.sum + s;
    if total == 0.0 {
        return Ok(EValue {
            value: 0.0,
            degenerate: true,
        });
    }
    let value = if total.is_finite() {
        s / (total / n1)
    } else {
        // scores near f64::MAX (large gamma): rescale by the largest score
        let top = cal.values().iter().copied().fold(s, f64::max);
        let scaled: f64 = cal.values().iter().map(|v| v / top).sum::<f64>() + s / top;
        (s / top) / (scaled / n1)
    };
    Ok(EValue {
        value,
        degenerate: false,
    })
}

/// Conformal e-variable for a test score evaluated at its threshold.
pub fn conformal_e(cal: &CalibrationScores, test_score: f64) -> Result<EValue> {
    ratio_e(cal, test_score)
}

/// Oracle e-variable, evaluated at the score of the true (hidden) label.
pub fn oracle_e(cal: &CalibrationScores, true_test_score: f64) -> Result<EValue> {
    ratio_e(cal, true_test_score)
}

/// Risk-adjusted e-variable for the binary loss `1{Y <= c}`; it coincides
/// with the conformal e-variable.
pub fn binary_risk_e(cal: &CalibrationScores, test_score: f64) -> Result<EValue> {
    ratio_e(cal, test_score)
}

/// Conformal e-variables for a whole test batch.
pub fn e_vector(cal: &CalibrationScores, test_scores: &[f64], kind: EKind) -> Result<EVector> {
    let mut values = Vec::with_capacity(test_scores.len());
    let mut degenerate = 0;
    for &s in test_scores {
        let e = ratio_e(cal, s)?;
        degenerate += usize::from(e.degenerate);
        values.push(e.value);
    }
    let mut ev = EVector::new(values, kind)?;
    ev.degenerate = degenerate;
    Ok(ev)
}

/// Conformal p-variables for a whole test batch, one draw per unit.
pub fn p_vector(cal: &CalibrationScores, test_scores: &[f64], draws: &[f64]) -> Result<PVector> {
    if test_scores.len() != draws.len() {
        return Err(Error::param("one tie-break draw per test unit is required"));
    }
    let values = test_scores
        .iter()
        .zip(draws)
        .map(|(&s, &u)| conformal_p(cal, s, u))
        .collect::<Result<Vec<_>>>()?;
    PVector::new(values, draws.to_vec())
}

/// Elementwise `w_j * E_j`.
pub fn weighted_e(e: &EVector, w: &WeightVector) -> Result<EVector> {
    if e.len() != w.values().len() {
        return Err(Error::param(format!(
            "{} weights supplied for {} e-values",
            w.values().len(),
            e.len()
        )));
    }
    let values = e.values().iter().zip(w.values()).map(|(a, b)| a * b).collect();
    let mut out = EVector::new(values, EKind::Weighted)?;
    out.degenerate = e.degenerate;
    Ok(out)
}
