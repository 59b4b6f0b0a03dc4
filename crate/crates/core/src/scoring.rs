//! Conformity scores.
//!
//! A score `S(x, y)` is non-negative and non-increasing in the response `y`;
//! larger values mean stronger evidence that the true outcome exceeds `y`.
//! Predictions are first mapped into `[eps, 1 - eps]` so the odds ratio of
//! the clipped-odds family is always finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default prediction clamp margin.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Default clip floor for responses above the threshold.
pub const DEFAULT_DELTA: f64 = 1e-6;
/// Default odds exponent for synthetic regression data.
pub const GAMMA_SYNTHETIC: f64 = 3.0;
/// Default odds exponent for ingested classifier predictions.
pub const GAMMA_INGESTED: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// `max((mu / (1 - mu))^gamma, delta)` when `y <= c`, `delta` otherwise.
    ClippedOdds,
    /// `max(mu - y, 0)`.
    Hinge,
    /// `exp(mu - y)`.
    Exponential,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clipped_odds" => Ok(ScoreKind::ClippedOdds),
            "hinge" => Ok(ScoreKind::Hinge),
            "exponential" => Ok(ScoreKind::Exponential),
            other => Err(Error::Config(format!("unknown score kind '{other}'"))),
        }
    }
}

/// Min-max normalization range, taken from training-set predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRange {
    pub min: f64,
    pub max: f64,
}

impl NormRange {
    /// Range spanned by a set of predictions.
    pub fn from_predictions(preds: &[f64]) -> Result<Self> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &p in preds {
            if !p.is_finite() {
                return Err(Error::Data("non-finite training prediction".into()));
            }
            min = min.min(p);
            max = max.max(p);
        }
        if !(min < max) {
            return Err(Error::Data(format!(
                "training predictions span an empty range [{min}, {max}]"
            )));
        }
        Ok(NormRange { min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    pub kind: ScoreKind,
    pub gamma: f64,
    pub delta: f64,
    pub eps: f64,
    /// `None` disables min-max normalization; raw predictions must then
    /// already lie in `[0, 1]`.
    pub norm: Option<NormRange>,
}

impl Default for ScoreSpec {
    fn default() -> Self {
        ScoreSpec {
            kind: ScoreKind::ClippedOdds,
            gamma: GAMMA_SYNTHETIC,
            delta: DEFAULT_DELTA,
            eps: DEFAULT_EPS,
            norm: None,
        }
    }
}

impl ScoreSpec {
    pub fn clipped_odds(gamma: f64) -> Self {
        ScoreSpec {
            gamma,
            ..Default::default()
        }
    }

    pub fn with_norm(mut self, norm: NormRange) -> Self {
        self.norm = Some(norm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::param(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::param(format!("eps must lie in (0, 0.5), got {}", self.eps)));
        }
        if let Some(n) = self.norm {
            if !(n.min < n.max) || !n.min.is_finite() || !n.max.is_finite() {
                return Err(Error::param(format!(
                    "normalization requires norm_min < norm_max, got [{}, {}]",
                    n.min, n.max
                )));
            }
        }
        Ok(())
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.eps, 1.0 - self.eps)
    }
}

/// Predicted quality `mu(x)`, clamped into `[eps, 1 - eps]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Prediction(f64);

impl Prediction {
    /// Wrap a value already inside the open unit interval.
    pub fn new(mu: f64) -> Result<Self> {
        if mu > 0.0 && mu < 1.0 {
            Ok(Prediction(mu))
        } else {
            Err(Error::param(format!("prediction must lie in (0, 1), got {mu}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Map a raw model output into a clamped prediction.
///
/// With a normalization range the output is `(raw - min) / (max - min)`;
/// values outside the training range are clamped rather than rejected.
pub fn normalize_prediction(raw: f64, spec: &ScoreSpec) -> Result<Prediction> {
    if !raw.is_finite() {
        return Err(Error::param(format!("non-finite raw prediction {raw}")));
    }
    let unit = match spec.norm {
        Some(n) => {
            if !(n.min < n.max) {
                return Err(Error::param("normalization requires norm_min < norm_max"));
            }
            (raw - n.min) / (n.max - n.min)
        }
        None => raw,
    };
    Ok(Prediction(spec.clamp(unit)))
}

/// Score of prediction `mu` at response `y` with requirement threshold `threshold`.
pub fn score_value(spec: &ScoreSpec, mu: Prediction, y: f64, threshold: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::param(format!("non-finite response {y}")));
    }
    let mu = mu.value();
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::param(format!("prediction must lie in (0, 1), got {mu}")));
    }
    let s = match spec.kind {
        ScoreKind::ClippedOdds => {
            if y <= threshold {
                // floored at delta so the score stays non-increasing in y
                (mu / (1.0 - mu)).powf(spec.gamma).max(spec.delta)
            } else {
                spec.delta
            }
        }
        ScoreKind::Hinge => (mu - y).max(0.0),
        ScoreKind::Exponential => (mu - y).exp(),
    };
    if !s.is_finite() {
        return Err(Error::param(format!(
            "score overflow at mu = {mu} (gamma = {}); lower gamma or raise eps",
            spec.gamma
        )));
    }
    Ok(s)
}

/// Score evaluated at the requirement threshold itself, computable without labels.
pub fn score_at_threshold(spec: &ScoreSpec, mu: Prediction, c: f64) -> Result<f64> {
    score_value(spec, mu, c, c)
}
