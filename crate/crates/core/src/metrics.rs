//! Realized error and reliability statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::Variant;

/// False discovery proportion of `members` given per-unit null indicators
/// (`null_flags[j]` is `Y_j <= c_j`).
pub fn fdp(members: &[usize], null_flags: &[bool]) -> Result<f64> {
    let mut nulls = 0usize;
    for &j in members {
        let flag = null_flags.get(j).ok_or_else(|| {
            Error::param(format!("member {j} out of range for {} units", null_flags.len()))
        })?;
        nulls += usize::from(*flag);
    }
    Ok(nulls as f64 / members.len().max(1) as f64)
}

/// Generalized FDP: mean loss over the selected units, losses in `[0, 1]`.
pub fn generalized_fdp(members: &[usize], losses: &[f64]) -> Result<f64> {
    if let Some(l) = losses.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::param(format!("loss {l} outside [0, 1]")));
    }
    let mut total = 0.0;
    for &j in members {
        total += losses.get(j).ok_or_else(|| {
            Error::param(format!("member {j} out of range for {} units", losses.len()))
        })?;
    }
    Ok(total / members.len().max(1) as f64)
}

/// Outcome of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial_id: u64,
    /// Master seed; together with `trial_id` it identifies the substreams.
    pub seed: u64,
    pub variant: Variant,
    pub set_size: usize,
    pub declared_alpha: f64,
    pub realized_fdp: f64,
    pub realized_utility: f64,
}

impl TrialReport {
    /// `FDP / alpha`, with empty selections contributing 0.
    pub fn ratio(&self) -> Result<f64> {
        if self.set_size == 0 || self.realized_fdp == 0.0 {
            return Ok(0.0);
        }
        if self.declared_alpha <= 0.0 {
            return Err(Error::Invariant(format!(
                "trial {}: realized FDP {} with declared alpha {}",
                self.trial_id, self.realized_fdp, self.declared_alpha
            )));
        }
        Ok(self.realized_fdp / self.declared_alpha)
    }
}

/// Sample mean with its standard error (unbiased variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    /// For a single observation or a constant sample the standard error is
    /// reported as exactly 0.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanSe { mean: 0.0, se: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 || !mean.is_finite() || xs.iter().all(|&x| x == xs[0]) {
            return MeanSe { mean, se: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        MeanSe {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }

    /// `mean <= bound + z * se`.
    pub fn within(&self, bound: f64, z: f64) -> bool {
        self.mean <= bound + z * self.se
    }
}

/// Mean of `FDP / alpha` over trials.
pub fn reliability_ratio(reports: &[TrialReport]) -> Result<MeanSe> {
    let ratios = reports.iter().map(TrialReport::ratio).collect::<Result<Vec<_>>>()?;
    Ok(MeanSe::of(&ratios))
}

/// Compares the average declared level against the empirical FDR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorGap {
    pub mean_alpha: f64,
    pub mean_fdp: f64,
    /// `mean_alpha - mean_fdp`.
    pub gap: f64,
    /// Standard error of the paired per-trial differences.
    pub se: f64,
}

pub fn taylor_gap(reports: &[TrialReport]) -> TaylorGap {
    let alphas: Vec<f64> = reports.iter().map(|r| r.declared_alpha).collect();
    let fdps: Vec<f64> = reports.iter().map(|r| r.realized_fdp).collect();
    let diffs: Vec<f64> = alphas.iter().zip(&fdps).map(|(a, f)| a - f).collect();
    let mean_alpha = MeanSe::of(&alphas).mean;
    let mean_fdp = MeanSe::of(&fdps).mean;
    TaylorGap {
        mean_alpha,
        mean_fdp,
        gap: mean_alpha - mean_fdp,
        se: MeanSe::of(&diffs).se,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_trials: usize,
    /// Empirical FDR.
    pub mean_fdp: MeanSe,
    pub mean_alpha: MeanSe,
    pub reliability_ratio: MeanSe,
    pub mean_size: MeanSe,
    pub mean_utility: MeanSe,
    pub taylor: TaylorGap,
}

impl AggregateReport {
    pub fn from_reports(reports: &[TrialReport]) -> Result<Self> {
        let col = |f: fn(&TrialReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
        Ok(AggregateReport {
            n_trials: reports.len(),
            mean_fdp: MeanSe::of(&col(|r| r.realized_fdp)),
            mean_alpha: MeanSe::of(&col(|r| r.declared_alpha)),
            reliability_ratio: reliability_ratio(reports)?,
            mean_size: MeanSe::of(&col(|r| r.set_size as f64)),
            mean_utility: MeanSe::of(&col(|r| r.realized_utility)),
            taylor: taylor_gap(reports),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(size: usize, alpha: f64, fdp: f64) -> TrialReport {
        TrialReport {
            trial_id: 0,
            seed: 0,
            variant: Variant::PhCs,
            set_size: size,
            declared_alpha: alpha,
            realized_fdp: fdp,
            realized_utility: 0.0,
        }
    }

    #[test]
    fn fdp_examples() {
        assert_eq!(fdp(&[0, 1], &[false, true, false]).unwrap(), 0.5);
        assert_eq!(fdp(&[], &[true, true]).unwrap(), 0.0);
        assert_eq!(fdp(&[0, 1], &[true, true]).unwrap(), 1.0);
        assert!(fdp(&[3], &[true]).is_err());
    }

    #[test]
    fn generalized_examples() {
        assert_eq!(generalized_fdp(&[0], &[0.3, 0.9]).unwrap(), 0.3);
        assert_eq!(generalized_fdp(&[], &[0.3]).unwrap(), 0.0);
        assert!(generalized_fdp(&[0], &[1.2]).is_err());
    }

    #[test]
    fn generalized_matches_fdp_on_indicators_exhaustively() {
        for m in 1..=12usize {
            let flags: Vec<bool> = (0..m).map(|j| (j * 7 + m) % 3 == 0).collect();
            let losses: Vec<f64> = flags.iter().map(|&f| f64::from(u8::from(f))).collect();
            for mask in 0u32..(1 << m) {
                let members: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
                assert_eq!(
                    fdp(&members, &flags).unwrap(),
                    generalized_fdp(&members, &losses).unwrap()
                );
            }
        }
    }

    #[test]
    fn reliability_examples() {
        let r = reliability_ratio(&[report(2, 0.4, 0.2), report(1, 0.5, 0.5)]).unwrap();
        assert!((r.mean - 0.75).abs() < 1e-15);
        assert_eq!(reliability_ratio(&[report(0, 0.0, 0.0)]).unwrap().mean, 0.0);
        assert!((reliability_ratio(&[report(3, 0.5, 0.2)]).unwrap().mean - 0.4).abs() < 1e-15);
        assert!(matches!(
            reliability_ratio(&[report(2, 0.0, 0.5)]),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn clamped_alpha_ratio_is_mean_fdp() {
        let reps = [report(4, 1.0, 0.25), report(2, 1.0, 0.5)];
        let r = reliability_ratio(&reps).unwrap();
        assert!((r.mean - 0.375).abs() < 1e-15);
        assert!(r.mean <= 1.0);
    }

    #[test]
    fn taylor_examples() {
        let g = taylor_gap(&[report(2, 0.3, 0.25)]);
        assert!((g.gap - 0.05).abs() < 1e-15);
        assert_eq!(taylor_gap(&[report(0, 0.0, 0.0)]).gap, 0.0);
    }

    #[test]
    fn single_trial_aggregate_equals_trial() {
        let agg = AggregateReport::from_reports(&[report(3, 0.5, 0.2)]).unwrap();
        assert_eq!(agg.n_trials, 1);
        assert_eq!(agg.mean_fdp, MeanSe { mean: 0.2, se: 0.0 });
        assert_eq!(agg.mean_size.mean, 3.0);
    }

    #[test]
    fn standard_error_uses_unbiased_variance() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
