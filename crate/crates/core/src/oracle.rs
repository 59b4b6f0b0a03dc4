//! Brute-force reference implementations.
//!
//! These routines enumerate every candidate size directly and never sort, so
//! agreement with [`crate::selection`] is independent evidence rather than a
//! restatement of the same code. Only the threshold formulas are shared, so
//! both sides compare identical floating-point numbers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_e, oracle_e, CalibrationScores, EKind, EVector, PVector};
use crate::error::{Error, Result};
use crate::metrics::fdp;
use crate::selection::{bh_select, bh_threshold, ebh_select, ebh_threshold};

/// Relative slack for comparisons between real-valued quantities.
pub const MEAN_TOLERANCE: f64 = 1e-9;
/// Slack for deterministic inequalities that hold exactly in real arithmetic.
pub const FLOAT_NOISE: f64 = 1e-12;

/// Outcome of comparing a main code path against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance: String,
    pub main: String,
    pub oracle: String,
    pub agree: bool,
    pub detail: Option<String>,
}

impl OracleReport {
    fn new(instance: String, main: String, oracle: String, detail: Option<String>) -> Self {
        OracleReport {
            agree: detail.is_none(),
            instance,
            main,
            oracle,
            detail,
        }
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.agree { "agree" } else { "DISAGREE" };
        write!(
            f,
            "{verdict}: {}\n  main:   {}\n  oracle: {}",
            self.instance, self.main, self.oracle
        )?;
        if let Some(d) = &self.detail {
            write!(f, "\n  detail: {d}")?;
        }
        Ok(())
    }
}

/// BH by counting: `k` is feasible when at least `k` p-values lie at or
/// below `alpha k / m`; the largest feasible `k` fixes the cut.
pub fn brute_bh(p: &PVector, alpha_max: f64) -> Vec<usize> {
    let v = p.values();
    let m = v.len();
    let count = |cut: f64| v.iter().filter(|&&x| x <= cut).count();
    let mut k_star = 0;
    for k in 1..=m {
        if count(bh_threshold(alpha_max, k, m)) >= k {
            k_star = k;
        }
    }
    if k_star == 0 {
        return Vec::new();
    }
    let cut = bh_threshold(alpha_max, k_star, m);
    (0..m).filter(|&j| v[j] <= cut).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteEbh {
    pub members: Vec<usize>,
    /// `j` is a member exactly when `e_j >= m / (alpha |R|)`.
    pub self_consistent: bool,
}

/// e-BH by counting, followed by a direct self-consistency audit.
pub fn brute_ebh(e: &EVector, alpha: f64) -> BruteEbh {
    let v = e.values();
    let m = v.len();
    let count = |cut: f64| v.iter().filter(|&&x| x >= cut).count();
    let mut k_star = 0;
    for k in 1..=m {
        if count(ebh_threshold(alpha, k, m)) >= k {
            k_star = k;
        }
    }
    let members: Vec<usize> = if k_star == 0 {
        Vec::new()
    } else {
        let cut = ebh_threshold(alpha, k_star, m);
        (0..m).filter(|&j| v[j] >= cut).collect()
    };
    let cut = ebh_threshold(alpha, members.len(), m);
    let self_consistent = (0..m).all(|j| members.binary_search(&j).is_ok() == (v[j] >= cut));
    BruteEbh {
        members,
        self_consistent,
    }
}

/// Average of the oracle e-variable over all `n + 1` placements of the test
/// role within `scores`; equals 1 by exchangeability.
pub fn exact_mean_oracle_e(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::param("need at least two scores (n >= 1)"));
    }
    if scores.iter().all(|&s| s == 0.0) {
        return Err(Error::param("mean oracle e-value is undefined for all-zero scores"));
    }
    let mut total = 0.0;
    let mut rest = Vec::with_capacity(scores.len() - 1);
    for (i, &s) in scores.iter().enumerate() {
        rest.clear();
        rest.extend(scores.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &v)| v));
        total += oracle_e(&CalibrationScores::new(rest.clone())?, s)?.value;
    }
    Ok(total / scores.len() as f64)
}

/// Checks `conformal_e(threshold score) <= oracle_e(true score)`, which holds
/// whenever the threshold score does not exceed the true score.
pub fn check_null_domination(
    cal: &CalibrationScores,
    threshold_score: f64,
    true_score: f64,
) -> Result<OracleReport> {
    let e = conformal_e(cal, threshold_score)?.value;
    let e_star = oracle_e(cal, true_score)?.value;
    let detail = (e > e_star + FLOAT_NOISE * e_star.max(1.0))
        .then(|| format!("conformal e {e} exceeds oracle e {e_star}"));
    Ok(OracleReport::new(
        format!("n={}, S(c)={threshold_score}, S(y)={true_score}", cal.len()),
        format!("{e}"),
        format!("{e_star}"),
        detail,
    ))
}

/// For every level in `alpha_grid`, checks
/// `FDP(ebh(e, alpha)) / alpha <= mean(e_oracle)`; reports the first violation.
pub fn check_level_uniform(
    e_oracle: &EVector,
    e: &EVector,
    nulls: &[bool],
    alpha_grid: &[f64],
) -> Result<OracleReport> {
    if e_oracle.kind() != EKind::Oracle {
        return Err(Error::param("the reference vector must hold oracle e-values"));
    }
    let m = e.len();
    if e_oracle.len() != m || nulls.len() != m {
        return Err(Error::param("e-values, oracle e-values and null flags differ in length"));
    }
    let bound = e_oracle.values().iter().sum::<f64>() / m as f64;
    let mut worst = 0.0f64;
    let mut detail = None;
    for &alpha in alpha_grid {
        let sel = ebh_select(e, alpha)?;
        let ratio = fdp(&sel.members, nulls)? / alpha;
        worst = worst.max(ratio);
        if ratio > bound + FLOAT_NOISE * bound.max(1.0) {
            detail = Some(format!(
                "alpha={alpha}: FDP/alpha={ratio} exceeds mean oracle e {bound}"
            ));
            break;
        }
    }
    Ok(OracleReport::new(
        format!("m={m}, {} levels", alpha_grid.len()),
        format!("max FDP/alpha {worst}"),
        format!("mean oracle e {bound}"),
        detail,
    ))
}

fn fmt_set(s: &[usize]) -> String {
    format!("{s:?}")
}

/// Compares [`bh_select`] with [`brute_bh`].
pub fn compare_bh(p: &PVector, alpha_max: f64) -> Result<OracleReport> {
    let main = bh_select(p, alpha_max)?.members;
    let reference = brute_bh(p, alpha_max);
    let detail = (main != reference).then(|| "selected sets differ".to_string());
    Ok(OracleReport::new(
        format!("BH m={}, alpha={alpha_max}, p={:?}", p.len(), p.values()),
        fmt_set(&main),
        fmt_set(&reference),
        detail,
    ))
}

/// Compares [`ebh_select`] with [`brute_ebh`], including the audit.
pub fn compare_ebh(e: &EVector, alpha: f64) -> Result<OracleReport> {
    let main = ebh_select(e, alpha)?.members;
    let reference = brute_ebh(e, alpha);
    let detail = if !reference.self_consistent {
        Some("reference set fails the self-consistency audit".to_string())
    } else if main != reference.members {
        Some("selected sets differ".to_string())
    } else {
        None
    };
    Ok(OracleReport::new(
        format!("e-BH m={}, alpha={alpha}, e={:?}", e.len(), e.values()),
        fmt_set(&main),
        fmt_set(&reference.members),
        detail,
    ))
}

/// Random e-vector mixing exact zeros, repeated values and continuous draws,
/// scaled so that e-BH selects a non-trivial fraction of the time.
pub fn random_e_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> EVector {
    let scale = m as f64 * 4.0;
    let values = (0..m)
        .map(|_| match rng.gen_range(0..4) {
            0 => 0.0,
            1 => f64::from(rng.gen_range(1..6u8)),
            _ => rng.gen::<f64>() * scale,
        })
        .collect();
    EVector::new(values, EKind::Standard).expect("finite non-negative draws")
}

/// Random p-vector on a conformal grid `k / (n + 1)` so ties occur.
pub fn random_p_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> PVector {
    let n1 = rng.gen_range(2..60u32);
    let values = (0..m)
        .map(|_| {
            if rng.gen_bool(0.5) {
                f64::from(rng.gen_range(1..=n1)) / f64::from(n1)
            } else {
                1.0 - rng.gen::<f64>()
            }
        })
        .collect();
    PVector::new(values, vec![1.0; m]).expect("values in (0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};

    fn pv(v: &[f64]) -> PVector {
        PVector::new(v.to_vec(), vec![1.0; v.len()]).unwrap()
    }

    fn ev(v: &[f64]) -> EVector {
        EVector::new(v.to_vec(), EKind::Standard).unwrap()
    }

    #[test]
    fn brute_bh_examples() {
        assert_eq!(brute_bh(&pv(&[0.2, 0.6]), 0.5), vec![0]);
        assert!(brute_bh(&pv(&[1.0, 1.0, 1.0]), 0.5).is_empty());
        assert_eq!(brute_bh(&pv(&[0.4]), 0.5), vec![0]);
    }

    #[test]
    fn brute_ebh_examples() {
        let r = brute_ebh(&ev(&[6.0, 3.0, 0.5]), 0.5);
        assert_eq!(r.members, vec![0, 1]);
        assert!(r.self_consistent);
        let r = brute_ebh(&ev(&[0.0, 0.0]), 0.5);
        assert!(r.members.is_empty() && r.self_consistent);
        assert_eq!(brute_ebh(&ev(&[10.0]), 0.2).members, vec![0]);
    }

    #[test]
    fn mean_oracle_examples() {
        assert!((exact_mean_oracle_e(&[1.0, 3.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((exact_mean_oracle_e(&[2.5; 7]).unwrap() - 1.0).abs() < 1e-12);
        assert!((exact_mean_oracle_e(&[0.0, 0.0, 5.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(exact_mean_oracle_e(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn level_uniform_examples() {
        let oracle = ev(&[9.0, 0.2]).with_kind(EKind::Oracle);
        // unit 0 is null and selected at every level with its huge oracle value
        let e = ev(&[4.0, 0.1]);
        let rep = check_level_uniform(&oracle, &e, &[true, false], &[0.5, 0.9]).unwrap();
        assert!(rep.agree, "{rep}");
        let rep = check_level_uniform(&oracle, &ev(&[0.0, 0.0]), &[true, true], &[0.1]).unwrap();
        assert!(rep.agree);
        assert!(check_level_uniform(&e, &e, &[true, false], &[0.5]).is_err());
    }

    #[test]
    fn level_uniform_detects_a_broken_bound() {
        // oracle values below the e-values of nulls break the premise
        let oracle = ev(&[0.1, 0.1]).with_kind(EKind::Oracle);
        let e = ev(&[8.0, 8.0]);
        let rep = check_level_uniform(&oracle, &e, &[true, true], &[0.5]).unwrap();
        assert!(!rep.agree);
    }

    #[test]
    fn references_agree_with_selection() {
        let mut rng = substream(17, 0, Purpose::Data);
        for m in 1..=10 {
            for _ in 0..100 {
                let alpha = rng.gen_range(0.01..0.99);
                let p = random_p_vector(&mut rng, m);
                assert!(compare_bh(&p, alpha).unwrap().agree);
                let e = random_e_vector(&mut rng, m);
                let rep = compare_ebh(&e, alpha).unwrap();
                assert!(rep.agree, "{rep}");
            }
        }
    }

    #[test]
    fn null_domination_holds_on_random_instances() {
        let mut rng = substream(5, 1, Purpose::Data);
        for _ in 0..500 {
            let n = rng.gen_range(1..30);
            let cal = CalibrationScores::new((0..n).map(|_| rng.gen::<f64>() * 3.0).collect())
                .unwrap();
            let t = rng.gen::<f64>() * 3.0;
            let s = t + rng.gen::<f64>();
            assert!(check_null_domination(&cal, t, s).unwrap().agree);
        }
    }
}
