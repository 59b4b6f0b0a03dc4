//! BH, e-BH and the post-hoc candidate path.
//!
//! The path lists, for `k = 0..=m`, the e-BH-reachable set
//! `R_k = { j : E_j >= E_(k) }` together with the FDP estimate
//! `min(1, m / (k E_(k)))`. A utility is then maximized over the path; the
//! reliability bound on the reported estimate holds for any such
//! data-dependent choice.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::conformal::{e_vector, CalibrationScores, EKind, EVector, PVector};
use crate::error::{Error, Result};
use crate::report::fmt_sig;
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// BH over conformal p-variables at a fixed level.
    Cs,
    /// e-BH at a fixed level.
    EbhFixed,
    PhCs,
    PhRcs,
    PhRcsWeighted,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Cs => "cs",
            Variant::EbhFixed => "ebh_fixed",
            Variant::PhCs => "ph_cs",
            Variant::PhRcs => "ph_rcs",
            Variant::PhRcsWeighted => "ph_rcs_weighted",
        }
    }

    pub fn is_post_hoc(self) -> bool {
        matches!(self, Variant::PhCs | Variant::PhRcs | Variant::PhRcsWeighted)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cs" => Variant::Cs,
            "ebh_fixed" => Variant::EbhFixed,
            "ph_cs" => Variant::PhCs,
            "ph_rcs" => Variant::PhRcs,
            "ph_rcs_weighted" => Variant::PhRcsWeighted,
            other => return Err(Error::Config(format!("unknown variant '{other}'"))),
        })
    }
}

/// Result of one selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Selected test-unit indices (0-based, ascending).
    pub members: Vec<usize>,
    /// Declared FDP level: the path estimate for post-hoc variants, the
    /// pre-specified level otherwise.
    pub alpha: f64,
    /// Chosen path index (post-hoc) or the step-up index `k*` (fixed level).
    pub k: usize,
    pub utility_value: Option<f64>,
    pub variant: Variant,
}

impl SelectionOutcome {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("level must lie in (0, 1), got {alpha}")))
    }
}

/// BH step-up threshold at index `k`.
pub(crate) fn bh_threshold(alpha: f64, k: usize, m: usize) -> f64 {
    alpha * k as f64 / m as f64
}

/// e-BH self-consistent threshold for a set of size `k`.
pub(crate) fn ebh_threshold(alpha: f64, k: usize, m: usize) -> f64 {
    m as f64 / (alpha * k as f64)
}

/// Indices sorted by e-value, largest first; ties keep index order.
fn order_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Conventional conformal selection: BH at a fixed level `alpha_max`.
pub fn bh_select(p: &PVector, alpha_max: f64) -> Result<SelectionOutcome> {
    check_level(alpha_max)?;
    let m = p.len();
    let mut sorted = p.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let k_star = (1..=m)
        .rev()
        .find(|&k| sorted[k - 1] <= bh_threshold(alpha_max, k, m))
        .unwrap_or(0);
    let members = if k_star == 0 {
        Vec::new()
    } else {
        let cut = bh_threshold(alpha_max, k_star, m);
        (0..m).filter(|&j| p.values()[j] <= cut).collect()
    };
    Ok(SelectionOutcome {
        members,
        alpha: alpha_max,
        k: k_star,
        utility_value: None,
        variant: Variant::Cs,
    })
}

/// e-BH at a fixed level.
pub fn ebh_select(e: &EVector, alpha: f64) -> Result<SelectionOutcome> {
    check_level(alpha)?;
    let m = e.len();
    let order = order_desc(e.values());
    let k_star = (1..=m)
        .rev()
        .find(|&k| e.values()[order[k - 1]] >= ebh_threshold(alpha, k, m))
        .unwrap_or(0);
    let mut members = if k_star == 0 {
        Vec::new()
    } else {
        let cut = e.values()[order[k_star - 1]];
        order.iter().copied().filter(|&j| e.values()[j] >= cut).collect()
    };
    members.sort_unstable();
    Ok(SelectionOutcome {
        members,
        alpha,
        k: k_star,
        utility_value: None,
        variant: Variant::EbhFixed,
    })
}

/// One candidate on the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub k: usize,
    /// `E_(k)`; undefined for `k = 0`.
    pub order_stat: Option<f64>,
    /// `|R_k|`, which exceeds `k` when `E_(k)` is tied with later values.
    pub set_size: usize,
    pub alpha_hat: f64,
}

/// Nested candidate sets `R_0 ⊆ R_1 ⊆ ... ⊆ R_m` with FDP estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPath {
    entries: Vec<PathEntry>,
    order: Vec<usize>,
    m: usize,
}

impl SelectionPath {
    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Members of `R_k`, in decreasing e-value order.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.order[..self.entries[k].set_size]
    }

    /// Members of `R_k`, ascending.
    pub fn sorted_members(&self, k: usize) -> Vec<usize> {
        let mut v = self.members(k).to_vec();
        v.sort_unstable();
        v
    }

    /// CSV dump: `k,order_stat,set_size,alpha_hat,utility,chosen`.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        utility: &UtilitySpec,
        chosen: Option<usize>,
    ) -> Result<()> {
        let io = |e| Error::io("<path csv>", e);
        writeln!(w, "k,order_stat,set_size,alpha_hat,utility,chosen").map_err(io)?;
        for entry in &self.entries {
            let u = utility.evaluate(entry.set_size, entry.alpha_hat)?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                entry.k,
                entry.order_stat.map(fmt_sig).unwrap_or_default(),
                entry.set_size,
                fmt_sig(entry.alpha_hat),
                fmt_sig(u),
                u8::from(chosen == Some(entry.k))
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// Build the full candidate path from e-values.
pub fn build_path(e: &EVector) -> SelectionPath {
    let m = e.len();
    let values = e.values();
    let order = order_desc(values);
    let mut entries = Vec::with_capacity(m + 1);
    entries.push(PathEntry {
        k: 0,
        order_stat: None,
        set_size: 0,
        alpha_hat: 0.0,
    });
    let mut size = 0;
    for k in 1..=m {
        let stat = values[order[k - 1]];
        size = size.max(k);
        while size < m && values[order[size]] >= stat {
            size += 1;
        }
        let alpha_hat = if stat > 0.0 {
            (m as f64 / (k as f64 * stat)).min(1.0)
        } else {
            1.0
        };
        entries.push(PathEntry {
            k,
            order_stat: Some(stat),
            set_size: size,
            alpha_hat,
        });
    }
    SelectionPath { entries, order, m }
}

/// Pick the path entry maximizing `U(|R_k|, alpha_hat_k)`.
///
/// Entries the utility does not admit (sets below `r_min` for the
/// constrained-size utility) are skipped; since `|R_m| = m`, some entry is
/// always admissible once the utility is validated. Ties go to the smallest `k`.
pub fn maximize_utility(
    path: &SelectionPath,
    utility: &UtilitySpec,
    variant: Variant,
) -> Result<SelectionOutcome> {
    utility.validate(path.m)?;
    let mut best: Option<(usize, f64)> = None;
    for entry in path.entries.iter().filter(|e| utility.admits(e.set_size)) {
        let u = utility.evaluate(entry.set_size, entry.alpha_hat)?;
        if best.is_none_or(|(_, b)| u > b) {
            best = Some((entry.k, u));
        }
    }
    let (k, u) = best.ok_or_else(|| Error::Invariant("no admissible path entry".into()))?;
    Ok(SelectionOutcome {
        members: path.sorted_members(k),
        alpha: path.entries[k].alpha_hat,
        k,
        utility_value: Some(u),
        variant,
    })
}

/// Post-hoc conformal selection from calibration and threshold test scores.
pub fn ph_cs(
    cal: &CalibrationScores,
    test_scores: &[f64],
    utility: &UtilitySpec,
) -> Result<(SelectionOutcome, SelectionPath)> {
    let e = e_vector(cal, test_scores, EKind::Standard)?;
    let path = build_path(&e);
    let outcome = maximize_utility(&path, utility, Variant::PhCs)?;
    Ok((outcome, path))
}

/// Post-hoc risk-controlled selection from risk-adjusted (possibly
/// weighted) e-variables.
pub fn ph_rcs(e_g: &EVector, utility: &UtilitySpec) -> Result<(SelectionOutcome, SelectionPath)> {
    let variant = match e_g.kind() {
        EKind::Weighted => Variant::PhRcsWeighted,
        _ => Variant::PhRcs,
    };
    let path = build_path(e_g);
    let outcome = maximize_utility(&path, utility, variant)?;
    Ok((outcome, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{weighted_e, WeightVector};
    use proptest::prelude::*;

    fn ev(v: &[f64]) -> EVector {
        EVector::new(v.to_vec(), EKind::Standard).unwrap()
    }

    fn pv(v: &[f64]) -> PVector {
        PVector::new(v.to_vec(), vec![1.0; v.len()]).unwrap()
    }

    #[test]
    fn bh_examples() {
        let out = bh_select(&pv(&[0.2, 0.6]), 0.5).unwrap();
        assert_eq!((out.k, out.members.clone()), (1, vec![0]));
        assert!(bh_select(&pv(&[1.0, 1.0, 1.0]), 0.5).unwrap().members.is_empty());
        let out = bh_select(&pv(&[0.1, 0.2]), 0.5).unwrap();
        assert_eq!((out.k, out.members), (2, vec![0, 1]));
        assert!(bh_select(&pv(&[0.1]), 1.0).is_err());
        assert!(bh_select(&pv(&[0.1]), 0.0).is_err());
    }

    #[test]
    fn ebh_examples() {
        let out = ebh_select(&ev(&[6.0, 3.0, 0.5]), 0.5).unwrap();
        assert_eq!((out.k, out.members), (2, vec![0, 1]));
        assert!(ebh_select(&ev(&[0.0, 0.0]), 0.5).unwrap().members.is_empty());
        let out = ebh_select(&ev(&[6.0, 3.0, 0.5]), 0.9).unwrap();
        assert_eq!((out.k, out.members), (2, vec![0, 1]));
        assert!(ebh_select(&ev(&[1.0]), 1.2).is_err());
    }

    #[test]
    fn path_example() {
        let path = build_path(&ev(&[6.0, 3.0, 0.5]));
        let alphas: Vec<f64> = path.entries().iter().map(|e| e.alpha_hat).collect();
        assert_eq!(alphas, vec![0.0, 0.5, 0.5, 1.0]);
        assert_eq!(path.entries()[0].set_size, 0);
        assert_eq!(path.entries()[0].order_stat, None);
        assert_eq!(path.sorted_members(2), vec![0, 1]);
        let zeros = build_path(&ev(&[0.0, 0.0]));
        assert_eq!(zeros.entries()[2].alpha_hat, 1.0);
    }

    #[test]
    fn ties_widen_sets_but_keep_k() {
        let path = build_path(&ev(&[2.0, 5.0, 2.0, 2.0]));
        let sizes: Vec<usize> = path.entries().iter().map(|e| e.set_size).collect();
        assert_eq!(sizes, vec![0, 1, 4, 4, 4]);
        // alpha_hat uses k, not |R_k|
        assert_eq!(path.entries()[2].alpha_hat, (4.0f64 / (2.0 * 2.0)).min(1.0));
        assert_eq!(path.entries()[1].alpha_hat, 4.0 / 5.0);
    }

    #[test]
    fn utility_argmax_examples() {
        let path = build_path(&ev(&[6.0, 3.0, 0.5]));
        let out = maximize_utility(&path, &UtilitySpec::constrained_size(2), Variant::PhCs).unwrap();
        assert_eq!((out.k, out.alpha, out.utility_value), (2, 0.5, Some(0.5)));
        let out = maximize_utility(&path, &UtilitySpec::linear(2.0), Variant::PhCs).unwrap();
        assert_eq!((out.k, out.utility_value), (2, Some(1.0)));
        let zero = UtilitySpec::Additive {
            lambda: 0.0,
            offset_c: 0.0,
            u_table: Some(vec![0.0; 4]),
            v_table: None,
        };
        let out = maximize_utility(&path, &zero, Variant::PhCs).unwrap();
        assert_eq!((out.k, out.members.len()), (0, 0));
    }

    #[test]
    fn ph_cs_single_unit_zero_evidence() {
        let cal = CalibrationScores::new(vec![1.0, 2.0]).unwrap();
        let (out, path) = ph_cs(&cal, &[0.0], &UtilitySpec::constrained_size(1)).unwrap();
        let alphas: Vec<f64> = path.entries().iter().map(|e| e.alpha_hat).collect();
        assert_eq!(alphas, vec![0.0, 1.0]);
        assert_eq!((out.members, out.alpha), (vec![0], 1.0));
    }

    #[test]
    fn ph_cs_equal_large_evidence_selects_all() {
        // all calibration scores tiny, test scores equal and large
        let cal = CalibrationScores::new(vec![1e-6; 50]).unwrap();
        let tests = vec![10.0; 5];
        let (out, path) = ph_cs(&cal, &tests, &UtilitySpec::constrained_size(5)).unwrap();
        let e = path.entries()[5].order_stat.unwrap();
        assert!(e > 5.0);
        assert_eq!(out.members.len(), 5);
        assert_eq!(out.alpha, (1.0 / e).min(1.0));
    }

    #[test]
    fn empty_favoring_utility() {
        let cal = CalibrationScores::new(vec![1.0, 2.0]).unwrap();
        let empty_only = UtilitySpec::Additive {
            lambda: 0.0,
            offset_c: 0.0,
            u_table: Some(vec![1.0, 1.0, 1.0]),
            v_table: None,
        };
        let (out, _) = ph_cs(&cal, &[5.0, 3.0], &empty_only).unwrap();
        assert!(out.members.is_empty());
        assert_eq!(out.alpha, 0.0);
    }

    #[test]
    fn ph_rcs_examples() {
        let cal = CalibrationScores::new(vec![0.5, 1.0, 0.2]).unwrap();
        let scores = [3.0, 0.1, 1.0];
        let u = UtilitySpec::linear(4.0);
        let (a, _) = ph_cs(&cal, &scores, &u).unwrap();
        let e = e_vector(&cal, &scores, EKind::RiskAdjusted).unwrap();
        let (b, _) = ph_rcs(&e, &u).unwrap();
        assert_eq!((a.members.clone(), a.alpha), (b.members.clone(), b.alpha));
        assert_eq!(b.variant, Variant::PhRcs);
        let w = weighted_e(&e, &WeightVector::uniform(3)).unwrap();
        let (c, _) = ph_rcs(&w, &u).unwrap();
        assert_eq!((c.members, c.alpha, c.variant), (b.members, b.alpha, Variant::PhRcsWeighted));

        let (out, path) = ph_rcs(&ev(&[4.0, 1.0]), &UtilitySpec::linear(1.0)).unwrap();
        let alphas: Vec<f64> = path.entries().iter().map(|e| e.alpha_hat).collect();
        assert_eq!(alphas, vec![0.0, 0.5, 1.0]);
        assert_eq!((out.k, out.utility_value), (2, Some(1.0)));
    }

    #[test]
    fn path_csv_format() {
        let path = build_path(&ev(&[6.0, 3.0, 0.5]));
        let mut buf = Vec::new();
        path.write_csv(&mut buf, &UtilitySpec::constrained_size(2), Some(2)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "k,order_stat,set_size,alpha_hat,utility,chosen\n\
             0,,0,0,0,0\n1,6,1,0.5,0,0\n2,3,2,0.5,0.5,1\n3,0.5,3,1,0,0\n"
        );
    }

    fn evec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop_oneof![Just(0.0), 0.0f64..5.0, 0.0f64..200.0, Just(2.0)],
            1..60,
        )
    }

    proptest! {
        #[test]
        fn path_invariants(values in evec()) {
            let e = ev(&values);
            let path = build_path(&e);
            let m = values.len();
            prop_assert_eq!(path.entries().len(), m + 1);
            prop_assert_eq!(path.entries()[0].alpha_hat, 0.0);
            for k in 1..=m {
                let prev = &path.entries()[k - 1];
                let cur = &path.entries()[k];
                prop_assert!(path.members(k - 1).iter().all(|j| path.members(k).contains(j)));
                if let Some(p) = prev.order_stat {
                    prop_assert!(cur.order_stat.unwrap() <= p);
                }
                let stat = cur.order_stat.unwrap();
                let expect = if stat > 0.0 { (m as f64 / (k as f64 * stat)).min(1.0) } else { 1.0 };
                prop_assert_eq!(cur.alpha_hat, expect);
                prop_assert!((0.0..=1.0).contains(&cur.alpha_hat));
            }
        }

        #[test]
        fn ebh_outputs_lie_on_path(values in evec(), alpha in 0.01f64..0.99) {
            let e = ev(&values);
            let path = build_path(&e);
            let out = ebh_select(&e, alpha).unwrap();
            prop_assert_eq!(path.sorted_members(out.k), out.members.clone());
            // self-consistency in order-statistic form
            let m = values.len();
            if out.k > 0 {
                let stat = path.entries()[out.k].order_stat.unwrap();
                prop_assert!(stat >= ebh_threshold(alpha, out.k, m));
                prop_assert!(out.members.iter().all(|&j| values[j] >= stat));
            }
            for k in out.k + 1..=m {
                prop_assert!(path.entries()[k].order_stat.unwrap() < ebh_threshold(alpha, k, m));
            }
        }

        #[test]
        fn constrained_size_always_met(values in evec(), frac in 0.0f64..=1.0) {
            let m = values.len();
            let r_min = ((m as f64) * frac).floor() as usize;
            let path = build_path(&ev(&values));
            let out = maximize_utility(&path, &UtilitySpec::constrained_size(r_min), Variant::PhCs).unwrap();
            prop_assert!(out.members.len() >= r_min);
        }
    }
}
