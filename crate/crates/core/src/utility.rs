//! Utilities over `(set size r, FDP estimate alpha)`.
//!
//! Every kind is non-decreasing in `r` and non-increasing in `alpha`.
//! Utilities are not required to be non-negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// `(1 - alpha) * 1{r >= r_min}`; entries with `r < r_min` are infeasible.
    ConstrainedSize { r_min: usize },
    /// `u(r) - lambda * v(alpha) + offset_c`.
    ///
    /// `u_table[r]` tabulates `u` (identity when absent). `v_table` holds
    /// `(alpha, v)` knots interpolated linearly and held constant outside
    /// the first and last knot (identity when absent).
    Additive {
        lambda: f64,
        offset_c: f64,
        u_table: Option<Vec<f64>>,
        v_table: Option<Vec<(f64, f64)>>,
    },
    /// `r - lambda * alpha`.
    LinearTradeoff { lambda: f64 },
    /// `ln r - lambda * ln(1 / (1 - alpha))`, `-inf` at `r = 0` or `alpha = 1`.
    LogTradeoff { lambda: f64 },
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}

impl UtilitySpec {
    pub fn linear(lambda: f64) -> Self {
        UtilitySpec::LinearTradeoff { lambda }
    }

    pub fn constrained_size(r_min: usize) -> Self {
        UtilitySpec::ConstrainedSize { r_min }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UtilitySpec::ConstrainedSize { .. } => "constrained_size",
            UtilitySpec::Additive { .. } => "additive",
            UtilitySpec::LinearTradeoff { .. } => "linear_tradeoff",
            UtilitySpec::LogTradeoff { .. } => "log_tradeoff",
        }
    }

    /// Check the parameters against a batch of `m` test units.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            UtilitySpec::ConstrainedSize { r_min } => {
                if *r_min > m {
                    return Err(Error::param(format!(
                        "r_min = {r_min} exceeds the batch size m = {m}"
                    )));
                }
            }
            UtilitySpec::Additive {
                lambda,
                offset_c,
                u_table,
                v_table,
            } => {
                check_lambda(*lambda)?;
                if !(offset_c.is_finite() && *offset_c >= 0.0) {
                    return Err(Error::param(format!("offset c must be >= 0, got {offset_c}")));
                }
                if let Some(u) = u_table {
                    if u.len() < m + 1 {
                        return Err(Error::param(format!(
                            "u_table has {} entries, {} needed for r = 0..={m}",
                            u.len(),
                            m + 1
                        )));
                    }
                    if u.iter().any(|v| !v.is_finite()) || u.windows(2).any(|w| w[1] < w[0]) {
                        return Err(Error::param("u_table must be finite and non-decreasing"));
                    }
                }
                if let Some(v) = v_table {
                    if v.is_empty() {
                        return Err(Error::param("v_table must have at least one knot"));
                    }
                    if v.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
                        return Err(Error::param("v_table knots must be finite"));
                    }
                    if v.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                        return Err(Error::param(
                            "v_table knots must have increasing alpha and non-decreasing v",
                        ));
                    }
                }
            }
            UtilitySpec::LinearTradeoff { lambda } | UtilitySpec::LogTradeoff { lambda } => {
                check_lambda(*lambda)?
            }
        }
        Ok(())
    }

    /// Whether a set of size `r` is admissible at all. Only the
    /// constrained-size utility restricts this.
    pub fn admits(&self, r: usize) -> bool {
        match self {
            UtilitySpec::ConstrainedSize { r_min } => r >= *r_min,
            _ => true,
        }
    }

    pub fn evaluate(&self, r: usize, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let rf = r as f64;
        Ok(match self {
            UtilitySpec::ConstrainedSize { r_min } => {
                if r >= *r_min {
                    1.0 - alpha
                } else {
                    0.0
                }
            }
            UtilitySpec::Additive {
                lambda,
                offset_c,
                u_table,
                v_table,
            } => {
                let u = match u_table {
                    Some(t) => *t.get(r).ok_or_else(|| {
                        Error::param(format!("r = {r} beyond u_table of length {}", t.len()))
                    })?,
                    None => rf,
                };
                let v = match v_table {
                    Some(knots) => interpolate(knots, alpha),
                    None => alpha,
                };
                // lambda = 0 with an infinite v would give NaN
                let penalty = if *lambda == 0.0 { 0.0 } else { lambda * v };
                u - penalty + offset_c
            }
            UtilitySpec::LinearTradeoff { lambda } => rf - lambda * alpha,
            UtilitySpec::LogTradeoff { lambda } => {
                if r == 0 || alpha >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    rf.ln() - lambda * (1.0 / (1.0 - alpha)).ln()
                }
            }
        })
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= x);
    let (a0, v0) = knots[i - 1];
    let (a1, v1) = knots[i];
    v0 + (v1 - v0) * (x - a0) / (a1 - a0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constrained_size_examples() {
        let u = UtilitySpec::constrained_size(2);
        assert_eq!(u.evaluate(2, 0.5).unwrap(), 0.5);
        assert_eq!(u.evaluate(1, 0.1).unwrap(), 0.0);
        assert_eq!(u.evaluate(5, 0.0).unwrap(), 1.0);
        assert!(!u.admits(1) && u.admits(2));
    }

    #[test]
    fn linear_example() {
        assert_eq!(UtilitySpec::linear(500.0).evaluate(60, 0.1).unwrap(), 10.0);
    }

    #[test]
    fn log_endpoints_are_neg_infinite() {
        let u = UtilitySpec::LogTradeoff { lambda: 15.0 };
        assert_eq!(u.evaluate(0, 0.2).unwrap(), f64::NEG_INFINITY);
        assert_eq!(u.evaluate(5, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!((u.evaluate(4, 0.0).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn additive_defaults_and_tables() {
        let plain = UtilitySpec::Additive {
            lambda: 2.0,
            offset_c: 1.0,
            u_table: None,
            v_table: None,
        };
        assert_eq!(plain.evaluate(3, 0.5).unwrap(), 3.0);
        let tabled = UtilitySpec::Additive {
            lambda: 1.0,
            offset_c: 0.0,
            u_table: Some(vec![0.0, 1.0, 1.5, 1.75]),
            v_table: Some(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 4.0)]),
        };
        tabled.validate(3).unwrap();
        assert_eq!(tabled.evaluate(2, 0.25).unwrap(), 1.0);
        assert_eq!(tabled.evaluate(3, 0.75).unwrap(), 1.75 - 2.5);
        assert!(tabled.validate(4).is_err());
        assert!(tabled.evaluate(4, 0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(UtilitySpec::constrained_size(3).validate(2).is_err());
        assert!(UtilitySpec::constrained_size(2).validate(2).is_ok());
        assert!(UtilitySpec::linear(-1.0).validate(2).is_err());
        assert!(UtilitySpec::linear(1.0).evaluate(1, 1.5).is_err());
        let bad_v = UtilitySpec::Additive {
            lambda: 1.0,
            offset_c: 0.0,
            u_table: None,
            v_table: Some(vec![(0.0, 1.0), (0.5, 0.5)]),
        };
        assert!(bad_v.validate(1).is_err());
    }

    fn specs() -> impl Strategy<Value = UtilitySpec> {
        prop_oneof![
            (0usize..20).prop_map(UtilitySpec::constrained_size),
            (0.0f64..100.0).prop_map(UtilitySpec::linear),
            (0.0f64..100.0).prop_map(|lambda| UtilitySpec::LogTradeoff { lambda }),
            (0.0f64..100.0, 0.0f64..10.0).prop_map(|(lambda, offset_c)| UtilitySpec::Additive {
                lambda,
                offset_c,
                u_table: None,
                v_table: Some(vec![(0.0, 0.0), (0.3, 0.1), (1.0, 2.0)]),
            }),
        ]
    }

    proptest! {
        #[test]
        fn monotone_in_both_arguments(
            spec in specs(),
            r in 0usize..20,
            dr in 0usize..5,
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(spec.evaluate(r, lo).unwrap() >= spec.evaluate(r, hi).unwrap());
            prop_assert!(spec.evaluate(r + dr, lo).unwrap() >= spec.evaluate(r, lo).unwrap());
        }
    }
}
