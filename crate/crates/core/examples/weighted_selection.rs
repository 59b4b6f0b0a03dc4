//! Risk-controlled selection with priority weights.
//!
//! Each test unit's risk-adjusted e-variable is multiplied by a weight; the
//! weights must sum to at most `m`. Raw priorities can be rescaled to meet
//! the budget exactly, and over-budget weights are refused.

use posthoc_cs::conformal::{
    binary_risk_e, weighted_e, CalibrationScores, EKind, EVector, WeightVector,
};
use posthoc_cs::selection::ph_rcs;
use posthoc_cs::utility::UtilitySpec;
use posthoc_cs::Error;

fn main() -> posthoc_cs::Result<()> {
    let cal = CalibrationScores::new((1..=49).map(|i| f64::from(i) / 50.0).collect())?;
    let test = [30.0, 0.1, 8.0, 2.5, 0.3, 15.0, 0.9, 5.0];
    let e_g = EVector::new(
        test.iter()
            .map(|&s| binary_risk_e(&cal, s).map(|e| e.value))
            .collect::<posthoc_cs::Result<_>>()?,
        EKind::RiskAdjusted,
    )?;

    let utility = UtilitySpec::linear(10.0);
    let (plain, _) = ph_rcs(&e_g, &utility)?;
    println!("unweighted: {:?} at alpha_hat {:.3}", plain.members, plain.alpha);

    // Units 3 and 7 matter twice as much as the rest.
    let raw = [1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0];
    let w = WeightVector::rescaled(&raw)?;
    println!("rescaled weights sum to {:.3}", w.values().iter().sum::<f64>());
    let (weighted, _) = ph_rcs(&weighted_e(&e_g, &w)?, &utility)?;
    println!("weighted:   {:?} at alpha_hat {:.3}", weighted.members, weighted.alpha);

    match WeightVector::new(raw.to_vec()) {
        Err(e @ Error::Budget { .. }) => println!("raw priorities refused: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
