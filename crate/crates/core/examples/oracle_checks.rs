//! Cross-checks against brute-force references: BH and e-BH by exhaustive
//! enumeration, the exchangeability identity for oracle e-values, and
//! domination of the conformal e-value by its oracle counterpart on nulls.

use posthoc_cs::conformal::CalibrationScores;
use posthoc_cs::oracle::{
    check_null_domination, compare_bh, compare_ebh, exact_mean_oracle_e, random_e_vector,
    random_p_vector,
};
use posthoc_cs::rng::{substream, Purpose};
use rand::Rng;

fn main() -> posthoc_cs::Result<()> {
    let mut rng = substream(5, 0, Purpose::Data);
    let mut mismatches = 0;
    for m in 1..=8 {
        for _ in 0..200 {
            let alpha = rng.gen_range(0.01..0.5);
            mismatches += usize::from(!compare_bh(&random_p_vector(&mut rng, m), alpha)?.agree);
            mismatches += usize::from(!compare_ebh(&random_e_vector(&mut rng, m), alpha)?.agree);
        }
    }
    println!("BH / e-BH vs brute force: {mismatches} mismatches in 3200 instances");

    let scores = [0.3, 1.0, 1.0, 2.5, 0.0, 4.0];
    println!(
        "average oracle e-value over all role assignments of {scores:?}: {}",
        exact_mean_oracle_e(&scores)?
    );

    let cal = CalibrationScores::new(vec![0.2, 0.9, 1.4, 0.4, 2.2])?;
    // A null unit: its true score is at least its threshold score.
    let report = check_null_domination(&cal, 0.6, 1.1)?;
    println!("{report}");
    Ok(())
}
