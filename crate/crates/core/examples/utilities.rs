//! The same candidate path scored by each utility family. Only the final
//! pick changes; the path and its FDP estimates do not depend on the utility.

use posthoc_cs::conformal::{e_vector, CalibrationScores, EKind};
use posthoc_cs::selection::{build_path, maximize_utility, Variant};
use posthoc_cs::utility::UtilitySpec;

fn main() -> posthoc_cs::Result<()> {
    // Hand-made scores: small calibration scores, a handful of strong test units.
    let cal = CalibrationScores::new((0..99).map(|i| 0.5 + f64::from(i % 7) * 0.1).collect())?;
    let test: Vec<f64> = vec![40.0, 25.0, 12.0, 9.0, 3.0, 1.2, 1.1, 0.9, 0.8, 0.7, 0.6, 0.5];
    let e = e_vector(&cal, &test, EKind::Standard)?;
    let path = build_path(&e);

    println!("k  |R|  alpha_hat");
    for entry in path.entries() {
        println!("{:<2} {:<4} {:.4}", entry.k, entry.set_size, entry.alpha_hat);
    }

    let utilities = [
        UtilitySpec::constrained_size(2),
        UtilitySpec::linear(4.0),
        UtilitySpec::LogTradeoff { lambda: 2.0 },
        UtilitySpec::Additive {
            lambda: 3.0,
            offset_c: 0.0,
            // diminishing returns in set size
            u_table: Some((0..=test.len()).map(|r| (r as f64).sqrt() * 3.0).collect()),
            // FDP above 0.3 is heavily penalized
            v_table: Some(vec![(0.0, 0.0), (0.3, 0.3), (0.5, 2.0)]),
        },
    ];
    println!();
    for u in &utilities {
        let pick = maximize_utility(&path, u, Variant::PhCs)?;
        println!(
            "{:<17} -> k={:<2} |R|={:<2} alpha_hat={:.3} utility={:.3}",
            u.name(),
            pick.k,
            pick.size(),
            pick.alpha,
            pick.utility_value.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
