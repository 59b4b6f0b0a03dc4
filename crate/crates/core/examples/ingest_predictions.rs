//! Selection on predictions produced elsewhere and saved as CSV.
//!
//! Reads `examples/data/classifier_*.csv`: calibration rows carry a
//! predicted probability and a 0/1 label, test rows a probability, the
//! threshold `c`, and (here) the label so the realized FDP can be shown.

use std::path::Path;

use posthoc_cs::datasim::load_predictions;
use posthoc_cs::harness::{
    file_realization, realized_metrics, run_variant, DataSection, ScoreSection, SelectionRequest,
};
use posthoc_cs::selection::Variant;
use posthoc_cs::utility::UtilitySpec;

fn main() -> posthoc_cs::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let data = DataSection {
        calibration: dir.join("classifier_cal.csv"),
        test: dir.join("classifier_test.csv"),
        c: 0.5,
    };

    let raw = load_predictions(&data.calibration, &data.test)?;
    println!(
        "{:?} mode: {} calibration rows, {} test rows, labeled: {}",
        raw.mode,
        raw.calibration.len(),
        raw.test.len(),
        raw.is_labeled()
    );

    let real = file_realization(&data, &ScoreSection::default())?;
    for r_min in [5, 10, 20] {
        let utility = UtilitySpec::constrained_size(r_min);
        let (outcome, _) = run_variant(
            &real,
            &SelectionRequest {
                variant: Variant::PhCs,
                utility: &utility,
                level: None,
                weights: None,
                seed: 0,
                trial: 0,
            },
        )?;
        let (fdp, _) = realized_metrics(&real, &outcome, &utility)?;
        println!(
            "r_min {r_min:>2}: {:>2} selected, declared FDP {:.3}, realized {:.3}",
            outcome.size(),
            outcome.alpha,
            fdp
        );
    }
    Ok(())
}
