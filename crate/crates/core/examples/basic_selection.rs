//! End-to-end post-hoc selection on one synthetic draw, built from the
//! library pieces directly: simulate, fit a predictor, score, select.
//!
//! ```text
//! cargo run --example basic_selection
//! ```

use posthoc_cs::conformal::{p_vector, CalibrationScores};
use posthoc_cs::datasim::{fit_knn, gen_synthetic, SyntheticConfig};
use posthoc_cs::metrics::fdp;
use posthoc_cs::rng::{open_closed_unit, substream, Purpose};
use posthoc_cs::scoring::{
    normalize_prediction, score_at_threshold, score_value, NormRange, ScoreSpec,
};
use posthoc_cs::selection::{bh_select, ph_cs};
use posthoc_cs::utility::UtilitySpec;

fn main() -> posthoc_cs::Result<()> {
    let cfg = SyntheticConfig {
        n_train: 500,
        n_cal: 300,
        m: 60,
        ..Default::default()
    };
    let mut rng = substream(2024, 0, Purpose::Data);
    let (train, cal, test) = gen_synthetic(&cfg, &mut rng)?;

    let model = fit_knn(&train, 10)?;
    let train_pred: Vec<f64> = (0..train.len()).map(|i| model.predict(&train.row(i))).collect();
    let spec = ScoreSpec::clipped_odds(3.0).with_norm(NormRange::from_predictions(&train_pred)?);

    let mut cal_scores = Vec::new();
    for i in 0..cal.len() {
        let mu = normalize_prediction(model.predict(&cal.row(i)), &spec)?;
        cal_scores.push(score_value(&spec, mu, cal.responses[i], cfg.c)?);
    }
    let cal_scores = CalibrationScores::new(cal_scores)?;
    let test_scores = (0..test.len())
        .map(|j| {
            let mu = normalize_prediction(model.predict(&test.row(j)), &spec)?;
            score_at_threshold(&spec, mu, cfg.c)
        })
        .collect::<posthoc_cs::Result<Vec<f64>>>()?;
    let nulls: Vec<bool> = test.responses.iter().map(|&y| y <= cfg.c).collect();

    // Post-hoc: pick the set after looking at the whole path.
    let utility = UtilitySpec::constrained_size(20);
    let (chosen, path) = ph_cs(&cal_scores, &test_scores, &utility)?;
    println!("path has {} candidates; first few:", path.entries().len());
    for e in path.entries().iter().take(25).step_by(4) {
        println!("  k={:>2} |R|={:>2} alpha_hat={:.3}", e.k, e.set_size, e.alpha_hat);
    }
    println!(
        "PH-CS picked k={} with {} units at declared level {:.3}; realized FDP {:.3}",
        chosen.k,
        chosen.size(),
        chosen.alpha,
        fdp(&chosen.members, &nulls)?
    );

    // Classical conformal selection needs its level up front.
    let mut tie = substream(2024, 0, Purpose::TieBreak);
    let draws: Vec<f64> = (0..test_scores.len()).map(|_| open_closed_unit(&mut tie)).collect();
    let p = p_vector(&cal_scores, &test_scores, &draws)?;
    for level in [0.05, 0.1, 0.2] {
        let cs = bh_select(&p, level)?;
        println!(
            "CS at {level:.2}: {} units, realized FDP {:.3}",
            cs.size(),
            fdp(&cs.members, &nulls)?
        );
    }
    Ok(())
}
