//! Configuration, single selections, Monte Carlo campaigns and the CLI.

mod campaign;
mod cli;
mod config;
mod pipeline;

pub use campaign::{campaign_summary, run_campaign, write_campaign, CampaignResult};
pub use cli::{main_with_args, run_cli};
pub use config::{
    extract_overrides, Baseline, CsMatch, DataSection, DataSource, Override, Predictor, RunConfig,
    RunSection, ScoreSection, SimSection, UtilityKind, UtilitySection, WeightScheme,
};
pub use pipeline::{
    evaluate_trial, file_realization, realized_metrics, run_variant, synthetic_realization,
    synthetic_weights, Realization, SelectionRecord, SelectionRequest,
};
