//! Monte Carlo campaigns over synthetic data.
//!
//! Trials run on a pool of `run.workers` threads. Each trial draws from its
//! own substreams and results are collected in trial order, so outputs do not
//! depend on scheduling. A matched CS baseline needs the campaign average of
//! the post-hoc levels, so it runs as a second pass that regenerates every
//! trial's data and checks it against the fingerprint recorded in pass one.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Baseline, CsMatch, DataSource, RunConfig, SimSection};
use super::pipeline::{evaluate_trial, synthetic_realization, synthetic_weights, SelectionRequest};
use crate::error::{Error, Result};
use crate::metrics::{AggregateReport, TrialReport};
use crate::report::{emit_reports, fmt_sig, summary_text, write_trials_csv};
use crate::selection::Variant;
use crate::utility::UtilitySpec;

/// Matched levels are kept inside the open interval BH accepts.
const LEVEL_FLOOR: f64 = 1e-6;
const LEVEL_CEIL: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub primary: Vec<TrialReport>,
    pub baseline: Option<Vec<TrialReport>>,
    /// Level the CS baseline ran at.
    pub baseline_level: Option<f64>,
}

impl CampaignResult {
    pub fn all_reports(&self) -> Vec<TrialReport> {
        let mut v = self.primary.clone();
        if let Some(b) = &self.baseline {
            v.extend(b.iter().cloned());
        }
        v
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start worker pool: {e}")))
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    sim: &'a SimSection,
    utility: UtilitySpec,
}

impl Ctx<'_> {
    fn trial(&self, variant: Variant, level: Option<f64>, t: u64) -> Result<(TrialReport, [u8; 32])> {
        let seed = self.cfg.run.seed;
        let real = synthetic_realization(self.sim, &self.cfg.score, seed, t)?;
        let weights = match variant {
            Variant::PhRcsWeighted => Some(synthetic_weights(self.sim.weights, self.sim.m, seed, t)?),
            _ => None,
        };
        let req = SelectionRequest {
            variant,
            utility: &self.utility,
            level,
            weights: weights.as_ref(),
            seed,
            trial: t,
        };
        Ok((evaluate_trial(&real, &req)?, real.fingerprint))
    }
}

/// Run every trial of the configured campaign.
pub fn run_campaign(cfg: &RunConfig) -> Result<CampaignResult> {
    let DataSource::Synthetic(sim) = &cfg.source else {
        return Err(Error::Config(
            "simulate needs a synthetic source (labels are required for FDP)".into(),
        ));
    };
    let ctx = Ctx {
        cfg,
        sim,
        utility: cfg.utility.spec(sim.m, true)?,
    };
    let run = &cfg.run;
    let level = match run.variant {
        Variant::Cs | Variant::EbhFixed => Some(cfg.fixed_level()?),
        _ => None,
    };
    let pool = pool(run.workers)?;
    let n = run.trials as u64;

    let first: Vec<(TrialReport, [u8; 32])> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|t| ctx.trial(run.variant, level, t))
            .collect::<Result<_>>()
    })?;
    let (primary, prints): (Vec<_>, Vec<_>) = first.into_iter().unzip();

    let baseline_level = match run.baseline {
        Baseline::None => None,
        Baseline::Fixed => Some(cfg.fixed_level()?),
        Baseline::Matched => {
            let pick = |r: &TrialReport| match run.cs_match {
                CsMatch::Declared => r.declared_alpha,
                CsMatch::Realized => r.realized_fdp,
            };
            let mean = primary.iter().map(pick).sum::<f64>() / primary.len() as f64;
            Some(mean.clamp(LEVEL_FLOOR, LEVEL_CEIL))
        }
    };
    let baseline = match baseline_level {
        None => None,
        Some(a) => Some(pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|t| {
                    let (rep, fp) = ctx.trial(Variant::Cs, Some(a), t)?;
                    if fp != prints[t as usize] {
                        return Err(Error::Invariant(format!(
                            "trial {t}: regenerated data differ from the first pass"
                        )));
                    }
                    Ok(rep)
                })
                .collect::<Result<Vec<_>>>()
        })?),
    };
    Ok(CampaignResult {
        primary,
        baseline,
        baseline_level,
    })
}

/// Header lines and per-variant summary blocks.
pub fn campaign_summary(cfg: &RunConfig, result: &CampaignResult) -> Result<String> {
    let mut s = String::new();
    let run = &cfg.run;
    writeln!(s, "seed               {}", run.seed).unwrap();
    writeln!(s, "trials             {}", run.trials).unwrap();
    writeln!(s, "variant            {}", run.variant).unwrap();
    if let DataSource::Synthetic(sim) = &cfg.source {
        writeln!(
            s,
            "utility            {}",
            cfg.utility.spec(sim.m, true)?.name()
        )
        .unwrap();
    }
    if let Some(a) = result.baseline_level {
        let how = match (run.baseline, run.cs_match) {
            (Baseline::Matched, CsMatch::Declared) => "matched to mean declared alpha",
            (Baseline::Matched, CsMatch::Realized) => "matched to mean realized FDP",
            _ => "fixed",
        };
        writeln!(s, "cs_alpha_max       {} ({how})", fmt_sig(a)).unwrap();
    }
    s.push('\n');
    s += &summary_text(run.variant, &AggregateReport::from_reports(&result.primary)?);
    if let Some(b) = &result.baseline {
        s.push('\n');
        s += &summary_text(Variant::Cs, &AggregateReport::from_reports(b)?);
    }
    Ok(s)
}

/// Write `trials.csv`, `summary.txt` and per-variant histogram files.
pub fn write_campaign(cfg: &RunConfig, result: &CampaignResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let trials = out_dir.join("trials.csv");
    let mut buf = Vec::new();
    write_trials_csv(&mut buf, &result.all_reports()).map_err(|e| Error::io(&trials, e))?;
    fs::write(&trials, buf).map_err(|e| Error::io(&trials, e))?;

    let summary = out_dir.join("summary.txt");
    let text = campaign_summary(cfg, result)?;
    fs::write(&summary, text).map_err(|e| Error::io(&summary, e))?;

    let mut files = vec![trials, summary];
    files.extend(emit_reports(
        &result.primary,
        out_dir,
        &format!("{}_", cfg.run.variant),
    )?);
    if let Some(b) = &result.baseline {
        files.extend(emit_reports(b, out_dir, "cs_")?);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Override;

    fn cfg(extra: &[(&str, &str)]) -> RunConfig {
        let mut o: Vec<Override> = [
            ("sim.n_train", "80"),
            ("sim.n_cal", "40"),
            ("sim.m", "12"),
            ("run.trials", "6"),
            ("run.seed", "11"),
        ]
        .iter()
        .map(|(k, v)| Override::parse(k, v).unwrap())
        .collect();
        o.extend(extra.iter().map(|(k, v)| Override::parse(k, v).unwrap()));
        RunConfig::from_toml_str("", &o).unwrap()
    }

    #[test]
    fn single_trial_aggregate_equals_trial() {
        let c = cfg(&[("run.trials", "1")]);
        let r = run_campaign(&c).unwrap();
        let agg = AggregateReport::from_reports(&r.primary).unwrap();
        assert_eq!(agg.mean_fdp.mean, r.primary[0].realized_fdp);
        assert_eq!(agg.mean_alpha.mean, r.primary[0].declared_alpha);
    }

    #[test]
    fn matched_baseline_uses_mean_level() {
        let c = cfg(&[("run.baseline", "matched")]);
        let r = run_campaign(&c).unwrap();
        let mean = r.primary.iter().map(|t| t.declared_alpha).sum::<f64>() / 6.0;
        assert_eq!(r.baseline_level, Some(mean.clamp(LEVEL_FLOOR, LEVEL_CEIL)));
        let b = r.baseline.as_ref().unwrap();
        assert_eq!(b.len(), 6);
        assert!(b.iter().all(|t| t.variant == Variant::Cs && t.declared_alpha == r.baseline_level.unwrap()));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_campaign(&cfg(&[("run.workers", "1"), ("run.baseline", "matched")])).unwrap();
        let b = run_campaign(&cfg(&[("run.workers", "3"), ("run.baseline", "matched")])).unwrap();
        assert_eq!(a.all_reports(), b.all_reports());
    }

    #[test]
    fn writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(&[("run.baseline", "fixed"), ("run.cs_alpha_max", "0.2")]);
        let r = run_campaign(&c).unwrap();
        let files = write_campaign(&c, &r, dir.path()).unwrap();
        assert_eq!(files.len(), 10);
        let trials = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
        assert_eq!(trials.lines().count(), 1 + 12);
        let scatter = fs::read_to_string(dir.path().join("ph_cs_scatter.csv")).unwrap();
        assert_eq!(scatter.lines().count(), 1 + 6);
        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("[ph_cs]") && summary.contains("[cs]"));
    }

    #[test]
    fn file_source_is_rejected() {
        let c = RunConfig::from_toml_str("[data]\ncalibration = \"a\"\ntest = \"b\"\n", &[]).unwrap();
        assert!(matches!(run_campaign(&c), Err(Error::Config(_))));
    }
}
