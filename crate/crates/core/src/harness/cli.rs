//! Command-line front end shared by the `posthoc-cs` binary and tests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use super::campaign::{run_campaign, write_campaign, CampaignResult};
use super::config::{extract_overrides, DataSource, RunConfig};
use super::pipeline::{
    file_realization, run_variant, synthetic_realization, synthetic_weights, Realization,
    SelectionRecord, SelectionRequest,
};
use crate::conformal::{CalibrationScores, EKind, EVector, PVector};
use crate::error::{Error, Result};
use crate::metrics::AggregateReport;
use crate::oracle::{
    check_null_domination, compare_bh, compare_ebh, exact_mean_oracle_e, random_e_vector,
    random_p_vector,
};
use crate::report::{emit_reports, fmt_sig, read_trials_csv, summary_text};
use crate::rng::{substream, Purpose};
use crate::selection::{build_path, SelectionOutcome, SelectionPath, Variant};
use crate::utility::UtilitySpec;

/// Post-hoc conformal selection with utility-driven FDP levels.
///
/// Any configuration key may be overridden as `--section.key value`,
/// for example `--score.gamma 50` or `--sim.m=40`.
#[derive(Debug, Parser)]
#[command(name = "posthoc-cs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one selection; writes path.csv and selection.json.
    Select,
    /// Print the candidate path as CSV on stdout.
    Path,
    /// Run a Monte Carlo campaign on synthetic data.
    Simulate,
    /// Summarize a trials CSV and write histogram files.
    Report {
        /// A trials.csv written by `simulate`.
        trials_csv: PathBuf,
    },
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Comma-separated p-values to check BH against the brute-force reference.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p: Option<Vec<f64>>,
    /// Comma-separated e-values to check e-BH against the brute-force reference.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    e: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Score multiset for the exchangeability identity.
    #[arg(long, value_delimiter = ',')]
    scores: Option<Vec<f64>>,
    /// Number of random instances per batch size for a sweep.
    #[arg(long)]
    instances: Option<usize>,
}

/// Parse `args` (without the program name), run the command, and write
/// human-readable output to `stdout`.
pub fn run_cli<I, S>(args: I, stdout: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let (rest, overrides) = extract_overrides(args.into_iter().map(Into::into))?;
    let cli = match Cli::try_parse_from(std::iter::once("posthoc-cs".to_string()).chain(rest)) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return write!(stdout, "{}", e.render()).map_err(io_out);
        }
        Err(e) => return Err(Error::Config(e.render().to_string())),
    };
    if let Command::Report { trials_csv } = &cli.command {
        return report(trials_csv, cli.out.as_deref(), stdout);
    }
    if let Command::Oracle(args) = &cli.command {
        return oracle(args, cli.seed.unwrap_or(0), stdout);
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.run.trials = t;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.run.out = o.clone();
    }
    cfg.validate()?;
    match cli.command {
        Command::Select => select(&cfg, stdout),
        Command::Path => path(&cfg, stdout),
        Command::Simulate => simulate(&cfg, stdout),
        Command::Report { .. } | Command::Oracle(_) => unreachable!("handled above"),
    }
}

/// Entry point for the binary: runs the CLI and maps errors to exit codes.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let mut stdout = std::io::stdout().lock();
    match run_cli(args, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Prepared {
    real: Realization,
    utility: UtilitySpec,
    weights: Option<crate::conformal::WeightVector>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (real, synthetic) = match &cfg.source {
        DataSource::Synthetic(sim) => (synthetic_realization(sim, &cfg.score, cfg.run.seed, 0)?, true),
        DataSource::Files(data) => (file_realization(data, &cfg.score)?, false),
    };
    let utility = cfg.utility.spec(real.m(), synthetic)?;
    let weights = match (&cfg.source, cfg.run.variant) {
        (DataSource::Synthetic(sim), Variant::PhRcsWeighted) => {
            Some(synthetic_weights(sim.weights, sim.m, cfg.run.seed, 0)?)
        }
        _ => None,
    };
    Ok(Prepared {
        real,
        utility,
        weights,
    })
}

fn selection(cfg: &RunConfig, p: &Prepared) -> Result<(SelectionOutcome, Option<SelectionPath>)> {
    let level = match cfg.run.variant {
        Variant::Cs | Variant::EbhFixed => Some(cfg.fixed_level()?),
        _ => None,
    };
    run_variant(
        &p.real,
        &SelectionRequest {
            variant: cfg.run.variant,
            utility: &p.utility,
            level,
            weights: p.weights.as_ref(),
            seed: cfg.run.seed,
            trial: 0,
        },
    )
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn select(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let prepared = prepare(cfg)?;
    let (outcome, path) = selection(cfg, &prepared)?;
    let out = &cfg.run.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if let Some(path) = &path {
        let file = out.join("path.csv");
        let chosen = cfg.run.variant.is_post_hoc().then_some(outcome.k);
        let mut buf = Vec::new();
        path.write_csv(&mut buf, &prepared.utility, chosen)?;
        fs::write(&file, buf).map_err(|e| Error::io(&file, e))?;
    }
    let record = SelectionRecord::new(&prepared.real, &outcome)?;
    let json = out.join("selection.json");
    let text = serde_json::to_string_pretty(&record).expect("record serializes");
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;

    writeln!(
        stdout,
        "{}: selected {} of {} units, declared alpha {}, k = {}",
        outcome.variant,
        outcome.size(),
        record.m,
        fmt_sig(outcome.alpha),
        outcome.k
    )
    .map_err(io_out)?;
    if let Some(u) = outcome.utility_value {
        writeln!(stdout, "utility {}", fmt_sig(u)).map_err(io_out)?;
    }
    if let Some(f) = record.realized_fdp {
        writeln!(stdout, "realized FDP {}", fmt_sig(f)).map_err(io_out)?;
    }
    writeln!(stdout, "members {:?}", outcome.members).map_err(io_out)?;
    writeln!(stdout, "wrote {}", out.display()).map_err(io_out)?;
    Ok(())
}

fn path(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let prepared = prepare(cfg)?;
    let (outcome, path) = selection(cfg, &prepared)?;
    let (path, chosen) = match path {
        Some(p) => {
            let chosen = cfg.run.variant.is_post_hoc().then_some(outcome.k);
            (p, chosen)
        }
        None => (build_path(&prepared.real.e_values()?), None),
    };
    path.write_csv(stdout, &prepared.utility, chosen)
}

fn simulate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let result: CampaignResult = run_campaign(cfg)?;
    let files = write_campaign(cfg, &result, &cfg.run.out)?;
    let summary = fs::read_to_string(&files[1]).map_err(|e| Error::io(&files[1], e))?;
    write!(stdout, "{summary}").map_err(io_out)?;
    writeln!(stdout, "\nwrote {} files to {}", files.len(), cfg.run.out.display()).map_err(io_out)?;
    Ok(())
}

fn report(trials_csv: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let reports = read_trials_csv(trials_csv)?;
    let out_dir = match out {
        Some(o) => o.to_path_buf(),
        None => trials_csv.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut by_variant: BTreeMap<&'static str, (Variant, Vec<_>)> = BTreeMap::new();
    for r in reports {
        by_variant
            .entry(r.variant.name())
            .or_insert_with(|| (r.variant, Vec::new()))
            .1
            .push(r);
    }
    if by_variant.is_empty() {
        writeln!(stdout, "no trials in {}", trials_csv.display()).map_err(io_out)?;
        return Ok(());
    }
    for (name, (variant, reps)) in &by_variant {
        let agg = AggregateReport::from_reports(reps)?;
        write!(stdout, "{}", summary_text(*variant, &agg)).map_err(io_out)?;
        emit_reports(reps, &out_dir, &format!("{name}_"))?;
    }
    writeln!(stdout, "wrote histograms to {}", out_dir.display()).map_err(io_out)?;
    Ok(())
}

fn oracle(args: &OracleArgs, seed: u64, stdout: &mut dyn Write) -> Result<()> {
    let mut all_agree = true;
    let mut show = |rep: crate::oracle::OracleReport, out: &mut dyn Write| -> Result<()> {
        all_agree &= rep.agree;
        writeln!(out, "{rep}").map_err(io_out)
    };
    if let Some(p) = &args.p {
        let pv = PVector::new(p.clone(), vec![1.0; p.len()])?;
        show(compare_bh(&pv, args.alpha)?, stdout)?;
    }
    if let Some(e) = &args.e {
        let ev = EVector::new(e.clone(), EKind::Standard)?;
        show(compare_ebh(&ev, args.alpha)?, stdout)?;
    }
    if let Some(s) = &args.scores {
        let mean = exact_mean_oracle_e(s)?;
        writeln!(stdout, "mean oracle e-value over {} roles: {}", s.len(), fmt_sig(mean))
            .map_err(io_out)?;
        all_agree &= (mean - 1.0).abs() <= crate::oracle::MEAN_TOLERANCE;
    }
    if let Some(n) = args.instances {
        let mut rng = substream(seed, 0, Purpose::Data);
        let mut failures = 0usize;
        for m in 1..=10 {
            for _ in 0..n {
                let alpha = rand::Rng::gen_range(&mut rng, 0.01..0.99);
                let bh = compare_bh(&random_p_vector(&mut rng, m), alpha)?;
                let ebh = compare_ebh(&random_e_vector(&mut rng, m), alpha)?;
                let cal = CalibrationScores::new(vec![1.0; m])?;
                let dom = check_null_domination(&cal, 0.5, 0.5 + alpha)?;
                for rep in [bh, ebh, dom] {
                    if !rep.agree {
                        failures += 1;
                        writeln!(stdout, "{rep}").map_err(io_out)?;
                    }
                }
            }
        }
        writeln!(stdout, "random sweep: {} instances, {failures} disagreements", 10 * n)
            .map_err(io_out)?;
        all_agree &= failures == 0;
    }
    if all_agree {
        Ok(())
    } else {
        Err(Error::Invariant("main and reference implementations disagree".into()))
    }
}
