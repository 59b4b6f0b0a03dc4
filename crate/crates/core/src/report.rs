//! CSV and text rendering of trial results.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{AggregateReport, TrialReport};
use crate::selection::Variant;

/// Render with 12 significant digits, `%g`-style (trailing zeros trimmed).
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub const TRIALS_HEADER: &str =
    "trial_id,seed,variant,set_size,declared_alpha,realized_fdp,realized_utility";

/// Per-trial CSV, one row per report.
pub fn write_trials_csv<W: Write>(mut w: W, reports: &[TrialReport]) -> std::io::Result<()> {
    writeln!(w, "{TRIALS_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.trial_id,
            r.seed,
            r.variant,
            r.set_size,
            fmt_sig(r.declared_alpha),
            fmt_sig(r.realized_fdp),
            fmt_sig(r.realized_utility)
        )?;
    }
    Ok(())
}

/// Parse a per-trial CSV previously produced by [`write_trials_csv`].
pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialReport>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let expected: Vec<&str> = TRIALS_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: format!("expected header '{TRIALS_HEADER}'"),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Parse {
            path: path.into(),
            line,
            msg,
        };
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("invalid number '{}'", &rec[i])))
        };
        let int = |i: usize| -> Result<u64> {
            rec[i]
                .parse::<u64>()
                .map_err(|_| bad(format!("invalid integer '{}'", &rec[i])))
        };
        out.push(TrialReport {
            trial_id: int(0)?,
            seed: int(1)?,
            variant: rec[2].parse().map_err(|_| bad(format!("unknown variant '{}'", &rec[2])))?,
            set_size: int(3)? as usize,
            declared_alpha: num(4)?,
            realized_fdp: num(5)?,
            realized_utility: num(6)?,
        });
    }
    Ok(out)
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.into(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

/// Width of the FDP histogram bins.
pub const FDP_BIN_WIDTH: f64 = 0.05;
/// Number of equal-width bins in the utility histogram.
pub const UTILITY_BINS: usize = 20;

/// `(set_size, count)` rows, ascending by size.
pub fn size_histogram(reports: &[TrialReport]) -> Vec<(usize, usize)> {
    let mut counts = BTreeMap::new();
    for r in reports {
        *counts.entry(r.set_size).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

/// Non-empty `(lo, hi, count)` bins of width [`FDP_BIN_WIDTH`] over `[0, 1]`.
/// The last bin is closed so that FDP = 1 is counted.
pub fn fdp_histogram(reports: &[TrialReport]) -> Vec<(f64, f64, usize)> {
    let nbins = (1.0 / FDP_BIN_WIDTH).round() as usize;
    let mut counts = vec![0usize; nbins];
    for r in reports {
        let b = ((r.realized_fdp / FDP_BIN_WIDTH).floor() as usize).min(nbins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(b, c)| (b as f64 * FDP_BIN_WIDTH, (b + 1) as f64 * FDP_BIN_WIDTH, c))
        .collect()
}

/// Non-empty equal-width bins spanning the finite utilities; non-finite
/// utilities (the log utility's sentinel) get their own `(-inf, -inf)` row.
pub fn utility_histogram(reports: &[TrialReport]) -> Vec<(f64, f64, usize)> {
    let finite: Vec<f64> = reports
        .iter()
        .map(|r| r.realized_utility)
        .filter(|u| u.is_finite())
        .collect();
    let mut rows = Vec::new();
    let non_finite = reports.len() - finite.len();
    if non_finite > 0 {
        rows.push((f64::NEG_INFINITY, f64::NEG_INFINITY, non_finite));
    }
    if finite.is_empty() {
        return rows;
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        rows.push((lo, hi, finite.len()));
        return rows;
    }
    let width = (hi - lo) / UTILITY_BINS as f64;
    let mut counts = vec![0usize; UTILITY_BINS];
    for u in finite {
        let b = (((u - lo) / width).floor() as usize).min(UTILITY_BINS - 1);
        counts[b] += 1;
    }
    rows.extend(
        counts
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c)),
    );
    rows
}

fn create(path: PathBuf) -> Result<BufWriter<fs::File>> {
    fs::File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Files written by [`emit_reports`].
pub fn report_file_names(prefix: &str) -> [String; 4] {
    [
        format!("{prefix}size_hist.csv"),
        format!("{prefix}fdp_hist.csv"),
        format!("{prefix}utility_hist.csv"),
        format!("{prefix}scatter.csv"),
    ]
}

/// Write the size, FDP and utility histograms and the
/// `(declared alpha, realized FDP)` scatter for one variant.
pub fn emit_reports(reports: &[TrialReport], out_dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let names = report_file_names(prefix);
    let paths: Vec<PathBuf> = names.iter().map(|n| out_dir.join(n)).collect();

    let write_all = |path: &PathBuf, body: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| {
        let mut w = create(path.clone())?;
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    };

    write_all(&paths[0], &|w| {
        writeln!(w, "set_size,count")?;
        for (s, c) in size_histogram(reports) {
            writeln!(w, "{s},{c}")?;
        }
        Ok(())
    })?;
    write_all(&paths[1], &|w| {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (lo, hi, c) in fdp_histogram(reports) {
            writeln!(w, "{},{},{c}", fmt_sig(lo), fmt_sig(hi))?;
        }
        Ok(())
    })?;
    write_all(&paths[2], &|w| {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (lo, hi, c) in utility_histogram(reports) {
            writeln!(w, "{},{},{c}", fmt_sig(lo), fmt_sig(hi))?;
        }
        Ok(())
    })?;
    write_all(&paths[3], &|w| {
        writeln!(w, "trial_id,declared_alpha,realized_fdp")?;
        for r in reports {
            writeln!(
                w,
                "{},{},{}",
                r.trial_id,
                fmt_sig(r.declared_alpha),
                fmt_sig(r.realized_fdp)
            )?;
        }
        Ok(())
    })?;
    Ok(paths)
}

/// Plain-text summary block for one variant.
pub fn summary_text(variant: Variant, agg: &AggregateReport) -> String {
    let line = |name: &str, m: crate::metrics::MeanSe| {
        format!("  {name:<18} {} (se {})\n", fmt_sig(m.mean), fmt_sig(m.se))
    };
    let mut s = format!("[{variant}]\n  trials             {}\n", agg.n_trials);
    s += &line("fdr", agg.mean_fdp);
    s += &line("mean_alpha", agg.mean_alpha);
    s += &line("reliability_ratio", agg.reliability_ratio);
    s += &line("mean_size", agg.mean_size);
    s += &line("mean_utility", agg.mean_utility);
    s += &format!(
        "  taylor_gap         {} (se {})\n",
        fmt_sig(agg.taylor.gap),
        fmt_sig(agg.taylor.se)
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: u64, size: usize, alpha: f64, fdp: f64, u: f64) -> TrialReport {
        TrialReport {
            trial_id: id,
            seed: 1,
            variant: Variant::PhCs,
            set_size: size,
            declared_alpha: alpha,
            realized_fdp: fdp,
            realized_utility: u,
        }
    }

    #[test]
    fn significant_digit_rendering() {
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(6.0), "6");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_sig(123456.789), "123456.789");
        assert_eq!(fmt_sig(1e-6), "1e-6");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig(1e15), "1e15");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_sig(0.99999999999999), "1");
        assert_eq!(fmt_sig(1e-5), "0.00001");
    }

    #[test]
    fn histograms() {
        let reps = vec![report(0, 3, 0.2, 0.0, 1.0), report(1, 5, 0.4, 1.0, 2.0)];
        assert_eq!(size_histogram(&reps), vec![(3, 1), (5, 1)]);
        let fdp = fdp_histogram(&reps);
        assert_eq!(fdp.len(), 2);
        assert_eq!(fdp[1].2, 1);
        assert!((fdp[1].1 - 1.0).abs() < 1e-12);
        let u = utility_histogram(&reps);
        assert_eq!(u.iter().map(|r| r.2).sum::<usize>(), 2);
    }

    #[test]
    fn emit_writes_headers_for_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_reports(&[], dir.path(), "x_").unwrap();
        for p in paths {
            let text = fs::read_to_string(p).unwrap();
            assert_eq!(text.lines().count(), 1);
        }
    }

    #[test]
    fn emit_scatter_rows_match_trials() {
        let dir = tempfile::tempdir().unwrap();
        let reps: Vec<_> = (0..7).map(|i| report(i, 2, 0.3, 0.5, 1.0)).collect();
        let paths = emit_reports(&reps, dir.path(), "").unwrap();
        let scatter = fs::read_to_string(&paths[3]).unwrap();
        assert_eq!(scatter.lines().count(), 8);
    }

    #[test]
    fn trials_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let reps = vec![
            report(0, 3, 1.0 / 3.0, 0.25, f64::NEG_INFINITY),
            report(1, 0, 0.0, 0.0, 0.0),
        ];
        write_trials_csv(fs::File::create(&path).unwrap(), &reps).unwrap();
        let back = read_trials_csv(&path).unwrap();
        assert_eq!(back[1], reps[1]);
        assert_eq!(back[0].realized_utility, f64::NEG_INFINITY);
        assert!((back[0].declared_alpha - 1.0 / 3.0).abs() < 1e-11);
    }
}
