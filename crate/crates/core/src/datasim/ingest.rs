//! Reading externally produced predictions.
//!
//! Calibration files carry either `mu,label` (classifier mode, labels in
//! `{0, 1}`) or `mu,y,c` (regression mode). Test files carry `mu,c` plus the
//! optional columns `y`, `e_g` and `w`, in any order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::csv_err;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    Classifier,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub mu: f64,
    /// Observed label or response.
    pub y: f64,
    /// Per-row threshold; absent in classifier mode.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub mu: f64,
    pub c: f64,
    pub y: Option<f64>,
    pub e_g: Option<f64>,
    pub w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedData {
    pub mode: IngestMode,
    pub calibration: Vec<CalibrationRow>,
    pub test: Vec<TestRow>,
}

impl IngestedData {
    pub fn is_labeled(&self) -> bool {
        self.test.iter().all(|t| t.y.is_some())
    }

    pub fn has_external_e(&self) -> bool {
        self.test.iter().all(|t| t.e_g.is_some())
    }

    pub fn has_weights(&self) -> bool {
        self.test.iter().all(|t| t.w.is_some())
    }
}

struct Table {
    columns: Vec<String>,
    /// `(line, fields)` per data row.
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let columns = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(Table { columns, rows })
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

fn number(path: &Path, line: u64, column: &str, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(
            path,
            line,
            format!("column '{column}': invalid number '{field}'"),
        )),
    }
}

fn check_probability(path: &Path, line: u64, mu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(parse_err(
            path,
            line,
            format!("classifier prediction {mu} outside [0, 1]"),
        ))
    }
}

fn check_label(path: &Path, line: u64, y: f64) -> Result<()> {
    if y == 0.0 || y == 1.0 {
        Ok(())
    } else {
        Err(parse_err(path, line, format!("label {y} is not 0 or 1")))
    }
}

fn read_calibration(path: &Path) -> Result<(IngestMode, Vec<CalibrationRow>)> {
    let table = read_table(path)?;
    let mode = match table.columns.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["mu", "label"] => IngestMode::Classifier,
        ["mu", "y", "c"] => IngestMode::Regression,
        _ => {
            return Err(parse_err(
                path,
                1,
                format!(
                    "calibration header must be 'mu,label' or 'mu,y,c', found '{}'",
                    table.columns.join(",")
                ),
            ))
        }
    };
    let names = table.columns.clone();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let v = |i: usize| number(path, *line, &names[i], &fields[i]);
        let row = match mode {
            IngestMode::Classifier => {
                let (mu, y) = (v(0)?, v(1)?);
                check_probability(path, *line, mu)?;
                check_label(path, *line, y)?;
                CalibrationRow { mu, y, c: None }
            }
            IngestMode::Regression => CalibrationRow {
                mu: v(0)?,
                y: v(1)?,
                c: Some(v(2)?),
            },
        };
        out.push(row);
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no calibration units", path.display())));
    }
    Ok((mode, out))
}

fn read_test(path: &Path, mode: IngestMode) -> Result<Vec<TestRow>> {
    let table = read_table(path)?;
    let find = |name: &str| table.columns.iter().position(|c| c == name);
    if let Some(bad) = table
        .columns
        .iter()
        .find(|c| !matches!(c.as_str(), "mu" | "c" | "y" | "e_g" | "w"))
    {
        return Err(parse_err(path, 1, format!("unknown test column '{bad}'")));
    }
    let (Some(i_mu), Some(i_c)) = (find("mu"), find("c")) else {
        return Err(parse_err(path, 1, "test header must contain 'mu' and 'c'"));
    };
    let (i_y, i_e, i_w) = (find("y"), find("e_g"), find("w"));
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let v = |i: usize| number(path, *line, &table.columns[i], &fields[i]);
        let opt = |i: Option<usize>| i.map(v).transpose();
        let row = TestRow {
            mu: v(i_mu)?,
            c: v(i_c)?,
            y: opt(i_y)?,
            e_g: opt(i_e)?,
            w: opt(i_w)?,
        };
        if mode == IngestMode::Classifier {
            check_probability(path, *line, row.mu)?;
            if let Some(y) = row.y {
                check_label(path, *line, y)?;
            }
        }
        if row.e_g.is_some_and(|e| e < 0.0) || row.w.is_some_and(|w| w < 0.0) {
            return Err(parse_err(path, *line, "e_g and w must be non-negative"));
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no test units", path.display())));
    }
    Ok(out)
}

/// Parse and validate a calibration file and a test file.
pub fn load_predictions(cal_file: &Path, test_file: &Path) -> Result<IngestedData> {
    let (mode, calibration) = read_calibration(cal_file)?;
    let test = read_test(test_file, mode)?;
    Ok(IngestedData {
        mode,
        calibration,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn load(cal: &str, test: &str) -> Result<IngestedData> {
        let (c, t) = (file(cal), file(test));
        load_predictions(c.path(), t.path())
    }

    #[test]
    fn classifier_rows_accepted() {
        let d = load("mu,label\n0.82,1\n", "mu,c\n0.91,0.5\n").unwrap();
        assert_eq!(d.mode, IngestMode::Classifier);
        assert_eq!(d.calibration[0], CalibrationRow { mu: 0.82, y: 1.0, c: None });
        assert_eq!(d.test[0].mu, 0.91);
        assert_eq!(d.test[0].c, 0.5);
        assert!(!d.is_labeled());
    }

    #[test]
    fn regression_with_optional_columns_and_comments() {
        let d = load(
            "# predictions\nmu,y,c\n0.2,1.5,0\n",
            "w,mu,c,y,e_g\n# unit one\n1.5,0.3,0,2.0,4\n",
        )
        .unwrap();
        assert_eq!(d.mode, IngestMode::Regression);
        assert_eq!(d.calibration[0].c, Some(0.0));
        let t = d.test[0];
        assert_eq!((t.y, t.e_g, t.w), (Some(2.0), Some(4.0), Some(1.5)));
        assert!(d.is_labeled() && d.has_external_e() && d.has_weights());
    }

    #[test]
    fn parse_error_reports_line() {
        match load("mu,label\n0.5,0\nabc,1\n", "mu,c\n0.1,0.5\n") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classifier_probability_range_enforced() {
        assert!(matches!(
            load("mu,label\n1.2,1\n", "mu,c\n0.1,0.5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(load("mu,label\n0.2,1\n", "mu,c\n-0.1,0.5\n").is_err());
        assert!(load("mu,label\n0.2,2\n", "mu,c\n0.1,0.5\n").is_err());
    }

    #[test]
    fn empty_test_file() {
        let err = load("mu,label\n0.2,1\n", "mu,c\n").unwrap_err();
        assert!(err.to_string().contains("no test units"));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn bad_headers() {
        assert!(load("mu,z\n0.2,1\n", "mu,c\n0.1,0.5\n").is_err());
        assert!(load("mu,label\n0.2,1\n", "mu\n0.1\n").is_err());
        assert!(load("mu,label\n0.2,1\n", "mu,c,extra\n0.1,0.5,1\n").is_err());
    }
}
