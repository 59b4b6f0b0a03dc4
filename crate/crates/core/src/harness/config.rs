//! Run configuration.
//!
//! Configuration is TOML with four core sections (`[run]`, `[score]`,
//! `[utility]`, `[sim]`) plus `[data]` for file input. Every key can be
//! overridden on the command line by its dotted name, e.g.
//! `--score.gamma 50` or `--sim.m=40`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasim::{Noise, SyntheticConfig};
use crate::error::{Error, Result};
use crate::scoring::{ScoreKind, ScoreSpec, DEFAULT_DELTA, DEFAULT_EPS, GAMMA_INGESTED, GAMMA_SYNTHETIC};
use crate::selection::Variant;
use crate::utility::UtilitySpec;

/// Which CS campaign, if any, runs alongside the post-hoc variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    None,
    /// CS at the campaign average of the post-hoc levels (two passes).
    Matched,
    /// CS at `run.cs_alpha_max`.
    Fixed,
}

/// What the matched CS level is averaged from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsMatch {
    /// Mean declared level `alpha_hat` of the post-hoc variant.
    Declared,
    /// Mean realized FDP of the post-hoc variant.
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub variant: Variant,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
    pub baseline: Baseline,
    /// Level for the `cs` and `ebh_fixed` variants and for a fixed baseline.
    pub cs_alpha_max: Option<f64>,
    pub cs_match: CsMatch,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            variant: Variant::PhCs,
            trials: 100,
            seed: 0,
            workers: 1,
            baseline: Baseline::None,
            cs_alpha_max: None,
            cs_match: CsMatch::Declared,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreSection {
    pub kind: ScoreKind,
    /// Defaults to 3 for synthetic data and 50 for ingested predictions.
    pub gamma: Option<f64>,
    pub delta: f64,
    pub eps: f64,
    /// Min-max normalization; defaults to on except for classifier files.
    pub normalize: Option<bool>,
    pub norm_min: Option<f64>,
    pub norm_max: Option<f64>,
}

impl Default for ScoreSection {
    fn default() -> Self {
        ScoreSection {
            kind: ScoreKind::ClippedOdds,
            gamma: None,
            delta: DEFAULT_DELTA,
            eps: DEFAULT_EPS,
            normalize: None,
            norm_min: None,
            norm_max: None,
        }
    }
}

impl ScoreSection {
    /// Score spec without a normalization range; the range is attached once
    /// the training (or calibration) predictions are known.
    pub fn base_spec(&self, synthetic: bool) -> Result<ScoreSpec> {
        let default_gamma = if synthetic { GAMMA_SYNTHETIC } else { GAMMA_INGESTED };
        let spec = ScoreSpec {
            kind: self.kind,
            gamma: self.gamma.unwrap_or(default_gamma),
            delta: self.delta,
            eps: self.eps,
            norm: None,
        };
        spec.validate().map_err(|e| Error::Config(format!("[score] {e}")))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    ConstrainedSize,
    Additive,
    LinearTradeoff,
    LogTradeoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilitySection {
    pub kind: UtilityKind,
    /// Defaults to half the batch (synthetic) or a tenth (files), rounded up.
    pub r_min: Option<usize>,
    pub lambda: f64,
    pub c: f64,
    pub u_table: Option<Vec<f64>>,
    pub v_table: Option<Vec<[f64; 2]>>,
}

impl Default for UtilitySection {
    fn default() -> Self {
        UtilitySection {
            kind: UtilityKind::ConstrainedSize,
            r_min: None,
            lambda: 1.0,
            c: 0.0,
            u_table: None,
            v_table: None,
        }
    }
}

impl UtilitySection {
    pub fn spec(&self, m: usize, synthetic: bool) -> Result<UtilitySpec> {
        let spec = match self.kind {
            UtilityKind::ConstrainedSize => {
                let frac = if synthetic { 0.5 } else { 0.1 };
                let r_min = self.r_min.unwrap_or((frac * m as f64).ceil() as usize);
                UtilitySpec::ConstrainedSize { r_min }
            }
            UtilityKind::Additive => UtilitySpec::Additive {
                lambda: self.lambda,
                offset_c: self.c,
                u_table: self.u_table.clone(),
                v_table: self
                    .v_table
                    .as_ref()
                    .map(|t| t.iter().map(|k| (k[0], k[1])).collect()),
            },
            UtilityKind::LinearTradeoff => UtilitySpec::LinearTradeoff {
                lambda: self.lambda,
            },
            UtilityKind::LogTradeoff => UtilitySpec::LogTradeoff {
                lambda: self.lambda,
            },
        };
        spec.validate(m).map_err(|e| Error::Config(format!("[utility] {e}")))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    Knn,
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Uniform,
    /// Independent uniform draws rescaled to sum to `m`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_train: usize,
    pub n_cal: usize,
    pub m: usize,
    pub noise: Noise,
    pub c: f64,
    pub predictor: Predictor,
    pub knn_k: usize,
    pub ridge_reg: f64,
    pub weights: WeightScheme,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            n_train: 1000,
            n_cal: 1000,
            m: 100,
            noise: Noise::Homoscedastic,
            c: 0.0,
            predictor: Predictor::Knn,
            knn_k: 10,
            ridge_reg: 1e-3,
            weights: WeightScheme::Random,
        }
    }
}

impl SimSection {
    pub fn synthetic_config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n_train: self.n_train,
            n_cal: self.n_cal,
            m: self.m,
            noise: self.noise,
            c: self.c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub calibration: PathBuf,
    pub test: PathBuf,
    /// Threshold applied to classifier-mode calibration labels.
    #[serde(default = "default_label_threshold")]
    pub c: f64,
}

fn default_label_threshold() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Synthetic(SimSection),
    Files(DataSection),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    run: RunSection,
    score: ScoreSection,
    utility: UtilitySection,
    sim: Option<SimSection>,
    data: Option<DataSection>,
}

/// Fully parsed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    pub score: ScoreSection,
    pub utility: UtilitySection,
    pub source: DataSource,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run: RunSection::default(),
            score: ScoreSection::default(),
            utility: UtilitySection::default(),
            source: DataSource::Synthetic(SimSection::default()),
        }
    }
}

/// A `section.key = value` assignment from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: toml::Value,
}

impl Override {
    /// The value is read as a TOML literal when possible (`50`, `true`,
    /// `[1, 2]`) and as a bare string otherwise (`hinge`).
    pub fn parse(key: &str, raw: &str) -> Result<Self> {
        if key.split('.').count() != 2 || key.split('.').any(str::is_empty) {
            return Err(Error::Config(format!(
                "override '--{key}' must have the form --section.key"
            )));
        }
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_owned()),
        };
        Ok(Override {
            key: key.to_owned(),
            value,
        })
    }

    fn apply(&self, table: &mut toml::Table) -> Result<()> {
        let (section, key) = self.key.split_once('.').expect("validated in parse");
        let entry = table
            .entry(section)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(key.to_owned(), self.value.clone());
                Ok(())
            }
            _ => Err(Error::Config(format!("'{section}' is not a section"))),
        }
    }
}

/// Split `--section.key value` and `--section.key=value` pairs out of an
/// argument list, returning the remaining arguments and the overrides.
pub fn extract_overrides<I: IntoIterator<Item = String>>(args: I) -> Result<(Vec<String>, Vec<Override>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k, Some(v.to_owned())),
            None => (body, None),
        };
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        let raw = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Error::Config(format!("override '--{key}' is missing a value")))?,
        };
        overrides.push(Override::parse(key, &raw)?);
    }
    Ok((rest, overrides))
}

fn parse_table(text: &str) -> Result<toml::Table> {
    toml::from_str(text).map_err(|e| Error::Config(e.message().to_owned()))
}

impl RunConfig {
    /// Parse TOML text, apply overrides, and resolve the data source.
    pub fn from_toml_str(text: &str, overrides: &[Override]) -> Result<Self> {
        Self::from_table(parse_table(text)?, overrides)
    }

    fn from_table(mut table: toml::Table, overrides: &[Override]) -> Result<Self> {
        for o in overrides {
            o.apply(&mut table)?;
        }
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_owned()))?;
        let source = match (raw.sim, raw.data) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "exactly one data source is allowed: [sim] or [data], not both".into(),
                ))
            }
            (None, Some(d)) => DataSource::Files(d),
            (sim, None) => DataSource::Synthetic(sim.unwrap_or_default()),
        };
        let cfg = RunConfig {
            run: raw.run,
            score: raw.score,
            utility: raw.utility,
            source,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file (or start from defaults when `path` is `None`).
    ///
    /// Relative `[data]` paths written in the file are taken relative to the
    /// file's directory; paths given as overrides are left as typed.
    pub fn load(path: Option<&Path>, overrides: &[Override]) -> Result<Self> {
        let Some(p) = path else {
            return Self::from_table(toml::Table::new(), overrides);
        };
        let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("config file {} not found", p.display()))
            }
            _ => Error::io(p, e),
        })?;
        let mut table = parse_table(&text)?;
        let base = p.parent().unwrap_or(Path::new(""));
        if let Some(toml::Value::Table(data)) = table.get_mut("data") {
            for key in ["calibration", "test"] {
                if let Some(toml::Value::String(s)) = data.get_mut(key) {
                    if Path::new(s.as_str()).is_relative() {
                        *s = base.join(s.as_str()).to_string_lossy().into_owned();
                    }
                }
            }
        }
        Self::from_table(table, overrides)
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.source, DataSource::Synthetic(_))
    }

    /// Level used by fixed-level variants and the fixed baseline.
    pub fn fixed_level(&self) -> Result<f64> {
        self.run
            .cs_alpha_max
            .ok_or_else(|| Error::Config("run.cs_alpha_max is required for this variant".into()))
    }

    /// Re-check invariants, e.g. after command-line flags changed fields.
    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        if run.workers == 0 {
            return Err(Error::Config("run.workers must be at least 1".into()));
        }
        if run.trials == 0 {
            return Err(Error::Config("run.trials must be at least 1".into()));
        }
        if let Some(a) = run.cs_alpha_max {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("run.cs_alpha_max must lie in (0, 1), got {a}")));
            }
        }
        let needs_level = matches!(run.variant, Variant::Cs | Variant::EbhFixed)
            || run.baseline == Baseline::Fixed;
        if needs_level {
            self.fixed_level()?;
        }
        if run.baseline != Baseline::None && !run.variant.is_post_hoc() {
            return Err(Error::Config("a CS baseline requires a post-hoc variant".into()));
        }
        self.score.base_spec(self.is_synthetic())?;
        if let (Some(lo), Some(hi)) = (self.score.norm_min, self.score.norm_max) {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "score.norm_min ({lo}) must be below score.norm_max ({hi})"
                )));
            }
        }
        if let DataSource::Synthetic(sim) = &self.source {
            sim.synthetic_config()
                .validate()
                .map_err(|e| Error::Config(format!("[sim] {e}")))?;
            if sim.predictor == Predictor::Knn && (sim.knn_k == 0 || sim.knn_k > sim.n_train) {
                return Err(Error::Config(format!(
                    "sim.knn_k must lie in 1..={}, got {}",
                    sim.n_train, sim.knn_k
                )));
            }
            if !(sim.ridge_reg >= 0.0) {
                return Err(Error::Config("sim.ridge_reg must be >= 0".into()));
            }
            self.utility.spec(sim.m, true)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_are_synthetic() {
        let cfg = RunConfig::from_toml_str("", &[]).unwrap();
        assert!(cfg.is_synthetic());
        assert_eq!(cfg.run.variant, Variant::PhCs);
        assert_eq!(cfg.score.base_spec(true).unwrap().gamma, 3.0);
        assert_eq!(cfg.score.base_spec(false).unwrap().gamma, 50.0);
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[run]\nvariant = \"cs\"\ncs_alpha_max = 0.2\n[sim]\nm = 40\nnoise = \"heteroscedastic\"\n";
        let (rest, ovr) =
            extract_overrides(args(&["simulate", "--score.gamma", "50", "--sim.m=30", "--seed", "4"]))
                .unwrap();
        assert_eq!(rest, args(&["simulate", "--seed", "4"]));
        let cfg = RunConfig::from_toml_str(text, &ovr).unwrap();
        assert_eq!(cfg.score.gamma, Some(50.0));
        let DataSource::Synthetic(sim) = &cfg.source else { panic!() };
        assert_eq!(sim.m, 30);
        assert_eq!(sim.noise, Noise::Heteroscedastic);
        assert_eq!(cfg.run.variant, Variant::Cs);
    }

    #[test]
    fn string_override_without_quotes() {
        let (_, ovr) = extract_overrides(args(&["--score.kind", "hinge"])).unwrap();
        let cfg = RunConfig::from_toml_str("", &ovr).unwrap();
        assert_eq!(cfg.score.kind, ScoreKind::Hinge);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml_str("[sim]\nbogus = 1\n", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(RunConfig::from_toml_str("[nonsense]\n", &[]).is_err());
        assert!(extract_overrides(args(&["--a.b.c", "1"])).is_err());
        assert!(extract_overrides(args(&["--score.gamma"])).is_err());
    }

    #[test]
    fn one_data_source() {
        let text = "[sim]\nm = 5\n[data]\ncalibration = \"a.csv\"\ntest = \"b.csv\"\n";
        assert!(matches!(RunConfig::from_toml_str(text, &[]), Err(Error::Config(_))));
        let cfg = RunConfig::from_toml_str("[data]\ncalibration = \"a.csv\"\ntest = \"b.csv\"\n", &[])
            .unwrap();
        assert!(!cfg.is_synthetic());
    }

    #[test]
    fn validation_errors() {
        for text in [
            "[run]\nvariant = \"cs\"\n",
            "[run]\ncs_alpha_max = 1.5\n",
            "[run]\nworkers = 0\n",
            "[utility]\nr_min = 500\n[sim]\nm = 10\n",
            "[score]\ngamma = -1.0\n",
            "[sim]\nknn_k = 0\n",
            "[run]\nvariant = \"cs\"\ncs_alpha_max = 0.1\nbaseline = \"matched\"\n",
        ] {
            let err = RunConfig::from_toml_str(text, &[]).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn utility_defaults() {
        let u = UtilitySection::default();
        assert_eq!(u.spec(50, true).unwrap(), UtilitySpec::ConstrainedSize { r_min: 25 });
        assert_eq!(u.spec(50, false).unwrap(), UtilitySpec::ConstrainedSize { r_min: 5 });
        let add = UtilitySection {
            kind: UtilityKind::Additive,
            v_table: Some(vec![[0.0, 0.0], [1.0, 2.0]]),
            ..Default::default()
        };
        assert!(matches!(add.spec(3, true).unwrap(), UtilitySpec::Additive { .. }));
    }
}
