//! Post-hoc conformal selection.
//!
//! Conformal selection picks, from a batch of unlabeled test units, those
//! whose hidden outcome likely exceeds a threshold, with false discovery rate
//! control. The classical procedure (CS) runs Benjamini-Hochberg at a level
//! fixed in advance. The post-hoc variant (PH-CS) builds the nested path of
//! every set reachable by e-BH at some level, attaches an estimated FDP to each
//! candidate, and lets a utility function pick one after seeing the data.
//! Reliability then holds in the sense `E[FDP / alpha_hat] <= 1`.
//!
//! Typical flow:
//!
//! ```
//! use posthoc_cs::conformal::CalibrationScores;
//! use posthoc_cs::selection::ph_cs;
//! use posthoc_cs::utility::UtilitySpec;
//!
//! let cal = CalibrationScores::new(vec![0.1, 0.2, 0.1, 0.3]).unwrap();
//! let test_scores = [9.0, 0.05, 4.0];
//! let (outcome, path) = ph_cs(&cal, &test_scores, &UtilitySpec::linear(1.0)).unwrap();
//! assert_eq!(path.entries().len(), 4);
//! println!("selected {:?} at level {}", outcome.members, outcome.alpha);
//! ```
//!
//! The `examples/` directory walks through each capability, and the
//! `posthoc-cs` binary exposes the same pipeline on CSV files and synthetic
//! campaigns.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod datasim;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod selection;
pub mod utility;

pub use error::{Error, Result};
