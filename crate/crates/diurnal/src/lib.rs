//! PCA model of daily environmental-sensor behavior with event detection.
//!
//! Per-minute sensor readings are aggregated into 144-slot daily vectors,
//! normalized, and decomposed over an orthonormal basis learned from the
//! correlation matrix of "normal" days. A handful of coefficients per day
//! then describes the diurnal cycle; divergences between measurements and
//! the model flag discrete events such as rain onset.
//!
//! The crate covers the whole batch pipeline:
//!
//! * [`ingest`] — measurement and ground-truth CSV parsing,
//! * [`preprocess`] — slot aggregation, normalization, bad-day censoring,
//! * [`eigen`] / [`pca`] — Jacobi eigensolver and the daily basis,
//! * [`trend`] — week-scale smoothing, sensor averages, high-passing,
//! * [`detect`] — the Basic, Highpass and Delta detectors,
//! * [`eval`] — precision/recall reports and PR curves,
//! * [`synth`] — labeled synthetic corpora for desk-scale experiments,
//! * [`pipeline`] — the file-level commands behind the `diurnal` CLI.

pub mod config;
pub mod detect;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod pca;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod series;
pub mod synth;
pub mod trend;

pub use error::{Error, Result};
