//! Field-standardized research productivity of university research units and
//! tests for variable returns to unit size.
//!
//! The crate is organised along the analysis flow:
//!
//! * [`dataset`]: publication and staff records, ingestion, validation.
//! * [`scoring`]: citation baselines, author weights, unit and scientist scores.
//! * [`classify`]: top/inactive labels, per-sector frames, dichotomization.
//! * [`stats`]: G-test, chi-square tail, tau-b, quartile permutation test, LOESS.
//! * [`pipeline`]: the two-stage per-sector analysis and its reports.
//! * [`synth`]: synthetic worlds with planted returns to size.

pub mod classify;
pub mod config;
pub mod dataset;
pub mod numeric;
pub mod pipeline;
pub mod scoring;
pub mod stats;
pub mod synth;

pub use classify::{ContingencyTable2x2, SdsFrame};
pub use config::{AnalysisConfig, ConfirmRule, ProjectConfig};
pub use dataset::{Dataset, PublicationRecord, StaffRecord, UnitKey};
pub use pipeline::{Report, SdsResult};
pub use scoring::{Baselines, ScientistScore, UnitScore};
