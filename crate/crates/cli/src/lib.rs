//! Command-line plumbing for calib-atlas: audit configuration, record
//! ingestion, report and manifest emission, and plot-data export.

pub mod audit;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod plot;
pub mod report;
pub mod verify_runner;

pub const CONFIG_SCHEMA: &str = include_str!("../schemas/audit_config.schema.json");
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");
pub const MANIFEST_SCHEMA: &str = include_str!("../schemas/verify_manifest.schema.json");

/// Exit status of a run whose verdicts all pass.
pub const EXIT_PASS: i32 = 0;
/// Exit status when some verdict fails.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for configuration, input or I/O errors.
pub const EXIT_ERROR: i32 = 2;
