//! Experiment harness for the nonsmooth stationarity solvers: plain-text
//! configs, seeded parallel runs with CSV/JSON artifacts, brute-force
//! certification, and statistical validation of iteration bounds.

pub mod certify;
pub mod config;
pub mod experiment;
pub mod validate;

pub use certify::{certify_stationarity, default_sample_count, CertifyError, CertifyReport};
pub use config::{
    experiment_from_config, function_spec_from_config, parse_config, Algorithm, ConfigError,
    ExperimentConfig, RawConfig, OUTPUT_DIR_ENV,
};
pub use experiment::{
    run_experiment, ExperimentReport, HarnessError, RunSummary, SeedArtifacts, CG_CSV_HEADER,
    INGD_CSV_HEADER, SCHEMA_VERSION,
};
pub use validate::{validate_bounds, CheckRow, CheckStatus, ValidateError, ValidateReport};
