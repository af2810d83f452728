//! Experiments for transformed snapshot interpolation: analytic fixtures,
//! configurations, training runs and CSV reports.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fixture;
pub mod report;

pub use config::{builtin_config, resolve, ExperimentConfig, VariantSpec, BUILTINS};
pub use error::{HarnessError, Result};
pub use experiment::{prepare, run_experiment, run_variant, stability_of_run, ExperimentReport, RunReport};
pub use fixture::{fixture_eval, Fixture};
pub use report::{compare_report, Comparison};
