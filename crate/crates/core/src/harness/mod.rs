//! Seeded simulation experiments: two-sample trials, resampling-risk
//! scans and the count-table experiment, with aggregation into tables.

mod config;
mod count_table;
mod manifest;
mod method;
mod risk;
mod table;
mod trial;

pub use config::{check_keys, parse_config, Experiment, MethodConfig, MethodKind, Response, SimulateConfig};
pub use count_table::{run_count_table_experiment, CountTableConfig, CountTable};
pub use manifest::Manifest;
pub use method::{run_method, MethodBody, MethodOutcome, ResolvedMethod};
pub use risk::{
    aggressive_resampling_risk, estimate_resampling_risk, randomized_threshold_risk, RiskEstimate,
};
pub use table::{aggregate, ExperimentTable, StopCategory, TableRow};
pub use trial::{run_simulation, run_two_sample_trial, TwoSampleData};

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `jobs` workers (all cores if `None`).
/// Results never depend on the worker count.
pub fn with_pool<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
