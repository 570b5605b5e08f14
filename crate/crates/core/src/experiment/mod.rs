//! Experiment runner behind the command-line tool.
//!
//! Each command reads its inputs, writes artifacts into the output directory
//! and finishes with a manifest that, passed back as `--config`, repeats the
//! run bit for bit.

mod commands;
mod spec;

pub use commands::{
    analyze_codes, cmd_analyze, cmd_learn, cmd_reconstruct, cmd_sweep, learn_on_images, read_sweep_csv, run,
    training_pool, CodeAnalysis, Resynthesis, RunSummary, SweepRow, DIFFERENCE_SCALE,
};
pub use spec::{
    mu_tag, parse_config, parse_mu, Command, ExperimentSpec, DEFAULT_ATOMS, DEFAULT_MAX_ITERS, DEFAULT_MU,
    DEFAULT_N_PATCHES, DEFAULT_PATCH, DEFAULT_STRIDE, MANIFEST_NAME,
};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SPARSEDICT_THREADS";

/// Thread pool sized by `SPARSEDICT_THREADS` when set (0 or unset means one
/// worker per core).
pub fn thread_pool() -> crate::Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| crate::Error::Usage(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::invalid(e.to_string()))
}
