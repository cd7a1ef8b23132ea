//! Orchestration of the newsflow pipeline: ingest into a cache, analyze
//! into reports, validate against planted ground truth.

pub mod analyze;
pub mod config;
pub mod output;
pub mod prepare;
pub mod validate;

pub use config::RunConfig;

/// Rayon pool sized by `NEWSFLOW_WORKERS` (all cores when unset).
pub fn worker_pool(workers: Option<usize>) -> newsflow_core::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n.max(1));
    }
    b.build()
        .map_err(|e| newsflow_core::Error::Config(format!("worker pool: {e}")))
}
