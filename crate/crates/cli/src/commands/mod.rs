pub mod equivalence;
pub mod report;
pub mod simulate;
pub mod test;

use std::fs;
use std::path::Path;

use citlab::CounterSnapshot;

use crate::error::{CliResult, Failure};

pub const COUNTER_FIELDS: [&str; 5] = [
    "ml_y_given_x",
    "ml_x",
    "ml_xj_given_rest",
    "predict_xj_given_rest",
    "predict_y_given_x",
];

pub fn counter_tuple(c: &CounterSnapshot) -> String {
    let (a, b, d, e, f) = c.as_tuple();
    format!("({a}, {b}, {d}, {e}, {f})")
}

pub fn counter_fields(c: &CounterSnapshot) -> [String; 5] {
    let (a, b, d, e, f) = c.as_tuple();
    [a, b, d, e, f].map(|v| v.to_string())
}

pub fn scaled(c: &CounterSnapshot, k: u64) -> CounterSnapshot {
    let (a, b, d, e, f) = c.as_tuple();
    CounterSnapshot::new(a * k, b * k, d * k, e * k, f * k)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))
}

/// Builds a thread pool of `workers` threads.
pub fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Failure::Run(format!("thread pool: {e}")))
}
