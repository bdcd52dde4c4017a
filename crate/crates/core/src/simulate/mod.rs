//! Synthetic AR(1) data sets and method comparisons.

mod bench;
mod compare;
mod generate;
mod roc;

pub use bench::{timing_benchmark, write_timing_csv, BenchConfig, TimingRow};
pub use compare::{
    median, run_comparison, run_replicate, summarize, write_tidy_csv, Method, MethodOutcome,
    MethodSummary,
};
pub use generate::{ar1_rows, balanced_labels, generate_dataset, SimulatedDataset, SimulationConfig};
pub use roc::{roc_from_frequencies, RocCurve};
