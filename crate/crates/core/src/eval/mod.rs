//! Accuracy, significance testing, the multi-seed benchmark runner and
//! report emission.

pub mod benchmark;
pub mod metrics;
pub mod report;
pub mod special;
pub mod synthetic;
pub mod welch;

pub use benchmark::{
    prepare_pair, run_benchmark, run_seeds, train_system, BenchmarkConfig, BenchmarkResults,
    BenchmarkSpec, Comparison, HeldOutTarget, LabelAudit, PairData, RunResult, System,
};
pub use metrics::accuracy;
pub use report::{emit_report, parse_results_csv, results_csv, summary_markdown, summary_text};
pub use special::{student_t_cdf, student_t_sf};
pub use welch::{welch_one_tailed, WelchResult};
