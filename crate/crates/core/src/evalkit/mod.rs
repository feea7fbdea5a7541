//! trec_eval-compatible metrics, TREC file formats, the synthetic
//! benchmark, and learning-curve recording.

mod curve;
mod metrics;
mod report;
mod synthetic;
mod trec;

pub use curve::{first_step_reaching, CurvePoint, CurveRecorder, EvalBundle, CURVE_HEADER};
pub use metrics::{average_precision, precision_at_k, reciprocal_rank};
pub use report::{evaluate_run, MetricsReport, QueryMetrics};
pub use synthetic::{generate_synthetic_benchmark, GoldRecord, SyntheticBench, SyntheticBenchConfig, BENCH_FILES};
pub use trec::{read_qrels, read_run, write_qrels, write_run, Qrels, Run};
