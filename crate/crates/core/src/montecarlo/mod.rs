//! Reproducible random streams, streaming ensemble statistics and
//! closed-form comparison reports shared by every solver.

mod ensemble;
mod report;
mod stats;
mod stream;

pub use ensemble::{collect_samples, run_ensemble, with_workers, EnsembleOutcome, SampleFailure, BLOCK_SIZE};
pub use report::{
    compare, compare_estimate, compare_upper_bound, ClosedFormReport, ReportRow, SeriesTable, REPORT_HEADER,
    Z_THRESHOLD,
};
pub use stats::{correlation_estimate, CrossStats, EnsembleStats};
pub use stream::{RandomStream, StreamRng};
