//! Disorder averages, transition location and phase-diagram assembly.

pub mod locate;
pub mod output;
pub mod stats;
pub mod table;
pub mod threshold;

pub use locate::{locate_tc, Method, TcEstimate, TcPair};
pub use output::{exact_rows, table_rows, write_csv, CsvRow, PhaseDiagram, PhasePoint, SizeEntry};
pub use stats::{bootstrap, skewness, Estimate, DEFAULT_RESAMPLES};
pub use table::{build_table, ErrorSource, ObservableTable, TableKey};
pub use threshold::{ordered_at_nishimori, threshold_scan, ScanPoint, SizeTc, ThresholdEstimate, Verdict};
