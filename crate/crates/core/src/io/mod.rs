//! Byte-level formats: the `.dag` graph grammar, correlation and dataset CSV,
//! and the canonical JSON report document.

mod csv;
mod dag;
mod report;

pub use self::csv::{parse_correlation_csv, read_dataset_csv, write_correlation_csv, write_dataset_csv};
pub use self::dag::{parse_dag, write_dag, write_dot, DagDocument};
pub use self::report::{sha256_hex, Report, REPORT_FORMAT, REPORT_VERSION};
