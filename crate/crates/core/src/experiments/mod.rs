//! Convergence studies, error metrics and table output.

pub mod fields;
pub mod metrics;
pub mod study;
pub mod table;
pub mod validation;

pub use metrics::{fit_rate, l1_error, l2_error, second_moment, w_error};
pub use study::{run_convergence_study, run_study, Diagnostics, ExperimentConfig, StudyResult};
pub use table::{ErrorRow, ErrorTable, Metadata, OutputFormat, RateRow, CSV_HEADER};
pub use fields::FieldTable;
pub use validation::{mc_validate, McComparison, McValidation};
