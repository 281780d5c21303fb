//! Generators, the experiment runner and suite sweeps behind the `bmatch`
//! binary. Reports are versioned JSON; sweeps are CSV.

pub mod input;
pub mod run;
pub mod suites;

pub use input::{BudgetSpec, GraphSource};
pub use run::{execute, Algorithm, Report, RunConfig, SCHEMA_VERSION};
pub use suites::{instance, run_suite, summarize, write_csv, Row, Suite, Summary};
