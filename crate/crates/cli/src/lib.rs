//! Command-line front end for `periodic-forms`: the form document format,
//! input resolution, and the `analyze`, `certify`, `float`, `refine` and
//! `optimize` commands with text and JSON reports.

pub mod commands;
pub mod document;
pub mod error;

pub use commands::{run, Cli, Command, Output};
pub use document::{parse_document, parse_form, FormDocument};
pub use error::CliError;
pub use periodic_forms::fixtures::fixture;
