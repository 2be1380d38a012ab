//! File formats, reports and commands behind the `elqr` binary.

pub mod commands;
pub mod error;
pub mod problem;
pub mod report;
pub mod sdpa;
pub mod textmat;
pub mod trajectory;

pub use error::{CliError, Result};
pub use problem::{Problem, ToleranceOverrides};
pub use report::Report;
