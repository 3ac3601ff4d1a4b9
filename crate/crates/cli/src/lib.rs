//! Configuration files, frequency response data, report emission and the
//! command-line front end for `paulistab-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod emit;
pub mod frd;
pub mod svg;

pub use analysis::{run_analysis, AppError};
pub use config::{load_config, parse_config, AnalysisConfig};
