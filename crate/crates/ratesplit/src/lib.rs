//! File formats, reports and the command line around `ratesplit-core`.

pub mod cli;
pub mod files;
pub mod presets;
pub mod report;

pub use ratesplit_core as core;
