//! Dataset generation, bound checks, experiments and reports.

pub mod checks;
pub mod dataset;
pub mod experiment;
pub mod report;
