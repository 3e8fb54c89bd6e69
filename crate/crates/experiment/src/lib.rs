//! Batch experiments over populations of negotiating customers.

pub mod checks;
pub mod config;
pub mod metrics;
pub mod report;
pub mod runner;
