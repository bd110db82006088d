//! Context-aware slice testing for tabular models.
pub mod audit;
pub mod baseline;
pub mod cli;
pub mod dataset;
pub mod falsify;
pub mod hypothesis;
pub mod metrics;
pub mod model;
pub mod predicate;
pub mod remote;
pub mod report;
pub mod splitter;
pub mod synth;
