//! File-based pipeline around the core localization library: simulate a
//! site, preprocess captures, train the quantifier and tracker, and
//! evaluate tracking error, one artifact per stage.

pub mod config;
pub mod formats;
pub mod manifest;
pub mod report;
pub mod stages;
