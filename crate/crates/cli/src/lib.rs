//! Command-line front end for `poissonstab`.

pub mod commands;
pub mod config;
pub mod report;
