//! Library side of the `sdf` command-line tool: argument types, config
//! loading, subcommand implementations, the experiment harness, and the
//! synthetic benchmark datasets used by the acceptance suite.

pub mod args;
pub mod benchdata;
pub mod commands;
pub mod config;
pub mod experiment;
