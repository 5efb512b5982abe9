//! Command line and HTTP front end for the `editprop` engine.
//!
//! - [`api`]: the session service as an axum router
//! - [`project`]: loading project directories, diffs and configuration files
//! - [`commands`]: the `mine`, `eval`, `replay` and `recommend` subcommands

pub mod api;
pub mod commands;
pub mod project;
