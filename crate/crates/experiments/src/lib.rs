//! Scenario runners and the `lowrank` command-line tool.
//!
//! Every scenario reads a [`config::ScenarioConfig`], runs its cells on a
//! rayon pool and returns an [`output::ScenarioResult`] holding the raw
//! traces, per-scenario tables and the pass/fail checks that the command
//! line turns into its exit code.

pub mod cli;
pub mod config;
pub mod output;
pub mod quadratic;
pub mod scenarios;
pub mod stats;
pub mod summary;
