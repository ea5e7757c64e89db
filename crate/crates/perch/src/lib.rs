//! Host-side companion to `perch-core`: configuration files, checkpoints,
//! CSV/JSON formats, parallel execution and the `perch` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod formats;
pub mod fsutil;
pub mod parallel;
