//! Staged command-line pipeline with hashed, atomically written artifacts.
//!
//! Stages: `fom -> homogenize -> pod -> offline -> online -> vp-online -> compare`.
//! Each stage reads its inputs from the run directory, checks them against the
//! ledger, and appends its own outputs.

pub mod cli;
pub mod config;
pub mod container;
pub mod ledger;
pub mod stages;

pub use cli::{main_with_args, Cli, Verb};
pub use config::{SimConfig, Testcase};
pub use container::{ArtifactKind, Container};
pub use ledger::{LedgerEntry, RunLedger};
pub use stages::{Pipeline, Stage, StageOutput, SweepRow};
