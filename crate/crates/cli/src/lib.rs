//! Pipelines, tables and run manifests for the `qmcdip` command.
//!
//! Every output table carries a `# key: value` header naming the manifest,
//! master seed and input hash that produced it. Stage seeds are labelled
//! hashes of the master seed, so one number reproduces a whole run.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod inputs;
pub mod manifest;
pub mod pipeline;
pub mod stages;
pub mod table;
