//! Command-line experiments for `excitable-core`: config files, CSV export
//! and the subcommands behind the `excitable` binary.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv;
