//! Implementation of the `iokr` command-line tool.
//!
//! The binary in `main.rs` is a thin wrapper over these modules:
//! [`config`] defines the per-command run configurations and flag-override
//! rules, [`io`] the file formats (dense CSV, label files, the model
//! bundle, and the emitted tables), [`commands`] the per-subcommand drivers,
//! and [`errors`] the exit-code classification. Keeping them in a library
//! target lets integration tests exercise the exact loaders and writers the
//! binary uses.

pub mod commands;
pub mod config;
pub mod errors;
pub mod io;
