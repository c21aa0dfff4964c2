//! Exact-arithmetic engine for certified distances and conditional
//! expectations onto subalgebras of tracial *-algebras.
//!
//! Everything on the certified path is exact: scalars are Gaussian rationals
//! and dyadics, matrix backends evaluate over `Q(i)`, and every reported
//! value carries an explicit `2^-k` guarantee. See the README for the
//! problem-file format and the CLI.

pub mod cli;
pub mod commands;
pub mod engine;
pub mod exactnum;
pub mod findim;
pub mod fixtures;
pub mod oracle;
pub mod problem;
pub mod termalg;

pub use cli::run;
