//! File formats, the external regressor bridge, benchmark orchestration and
//! the command line for `symreduce-core`.

pub mod cli;
pub mod corpus;
pub mod external;
pub mod io;
pub mod runner;

pub use symreduce_core as core;
