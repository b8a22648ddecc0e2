//! Dimension reduction for symbolic regression.
//!
//! A regression problem `y = f(x_1, ..., x_d)` is often easier to solve once
//! variables that only ever occur in a fixed combination are replaced by that
//! combination. This crate searches small expression DAGs for such
//! substitutions, scores every candidate by how well the transformed
//! observations still describe a function (rank-based dependence measures),
//! keeps the best candidates level by level in a beam search, and maps
//! solutions of the reduced problems back to the original variables.
//!
//! The crate is `no_std` (with `alloc`). File formats, the subprocess
//! regressor bridge and the command line live in the `symreduce` crate.
//!
//! Module map:
//!
//! - [`expr`]: expression DAGs, evaluation, enumeration, simplification,
//!   equation solving and symbolic checks.
//! - [`depmeasure`]: Chatterjee's xi, CODEC, KMAc and the volume baseline.
//! - [`substitution`]: datasets, candidate generation, application and
//!   ground-truth verification.
//! - [`beam`]: the level-wise search and solution reconstruction.
//! - [`regress`]: regressors for the reduced problems and the solve pipeline.
//! - [`bench`]: sampling, noise and evaluation metrics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod beam;
pub mod bench;
pub mod depmeasure;
pub mod expr;
pub mod matrix;
pub mod regress;
pub mod substitution;

mod prelude;

pub use beam::{search, BeamConfig, SearchNode, SearchResult, SubTypes};
pub use depmeasure::{DependenceScore, Measure};
pub use expr::{ExprDag, GrammarBudget};
pub use matrix::Matrix;
pub use substitution::{Dataset, InputSub, OutInputSub, Substitution};
