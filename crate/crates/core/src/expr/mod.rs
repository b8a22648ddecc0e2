//! Expression DAGs over indexed input variables.

mod algebra;
mod checks;
mod dag;
mod enumerate;
mod solve;
mod text;

pub use checks::{
    complexity, depends_on, equivalent, jaccard, subexpressions, NumericProbe,
};
pub use dag::{BinaryOp, DagBuilder, ExprDag, Node, NodeId, Real, UnaryOp};
pub use enumerate::{enumerate_dags, enumerate_dags_bruteforce, DagEnumerator, GrammarBudget, OpSet};
pub use solve::solve_for;
pub use text::{parse, parse_with, ParseOptions};

pub use algebra::{affine_class_key, normalize, simplify};

use crate::prelude::*;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("target variable cannot be isolated: {0}")]
    NotSolvable(String),
    #[error("symbolic and numeric dependence checks disagree")]
    Inconclusive,
}
