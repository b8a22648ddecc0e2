//! Isolating a variable in `lhs = rhs`.

use super::algebra::simplify;
use super::dag::{BinaryOp, DagBuilder, ExprDag, Node, UnaryOp};
use super::ExprError;

/// Solves `lhs = rhs` for variable `target`, which must occur exactly once in
/// the tree of `lhs` (after simplification if needed) and not at all in
/// `rhs`. Operators on the path to the target are inverted one by one;
/// `sin` and `cos` have no unique inverse and are rejected.
pub fn solve_for(lhs: &ExprDag, rhs: &ExprDag, target: usize) -> Result<ExprDag, ExprError> {
    if rhs.uses_var(target) {
        return Err(ExprError::NotSolvable(
            "target variable appears on the right-hand side".into(),
        ));
    }
    match peel(lhs, rhs, target) {
        Ok(e) => Ok(e),
        Err(first) => {
            let s = simplify(lhs);
            if s != *lhs {
                peel(&s, rhs, target)
            } else {
                Err(first)
            }
        }
    }
}

fn peel(lhs: &ExprDag, rhs: &ExprDag, target: usize) -> Result<ExprDag, ExprError> {
    let occ = lhs.occurrence_counts(target);
    if !single_path(lhs, &occ) {
        return Err(ExprError::NotSolvable(alloc::format!(
            "target occurs {} times",
            occ[lhs.root()]
        )));
    }
    let nodes = lhs.nodes();
    let mut b = DagBuilder::new();
    let mut acc = b.import(rhs);
    let mut memo = hashbrown::HashMap::new();
    let mut side = |b: &mut DagBuilder, id: usize| -> usize {
        *memo.entry(id).or_insert_with(|| b.import(&lhs.subdag(id)))
    };
    let mut cur = lhs.root();
    loop {
        match nodes[cur] {
            Node::Var(v) if v == target => return Ok(b.finish(acc)),
            Node::Unary(op, a) => {
                acc = match op {
                    UnaryOp::Sqrt => b.binary(BinaryOp::Mul, acc, acc),
                    UnaryOp::Square => b.unary(UnaryOp::Sqrt, acc),
                    UnaryOp::Log => b.unary(UnaryOp::Exp, acc),
                    UnaryOp::Exp => b.unary(UnaryOp::Log, acc),
                    UnaryOp::Neg => b.unary(UnaryOp::Neg, acc),
                    UnaryOp::Inv => {
                        let one = b.constant(1.0);
                        b.binary(BinaryOp::Div, one, acc)
                    }
                    UnaryOp::Sin | UnaryOp::Cos => {
                        return Err(ExprError::NotSolvable(alloc::format!(
                            "{} is not invertible",
                            op.name()
                        )))
                    }
                };
                cur = a;
            }
            Node::Binary(op, l, r) if l == r => {
                // Both operands are the same shared node.
                acc = match op {
                    BinaryOp::Mul => b.unary(UnaryOp::Sqrt, acc),
                    BinaryOp::Add => {
                        let half = b.constant(0.5);
                        b.binary(BinaryOp::Mul, half, acc)
                    }
                    BinaryOp::Sub | BinaryOp::Div => {
                        return Err(ExprError::NotSolvable("target cancels".into()))
                    }
                };
                cur = l;
            }
            Node::Binary(op, l, r) => {
                if occ[l] > 0 {
                    let other = side(&mut b, r);
                    acc = match op {
                        BinaryOp::Add => b.binary(BinaryOp::Sub, acc, other),
                        BinaryOp::Sub => b.binary(BinaryOp::Add, acc, other),
                        BinaryOp::Mul => b.binary(BinaryOp::Div, acc, other),
                        BinaryOp::Div => b.binary(BinaryOp::Mul, acc, other),
                    };
                    cur = l;
                } else {
                    let other = side(&mut b, l);
                    acc = match op {
                        BinaryOp::Add => b.binary(BinaryOp::Sub, acc, other),
                        BinaryOp::Sub => b.binary(BinaryOp::Sub, other, acc),
                        BinaryOp::Mul => b.binary(BinaryOp::Div, acc, other),
                        BinaryOp::Div => b.binary(BinaryOp::Div, other, acc),
                    };
                    cur = r;
                }
            }
            _ => unreachable!("occurrence count led to a leaf that is not the target"),
        }
    }
}

/// Whether every occurrence of the target lies on one path from the root,
/// where `a*a` and `a+a` with a shared operand count as one step.
fn single_path(lhs: &ExprDag, occ: &[usize]) -> bool {
    let nodes = lhs.nodes();
    let mut cur = lhs.root();
    loop {
        if occ[cur] == 0 {
            return false;
        }
        match nodes[cur] {
            Node::Unary(_, a) => cur = a,
            Node::Binary(_, l, r) if l == r => cur = l,
            Node::Binary(_, l, r) => {
                if occ[l] > 0 && occ[r] > 0 {
                    return false;
                }
                cur = if occ[l] > 0 { l } else { r };
            }
            _ => return true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, parse_with, ParseOptions};

    fn check(lhs: &str, target: usize, rhs: &str, point: &[f64]) {
        let opts = ParseOptions { y_index: Some(5) };
        let l = parse_with(lhs, &opts).unwrap();
        let r = parse(rhs).unwrap();
        let sol = solve_for(&l, &r, target).unwrap();
        assert!(!sol.uses_var(target));
        // Substituting the solution back must reproduce rhs.
        let back = l.substitute_var(target, &sol);
        let (a, b) = (back.eval_point(point), r.eval_point(point));
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{lhs}: {a} vs {b}");
    }

    #[test]
    fn inverts_every_operator() {
        let p = [1.3, 0.7, 2.1, 0.4, 1.9, 0.0];
        check("y/sqrt(x1)", 5, "x2 + x3", &p);
        check("x1 - y", 5, "x2*x3", &p);
        check("x1/y", 5, "x2", &p);
        check("log(y*x1) + x2", 5, "x3", &p);
        check("exp(-y)", 5, "x3/4", &p);
        check("sqrt(y)*x1", 5, "x2", &p);
        check("1/(x1 + y)", 5, "x3", &p);
        check("y/x1*(y/x1)", 5, "x3", &p);
    }

    #[test]
    fn rejects_trig_and_repeated_targets() {
        let l = parse("sin(x1)").unwrap();
        assert!(matches!(solve_for(&l, &ExprDag::var(1), 0), Err(ExprError::NotSolvable(_))));
        let l = parse("x1*x1 + x1").unwrap();
        assert!(solve_for(&l, &ExprDag::var(1), 0).is_err());
    }

    #[test]
    fn retries_on_simplified_form() {
        let l = parse("x1 + x2 - x1 + x2*x3 - x2*x3").unwrap();
        let sol = solve_for(&l, &parse("x4").unwrap(), 0);
        assert!(sol.is_err());
        let l = parse("x1*x2/x2 + x2 - x2").unwrap();
        let sol = solve_for(&l, &parse("x3").unwrap(), 1);
        assert!(sol.is_err());
        let l = parse("x1*x2 + x1 - x1").unwrap();
        let sol = solve_for(&l, &parse("x3").unwrap(), 0).unwrap();
        assert!((sol.eval_point(&[0.0, 2.0, 6.0]) - 3.0).abs() < 1e-12);
    }
}
