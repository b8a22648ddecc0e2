//! Exhaustive enumeration of small expression DAGs.

use hashbrown::HashSet;

use super::dag::{BinaryOp, DagBuilder, ExprDag, Node, UnaryOp};
use crate::prelude::*;

/// A set of operators, stored as a bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OpSet(u16);

impl OpSet {
    pub const EMPTY: OpSet = OpSet(0);

    fn unary_bit(op: UnaryOp) -> u16 {
        1 << (op as u16)
    }

    fn binary_bit(op: BinaryOp) -> u16 {
        1 << (8 + op as u16)
    }

    pub fn all() -> OpSet {
        let mut s = OpSet::EMPTY;
        for op in UnaryOp::ALL {
            s = s.with_unary(op);
        }
        for op in BinaryOp::ALL {
            s = s.with_binary(op);
        }
        s
    }

    pub fn arithmetic() -> OpSet {
        BinaryOp::ALL.iter().fold(OpSet::EMPTY, |s, &op| s.with_binary(op))
    }

    pub fn with_unary(self, op: UnaryOp) -> OpSet {
        OpSet(self.0 | Self::unary_bit(op))
    }

    pub fn with_binary(self, op: BinaryOp) -> OpSet {
        OpSet(self.0 | Self::binary_bit(op))
    }

    pub fn has_unary(self, op: UnaryOp) -> bool {
        self.0 & Self::unary_bit(op) != 0
    }

    pub fn has_binary(self, op: BinaryOp) -> bool {
        self.0 & Self::binary_bit(op) != 0
    }

    pub fn unary_ops(self) -> impl Iterator<Item = UnaryOp> {
        UnaryOp::ALL.into_iter().filter(move |&op| self.has_unary(op))
    }

    pub fn binary_ops(self) -> impl Iterator<Item = BinaryOp> {
        BinaryOp::ALL.into_iter().filter(move |&op| self.has_binary(op))
    }

    /// Parses a comma-separated list such as `+,-,*,/,sqrt,log`. Binary
    /// operators may also be spelled `add,sub,mul,div`.
    pub fn parse_list(s: &str) -> Result<OpSet, String> {
        let mut set = OpSet::EMPTY;
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            set = match tok {
                "+" | "add" => set.with_binary(BinaryOp::Add),
                "-" | "sub" => set.with_binary(BinaryOp::Sub),
                "*" | "mul" => set.with_binary(BinaryOp::Mul),
                "/" | "div" => set.with_binary(BinaryOp::Div),
                name => match UnaryOp::from_name(name) {
                    Some(op) => set.with_unary(op),
                    None => return Err(format!("unknown operator '{name}'")),
                },
            };
        }
        Ok(set)
    }
}

/// Limits on enumerated DAGs. The output node is an operator node;
/// `max_intermediary_nodes` counts the other operator nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrammarBudget {
    pub max_intermediary_nodes: usize,
    pub ops: OpSet,
    /// Adds a constant placeholder leaf (`c0`).
    pub allow_constants: bool,
}

impl GrammarBudget {
    fn max_ops(&self) -> usize {
        self.max_intermediary_nodes + 1
    }
}

fn has_var(d: &ExprDag) -> bool {
    d.nodes().iter().any(|n| matches!(n, Node::Var(_)))
}

fn every_op_has_var(d: &ExprDag) -> bool {
    let mut v = Vec::with_capacity(d.len());
    for n in d.nodes() {
        v.push(match *n {
            Node::Var(_) => true,
            Node::Const(_) | Node::Param(_) => false,
            Node::Unary(_, a) => v[a],
            Node::Binary(_, l, r) => v[l] || v[r],
        });
    }
    v.iter().zip(d.nodes()).all(|(&has, n)| has || !matches!(n, Node::Unary(..) | Node::Binary(..)))
}

fn leaves(arity: usize, budget: &GrammarBudget) -> Vec<ExprDag> {
    let mut v: Vec<ExprDag> = (0..arity).map(ExprDag::var).collect();
    if budget.allow_constants {
        v.push(ExprDag::param(0));
    }
    v
}

/// Streams every distinct DAG over `arity` variables within the budget,
/// level by level in the number of operator nodes. Operands of `+` and `*`
/// are in canonical order. Operator nodes without a variable below them are
/// never built: such a subtree is just another constant.
pub fn enumerate_dags(arity: usize, budget: &GrammarBudget) -> DagEnumerator {
    DagEnumerator::new(arity, *budget, None)
}

pub struct DagEnumerator {
    budget: GrammarBudget,
    levels: Vec<Vec<ExprDag>>,
    seen: HashSet<ExprDag>,
    queue: alloc::collections::VecDeque<ExprDag>,
    limit: Option<usize>,
    produced: usize,
}

impl DagEnumerator {
    fn new(arity: usize, budget: GrammarBudget, limit: Option<usize>) -> Self {
        DagEnumerator {
            budget,
            levels: vec![leaves(arity, &budget)],
            seen: HashSet::new(),
            queue: Default::default(),
            limit,
            produced: 0,
        }
    }

    /// Stops after `n` DAGs without generating the rest of the last level.
    pub fn with_limit(mut self, n: usize) -> Self {
        self.limit = Some(n);
        self
    }

    fn room(&self, pending: usize) -> bool {
        self.limit.is_none_or(|l| self.produced + pending < l)
    }

    fn next_level(&mut self) -> bool {
        let k = self.levels.len();
        if k > self.budget.max_ops() || !self.room(0) {
            return false;
        }
        let mut fresh: Vec<ExprDag> = Vec::new();
        let accept = |d: ExprDag, fresh: &mut Vec<ExprDag>, seen: &mut HashSet<ExprDag>| {
            if has_var(&d) && seen.insert(d.clone()) {
                fresh.push(d);
            }
        };
        let unary: Vec<UnaryOp> = self.budget.ops.unary_ops().collect();
        let binary: Vec<BinaryOp> = self.budget.ops.binary_ops().collect();
        'unary: for a in &self.levels[k - 1] {
            for &op in &unary {
                if !self.limit.is_none_or(|l| self.produced + fresh.len() < l) {
                    break 'unary;
                }
                accept(ExprDag::unary(op, a), &mut fresh, &mut self.seen);
            }
        }
        'binary: for i in 0..k {
            for j in 0..k {
                // Sharing between the operands can at most remove the
                // smaller one's operator nodes.
                if i + j < k - 1 || i + j - (k - 1) > i.min(j) {
                    continue;
                }
                for a in &self.levels[i] {
                    for b in &self.levels[j] {
                        for &op in &binary {
                            if !self.limit.is_none_or(|l| self.produced + fresh.len() < l) {
                                break 'binary;
                            }
                            if op.is_commutative() && b < a {
                                continue;
                            }
                            let mut bld = DagBuilder::new();
                            let (ia, ib) = (bld.import(a), bld.import(b));
                            let r = bld.binary(op, ia, ib);
                            let d = bld.finish(r);
                            if d.op_count() == k {
                                accept(d, &mut fresh, &mut self.seen);
                            }
                        }
                    }
                }
            }
        }
        self.queue.extend(fresh.iter().cloned());
        self.levels.push(fresh);
        true
    }
}

impl Iterator for DagEnumerator {
    type Item = ExprDag;

    fn next(&mut self) -> Option<ExprDag> {
        loop {
            if !self.room(0) {
                return None;
            }
            if let Some(d) = self.queue.pop_front() {
                self.produced += 1;
                return Some(d);
            }
            if !self.next_level() {
                return None;
            }
        }
    }
}

/// Reference enumeration: every sequence of at most `max_intermediary + 1`
/// operator nodes whose operands are leaves or earlier nodes, last node as
/// output, canonicalized and deduplicated, keeping those where every
/// operator node has a variable below it. Exponential; meant for tests.
pub fn enumerate_dags_bruteforce(arity: usize, budget: &GrammarBudget) -> BTreeSet<ExprDag> {
    let base = leaves(arity, budget);
    let mut out = BTreeSet::new();
    let mut b = DagBuilder::new();
    for l in &base {
        b.import(l);
    }
    // Builder ids of the leaves are 0..base.len() in insertion order.
    frames(&mut b, base.len(), &mut Vec::new(), budget, &mut out);
    out
}

fn frames(
    b: &mut DagBuilder,
    n_leaves: usize,
    ops: &mut Vec<usize>,
    budget: &GrammarBudget,
    out: &mut BTreeSet<ExprDag>,
) {
    if ops.len() == budget.max_ops() {
        return;
    }
    let avail: Vec<usize> = (0..n_leaves).chain(ops.iter().copied()).collect();
    let mut candidates = Vec::new();
    for op in budget.ops.unary_ops() {
        for &a in &avail {
            candidates.push(Node::Unary(op, a));
        }
    }
    for op in budget.ops.binary_ops() {
        for &l in &avail {
            for &r in &avail {
                candidates.push(Node::Binary(op, l, r));
            }
        }
    }
    for n in candidates {
        let id = match n {
            Node::Unary(op, a) => b.unary(op, a),
            Node::Binary(op, l, r) => b.binary(op, l, r),
            _ => unreachable!(),
        };
        if ops.contains(&id) || id < n_leaves {
            continue;
        }
        let d = b.finish(id).canonicalize_commutative();
        if every_op_has_var(&d) {
            out.insert(d);
        }
        ops.push(id);
        frames(b, n_leaves, ops, budget, out);
        ops.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(k: usize, ops: &str, c: bool) -> GrammarBudget {
        GrammarBudget {
            max_intermediary_nodes: k,
            ops: OpSet::parse_list(ops).unwrap(),
            allow_constants: c,
        }
    }

    #[test]
    fn single_unary() {
        let all: Vec<_> = enumerate_dags(1, &budget(0, "sqrt", false)).collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].to_text(), "sqrt(x1)");
    }

    #[test]
    fn single_binary_over_two_leaves() {
        let all: Vec<_> = enumerate_dags(2, &budget(0, "+,-,*,/", false)).collect();
        // + and * are symmetric (3 operand pairs each), - and / are not (4).
        assert_eq!(all.len(), 14);
    }

    #[test]
    fn matches_bruteforce() {
        for (arity, b) in [
            (2, budget(1, "+,*,sqrt", false)),
            (2, budget(1, "-,/,exp", true)),
            (1, budget(2, "+,*,log", false)),
            (3, budget(1, "+,-,*,/", false)),
        ] {
            let fast: BTreeSet<ExprDag> = enumerate_dags(arity, &b).collect();
            let slow = enumerate_dags_bruteforce(arity, &b);
            let only_fast: Vec<String> = fast.difference(&slow).map(|d| d.to_text()).collect();
            let only_slow: Vec<String> = slow.difference(&fast).map(|d| d.to_text()).collect();
            assert!(only_fast.is_empty() && only_slow.is_empty(), "arity {arity}: {only_fast:?} {only_slow:?}");
        }
    }

    #[test]
    fn limit_is_respected() {
        let n = enumerate_dags(3, &budget(2, "+,-,*,/,sqrt", true)).with_limit(500).count();
        assert_eq!(n, 500);
    }

    #[test]
    fn no_duplicates() {
        let all: Vec<_> = enumerate_dags(3, &budget(1, "+,-,*,/,sqrt,log", false)).collect();
        let set: BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), all.len());
    }
}
