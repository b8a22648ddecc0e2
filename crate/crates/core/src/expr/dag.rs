use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};

use hashbrown::HashMap;

use crate::matrix::Matrix;
use crate::prelude::*;

/// An `f64` with bitwise identity, so constants can take part in structural
/// equality, ordering and hashing. `-0.0` is stored as `0.0` and every NaN as
/// the canonical NaN.
#[derive(Clone, Copy, Debug)]
pub struct Real(f64);

impl Real {
    pub fn new(v: f64) -> Self {
        if v == 0.0 {
            Real(0.0)
        } else if v.is_nan() {
            Real(f64::NAN)
        } else {
            Real(v)
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Real {}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for Real {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnaryOp {
    Sqrt,
    Log,
    Exp,
    Sin,
    Cos,
    Neg,
    Inv,
    Square,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 8] = [
        UnaryOp::Sqrt,
        UnaryOp::Log,
        UnaryOp::Exp,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Neg,
        UnaryOp::Inv,
        UnaryOp::Square,
    ];

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Sqrt => a.sqrt(),
            UnaryOp::Log => {
                if a > 0.0 {
                    a.ln()
                } else {
                    f64::NAN
                }
            }
            UnaryOp::Exp => a.exp(),
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Neg => -a,
            UnaryOp::Inv => 1.0 / a,
            UnaryOp::Square => a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Log => "log",
            UnaryOp::Exp => "exp",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Neg => "neg",
            UnaryOp::Inv => "inv",
            UnaryOp::Square => "square",
        }
    }

    pub fn from_name(s: &str) -> Option<UnaryOp> {
        UnaryOp::ALL.iter().copied().find(|op| op.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Mul)
    }

    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    /// Input variable, zero-based.
    Var(usize),
    Const(Real),
    /// Constant placeholder whose value is fitted later.
    Param(usize),
    Unary(UnaryOp, NodeId),
    Binary(BinaryOp, NodeId, NodeId),
}

/// A rooted expression DAG.
///
/// Nodes are hash-consed and stored in the post-order of a left-to-right
/// traversal from the root, children before parents. Two DAGs that unfold to
/// the same expression tree therefore have identical node vectors, and the
/// derived `Eq`, `Ord` and `Hash` are structural.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExprDag {
    nodes: Vec<Node>,
}

impl ExprDag {
    pub fn var(i: usize) -> Self {
        ExprDag { nodes: vec![Node::Var(i)] }
    }

    pub fn constant(v: f64) -> Self {
        ExprDag { nodes: vec![Node::Const(Real::new(v))] }
    }

    pub fn param(k: usize) -> Self {
        ExprDag { nodes: vec![Node::Param(k)] }
    }

    pub fn unary(op: UnaryOp, a: &ExprDag) -> Self {
        let mut b = DagBuilder::new();
        let ia = b.import(a);
        let r = b.unary(op, ia);
        b.finish(r)
    }

    pub fn binary(op: BinaryOp, l: &ExprDag, r: &ExprDag) -> Self {
        let mut b = DagBuilder::new();
        let il = b.import(l);
        let ir = b.import(r);
        let root = b.binary(op, il, ir);
        b.finish(root)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn root_node(&self) -> Node {
        self.nodes[self.root()]
    }

    /// Number of distinct nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of operator nodes (distinct).
    pub fn op_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Unary(..) | Node::Binary(..)))
            .count()
    }

    /// The sub-DAG rooted at `id`.
    pub fn subdag(&self, id: NodeId) -> ExprDag {
        let mut b = DagBuilder::new();
        let r = b.import_node(self, id, &mut HashMap::new());
        b.finish(r)
    }

    /// Sorted, deduplicated variable indices that occur in the DAG.
    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| if let Node::Var(i) = n { Some(*i) } else { None })
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// One past the largest variable index, or 0 without variables.
    pub fn arity(&self) -> usize {
        self.variables().last().map_or(0, |&m| m + 1)
    }

    pub fn uses_var(&self, i: usize) -> bool {
        self.nodes.iter().any(|n| *n == Node::Var(i))
    }

    pub fn param_count(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| if let Node::Param(k) = n { Some(*k + 1) } else { None })
            .max()
            .unwrap_or(0)
    }

    /// Per-node size of the unfolded tree.
    fn tree_sizes(&self) -> Vec<usize> {
        let mut s = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            s[i] = match *n {
                Node::Var(_) | Node::Const(_) | Node::Param(_) => 1,
                Node::Unary(_, a) => 1 + s[a],
                Node::Binary(_, a, b) => 1usize.saturating_add(s[a]).saturating_add(s[b]),
            };
        }
        s
    }

    /// Node count of the unfolded expression tree.
    pub fn tree_size(&self) -> usize {
        self.tree_sizes()[self.root()]
    }

    /// How often variable `var` occurs in the unfolded tree, per node.
    pub(crate) fn occurrence_counts(&self, var: usize) -> Vec<usize> {
        let mut s = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            s[i] = match *n {
                Node::Var(v) => usize::from(v == var),
                Node::Const(_) | Node::Param(_) => 0,
                Node::Unary(_, a) => s[a],
                Node::Binary(_, a, b) => s[a].saturating_add(s[b]),
            };
        }
        s
    }

    /// Occurrences of variable `var` in the unfolded tree.
    pub fn occurrences(&self, var: usize) -> usize {
        self.occurrence_counts(var)[self.root()]
    }

    /// Replaces every variable `i` by `replacements[i]`.
    ///
    /// Panics if a variable has no replacement.
    pub fn substitute(&self, replacements: &[ExprDag]) -> ExprDag {
        let mut b = DagBuilder::new();
        let roots: Vec<NodeId> = replacements.iter().map(|r| b.import(r)).collect();
        let root = b.import_with(self, &|v| roots[v]);
        b.finish(root)
    }

    /// Replaces a single variable by an expression.
    pub fn substitute_var(&self, var: usize, with: &ExprDag) -> ExprDag {
        let mut b = DagBuilder::new();
        let w = b.import(with);
        let mut memo = HashMap::new();
        let mut vars = HashMap::new();
        let root = b.import_mapped(self, self.root(), &mut memo, &mut |b, v| {
            if v == var {
                w
            } else {
                *vars.entry(v).or_insert_with(|| b.var(v))
            }
        });
        b.finish(root)
    }

    /// Renames variables.
    pub fn remap_vars(&self, f: impl Fn(usize) -> usize) -> ExprDag {
        let mut b = DagBuilder::new();
        let mut memo = HashMap::new();
        let root = b.import_mapped(self, self.root(), &mut memo, &mut |b, v| b.var(f(v)));
        b.finish(root)
    }

    /// Replaces parameter placeholders by constants.
    pub fn bind_params(&self, values: &[f64]) -> ExprDag {
        let mut b = DagBuilder::new();
        let mut ids = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let id = match *n {
                Node::Param(k) => b.constant(values[k]),
                Node::Var(v) => b.var(v),
                Node::Const(c) => b.push(Node::Const(c)),
                Node::Unary(op, a) => b.unary(op, ids[a]),
                Node::Binary(op, l, r) => b.binary(op, ids[l], ids[r]),
            };
            ids.push(id);
        }
        b.finish(*ids.last().expect("non-empty dag"))
    }

    /// Reorders the operands of `+` and `*` so that the smaller sub-DAG comes
    /// first, recursively. Commuted variants of the same expression map to
    /// the same DAG.
    pub fn canonicalize_commutative(&self) -> ExprDag {
        let mut subs: Vec<ExprDag> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let d = match *n {
                Node::Unary(op, a) => ExprDag::unary(op, &subs[a]),
                Node::Binary(op, l, r) => {
                    let (l, r) = (&subs[l], &subs[r]);
                    if op.is_commutative() && r < l {
                        ExprDag::binary(op, r, l)
                    } else {
                        ExprDag::binary(op, l, r)
                    }
                }
                leaf => ExprDag { nodes: vec![leaf] },
            };
            subs.push(d);
        }
        subs.pop().expect("non-empty dag")
    }

    /// Evaluates at a single point. Variables beyond `x.len()` read as NaN.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        self.eval_point_params(x, &[])
    }

    pub fn eval_point_params(&self, x: &[f64], params: &[f64]) -> f64 {
        let mut vals = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let v = match *n {
                Node::Var(i) => x.get(i).copied().unwrap_or(f64::NAN),
                Node::Const(c) => c.get(),
                Node::Param(k) => params.get(k).copied().unwrap_or(f64::NAN),
                Node::Unary(op, a) => op.apply(vals[a]),
                Node::Binary(op, a, b) => op.apply(vals[a], vals[b]),
            };
            vals.push(v);
        }
        vals[self.root()]
    }

    /// Evaluates on every row of `x`. Domain violations give non-finite
    /// values.
    pub fn eval(&self, x: &Matrix) -> Vec<f64> {
        self.eval_params(x, &[])
    }

    pub fn eval_params(&self, x: &Matrix, params: &[f64]) -> Vec<f64> {
        let n = x.nrows();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let col = match *node {
                Node::Var(j) => {
                    if j < x.ncols() {
                        (0..n).map(|i| x.get(i, j)).collect()
                    } else {
                        vec![f64::NAN; n]
                    }
                }
                Node::Const(c) => vec![c.get(); n],
                Node::Param(k) => vec![params.get(k).copied().unwrap_or(f64::NAN); n],
                Node::Unary(op, a) => cols[a].iter().map(|&v| op.apply(v)).collect(),
                Node::Binary(op, a, b) => cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(&u, &v)| op.apply(u, v))
                    .collect(),
            };
            cols.push(col);
        }
        cols.pop().unwrap_or_default()
    }

    /// Evaluates with columns given explicitly (`columns[j]` is variable `j`).
    pub fn eval_columns(&self, columns: &[&[f64]], n: usize, params: &[f64]) -> Vec<f64> {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let col = match *node {
                Node::Var(j) => match columns.get(j) {
                    Some(c) => c.to_vec(),
                    None => vec![f64::NAN; n],
                },
                Node::Const(c) => vec![c.get(); n],
                Node::Param(k) => vec![params.get(k).copied().unwrap_or(f64::NAN); n],
                Node::Unary(op, a) => cols[a].iter().map(|&v| op.apply(v)).collect(),
                Node::Binary(op, a, b) => cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(&u, &v)| op.apply(u, v))
                    .collect(),
            };
            cols.push(col);
        }
        cols.pop().unwrap_or_default()
    }

    /// Writes the expression with variables named `x1`, `x2`, ...
    pub fn to_text(&self) -> String {
        super::text::print(self, &|i| format!("x{}", i + 1))
    }

    /// Writes the expression with custom variable names.
    pub fn to_text_with(&self, name: &dyn Fn(usize) -> String) -> String {
        super::text::print(self, name)
    }
}

impl fmt::Display for ExprDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Hash-consing builder. Identical nodes are created once.
#[derive(Default)]
pub struct DagBuilder {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(n);
        self.index.insert(n, id);
        id
    }

    pub fn var(&mut self, i: usize) -> NodeId {
        self.push(Node::Var(i))
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Node::Const(Real::new(v)))
    }

    pub fn param(&mut self, k: usize) -> NodeId {
        self.push(Node::Param(k))
    }

    pub fn unary(&mut self, op: UnaryOp, a: NodeId) -> NodeId {
        self.push(Node::Unary(op, a))
    }

    pub fn binary(&mut self, op: BinaryOp, l: NodeId, r: NodeId) -> NodeId {
        self.push(Node::Binary(op, l, r))
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id]
    }

    /// Copies a DAG into the builder and returns the id of its root.
    pub fn import(&mut self, dag: &ExprDag) -> NodeId {
        let mut memo = HashMap::new();
        self.import_node(dag, dag.root(), &mut memo)
    }

    /// Copies a DAG, resolving variable `v` to the builder node `vars(v)`.
    pub fn import_with(&mut self, dag: &ExprDag, vars: &dyn Fn(usize) -> NodeId) -> NodeId {
        let mut memo = HashMap::new();
        self.import_mapped(dag, dag.root(), &mut memo, &mut |_, v| vars(v))
    }

    fn import_node(
        &mut self,
        dag: &ExprDag,
        id: NodeId,
        memo: &mut HashMap<NodeId, NodeId>,
    ) -> NodeId {
        self.import_mapped(dag, id, memo, &mut |b, v| b.var(v))
    }

    fn import_mapped(
        &mut self,
        dag: &ExprDag,
        id: NodeId,
        memo: &mut HashMap<NodeId, NodeId>,
        vars: &mut dyn FnMut(&mut DagBuilder, usize) -> NodeId,
    ) -> NodeId {
        // Nodes are topologically ordered, so a forward pass over the prefix
        // up to `id` sees children first.
        for (i, n) in dag.nodes[..=id].iter().enumerate() {
            if memo.contains_key(&i) {
                continue;
            }
            let new = match *n {
                Node::Var(v) => vars(self, v),
                Node::Const(c) => self.push(Node::Const(c)),
                Node::Param(k) => self.param(k),
                Node::Unary(op, a) => {
                    let a = memo[&a];
                    self.unary(op, a)
                }
                Node::Binary(op, l, r) => {
                    let (l, r) = (memo[&l], memo[&r]);
                    self.binary(op, l, r)
                }
            };
            memo.insert(i, new);
        }
        memo[&id]
    }

    /// Extracts the DAG rooted at `root`, dropping unreachable nodes and
    /// putting the rest into canonical order.
    pub fn finish(&self, root: NodeId) -> ExprDag {
        let mut nodes = Vec::new();
        let mut index: HashMap<Node, NodeId> = HashMap::new();
        let mut placed: HashMap<NodeId, NodeId> = HashMap::new();
        // Iterative post-order: (node, children done).
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if placed.contains_key(&id) {
                continue;
            }
            let n = self.nodes[id];
            if !expanded {
                stack.push((id, true));
                match n {
                    Node::Unary(_, a) => stack.push((a, false)),
                    Node::Binary(_, l, r) => {
                        stack.push((r, false));
                        stack.push((l, false));
                    }
                    _ => {}
                }
                continue;
            }
            let mapped = match n {
                Node::Unary(op, a) => Node::Unary(op, placed[&a]),
                Node::Binary(op, l, r) => Node::Binary(op, placed[&l], placed[&r]),
                leaf => leaf,
            };
            let new_id = *index.entry(mapped).or_insert_with(|| {
                nodes.push(mapped);
                nodes.len() - 1
            });
            placed.insert(id, new_id);
        }
        ExprDag { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> ExprDag {
        ExprDag::var(i)
    }

    #[test]
    fn hash_consing_shares_subtrees() {
        let s = ExprDag::binary(BinaryOp::Add, &x(0), &x(1));
        let e = ExprDag::binary(BinaryOp::Mul, &s, &s);
        assert_eq!(e.len(), 4);
        assert_eq!(e.tree_size(), 7);
        assert_eq!(e.occurrences(0), 2);
    }

    #[test]
    fn structural_equality_is_independent_of_build_order() {
        let mut b1 = DagBuilder::new();
        let p = b1.var(1);
        let q = b1.var(0);
        let r = b1.binary(BinaryOp::Sub, q, p);
        let d1 = b1.finish(r);
        let d2 = ExprDag::binary(BinaryOp::Sub, &x(0), &x(1));
        assert_eq!(d1, d2);
    }

    #[test]
    fn domain_violations_are_non_finite() {
        let m = Matrix::from_rows(&[[-1.0], [0.0], [4.0]]);
        let v = ExprDag::unary(UnaryOp::Sqrt, &x(0)).eval(&m);
        assert!(v[0].is_nan());
        assert_eq!(v[2], 2.0);
        let l = ExprDag::unary(UnaryOp::Log, &x(0)).eval(&m);
        assert!(!l[0].is_finite() && !l[1].is_finite());
        let d = ExprDag::binary(BinaryOp::Div, &ExprDag::constant(1.0), &x(0)).eval(&m);
        assert!(!d[1].is_finite());
    }

    #[test]
    fn substitution_composes() {
        let g = ExprDag::binary(BinaryOp::Mul, &x(0), &x(1));
        let f = ExprDag::binary(BinaryOp::Add, &x(0), &x(1));
        let h = f.substitute(&[g.clone(), x(2)]);
        assert_eq!(h.eval_point(&[2.0, 3.0, 4.0]), 10.0);
        let k = f.substitute_var(1, &g);
        assert_eq!(k.eval_point(&[2.0, 3.0]), 8.0);
        assert_eq!(h.remap_vars(|v| v + 1).variables(), vec![1, 2, 3]);
    }

    #[test]
    fn commutative_canonical_form() {
        let a = ExprDag::binary(BinaryOp::Mul, &x(1), &x(0));
        let b = ExprDag::binary(BinaryOp::Mul, &x(0), &x(1));
        assert_eq!(a.canonicalize_commutative(), b.canonicalize_commutative());
        let c = ExprDag::binary(BinaryOp::Sub, &x(1), &x(0));
        assert_eq!(c.canonicalize_commutative(), c);
    }
}
