//! Candidate substitutions: generation, application to datasets and
//! verification against a known formula.
//!
//! An input substitution replaces the columns `x_I` by one derived column
//! `g(x_I)`. An out-input substitution replaces the response by
//! `h(x_I, y)` and drops the columns `x_I`. Each dataset remembers what its
//! columns and its response are in terms of the original variables, so a
//! solution found on a reduced dataset can be mapped back.

use core::fmt;

use crate::expr::{
    affine_class_key, depends_on, normalize, simplify, solve_for, ExprDag, ExprError,
    GrammarBudget, Node, NumericProbe,
};
use crate::expr::enumerate_dags;
use crate::matrix::Matrix;
use crate::prelude::*;

/// Candidates whose domain excludes more than this fraction of the rows are
/// rejected.
pub const MAX_DROP_FRACTION: f64 = 0.2;
/// Per-node candidate cap; enumeration order decides what is kept.
pub const MAX_CANDIDATES: usize = 50_000;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SubstError {
    #[error("x has {x} rows but y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("dataset has no input columns")]
    NoColumns,
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("substitution keeps only {kept} of {total} rows")]
    TooFewRows { kept: usize, total: usize },
    #[error("substituted column is constant")]
    Constant,
    #[error("index set {0:?} is not valid for this dataset")]
    BadIndexSet(Vec<usize>),
    #[error("no variable of the index set can be isolated")]
    Unverifiable,
}

/// A regression problem together with its relation to the original one.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    var_map: Vec<ExprDag>,
    y_map: ExprDag,
    n_original: usize,
    row_ids: Vec<usize>,
    dropped_fraction: f64,
}

impl Dataset {
    /// An original problem: column `j` is variable `x_{j+1}`.
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self, SubstError> {
        if x.nrows() != y.len() {
            return Err(SubstError::LengthMismatch { x: x.nrows(), y: y.len() });
        }
        if x.ncols() == 0 {
            return Err(SubstError::NoColumns);
        }
        for i in 0..x.nrows() {
            if !y[i].is_finite() || x.row(i).iter().any(|v| !v.is_finite()) {
                return Err(SubstError::NonFinite(i));
            }
        }
        let d = x.ncols();
        let n = x.nrows();
        Ok(Dataset {
            x,
            y,
            var_map: (0..d).map(ExprDag::var).collect(),
            y_map: ExprDag::var(d),
            n_original: d,
            row_ids: (0..n).collect(),
            dropped_fraction: 0.0,
        })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_vars(&self) -> usize {
        self.x.ncols()
    }

    /// Column `j` as an expression in the original variables.
    pub fn var_map(&self) -> &[ExprDag] {
        &self.var_map
    }

    /// The response as an expression in the original variables and the
    /// original response, which is variable [`Dataset::y_symbol`].
    pub fn y_map(&self) -> &ExprDag {
        &self.y_map
    }

    pub fn n_original_vars(&self) -> usize {
        self.n_original
    }

    pub fn y_symbol(&self) -> usize {
        self.n_original
    }

    /// Row indices into the original dataset.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// Fraction of the original rows lost to domain violations so far.
    pub fn dropped_fraction(&self) -> f64 {
        self.dropped_fraction
    }

    /// Restricts to the given local rows, keeping the maps.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            var_map: self.var_map.clone(),
            y_map: self.y_map.clone(),
            n_original: self.n_original,
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
            dropped_fraction: self.dropped_fraction,
        }
    }

    /// Restricts to rows whose original id satisfies `keep`.
    pub fn filter_ids(&self, keep: impl Fn(usize) -> bool) -> Dataset {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(self.row_ids[i])).collect();
        self.select_rows(&rows)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InputSub {
    /// Over local variables `0..indices.len()`.
    pub g: ExprDag,
    /// Sorted column indices of the parent.
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OutInputSub {
    /// Over local variables `0..indices.len()` and the response, which is
    /// local variable `indices.len()`.
    pub h: ExprDag,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Substitution {
    Input(InputSub),
    OutInput(OutInputSub),
}

impl Substitution {
    pub fn indices(&self) -> &[usize] {
        match self {
            Substitution::Input(s) => &s.indices,
            Substitution::OutInput(s) => &s.indices,
        }
    }

    /// Number of input columns after applying to a dataset with `d` columns.
    pub fn vars_after(&self, d: usize) -> usize {
        match self {
            Substitution::Input(s) => d - s.indices.len() + 1,
            Substitution::OutInput(s) => d - s.indices.len(),
        }
    }

    /// Human-readable form in the parent's column names, e.g.
    /// `g(x1,x2) = x1*x2` or `h(x1,y) = y/sqrt(x1)`.
    pub fn describe(&self) -> String {
        let (tag, e, idx, out) = match self {
            Substitution::Input(s) => ("g", &s.g, &s.indices, false),
            Substitution::OutInput(s) => ("h", &s.h, &s.indices, true),
        };
        let k = idx.len();
        let name = |v: usize| {
            if v < k {
                format!("x{}", idx[v] + 1)
            } else {
                "y".to_string()
            }
        };
        let mut args: Vec<String> = idx.iter().map(|i| format!("x{}", i + 1)).collect();
        if out {
            args.push("y".to_string());
        }
        format!("{tag}({}) = {}", args.join(","), e.to_text_with(&name))
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

fn combinations(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= d {
        rec(0, d, k, &mut Vec::new(), &mut out);
    }
    out
}

fn uses_all(e: &ExprDag, k: usize) -> bool {
    let vars = normalize(e).variables();
    (0..k).all(|v| vars.binary_search(&v).is_ok())
}

fn unary_root(e: &ExprDag) -> bool {
    matches!(e.root_node(), Node::Unary(..))
}

/// Input templates over `k` local variables: every enumerated DAG that
/// depends on all of them, one per class of expressions that differ only by
/// an affine map or a reciprocal (those carry the same information), and
/// none with a unary operator at the root (a function of another candidate).
pub fn input_templates(k: usize, budget: &GrammarBudget) -> Vec<ExprDag> {
    let mut keys = BTreeSet::new();
    let mut out = Vec::new();
    for g in enumerate_dags(k, budget) {
        if unary_root(&g) || !uses_all(&g, k) {
            continue;
        }
        if keys.insert(affine_class_key(&g)) {
            out.push(g);
        }
    }
    out
}

/// Out-input templates over `k` local variables plus the response (local
/// variable `k`): the response occurs once on an invertible path and every
/// argument matters. Deduplicated like [`input_templates`].
pub fn outinput_templates(k: usize, budget: &GrammarBudget) -> Vec<ExprDag> {
    let mut keys = BTreeSet::new();
    let mut out = Vec::new();
    let probe = ExprDag::var(k + 1);
    for h in enumerate_dags(k + 1, budget) {
        if unary_root(&h) || h.occurrences(k) != 1 || !uses_all(&h, k + 1) {
            continue;
        }
        if solve_for(&h, &probe, k).is_err() {
            continue;
        }
        if keys.insert(affine_class_key(&h)) {
            out.push(h);
        }
    }
    out
}

/// Input substitutions for a dataset with `d` columns: index sets of size 2,
/// and of size 3 when the budget has an intermediary node.
pub fn gen_input_candidates(d: usize, budget: &GrammarBudget) -> Vec<InputSub> {
    let mut out = Vec::new();
    let mut sizes = vec![2];
    if budget.max_intermediary_nodes >= 1 {
        sizes.push(3);
    }
    for k in sizes {
        if k > d {
            continue;
        }
        let templates = input_templates(k, budget);
        for idx in combinations(d, k) {
            for g in &templates {
                if out.len() == MAX_CANDIDATES {
                    return out;
                }
                out.push(InputSub { g: g.clone(), indices: idx.clone() });
            }
        }
    }
    out
}

/// Out-input substitutions for a dataset with `d` columns: index sets of
/// size 1, and of size 2 when the budget has two intermediary nodes. At
/// least one column always remains.
pub fn gen_outinput_candidates(d: usize, budget: &GrammarBudget) -> Vec<OutInputSub> {
    let mut out = Vec::new();
    let mut sizes = vec![1];
    if budget.max_intermediary_nodes >= 2 {
        sizes.push(2);
    }
    for k in sizes {
        if k >= d {
            continue;
        }
        let templates = outinput_templates(k, budget);
        for idx in combinations(d, k) {
            for h in &templates {
                if out.len() == MAX_CANDIDATES {
                    return out;
                }
                out.push(OutInputSub { h: h.clone(), indices: idx.clone() });
            }
        }
    }
    out
}

fn check_indices(ds: &Dataset, idx: &[usize]) -> Result<(), SubstError> {
    let ok = !idx.is_empty()
        && idx.windows(2).all(|w| w[0] < w[1])
        && idx.iter().all(|&i| i < ds.n_vars());
    if ok {
        Ok(())
    } else {
        Err(SubstError::BadIndexSet(idx.to_vec()))
    }
}

fn near_constant(v: &[f64]) -> bool {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    sd <= 1e-10 * mean.abs() || sd == 0.0
}

/// Rows kept after a transformation, or `TooFewRows`.
fn finite_rows(values: &[f64]) -> Result<Vec<usize>, SubstError> {
    let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    let total = values.len();
    let dropped = total - keep.len();
    if keep.is_empty() || dropped as f64 > MAX_DROP_FRACTION * total as f64 {
        return Err(SubstError::TooFewRows { kept: keep.len(), total });
    }
    Ok(keep)
}

/// Evaluates an input substitution on the parent's columns.
pub fn input_column(ds: &Dataset, s: &InputSub) -> Vec<f64> {
    let cols: Vec<Vec<f64>> = s.indices.iter().map(|&j| ds.x.column(j)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    s.g.eval_columns(&refs, ds.n_rows(), &[])
}

/// Evaluates an out-input substitution on the parent's columns and response.
pub fn outinput_column(ds: &Dataset, s: &OutInputSub) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = s.indices.iter().map(|&j| ds.x.column(j)).collect();
    cols.push(ds.y.clone());
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    s.h.eval_columns(&refs, ds.n_rows(), &[])
}

fn retained(d: usize, idx: &[usize]) -> Vec<usize> {
    (0..d).filter(|j| !idx.contains(j)).collect()
}

fn child(
    parent: &Dataset,
    rows: &[usize],
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    var_map: Vec<ExprDag>,
    y_map: ExprDag,
) -> Dataset {
    let x = Matrix::from_columns(&columns).select_rows(rows);
    let n_root = parent.n_rows() as f64 / (1.0 - parent.dropped_fraction);
    let row_ids: Vec<usize> = rows.iter().map(|&i| parent.row_ids[i]).collect();
    Dataset {
        x,
        y: rows.iter().map(|&i| y[i]).collect(),
        var_map,
        y_map,
        n_original: parent.n_original,
        dropped_fraction: 1.0 - row_ids.len() as f64 / n_root,
        row_ids,
    }
}

/// Replaces the columns `x_I` by `g(x_I)`, placed first.
pub fn apply_input(ds: &Dataset, s: &InputSub) -> Result<Dataset, SubstError> {
    check_indices(ds, &s.indices)?;
    let gamma = input_column(ds, s);
    let rows = finite_rows(&gamma)?;
    let kept: Vec<f64> = rows.iter().map(|&i| gamma[i]).collect();
    if near_constant(&kept) {
        return Err(SubstError::Constant);
    }
    let rest = retained(ds.n_vars(), &s.indices);
    let mut columns = vec![gamma];
    columns.extend(rest.iter().map(|&j| ds.x.column(j)));
    let parts: Vec<ExprDag> = s.indices.iter().map(|&j| ds.var_map[j].clone()).collect();
    let mut var_map = vec![s.g.substitute(&parts)];
    var_map.extend(rest.iter().map(|&j| ds.var_map[j].clone()));
    Ok(child(ds, &rows, columns, ds.y.clone(), var_map, ds.y_map.clone()))
}

/// Replaces the response by `h(x_I, y)` and drops the columns `x_I`.
pub fn apply_outinput(ds: &Dataset, s: &OutInputSub) -> Result<Dataset, SubstError> {
    check_indices(ds, &s.indices)?;
    if s.indices.len() >= ds.n_vars() {
        return Err(SubstError::BadIndexSet(s.indices.clone()));
    }
    let y = outinput_column(ds, s);
    let rows = finite_rows(&y)?;
    let kept: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    if near_constant(&kept) {
        return Err(SubstError::Constant);
    }
    let rest = retained(ds.n_vars(), &s.indices);
    let columns: Vec<Vec<f64>> = rest.iter().map(|&j| ds.x.column(j)).collect();
    let mut parts: Vec<ExprDag> = s.indices.iter().map(|&j| ds.var_map[j].clone()).collect();
    parts.push(ds.y_map.clone());
    let y_map = s.h.substitute(&parts);
    let var_map = rest.iter().map(|&j| ds.var_map[j].clone()).collect();
    Ok(child(ds, &rows, columns, y, var_map, y_map))
}

pub fn apply(ds: &Dataset, s: &Substitution) -> Result<Dataset, SubstError> {
    match s {
        Substitution::Input(s) => apply_input(ds, s),
        Substitution::OutInput(s) => apply_outinput(ds, s),
    }
}

/// Outcome of checking a substitution against the known formula.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub valid: bool,
    /// The formula of the reduced problem in its own column order, when
    /// valid.
    pub reduced: Option<ExprDag>,
}

/// Checks an input substitution against `f_true`, a formula over the `d`
/// parent columns: introduce `γ = g(x_I)`, isolate some `x_i` with
/// `i ∈ I`, substitute into `f_true` and test that no variable of `I` is
/// left. Each `i` is tried in turn until one can be isolated.
/// Simplified form of `e`, or its normal form when only that one drops the
/// eliminated variables.
fn reduced_form(e: &ExprDag, eliminated: &[usize]) -> ExprDag {
    let s = simplify(e);
    if eliminated.iter().any(|&v| s.uses_var(v)) {
        let n = normalize(e);
        if !eliminated.iter().any(|&v| n.uses_var(v)) {
            return n;
        }
    }
    s
}

pub fn verify_input(f_true: &ExprDag, d: usize, s: &InputSub) -> Result<Verdict, SubstError> {
    let d = d.max(f_true.arity()).max(s.indices.iter().map(|i| i + 1).max().unwrap_or(0));
    let gamma = d;
    let g = s.g.remap_vars(|v| s.indices[v]);
    let mut solvable = false;
    for &i in &s.indices {
        let Ok(x_i) = solve_for(&g, &ExprDag::var(gamma), i) else {
            continue;
        };
        solvable = true;
        let reduced = reduced_form(&f_true.substitute_var(i, &x_i), &s.indices);
        match depends_on(&reduced, &s.indices) {
            Ok(true) => return Ok(Verdict { valid: false, reduced: None }),
            Ok(false) => {
                // The isolated branch may lose sign information; the reduced
                // formula has to reproduce the original one.
                let mut parts: Vec<ExprDag> = (0..d).map(ExprDag::var).collect();
                parts.push(g.clone());
                if NumericProbe::default().agrees(f_true, &reduced.substitute(&parts)) == Some(false) {
                    continue;
                }
                let rest = retained(d, &s.indices);
                let local = reduced.remap_vars(|v| {
                    if v == gamma {
                        0
                    } else {
                        1 + rest.iter().position(|&r| r == v).unwrap_or(0)
                    }
                });
                return Ok(Verdict { valid: true, reduced: Some(local) });
            }
            Err(ExprError::Inconclusive) | Err(_) => continue,
        }
    }
    if solvable {
        Ok(Verdict { valid: false, reduced: None })
    } else {
        Err(SubstError::Unverifiable)
    }
}

/// Checks an out-input substitution: `h(x_I, f_true(x))` must not depend on
/// `x_I`.
pub fn verify_outinput(f_true: &ExprDag, d: usize, s: &OutInputSub) -> Verdict {
    let d = d.max(f_true.arity()).max(s.indices.iter().map(|i| i + 1).max().unwrap_or(0));
    let mut parts: Vec<ExprDag> = s.indices.iter().map(|&j| ExprDag::var(j)).collect();
    parts.push(f_true.clone());
    let reduced = reduced_form(&s.h.substitute(&parts), &s.indices);
    match depends_on(&reduced, &s.indices) {
        Ok(false) => {
            let rest = retained(d, &s.indices);
            let local =
                reduced.remap_vars(|v| rest.iter().position(|&r| r == v).unwrap_or(0));
            Verdict { valid: true, reduced: Some(local) }
        }
        _ => Verdict { valid: false, reduced: None },
    }
}

pub fn verify_input_sub(f_true: &ExprDag, s: &InputSub) -> Result<bool, SubstError> {
    verify_input(f_true, f_true.arity(), s).map(|v| v.valid)
}

pub fn verify_outinput_sub(f_true: &ExprDag, s: &OutInputSub) -> bool {
    verify_outinput(f_true, f_true.arity(), s).valid
}

/// Verifies either kind against a formula over `d` parent columns.
pub fn verify(f_true: &ExprDag, d: usize, s: &Substitution) -> Result<Verdict, SubstError> {
    match s {
        Substitution::Input(s) => verify_input(f_true, d, s),
        Substitution::OutInput(s) => Ok(verify_outinput(f_true, d, s)),
    }
}
