//! Regressors for (reduced) problems and the solve pipeline.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beam::{reconstruct, SearchNode, SearchResult};
use crate::bench::nrmse;
use crate::expr::{complexity, enumerate_dags, BinaryOp, DagBuilder, ExprDag, GrammarBudget, NodeId, OpSet, UnaryOp};
use crate::prelude::*;
use crate::substitution::Dataset;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RegressError {
    #[error("need more than {needed} rows, got {n}")]
    TooFewRows { n: usize, needed: usize },
    #[error("external regressor failed: {0}")]
    ExternalFailure(String),
}

/// Anything that turns a dataset into an expression over its columns.
pub trait Regressor: Sync {
    fn name(&self) -> String;
    fn fit(&self, ds: &Dataset) -> Result<ExprDag, RegressError>;
}

/// Regressor selection as given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum RegressorSpec {
    Poly { max_degree: usize },
    DagSearch { max_intermediary_nodes: usize, max_skeletons: usize },
    /// Run by the `symreduce` crate; `command` is a shell command line.
    External { command: String, timeout_secs: f64 },
}

impl RegressorSpec {
    pub fn poly() -> Self {
        RegressorSpec::Poly { max_degree: 2 }
    }

    pub fn dagsearch() -> Self {
        RegressorSpec::DagSearch { max_intermediary_nodes: 2, max_skeletons: 10_000 }
    }

    /// The built-in regressor for this spec, `None` for external commands.
    pub fn builtin(&self) -> Option<Box<dyn Regressor>> {
        match *self {
            RegressorSpec::Poly { max_degree } => Some(Box::new(PolyRegressor { max_degree })),
            RegressorSpec::DagSearch { max_intermediary_nodes, max_skeletons } => {
                Some(Box::new(DagSearchRegressor::new(max_intermediary_nodes, max_skeletons)))
            }
            RegressorSpec::External { .. } => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Polynomial least squares

#[derive(Clone, Debug, PartialEq)]
pub struct PolyFit {
    pub expr: ExprDag,
    /// Exponent vector and coefficient per monomial, unpruned.
    pub terms: Vec<(Vec<u32>, f64)>,
    /// Set when the design matrix was numerically singular and a small ridge
    /// penalty was used.
    pub ill_conditioned: bool,
}

/// All exponent vectors over `d` variables with total degree at most
/// `max_degree`, by degree and then lexicographically descending.
pub fn monomials(d: usize, max_degree: usize) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == d - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(d, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=max_degree as u32 {
        if d == 0 {
            if deg == 0 {
                out.push(Vec::new());
            }
            continue;
        }
        rec(d, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Design matrix with one column per monomial.
pub fn design_matrix(ds: &Dataset, monos: &[Vec<u32>]) -> DMatrix<f64> {
    let n = ds.n_rows();
    DMatrix::from_fn(n, monos.len(), |i, k| {
        let row = ds.x().row(i);
        monos[k].iter().zip(row).map(|(&e, &v)| v.powi(e as i32)).product()
    })
}

const COND_LIMIT: f64 = 1e12;
const RIDGE: f64 = 1e-10;
const PRUNE: f64 = 1e-8;

/// Least squares over all monomials up to `max_degree`.
pub fn fit_poly(ds: &Dataset, max_degree: usize) -> Result<PolyFit, RegressError> {
    let monos = monomials(ds.n_vars(), max_degree);
    let n = ds.n_rows();
    if n <= monos.len() {
        return Err(RegressError::TooFewRows { n, needed: monos.len() });
    }
    let mut a = design_matrix(ds, &monos);
    // Column scaling keeps the singular values comparable.
    let scales: Vec<f64> = (0..a.ncols())
        .map(|k| {
            let m = a.column(k).amax();
            if m > 0.0 && m.is_finite() {
                m
            } else {
                1.0
            }
        })
        .collect();
    for (k, s) in scales.iter().enumerate() {
        a.column_mut(k).scale_mut(1.0 / s);
    }
    let b = DVector::from_column_slice(ds.y());
    let svd = a.svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let ill = !(smin > 0.0) || smax / smin > COND_LIMIT;
    let utb = u.transpose() * &b;
    let lambda = RIDGE * smax * smax;
    let mut w = DVector::zeros(sv.len());
    for k in 0..sv.len() {
        let s = sv[k];
        let inv = if ill {
            s / (s * s + lambda)
        } else if s > 0.0 {
            1.0 / s
        } else {
            0.0
        };
        w[k] = inv * utb[k];
    }
    let c = vt.transpose() * w;
    let coefs: Vec<f64> = c.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let terms: Vec<(Vec<u32>, f64)> = monos.into_iter().zip(coefs).collect();
    let expr = poly_expr(&terms);
    Ok(PolyFit { expr, terms, ill_conditioned: ill })
}

/// Builds `sum c * monomial`, dropping coefficients below `1e-8 max|c|`.
pub fn poly_expr(terms: &[(Vec<u32>, f64)]) -> ExprDag {
    let cmax = terms.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
    let mut b = DagBuilder::new();
    let mut acc: Option<NodeId> = None;
    for (e, c) in terms {
        if c.abs() < PRUNE * cmax || *c == 0.0 {
            continue;
        }
        let mut factors: Vec<NodeId> = Vec::new();
        for (j, &k) in e.iter().enumerate() {
            for _ in 0..k {
                factors.push(b.var(j));
            }
        }
        let mono = factors.iter().copied().reduce(|l, r| b.binary(BinaryOp::Mul, l, r));
        let term = match mono {
            None => b.constant(*c),
            Some(m) if *c == 1.0 => m,
            Some(m) => {
                let k = b.constant(*c);
                b.binary(BinaryOp::Mul, k, m)
            }
        };
        acc = Some(match acc {
            None => term,
            Some(s) => b.binary(BinaryOp::Add, s, term),
        });
    }
    let root = acc.unwrap_or_else(|| b.constant(0.0));
    b.finish(root)
}

pub struct PolyRegressor {
    pub max_degree: usize,
}

impl Regressor for PolyRegressor {
    fn name(&self) -> String {
        format!("poly{}", self.max_degree)
    }

    fn fit(&self, ds: &Dataset) -> Result<ExprDag, RegressError> {
        fit_poly(ds, self.max_degree).map(|f| f.expr)
    }
}

// ---------------------------------------------------------------------------
// DAG search

/// Operators available to the DAG search regressor.
pub fn dagsearch_ops() -> OpSet {
    let mut s = OpSet::arithmetic();
    for op in [UnaryOp::Sqrt, UnaryOp::Log, UnaryOp::Exp, UnaryOp::Sin, UnaryOp::Cos] {
        s = s.with_unary(op);
    }
    s
}

pub struct DagSearchRegressor {
    pub budget: GrammarBudget,
    pub max_skeletons: usize,
    /// Rows used while refining placeholder constants.
    pub refine_rows: usize,
    pub max_iterations: usize,
}

impl DagSearchRegressor {
    pub fn new(max_intermediary_nodes: usize, max_skeletons: usize) -> Self {
        DagSearchRegressor {
            budget: GrammarBudget {
                max_intermediary_nodes,
                ops: dagsearch_ops(),
                allow_constants: true,
            },
            max_skeletons,
            refine_rows: 200,
            max_iterations: 200,
        }
    }
}

impl Regressor for DagSearchRegressor {
    fn name(&self) -> String {
        "dagsearch".to_string()
    }

    fn fit(&self, ds: &Dataset) -> Result<ExprDag, RegressError> {
        Ok(fit_dagsearch_with(ds, self))
    }
}

/// Fits `y ≈ a z + b` by least squares; returns `(a, b, sse)`.
fn affine_fit(z: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = z.len() as f64;
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mz = z.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut szz = 0.0;
    let mut szy = 0.0;
    for (a, b) in z.iter().zip(y) {
        szz += (a - mz) * (a - mz);
        szy += (a - mz) * (b - my);
    }
    if !(szz > 1e-300) || !szz.is_finite() {
        return None;
    }
    let a = szy / szz;
    let b = my - a * mz;
    let sse: f64 = z.iter().zip(y).map(|(zi, yi)| (yi - a * zi - b).powi(2)).sum();
    sse.is_finite().then_some((a, b, sse))
}

/// Minimizes `f` with the Nelder–Mead simplex method.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, max_iter: usize) -> Vec<f64> {
    let m = start.len();
    let eval = |p: &[f64]| {
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + 1);
    simplex.push((start.to_vec(), eval(start)));
    for k in 0..m {
        let mut p = start.to_vec();
        p[k] += step;
        let v = eval(&p);
        simplex.push((p, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[m].1);
        if (worst - best).abs() <= 1e-14 * (best.abs() + 1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..m)
            .map(|k| simplex[..m].iter().map(|(p, _)| p[k]).sum::<f64>() / m as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[m].0).map(|(c, w)| c + t * (w - c)).collect()
        };
        let r = along(-1.0);
        let fr = eval(&r);
        if fr < simplex[0].1 {
            let e = along(-2.0);
            let fe = eval(&e);
            simplex[m] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[m - 1].1 {
            simplex[m] = (r, fr);
        } else {
            let c = if fr < simplex[m].1 { along(-0.5) } else { along(0.5) };
            let fc = eval(&c);
            if fc < simplex[m].1.min(fr) {
                simplex[m] = (c, fc);
            } else {
                let b0 = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = s.0.iter().zip(&b0).map(|(x, b)| b + 0.5 * (x - b)).collect();
                    let v = eval(&p);
                    *s = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0).0
}

struct Fitted {
    expr: ExprDag,
    nrmse: f64,
    size: usize,
}

fn fit_skeleton(
    skel: &ExprDag,
    cols: &[&[f64]],
    y: &[f64],
    sub_cols: &[&[f64]],
    sub_y: &[f64],
    cfg: &DagSearchRegressor,
) -> Option<Fitted> {
    let n = y.len();
    let k = skel.param_count();
    let params = if k == 0 {
        Vec::new()
    } else {
        let m = sub_y.len();
        let obj = |p: &[f64]| -> f64 {
            let z = skel.eval_columns(sub_cols, m, p);
            affine_fit(&z, sub_y).map_or(f64::INFINITY, |(_, _, sse)| sse)
        };
        nelder_mead(&obj, &vec![1.0; k], 0.5, cfg.max_iterations)
    };
    let z = skel.eval_columns(cols, n, &params);
    let (a, b, sse) = affine_fit(&z, y)?;
    let sy: f64 = y.iter().map(|v| v * v).sum();
    let nr = if sy > 0.0 { (sse / sy).sqrt() } else { sse.sqrt() };
    let inner = if k == 0 { skel.clone() } else { skel.bind_params(&params) };
    let scale = a.abs().max(b.abs()).max(1e-300);
    let mut e = inner;
    if (a - 1.0).abs() > 1e-10 {
        e = ExprDag::binary(BinaryOp::Mul, &ExprDag::constant(a), &e);
    }
    if b.abs() > 1e-10 * scale {
        e = ExprDag::binary(BinaryOp::Add, &e, &ExprDag::constant(b));
    }
    let size = e.tree_size();
    Some(Fitted { expr: e, nrmse: nr, size })
}

fn improves(c: &Fitted, best: &Option<Fitted>) -> bool {
    match best {
        None => true,
        Some(b) => {
            c.nrmse < b.nrmse - 1e-10 || (c.nrmse <= b.nrmse + 1e-10 && c.size < b.size)
        }
    }
}

/// DAG search with the given budget: enumerate skeletons with a constant
/// placeholder, fit each as `a * s(x; c) + b` (outer constants by least
/// squares, inner constant by Nelder–Mead on a row subsample), keep the
/// lowest NRMSE and break near-ties by size. Falls back to the mean.
pub fn fit_dagsearch(ds: &Dataset, budget: &GrammarBudget, max_skeletons: usize) -> ExprDag {
    let cfg = DagSearchRegressor {
        budget: *budget,
        max_skeletons,
        refine_rows: 200,
        max_iterations: 200,
    };
    fit_dagsearch_with(ds, &cfg)
}

fn fit_dagsearch_with(ds: &Dataset, cfg: &DagSearchRegressor) -> ExprDag {
    let n = ds.n_rows();
    let d = ds.n_vars();
    let y = ds.y();
    let columns: Vec<Vec<f64>> = (0..d).map(|j| ds.x().column(j)).collect();
    let cols: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let step = (n / cfg.refine_rows.max(1)).max(1);
    let sub_idx: Vec<usize> = (0..n).step_by(step).take(cfg.refine_rows).collect();
    let sub_columns: Vec<Vec<f64>> =
        columns.iter().map(|c| sub_idx.iter().map(|&i| c[i]).collect()).collect();
    let sub_cols: Vec<&[f64]> = sub_columns.iter().map(Vec::as_slice).collect();
    let sub_y: Vec<f64> = sub_idx.iter().map(|&i| y[i]).collect();

    let mut skeletons: Vec<ExprDag> = (0..d).map(ExprDag::var).collect();
    skeletons.extend(enumerate_dags(d, &cfg.budget).with_limit(cfg.max_skeletons));

    let fits = fit_all(&skeletons, &cols, y, &sub_cols, &sub_y, cfg);
    let mut best: Option<Fitted> = None;
    for f in fits.into_iter().flatten() {
        if improves(&f, &best) {
            best = Some(f);
        }
    }
    match best {
        Some(b) => b.expr,
        None => ExprDag::constant(if n == 0 { 0.0 } else { y.iter().sum::<f64>() / n as f64 }),
    }
}

#[cfg(feature = "parallel")]
fn fit_all(
    skels: &[ExprDag],
    cols: &[&[f64]],
    y: &[f64],
    sub_cols: &[&[f64]],
    sub_y: &[f64],
    cfg: &DagSearchRegressor,
) -> Vec<Option<Fitted>> {
    use rayon::prelude::*;
    skels.par_iter().map(|s| fit_skeleton(s, cols, y, sub_cols, sub_y, cfg)).collect()
}

#[cfg(not(feature = "parallel"))]
fn fit_all(
    skels: &[ExprDag],
    cols: &[&[f64]],
    y: &[f64],
    sub_cols: &[&[f64]],
    sub_y: &[f64],
    cfg: &DagSearchRegressor,
) -> Vec<Option<Fitted>> {
    skels.iter().map(|s| fit_skeleton(s, cols, y, sub_cols, sub_y, cfg)).collect()
}

// ---------------------------------------------------------------------------
// Solve pipeline

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    /// Over the original variables.
    pub expr: ExprDag,
    pub nrmse_test: f64,
    pub complexity: usize,
    /// Filled in by callers that know the true formula.
    pub recovered: Option<bool>,
    pub source_node_depth: usize,
}

/// Original row ids held out for testing: a seeded uniform sample of
/// `round(fraction * n)` rows, at least one and leaving at least one.
pub fn holdout_ids(root: &Dataset, fraction: f64, seed: u64) -> BTreeSet<usize> {
    let mut ids = root.row_ids().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n = ids.len();
    let k = ((fraction * n as f64).round() as usize).clamp(1.min(n), n.saturating_sub(1));
    ids.truncate(k);
    ids.into_iter().collect()
}

/// Fits the regressor at every node of the best path on the rows outside
/// the holdout, maps each fit back to the original variables and returns
/// the one with the smallest NRMSE on the holdout of the root problem.
pub fn solve_pipeline(
    result: &SearchResult,
    regressor: &dyn Regressor,
    holdout_fraction: f64,
    seed: u64,
) -> SolveResult {
    let root = &result.root().dataset;
    let held = holdout_ids(root, holdout_fraction, seed);
    let test = root.filter_ids(|id| held.contains(&id));
    let path = result.best_path();
    let mut best: Option<SolveResult> = None;
    for node in &path {
        let Some(cand) = solve_node(node, regressor, &held, &test) else { continue };
        let better = match &best {
            None => true,
            Some(b) => {
                cand.nrmse_test < b.nrmse_test
                    || (cand.nrmse_test == b.nrmse_test && cand.complexity < b.complexity)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.unwrap_or_else(|| {
        let train = root.filter_ids(|id| !held.contains(&id));
        let mean = train.y().iter().sum::<f64>() / train.n_rows().max(1) as f64;
        let expr = ExprDag::constant(mean);
        let pred = vec![mean; test.n_rows()];
        SolveResult {
            nrmse_test: nrmse(test.y(), &pred).unwrap_or(f64::INFINITY),
            complexity: 1,
            expr,
            recovered: None,
            source_node_depth: 0,
        }
    })
}

fn solve_node(
    node: &SearchNode,
    regressor: &dyn Regressor,
    held: &BTreeSet<usize>,
    test: &Dataset,
) -> Option<SolveResult> {
    let train = node.dataset.filter_ids(|id| !held.contains(&id));
    if train.n_rows() < 2 {
        return None;
    }
    let sol = regressor.fit(&train).ok()?;
    let expr = reconstruct(&node.dataset, &sol).ok()?;
    let pred = expr.eval(test.x());
    let e = nrmse(test.y(), &pred).ok()?;
    Some(SolveResult {
        complexity: complexity(&expr),
        expr,
        nrmse_test: e,
        recovered: None,
        source_node_depth: node.depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::matrix::Matrix;

    fn grid(f: &str, d: usize, n: usize) -> Dataset {
        let f = parse(f).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..d).map(|j| 0.3 + ((i * (7 + 3 * j) + j) % 23) as f64 / 11.0).collect())
            .collect();
        let y = rows.iter().map(|r| f.eval_point(r)).collect();
        Dataset::new(Matrix::from_rows(&rows), y).unwrap()
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(3, 2).len(), 10);
        assert_eq!(monomials(1, 2), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn poly_recovers_quadratic() {
        let ds = grid("3*x1*x2 + 2", 2, 60);
        let fit = fit_poly(&ds, 2).unwrap();
        assert!(!fit.ill_conditioned);
        for (e, c) in &fit.terms {
            let want = match e.as_slice() {
                [0, 0] => 2.0,
                [1, 1] => 3.0,
                _ => 0.0,
            };
            assert!((c - want).abs() < 1e-6, "{e:?} {c}");
        }
        assert!(crate::expr::equivalent(&fit.expr, &parse("x1*x2 + 2/3").unwrap()));
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let p = nelder_mead(&|p| (p[0] - 3.0).powi(2) + (p[1] + 1.0).powi(2), &[1.0, 1.0], 0.5, 500);
        assert!((p[0] - 3.0).abs() < 1e-5 && (p[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn dagsearch_finds_product() {
        let ds = grid("x1*x2", 2, 200);
        let e = fit_dagsearch(&ds, &DagSearchRegressor::new(1, 2000).budget, 2000);
        let pred = e.eval(ds.x());
        assert!(nrmse(ds.y(), &pred).unwrap() < 1e-9, "{e}");
    }

    #[test]
    fn holdout_is_deterministic() {
        let ds = grid("x1", 1, 50);
        assert_eq!(holdout_ids(&ds, 0.2, 9), holdout_ids(&ds, 0.2, 9));
        assert_eq!(holdout_ids(&ds, 0.2, 9).len(), 10);
    }
}
