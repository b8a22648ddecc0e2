use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symreduce_core::bench::{nrmse, recovery, sample_problem, Problem};
use symreduce_core::beam::SearchResult;
use symreduce_core::expr::{complexity, parse, ExprDag, GrammarBudget};
use symreduce_core::regress::{
    dagsearch_ops, fit_dagsearch, fit_poly, holdout_ids, solve_pipeline, PolyRegressor, RegressorSpec,
};
use symreduce_core::{Dataset, Matrix, Measure};

fn dataset(f: &str, d: usize, n: usize, lo: f64, hi: f64, seed: u64) -> (ExprDag, Dataset) {
    let f = parse(f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect();
    let y = rows.iter().map(|r| f.eval_point(r)).collect();
    (f, Dataset::new(Matrix::from_rows(&rows), y).unwrap())
}

fn fit_error(e: &ExprDag, ds: &Dataset) -> f64 {
    nrmse(ds.y(), &e.eval(ds.x())).unwrap()
}

fn budget() -> GrammarBudget {
    GrammarBudget { max_intermediary_nodes: 2, ops: dagsearch_ops(), allow_constants: true }
}

#[test]
fn poly_fits_quadratics_exactly() {
    let (_, ds) = dataset("3*x1*x2 - x1*x1 + 0.5*x2 + 2", 2, 100, -1.0, 1.0, 1);
    let fit = fit_poly(&ds, 2).unwrap();
    assert!(fit_error(&fit.expr, &ds) < 1e-8);
}

#[test]
fn poly_does_not_recover_sine() {
    let (f, ds) = dataset("sin(x1)", 1, 100, -0.01, 0.01, 2);
    let fit = fit_poly(&ds, 2).unwrap();
    assert!(fit_error(&fit.expr, &ds) < 1e-4);
    assert!(!recovery(&f, &fit.expr));
}

#[test]
fn dagsearch_recovers_product() {
    let (f, ds) = dataset("x1*x2", 2, 200, -1.0, 1.0, 3);
    let e = fit_dagsearch(&ds, &budget(), 10_000);
    assert!(fit_error(&e, &ds) < 1e-9, "{e}");
    assert!(recovery(&f, &e));
}

#[test]
fn dagsearch_recovers_washburn_leaf() {
    let (f, ds) = dataset("cos(x1)/2", 1, 200, -1.0, 1.0, 4);
    let e = fit_dagsearch(&ds, &budget(), 10_000);
    assert!(recovery(&f, &e), "{e}");
}

#[test]
fn dagsearch_returns_mean_for_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<f64> = (0..50).map(|_| 3.0 + rng.random_range(-0.1..0.1)).collect();
    let ds = Dataset::new(Matrix::from_rows(&rows), y).unwrap();
    let e = fit_dagsearch(&ds, &budget(), 100);
    assert!(fit_error(&e, &ds) < 0.05);
    assert!(complexity(&e) >= 1);
}

#[test]
fn constant_response_is_solved_at_the_root() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0, (i % 7) as f64]).collect();
    let ds = Dataset::new(Matrix::from_rows(&rows), vec![5.0; 40]).unwrap();
    let root = SearchResult::root_only(ds, Measure::Codec);
    let r = solve_pipeline(&root, &PolyRegressor { max_degree: 2 }, 0.2, 0);
    assert_eq!(r.source_node_depth, 0);
    assert!(recovery(&parse("5").unwrap(), &r.expr), "{}", r.expr);
    assert!(r.nrmse_test < 1e-12);
}

#[test]
fn holdout_is_seeded_and_shared() {
    let (_, ds) = dataset("x1", 1, 100, 0.0, 1.0, 6);
    let a = holdout_ids(&ds, 0.2, 9);
    assert_eq!(a, holdout_ids(&ds, 0.2, 9));
    assert_eq!(a.len(), 20);
    assert_ne!(a, holdout_ids(&ds, 0.2, 10));
}

#[test]
fn washburn_root_is_not_recovered_without_reduction() {
    let f = parse("sqrt(x1*x2*x3*cos(x4)/(2*x5))").unwrap();
    let p = Problem { id: "w".into(), d: 5, f_true: f.clone(), samples: None };
    let ds = sample_problem(&p, 1000, 7).unwrap();
    let root = SearchResult::root_only(ds, Measure::Codec);
    let reg = RegressorSpec::dagsearch().builtin().unwrap();
    let r = solve_pipeline(&root, reg.as_ref(), 0.2, 1);
    assert!(!recovery(&f, &r.expr), "{}", r.expr);
}
