use symreduce_core::bench::{recovery, reduction_rate, sample_problem, Problem};
use symreduce_core::expr::parse;
use symreduce_core::regress::{solve_pipeline, RegressorSpec};
use symreduce_core::{search, BeamConfig};

#[test]
fn washburn_reduces_to_one_variable_and_is_recovered() {
    let f = parse("sqrt(x1*x2*x3*cos(x4)/(2*x5))").unwrap();
    let p = Problem { id: "washburn".into(), d: 5, f_true: f.clone(), samples: None };
    let ds = sample_problem(&p, 1000, 7).unwrap();
    let result = search(ds, &BeamConfig::default());
    let red = reduction_rate(&result, &f);
    assert!(red.all_valid);
    assert!((red.rate - 0.8).abs() < 1e-12);
    assert_eq!(result.best_path().last().unwrap().dataset.n_vars(), 1);

    let reg = RegressorSpec::dagsearch().builtin().unwrap();
    let solved = solve_pipeline(&result, reg.as_ref(), 0.2, 1);
    assert!(recovery(&f, &solved.expr), "{}", solved.expr);
    assert!(solved.nrmse_test < 1e-8);
}
