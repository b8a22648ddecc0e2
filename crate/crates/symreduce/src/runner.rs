//! Benchmark runs over formula corpora.

use std::time::{Duration, Instant};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use symreduce_core::bench::{
    evaluate_problem, problem_seed, BenchConfig, Problem, ProblemOutcome, Report, ReportRow,
};
use symreduce_core::beam::CandidateCache;
use symreduce_core::regress::{Regressor, RegressorSpec};
use symreduce_core::Measure;

use crate::external::ExternalRegressor;

/// The regressor a spec describes, including external commands.
pub fn build_regressor(spec: &RegressorSpec) -> Box<dyn Regressor> {
    match spec {
        RegressorSpec::External { command, timeout_secs } => {
            Box::new(ExternalRegressor::new(command.clone(), Duration::from_secs_f64(*timeout_secs)))
        }
        builtin => builtin.builtin().expect("built-in regressor"),
    }
}

pub struct BenchRun {
    pub report: Report,
    /// Per problem, `None` when it could not be evaluated.
    pub outcomes: Vec<Option<ProblemOutcome>>,
}

fn run_one(
    k: usize,
    p: &Problem,
    cfg: &BenchConfig,
    reg: Option<&dyn Regressor>,
    cache: &mut CandidateCache,
) -> (ReportRow, Option<ProblemOutcome>) {
    let t = Instant::now();
    match evaluate_problem(p, cfg, reg, problem_seed(cfg.seed, k), cache) {
        Ok(o) => (ReportRow::from_outcome(&o, t.elapsed().as_secs_f64()), Some(o)),
        Err(e) => (ReportRow::failed(&p.id, p.d, &e.to_string(), t.elapsed().as_secs_f64()), None),
    }
}

/// Evaluates every problem; failures become rows with a status instead of
/// aborting. Results do not depend on the number of threads.
pub fn run_benchmark(problems: &[Problem], cfg: &BenchConfig, regressor: Option<&RegressorSpec>) -> BenchRun {
    let reg = regressor.map(build_regressor);
    let reg = reg.as_deref();
    #[cfg(feature = "parallel")]
    let pairs: Vec<_> = problems
        .par_iter()
        .enumerate()
        .map_init(CandidateCache::new, |cache, (k, p)| run_one(k, p, cfg, reg, cache))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<_> = {
        let mut cache = CandidateCache::new();
        problems.iter().enumerate().map(|(k, p)| run_one(k, p, cfg, reg, &mut cache)).collect()
    };
    let (rows, outcomes) = pairs.into_iter().unzip();
    BenchRun { report: Report { rows }, outcomes }
}

/// Mean reduction rate per (noise level, measure), without regression.
pub fn noise_sweep(
    problems: &[Problem],
    cfg: &BenchConfig,
    gammas: &[f64],
    measures: &[Measure],
) -> Vec<(f64, f64, Measure)> {
    let mut out = Vec::new();
    for &m in measures {
        for &g in gammas {
            let mut c = cfg.clone();
            c.beam.measure = m;
            c.noise.gamma = g;
            let run = run_benchmark(problems, &c, None);
            out.push((g, run.report.mean("reduction_rate"), m));
        }
    }
    out
}
