//! Benchmark problems, sampling, noise and evaluation metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beam::{search_with_cache, BeamConfig, CandidateCache, SearchResult};
use crate::expr::{equivalent, parse, ExprDag};
use crate::matrix::Matrix;
use crate::prelude::*;
use crate::regress::{solve_pipeline, Regressor, SolveResult};
use crate::substitution::{verify, Dataset, SubstError};

pub use crate::expr::jaccard;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("no valid sample within [-150, 150]^d")]
    Unsampleable,
    #[error("sum of squared responses is zero")]
    DegenerateY,
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub id: String,
    pub d: usize,
    pub f_true: ExprDag,
    pub samples: Option<Dataset>,
}

/// Parses corpus text: lines `id<TAB>d<TAB>expression`, `#` comments and
/// blank lines ignored.
pub fn parse_corpus(text: &str) -> Result<Vec<Problem>, BenchError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |message: String| BenchError::Corpus { line: k + 1, message };
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, got {}", parts.len())));
        }
        let d: usize = parts[1].trim().parse().map_err(|_| err("bad dimension".into()))?;
        let f = parse(parts[2].trim()).map_err(|e| err(e.to_string()))?;
        if f.arity() != d {
            return Err(err(format!("formula uses {} variables but d = {d}", f.arity())));
        }
        out.push(Problem { id: parts[0].trim().to_string(), d, f_true: f, samples: None });
    }
    Ok(out)
}

const SAMPLER_START: f64 = 1.0;
const SAMPLER_GROWTH: f64 = 0.5;
const SAMPLER_LIMIT: f64 = 150.0;

/// Draws `n` rows uniformly from `[-c, c]^d` where the formula is finite,
/// starting at `c = 1` and widening by 0.5 while rows are missing.
pub fn sample_problem(p: &Problem, n: usize, seed: u64) -> Result<Dataset, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut c = SAMPLER_START;
    while rows.len() < n {
        if c > SAMPLER_LIMIT {
            return Err(BenchError::Unsampleable);
        }
        for _ in 0..n - rows.len() {
            let r: Vec<f64> = (0..p.d).map(|_| rng.random_range(-c..=c)).collect();
            let v = p.f_true.eval_point(&r);
            if v.is_finite() {
                rows.push(r);
                y.push(v);
            }
        }
        if rows.len() < n {
            c += SAMPLER_GROWTH;
        }
    }
    Dataset::new(Matrix::from_rows(&rows), y).map_err(|_| BenchError::Unsampleable)
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NoiseLevel {
    pub gamma: f64,
}

fn rms(y: &[f64]) -> f64 {
    (y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64).sqrt()
}

/// Adds Gaussian noise with standard deviation `gamma * RMS(y)`.
pub fn add_noise(y: &[f64], gamma: f64, seed: u64) -> Vec<f64> {
    let sd = gamma * rms(y);
    if gamma == 0.0 || sd == 0.0 || !sd.is_finite() {
        return y.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, sd).expect("finite positive standard deviation");
    y.iter().map(|v| v + dist.sample(&mut rng)).collect()
}

/// A non-finite prediction counts as an error of this many RMS(y).
pub const NONFINITE_PENALTY: f64 = 10.0;

/// `sqrt(sum (y - yhat)^2 / sum y^2)`.
pub fn nrmse(y: &[f64], yhat: &[f64]) -> Result<f64, BenchError> {
    let sy: f64 = y.iter().map(|v| v * v).sum();
    if sy == 0.0 || y.is_empty() {
        return Err(BenchError::DegenerateY);
    }
    let penalty = NONFINITE_PENALTY * NONFINITE_PENALTY * sy / y.len() as f64;
    let se: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| if b.is_finite() { (a - b) * (a - b) } else { penalty })
        .sum();
    Ok((se / sy).sqrt())
}

/// Equivalence up to an additive or multiplicative constant.
pub fn recovery(f_true: &ExprDag, f_hat: &ExprDag) -> bool {
    equivalent(f_true, f_hat)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionOutcome {
    /// `1 - min #vars / d` over nodes whose whole edge chain verifies.
    pub rate: f64,
    /// The same over all nodes.
    pub unfiltered_rate: f64,
    /// Whether every edge on the best path verifies.
    pub all_valid: bool,
    /// Valid edges among edges whose parent verified (1 without edges).
    pub valid_sub_fraction: f64,
    pub unverifiable_edges: usize,
    /// Known formula of each node's problem when its chain verifies.
    pub node_truth: Vec<Option<ExprDag>>,
}

/// Verifies every edge of the search tree against the known formula.
pub fn reduction_rate(result: &SearchResult, f_true: &ExprDag) -> ReductionOutcome {
    let d0 = result.root().dataset.n_vars();
    let mut truth: Vec<Option<ExprDag>> = vec![None; result.nodes.len()];
    truth[0] = Some(f_true.clone());
    let (mut checked, mut valid, mut unverifiable) = (0usize, 0usize, 0usize);
    for node in result.nodes.iter().skip(1) {
        let (Some(p), Some(edge)) = (node.parent, node.edge.as_ref()) else { continue };
        let Some(pt) = truth[p].clone() else { continue };
        checked += 1;
        let parent_d = result.nodes[p].dataset.n_vars();
        match verify(&pt, parent_d, edge) {
            Ok(v) if v.valid => {
                valid += 1;
                truth[node.id] = v.reduced;
            }
            Ok(_) => {}
            Err(SubstError::Unverifiable) | Err(_) => unverifiable += 1,
        }
    }
    let min_valid = result
        .nodes
        .iter()
        .filter(|n| truth[n.id].is_some())
        .map(|n| n.dataset.n_vars())
        .min()
        .unwrap_or(d0);
    let min_all = result.nodes.iter().map(|n| n.dataset.n_vars()).min().unwrap_or(d0);
    let all_valid = result.best_path().iter().all(|n| truth[n.id].is_some());
    ReductionOutcome {
        rate: 1.0 - min_valid as f64 / d0 as f64,
        unfiltered_rate: 1.0 - min_all as f64 / d0 as f64,
        all_valid,
        valid_sub_fraction: if checked == 0 { 1.0 } else { valid as f64 / checked as f64 },
        unverifiable_edges: unverifiable,
        node_truth: truth,
    }
}

/// Settings shared by all problems of a benchmark run.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub beam: BeamConfig,
    pub noise: NoiseLevel,
    pub n_samples: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            beam: BeamConfig::default(),
            noise: NoiseLevel::default(),
            n_samples: 1000,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

/// One regressor arm: fit on the original problem or along the best path.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmOutcome {
    pub recovered: bool,
    pub jaccard: f64,
    pub nrmse: f64,
    pub complexity: usize,
    pub expr: ExprDag,
    pub source_node_depth: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemOutcome {
    pub id: String,
    pub d: usize,
    pub reduction: ReductionOutcome,
    pub search: SearchResult,
    pub base: Option<ArmOutcome>,
    pub beam: Option<ArmOutcome>,
}

/// Per-problem seed derived from the run seed and the problem position.
pub fn problem_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn arm(f_true: &ExprDag, r: SolveResult) -> ArmOutcome {
    ArmOutcome {
        recovered: recovery(f_true, &r.expr),
        jaccard: jaccard(f_true, &r.expr),
        nrmse: r.nrmse_test,
        complexity: r.complexity,
        expr: r.expr,
        source_node_depth: r.source_node_depth,
    }
}

/// Samples (unless samples are attached), adds noise, searches, verifies
/// the search tree and, with a regressor, runs both arms on a shared
/// holdout.
pub fn evaluate_problem(
    p: &Problem,
    cfg: &BenchConfig,
    regressor: Option<&dyn Regressor>,
    seed: u64,
    cache: &mut CandidateCache,
) -> Result<ProblemOutcome, BenchError> {
    let clean = match &p.samples {
        Some(ds) => ds.clone(),
        None => sample_problem(p, cfg.n_samples, seed)?,
    };
    let noisy_y = add_noise(clean.y(), cfg.noise.gamma, seed.wrapping_add(1));
    let ds = Dataset::new(clean.x().clone(), noisy_y).map_err(|_| BenchError::Unsampleable)?;
    let search = search_with_cache(ds.clone(), &cfg.beam, cache);
    let reduction = reduction_rate(&search, &p.f_true);
    let (base, beam) = match regressor {
        None => (None, None),
        Some(reg) => {
            let hseed = seed.wrapping_add(2);
            let root = SearchResult::root_only(ds, cfg.beam.measure);
            let b = solve_pipeline(&root, reg, cfg.holdout_fraction, hseed);
            let s = solve_pipeline(&search, reg, cfg.holdout_fraction, hseed);
            (Some(arm(&p.f_true, b)), Some(arm(&p.f_true, s)))
        }
    };
    Ok(ProblemOutcome { id: p.id.clone(), d: p.d, reduction, search, base, beam })
}

/// Report row; arm columns are `NaN` when no regressor was run.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub d: usize,
    pub status: String,
    pub reduction_rate: f64,
    pub reduction_rate_unfiltered: f64,
    pub valid_sub_fraction: f64,
    pub all_valid: bool,
    pub recovered_base: f64,
    pub recovered_beam: f64,
    pub jaccard_base: f64,
    pub jaccard_beam: f64,
    pub nrmse_base: f64,
    pub nrmse_beam: f64,
    pub complexity_base: f64,
    pub complexity_beam: f64,
    pub wall_time: f64,
}

impl ReportRow {
    pub fn from_outcome(o: &ProblemOutcome, wall_time: f64) -> Self {
        let get = |a: &Option<ArmOutcome>, f: fn(&ArmOutcome) -> f64| a.as_ref().map_or(f64::NAN, f);
        ReportRow {
            id: o.id.clone(),
            d: o.d,
            status: "ok".to_string(),
            reduction_rate: o.reduction.rate,
            reduction_rate_unfiltered: o.reduction.unfiltered_rate,
            valid_sub_fraction: o.reduction.valid_sub_fraction,
            all_valid: o.reduction.all_valid,
            recovered_base: get(&o.base, |a| f64::from(u8::from(a.recovered))),
            recovered_beam: get(&o.beam, |a| f64::from(u8::from(a.recovered))),
            jaccard_base: get(&o.base, |a| a.jaccard),
            jaccard_beam: get(&o.beam, |a| a.jaccard),
            nrmse_base: get(&o.base, |a| a.nrmse),
            nrmse_beam: get(&o.beam, |a| a.nrmse),
            complexity_base: get(&o.base, |a| a.complexity as f64),
            complexity_beam: get(&o.beam, |a| a.complexity as f64),
            wall_time,
        }
    }

    /// A problem that could not be evaluated.
    pub fn failed(id: &str, d: usize, status: &str, wall_time: f64) -> Self {
        ReportRow {
            id: id.to_string(),
            d,
            status: status.to_string(),
            reduction_rate: f64::NAN,
            reduction_rate_unfiltered: f64::NAN,
            valid_sub_fraction: f64::NAN,
            all_valid: false,
            recovered_base: f64::NAN,
            recovered_beam: f64::NAN,
            jaccard_base: f64::NAN,
            jaccard_beam: f64::NAN,
            nrmse_base: f64::NAN,
            nrmse_beam: f64::NAN,
            complexity_base: f64::NAN,
            complexity_beam: f64::NAN,
            wall_time,
        }
    }

    /// Numeric columns in report order.
    pub fn numeric(&self) -> [f64; 13] {
        [
            self.reduction_rate,
            self.reduction_rate_unfiltered,
            self.valid_sub_fraction,
            f64::from(u8::from(self.all_valid)),
            self.recovered_base,
            self.recovered_beam,
            self.jaccard_base,
            self.jaccard_beam,
            self.nrmse_base,
            self.nrmse_beam,
            self.complexity_base,
            self.complexity_beam,
            self.wall_time,
        ]
    }
}

pub const NUMERIC_COLUMNS: [&str; 13] = [
    "reduction_rate",
    "reduction_rate_unfiltered",
    "valid_sub_fraction",
    "all_valid",
    "recovered_base",
    "recovered_beam",
    "jaccard_base",
    "jaccard_beam",
    "nrmse_base",
    "nrmse_beam",
    "complexity_base",
    "complexity_beam",
    "wall_time",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Mean of each numeric column over rows where it is defined (`NaN` if
    /// no row defines it).
    pub fn aggregates(&self) -> [f64; 13] {
        let mut sum = [0.0; 13];
        let mut cnt = [0usize; 13];
        for r in &self.rows {
            for (k, v) in r.numeric().iter().enumerate() {
                if !v.is_nan() {
                    sum[k] += v;
                    cnt[k] += 1;
                }
            }
        }
        let mut out = [f64::NAN; 13];
        for k in 0..13 {
            if cnt[k] > 0 {
                out[k] = sum[k] / cnt[k] as f64;
            }
        }
        out
    }

    pub fn mean(&self, column: &str) -> f64 {
        NUMERIC_COLUMNS
            .iter()
            .position(|c| *c == column)
            .map_or(f64::NAN, |k| self.aggregates()[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(f: &str, d: usize) -> Problem {
        Problem { id: "t".into(), d, f_true: parse(f).unwrap(), samples: None }
    }

    #[test]
    fn sampler_examples() {
        let ds = sample_problem(&problem("x1 + x2", 2), 1000, 1).unwrap();
        assert!(ds.x().as_slice().iter().all(|v| v.abs() <= 1.0));
        let ds = sample_problem(&problem("log(x1)", 1), 200, 1).unwrap();
        assert!(ds.x().as_slice().iter().all(|&v| v > 0.0));
        assert_eq!(sample_problem(&problem("log(x1 - 200)", 1), 10, 1), Err(BenchError::Unsampleable));
    }

    #[test]
    fn noise_examples() {
        let y = vec![1.0; 10_000];
        assert_eq!(add_noise(&y, 0.0, 3), y);
        let z = add_noise(&y, 0.1, 3);
        let diffs: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
        let m = diffs.iter().sum::<f64>() / 1e4;
        let sd = (diffs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 9999.0).sqrt();
        assert!((0.095..=0.105).contains(&sd), "{sd}");
    }

    #[test]
    fn nrmse_examples() {
        assert_eq!(nrmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(nrmse(&[1.0, -2.0, 3.0], &[0.0; 3]).unwrap(), 1.0);
        assert_eq!(nrmse(&[0.0, 0.0], &[1.0, 1.0]), Err(BenchError::DegenerateY));
        assert!((nrmse(&[1.0, 1.0], &[f64::NAN, f64::NAN]).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn recovery_examples() {
        let f = parse("x1*x2 + x3").unwrap();
        assert!(recovery(&f, &parse("x1*x2 + x3 + 7").unwrap()));
        assert!(recovery(&f, &parse("2*(x1*x2 + x3)").unwrap()));
        assert!(!recovery(&parse("x1*x2").unwrap(), &parse("x1 + x2").unwrap()));
        assert!(jaccard(&f, &parse("x1*x2 + x3 + 7").unwrap()) < 1.0);
        assert_eq!(jaccard(&parse("x1").unwrap(), &parse("x2").unwrap()), 0.0);
    }

    #[test]
    fn corpus_parsing() {
        let text = "# comment\nA\t2\tx1*x2\n\nB\t1\tsqrt(x1)\n";
        let ps = parse_corpus(text).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[1].id, "B");
        assert!(parse_corpus("A\t1\tx2").is_err());
        assert!(parse_corpus("A\t3\tx1*x2").is_err());
        assert!(parse_corpus("A x1").is_err());
    }
}
