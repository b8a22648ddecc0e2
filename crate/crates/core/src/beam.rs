//! Level-wise beam search over substitutions.

use core::cmp::Ordering;

use crate::depmeasure::{
    self, codec_from_parts, compute_ranks, kmac_from_parts, median_bandwidth,
    predictor_neighbors, DependenceScore, Measure,
};
use crate::expr::{solve_for, ExprDag, ExprError, GrammarBudget, OpSet, UnaryOp};
use crate::matrix::Matrix;
use crate::prelude::*;
use crate::substitution::{
    apply, gen_input_candidates, gen_outinput_candidates, input_column, outinput_column,
    Dataset, Substitution, MAX_DROP_FRACTION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubTypes {
    Input,
    OutInput,
    Both,
}

impl SubTypes {
    pub fn input(self) -> bool {
        matches!(self, SubTypes::Input | SubTypes::Both)
    }

    pub fn outinput(self) -> bool {
        matches!(self, SubTypes::OutInput | SubTypes::Both)
    }
}

impl core::str::FromStr for SubTypes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" => Ok(SubTypes::Input),
            "outinput" => Ok(SubTypes::OutInput),
            "both" => Ok(SubTypes::Both),
            _ => Err(format!("unknown substitution types '{s}' (expected input, outinput or both)")),
        }
    }
}

/// Operators used for substitution candidates by default.
pub fn default_substitution_ops() -> OpSet {
    let mut s = OpSet::arithmetic();
    for op in [UnaryOp::Sqrt, UnaryOp::Log, UnaryOp::Exp, UnaryOp::Sin, UnaryOp::Cos] {
        s = s.with_unary(op);
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub measure: Measure,
    pub budget: GrammarBudget,
    pub sub_types: SubTypes,
    /// Defaults to one less than the number of input columns.
    pub max_depth: Option<usize>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_size: 1,
            measure: Measure::Codec,
            budget: GrammarBudget {
                max_intermediary_nodes: 1,
                ops: default_substitution_ops(),
                allow_constants: false,
            },
            sub_types: SubTypes::Both,
            max_depth: None,
        }
    }
}

impl BeamConfig {
    /// Restriction to `x_i op x_j` input substitutions with the four
    /// arithmetic operators.
    pub fn aifeynman() -> Self {
        BeamConfig {
            budget: GrammarBudget {
                max_intermediary_nodes: 0,
                ops: OpSet::arithmetic(),
                allow_constants: false,
            },
            sub_types: SubTypes::Input,
            ..BeamConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchNode {
    pub id: usize,
    pub dataset: Dataset,
    /// `None` when the measure is undefined, e.g. for a constant response.
    pub score: Option<DependenceScore>,
    pub parent: Option<usize>,
    pub edge: Option<Substitution>,
    pub depth: usize,
    /// Rows lost when the edge was applied.
    pub rows_dropped: usize,
}

impl SearchNode {
    pub fn score_value(&self) -> f64 {
        self.score.map_or(f64::NEG_INFINITY, |s| s.value)
    }
}

/// One line of the search trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub substitution: String,
    pub score: f64,
    pub n_vars: usize,
    pub rows_dropped: usize,
    pub on_best_path: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub nodes: Vec<SearchNode>,
    /// Node ids per level; level 0 is the root.
    pub levels: Vec<Vec<usize>>,
    pub best: usize,
}

impl SearchResult {
    /// A result holding only the unreduced problem.
    pub fn root_only(ds: Dataset, measure: Measure) -> Self {
        let score = depmeasure::score(measure, ds.x(), ds.y()).ok();
        let root = SearchNode {
            id: 0,
            dataset: ds,
            score,
            parent: None,
            edge: None,
            depth: 0,
            rows_dropped: 0,
        };
        SearchResult { nodes: vec![root], levels: vec![vec![0]], best: 0 }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn path_to(&self, id: usize) -> Vec<&SearchNode> {
        let mut path = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            path.push(&self.nodes[i]);
            cur = self.nodes[i].parent;
        }
        path.reverse();
        path
    }

    /// Root to the highest-scoring node.
    pub fn best_path(&self) -> Vec<&SearchNode> {
        self.path_to(self.best)
    }

    pub fn trace(&self) -> Vec<TraceRecord> {
        let on_path: BTreeSet<usize> = self.best_path().iter().map(|n| n.id).collect();
        self.levels
            .iter()
            .flatten()
            .map(|&i| {
                let n = &self.nodes[i];
                TraceRecord {
                    node: i,
                    parent: n.parent,
                    depth: n.depth,
                    substitution: n.edge.as_ref().map_or_else(|| "root".to_string(), |e| e.describe()),
                    score: n.score_value(),
                    n_vars: n.dataset.n_vars(),
                    rows_dropped: n.rows_dropped,
                    on_best_path: on_path.contains(&i),
                }
            })
            .collect()
    }
}

/// Candidate lists per number of columns.
#[derive(Default)]
pub struct CandidateCache {
    by_dim: BTreeMap<(usize, u64), Vec<Substitution>>,
}

impl CandidateCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(d: usize, cfg: &BeamConfig) -> (usize, u64) {
        let b = &cfg.budget;
        let mut h: u64 = b.max_intermediary_nodes as u64;
        for op in b.ops.unary_ops() {
            h = h * 31 + op as u64 + 1;
        }
        for op in b.ops.binary_ops() {
            h = h * 37 + op as u64 + 11;
        }
        h = h * 2 + u64::from(b.allow_constants);
        h = h * 4 + u64::from(cfg.sub_types.input()) * 2 + u64::from(cfg.sub_types.outinput());
        (d, h)
    }

    /// Input candidates first, then out-input candidates, each in
    /// enumeration order.
    pub fn get(&mut self, d: usize, cfg: &BeamConfig) -> &[Substitution] {
        self.by_dim.entry(Self::key(d, cfg)).or_insert_with(|| {
            let mut v = Vec::new();
            if cfg.sub_types.input() {
                v.extend(gen_input_candidates(d, &cfg.budget).into_iter().map(Substitution::Input));
            }
            if cfg.sub_types.outinput() {
                v.extend(
                    gen_outinput_candidates(d, &cfg.budget).into_iter().map(Substitution::OutInput),
                );
            }
            v
        })
    }
}

/// Applies a substitution, runs the rejection filters and scores the result.
pub fn score_candidate(
    parent: &SearchNode,
    s: &Substitution,
    measure: Measure,
) -> Option<(Dataset, DependenceScore)> {
    let ds = apply(&parent.dataset, s).ok()?;
    let sc = depmeasure::score(measure, ds.x(), ds.y()).ok()?;
    Some((ds, sc))
}

/// Pieces of a parent that many candidates share.
struct ParentContext<'a> {
    ds: &'a Dataset,
    measure: Measure,
    y_ranks: Option<depmeasure::RankVectors>,
    kmac_bandwidth: f64,
    /// Nearest-neighbour maps of the retained columns per out-input index
    /// set.
    outinput_nn: BTreeMap<Vec<usize>, Vec<usize>>,
}

impl<'a> ParentContext<'a> {
    fn new(ds: &'a Dataset, measure: Measure, cands: &[Substitution]) -> Self {
        let fast = matches!(measure, Measure::Codec | Measure::Kmac);
        let mut outinput_nn = BTreeMap::new();
        if fast {
            for c in cands {
                if let Substitution::OutInput(s) = c {
                    if !outinput_nn.contains_key(&s.indices) {
                        let rest: Vec<usize> =
                            (0..ds.n_vars()).filter(|j| !s.indices.contains(j)).collect();
                        let nn = predictor_neighbors(&ds.x().select_columns(&rest));
                        outinput_nn.insert(s.indices.clone(), nn);
                    }
                }
            }
        }
        ParentContext {
            ds,
            measure,
            y_ranks: (measure == Measure::Codec).then(|| compute_ranks(ds.y())),
            kmac_bandwidth: if measure == Measure::Kmac { median_bandwidth(ds.y()) } else { 0.0 },
            outinput_nn,
        }
    }

    /// Score of the child, computed without materializing it when no rows
    /// are dropped. Agrees exactly with [`score_candidate`].
    fn score(&self, s: &Substitution) -> Option<f64> {
        let n = self.ds.n_rows();
        let fast = matches!(self.measure, Measure::Codec | Measure::Kmac);
        if fast {
            let values = match s {
                Substitution::Input(c) => input_column(self.ds, c),
                Substitution::OutInput(c) => outinput_column(self.ds, c),
            };
            let bad = values.iter().filter(|v| !v.is_finite()).count();
            if bad == 0 {
                if near_constant(&values) {
                    return None;
                }
                return match s {
                    Substitution::Input(c) => {
                        let rest: Vec<usize> =
                            (0..self.ds.n_vars()).filter(|j| !c.indices.contains(j)).collect();
                        let mut cols = vec![values];
                        cols.extend(rest.iter().map(|&j| self.ds.x().column(j)));
                        let nn = predictor_neighbors(&Matrix::from_columns(&cols));
                        match self.measure {
                            Measure::Codec => {
                                codec_from_parts(self.y_ranks.as_ref()?, &nn).ok()
                            }
                            _ => kmac_from_parts(self.ds.y(), &nn, self.kmac_bandwidth).ok(),
                        }
                    }
                    Substitution::OutInput(c) => {
                        let nn = self.outinput_nn.get(&c.indices)?;
                        match self.measure {
                            Measure::Codec => codec_from_parts(&compute_ranks(&values), nn).ok(),
                            _ => kmac_from_parts(&values, nn, median_bandwidth(&values)).ok(),
                        }
                    }
                };
            }
            if bad as f64 > MAX_DROP_FRACTION * n as f64 {
                return None;
            }
        }
        let ds = apply(self.ds, s).ok()?;
        depmeasure::score(self.measure, ds.x(), ds.y()).ok().map(|sc| sc.value)
    }
}

fn near_constant(v: &[f64]) -> bool {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    sd <= 1e-10 * mean.abs() || sd == 0.0
}

#[cfg(feature = "parallel")]
fn score_all(ctx: &ParentContext<'_>, cands: &[Substitution]) -> Vec<Option<f64>> {
    use rayon::prelude::*;
    cands.par_iter().map(|c| ctx.score(c)).collect()
}

#[cfg(not(feature = "parallel"))]
fn score_all(ctx: &ParentContext<'_>, cands: &[Substitution]) -> Vec<Option<f64>> {
    cands.iter().map(|c| ctx.score(c)).collect()
}

struct Scored {
    score: f64,
    n_vars: usize,
    parent_rank: usize,
    cand: usize,
    parent: usize,
}

fn better(a: &Scored, b: &Scored) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.n_vars.cmp(&b.n_vars))
        .then(a.parent_rank.cmp(&b.parent_rank))
        .then(a.cand.cmp(&b.cand))
}

/// Runs the beam search from `root`.
pub fn search(root: Dataset, cfg: &BeamConfig) -> SearchResult {
    search_with_cache(root, cfg, &mut CandidateCache::new())
}

/// As [`search`], reusing candidate lists across searches.
pub fn search_with_cache(root: Dataset, cfg: &BeamConfig, cache: &mut CandidateCache) -> SearchResult {
    let beam = cfg.beam_size.max(1);
    let max_depth = cfg.max_depth.unwrap_or(root.n_vars().saturating_sub(1));
    let mut result = SearchResult::root_only(root, cfg.measure);
    for depth in 1..=max_depth {
        let frontier = result.levels.last().cloned().unwrap_or_default();
        let mut scored: Vec<Scored> = Vec::new();
        for (rank, &pid) in frontier.iter().enumerate() {
            let pds = &result.nodes[pid].dataset;
            let d = pds.n_vars();
            if d < 2 {
                continue;
            }
            let cands = cache.get(d, cfg);
            let ctx = ParentContext::new(pds, cfg.measure, cands);
            for (ci, sc) in score_all(&ctx, cands).into_iter().enumerate() {
                if let Some(score) = sc.filter(|v| !v.is_nan()) {
                    scored.push(Scored {
                        score,
                        n_vars: cands[ci].vars_after(d),
                        parent_rank: rank,
                        cand: ci,
                        parent: pid,
                    });
                }
            }
        }
        if scored.is_empty() {
            break;
        }
        scored.sort_by(better);
        let mut level = Vec::new();
        for s in scored.iter().take(beam) {
            let parent = &result.nodes[s.parent];
            let d = parent.dataset.n_vars();
            let edge = cache.get(d, cfg)[s.cand].clone();
            let Some((ds, score)) = score_candidate(parent, &edge, cfg.measure) else {
                continue;
            };
            let id = result.nodes.len();
            let rows_dropped = parent.dataset.n_rows() - ds.n_rows();
            result.nodes.push(SearchNode {
                id,
                dataset: ds,
                score: Some(score),
                parent: Some(s.parent),
                edge: Some(edge),
                depth,
                rows_dropped,
            });
            level.push(id);
        }
        if level.is_empty() {
            break;
        }
        result.levels.push(level);
    }
    result.best = best_node(&result.nodes);
    result
}

fn best_node(nodes: &[SearchNode]) -> usize {
    let mut best = 0;
    for n in nodes.iter().skip(1) {
        let b = &nodes[best];
        let ord = n
            .score_value()
            .total_cmp(&b.score_value())
            .then(b.dataset.n_vars().cmp(&n.dataset.n_vars()));
        if ord == Ordering::Greater {
            best = n.id;
        }
    }
    best
}

/// Maps a solution of a node's problem back to the original variables:
/// substitute the column meanings, then solve `y_map = solution` for the
/// original response.
pub fn reconstruct(node: &Dataset, solution: &ExprDag) -> Result<ExprDag, ExprError> {
    let composed = if solution.variables().is_empty() {
        solution.clone()
    } else {
        let mut parts: Vec<ExprDag> = node.var_map().to_vec();
        let need = solution.arity();
        while parts.len() < need {
            parts.push(ExprDag::constant(f64::NAN));
        }
        solution.substitute(&parts)
    };
    solve_for(node.y_map(), &composed, node.y_symbol())
}

/// [`reconstruct`] for every node of a path with its own solution.
pub fn reconstruct_path(
    path: &[&SearchNode],
    solutions: &[ExprDag],
) -> Vec<Result<ExprDag, ExprError>> {
    path.iter().zip(solutions).map(|(n, s)| reconstruct(&n.dataset, s)).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::substitution::{InputSub, OutInputSub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(f: &str, d: usize, n: usize, seed: u64) -> Dataset {
        let f = parse(f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        while rows.len() < n {
            let r: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
            let v = f.eval_point(&r);
            if v.is_finite() {
                rows.push(r);
                y.push(v);
            }
        }
        Dataset::new(Matrix::from_rows(&rows), y).unwrap()
    }

    #[test]
    fn sum_of_two_reduces_in_one_step() {
        let ds = sample("x1 + x2", 2, 200, 1);
        let r = search(ds, &BeamConfig::default());
        let path = r.best_path();
        assert_eq!(path.len(), 2);
        assert_eq!(path[1].dataset.n_vars(), 1);
    }

    #[test]
    fn fast_scores_match_materialized_scores() {
        let ds = sample("x1*x2 + sin(x3)", 3, 150, 2);
        let root = SearchResult::root_only(ds, Measure::Codec);
        let cfg = BeamConfig::default();
        let mut cache = CandidateCache::new();
        let cands = cache.get(3, &cfg).to_vec();
        for m in [Measure::Codec, Measure::Kmac] {
            let ctx = ParentContext::new(&root.root().dataset, m, &cands);
            for c in cands.iter().step_by(7) {
                let fast = ctx.score(c);
                let slow = score_candidate(root.root(), c, m).map(|(_, s)| s.value);
                assert_eq!(fast, slow, "{}", c.describe());
            }
        }
    }

    #[test]
    fn beam_levels_are_bounded_and_depth_decreases_vars() {
        let ds = sample("x1*x2*x3 + x4", 4, 150, 3);
        let cfg = BeamConfig { beam_size: 3, ..BeamConfig::default() };
        let r = search(ds, &cfg);
        for lvl in &r.levels {
            assert!(lvl.len() <= 3);
        }
        for n in &r.nodes {
            if let Some(p) = n.parent {
                assert!(n.dataset.n_vars() < r.nodes[p].dataset.n_vars());
            }
        }
        let best = r.nodes[r.best].score_value();
        assert!(r.nodes.iter().all(|n| n.score_value() <= best));
    }

    #[test]
    fn reconstruction_inverts_the_chain() {
        let ds = sample("x1*x2 + x3", 3, 100, 4);
        let g = Substitution::Input(InputSub { g: parse("x1*x2").unwrap(), indices: vec![0, 1] });
        let c1 = crate::substitution::apply(&ds, &g).unwrap();
        let h = Substitution::OutInput(OutInputSub {
            h: crate::expr::parse_with("y - x1", &crate::expr::ParseOptions { y_index: Some(1) })
                .unwrap(),
            indices: vec![1],
        });
        let c2 = crate::substitution::apply(&c1, &h).unwrap();
        // c2: y - x3 as a function of x1*x2; the solution is the identity.
        let f = reconstruct(&c2, &ExprDag::var(0)).unwrap();
        assert!(crate::expr::equivalent(&f, &parse("x1*x2 + x3").unwrap()));
        let root = reconstruct(&ds, &parse("x1*x2 + x3").unwrap()).unwrap();
        assert_eq!(root, parse("x1*x2 + x3").unwrap());
    }
}
