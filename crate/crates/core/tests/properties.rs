use proptest::prelude::*;
use symreduce_core::beam::{search, BeamConfig};
use symreduce_core::depmeasure::{chatterjee_xi, codec, k_nearest, k_nearest_bruteforce};
use symreduce_core::expr::{normalize, parse, simplify, DagBuilder, ExprDag, UnaryOp};
use symreduce_core::expr::BinaryOp;
use symreduce_core::substitution::{apply, gen_input_candidates, gen_outinput_candidates};
use symreduce_core::{Dataset, Matrix, Substitution};

fn expr_strategy() -> impl Strategy<Value = ExprDag> {
    // Post-order programs over three variables and a few constants.
    let leaf = prop_oneof![(0usize..3).prop_map(Ok), prop::sample::select(vec![0.5, 2.0, 3.0]).prop_map(Err)];
    let step = (0usize..12, any::<prop::sample::Index>(), any::<prop::sample::Index>());
    (prop::collection::vec(leaf, 1..4), prop::collection::vec(step, 1..8)).prop_map(|(leaves, steps)| {
        let mut b = DagBuilder::new();
        let mut ids: Vec<_> = leaves
            .iter()
            .map(|l| match *l {
                Ok(v) => b.var(v),
                Err(c) => b.constant(c),
            })
            .collect();
        for (op, i, j) in steps {
            let (a, c) = (ids[i.index(ids.len())], ids[j.index(ids.len())]);
            let id = match op {
                0 => b.binary(BinaryOp::Add, a, c),
                1 => b.binary(BinaryOp::Sub, a, c),
                2 | 3 => b.binary(BinaryOp::Mul, a, c),
                4 => b.binary(BinaryOp::Div, a, c),
                5 => b.unary(UnaryOp::Sqrt, a),
                6 => b.unary(UnaryOp::Exp, a),
                7 => b.unary(UnaryOp::Log, a),
                8 => b.unary(UnaryOp::Sin, a),
                9 => b.unary(UnaryOp::Cos, a),
                10 => b.unary(UnaryOp::Neg, a),
                _ => b.unary(UnaryOp::Square, a),
            };
            ids.push(id);
        }
        let root = *ids.last().unwrap();
        b.finish(root)
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * (1.0 + a.abs().max(b.abs()))
}

fn agree_on_positive_points(f: &ExprDag, g: &ExprDag) -> bool {
    let pts = [[0.7, 1.3, 2.1], [1.9, 0.4, 1.1], [0.55, 0.8, 2.7], [2.2, 1.7, 0.6]];
    pts.iter().all(|p| {
        let (a, b) = (f.eval_point(p), g.eval_point(p));
        !(a.is_finite() && b.is_finite() && a.abs() < 1e8) || close(a, b)
    })
}

fn data(n: usize, seed: u64) -> Vec<f64> {
    // Deterministic scrambled values in (-1, 1).
    (0..n)
        .map(|i| {
            let h = (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ seed.wrapping_mul(0xbf58_476d_1ce4_e5b9);
            let h = (h ^ (h >> 31)).wrapping_mul(0x94d0_49bb_1331_11eb);
            ((h >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplification_preserves_values(e in expr_strategy()) {
        prop_assert!(agree_on_positive_points(&e, &simplify(&e)), "{} vs {}", e, simplify(&e));
        prop_assert!(agree_on_positive_points(&e, &normalize(&e)), "{} vs {}", e, normalize(&e));
    }

    #[test]
    fn simplification_is_idempotent(e in expr_strategy()) {
        let s = simplify(&e);
        prop_assert_eq!(simplify(&s), s);
    }

    #[test]
    fn printing_round_trips(e in expr_strategy()) {
        let back = parse(&e.to_text()).unwrap();
        prop_assert!(agree_on_positive_points(&e, &back), "{} vs {}", e, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn xi_is_invariant_under_increasing_maps(seed in 0u64..1000, a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let x = data(80, seed);
        let y: Vec<f64> = data(80, seed + 7).iter().zip(&x).map(|(e, v)| v * v + 0.2 * e).collect();
        let base = chatterjee_xi(&x, &y).unwrap().value;
        let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let y2: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        prop_assert_eq!(base, chatterjee_xi(&x2, &y2).unwrap().value);
        prop_assert!(base <= 1.0);
    }

    #[test]
    fn codec_is_invariant_under_scaling_and_monotone_response(seed in 0u64..1000, a in 0.1f64..5.0) {
        let c1 = data(100, seed);
        let c2 = data(100, seed + 1);
        let y: Vec<f64> = c1.iter().zip(&c2).map(|(u, v)| u * v).collect();
        let base = codec(&Matrix::from_columns(&[&c1, &c2]), &y).unwrap().value;
        let c1s: Vec<f64> = c1.iter().map(|v| a * v + 1.0).collect();
        let y2: Vec<f64> = y.iter().map(|v| v * v * v).collect();
        let moved = codec(&Matrix::from_columns(&[&c1s, &c2]), &y2).unwrap().value;
        prop_assert!((base - moved).abs() < 1e-12);
        prop_assert!(base <= 1.0);
    }

    #[test]
    fn kd_tree_matches_bruteforce(seed in 0u64..1000, d in 1usize..5, k in 1usize..4) {
        let cols: Vec<Vec<f64>> = (0..d).map(|j| data(60, seed * 10 + j as u64).iter().map(|v| (v * 4.0).round()).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let m = Matrix::from_columns(&refs);
        prop_assert_eq!(k_nearest(&m, k), k_nearest_bruteforce(&m, k));
    }

    #[test]
    fn maps_describe_reduced_columns(seed in 0u64..1000, pick in any::<prop::sample::Index>()) {
        let n = 50;
        let cols: Vec<Vec<f64>> = (0..3).map(|j| data(n, seed * 3 + j).iter().map(|v| v + 1.5).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let x = Matrix::from_columns(&refs);
        let y: Vec<f64> = (0..n).map(|i| cols[0][i] * cols[1][i] + cols[2][i]).collect();
        let ds = Dataset::new(x.clone(), y.clone()).unwrap();
        let budget = BeamConfig::default().budget;
        let mut cands: Vec<Substitution> = gen_input_candidates(3, &budget).into_iter().map(Substitution::Input).collect();
        cands.extend(gen_outinput_candidates(3, &budget).into_iter().map(Substitution::OutInput));
        let s = &cands[pick.index(cands.len())];
        if let Ok(child) = apply(&ds, s) {
            for (local, &orig) in child.row_ids().iter().enumerate() {
                let mut point = x.row(orig).to_vec();
                point.push(y[orig]);
                for (j, m) in child.var_map().iter().enumerate() {
                    prop_assert!(close(m.eval_point(&point), child.x().get(local, j)));
                }
                prop_assert!(close(child.y_map().eval_point(&point), child.y()[local]));
            }
        }
    }
}

#[test]
fn beam_keeps_at_most_beam_size_nodes_per_level() {
    let n = 300;
    let cols: Vec<Vec<f64>> = (0..4).map(|j| data(n, 40 + j)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let y: Vec<f64> = (0..n).map(|i| cols[0][i] * cols[1][i] + cols[2][i] - cols[3][i]).collect();
    for beam_size in [1, 2, 3] {
        let cfg = BeamConfig { beam_size, ..BeamConfig::default() };
        let r = search(Dataset::new(Matrix::from_columns(&refs), y.clone()).unwrap(), &cfg);
        for (depth, level) in r.levels.iter().enumerate().skip(1) {
            assert!(level.len() <= beam_size);
            for &id in level {
                let node = &r.nodes[id];
                let parent = &r.nodes[node.parent.unwrap()];
                assert_eq!(node.depth, depth);
                assert!(r.levels[depth - 1].contains(&parent.id));
                assert!(node.dataset.n_vars() < parent.dataset.n_vars());
            }
        }
        let best = r.best_path().last().unwrap().score_value();
        assert!(r.nodes.iter().all(|nd| nd.score_value() <= best));
    }
}
