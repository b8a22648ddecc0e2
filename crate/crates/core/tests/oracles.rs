//! Closed-form values and naive reference implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symreduce_core::bench::{add_noise, nrmse};
use symreduce_core::depmeasure::{
    chatterjee_xi, codec, codec_numerator, codec_numerator_regrouped, compute_ranks,
    parallelepiped_volume, predictor_neighbors,
};
use symreduce_core::expr::parse;
use symreduce_core::regress::{design_matrix, fit_poly, monomials};
use symreduce_core::{Dataset, Matrix};

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Xi from its definition with distinct x: sort by x, count ranks directly.
fn naive_xi(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let r: Vec<f64> = idx.iter().map(|&i| y.iter().filter(|&&v| v <= y[i]).count() as f64).collect();
    let l: Vec<f64> = idx.iter().map(|&i| y.iter().filter(|&&v| v >= y[i]).count() as f64).collect();
    let num: f64 = r.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let den: f64 = l.iter().map(|li| li * (n as f64 - li)).sum();
    1.0 - n as f64 * num / (2.0 * den)
}

/// CODEC from its definition with an O(n^2) neighbour search on
/// standardized columns; ties go to the smaller index.
fn naive_codec(cols: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let std: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n as f64;
            let s = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
            c.iter().map(|v| if s > 0.0 { (v - m) / s } else { v - m }).collect()
        })
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d: f64 = std.iter().map(|c| (c[i] - c[j]).powi(2)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        let j = best.1;
        let r_i = y.iter().filter(|&&v| v <= y[i]).count() as f64;
        let r_j = y.iter().filter(|&&v| v <= y[j]).count() as f64;
        let l_i = y.iter().filter(|&&v| v >= y[i]).count() as f64;
        num += r_i.min(r_j) - l_i * l_i / n as f64;
        den += l_i * (n as f64 - l_i) / n as f64;
    }
    num / den
}

#[test]
fn xi_of_monotone_data_is_closed_form() {
    for n in [4usize, 10, 100] {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 1.0).collect();
        let got = chatterjee_xi(&x, &y).unwrap().value;
        assert!((got - (1.0 - 3.0 / (n as f64 + 1.0))).abs() <= 1e-12, "n={n}");
    }
}

#[test]
fn xi_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let x = uniform(&mut rng, 150);
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin() + 0.3 * rng.random_range(-1.0..1.0)).collect();
        let got = chatterjee_xi(&x, &y).unwrap().value;
        assert!((got - naive_xi(&x, &y)).abs() < 1e-12);
    }
}

#[test]
fn codec_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in 1..=3 {
        for _ in 0..5 {
            let cols: Vec<Vec<f64>> = (0..d).map(|_| uniform(&mut rng, 120)).collect();
            // Rounded responses produce ties.
            let y: Vec<f64> = (0..120).map(|i| (cols[0][i] * 4.0 + cols[d - 1][i]).round()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let got = codec(&Matrix::from_columns(&refs), &y).unwrap().value;
            assert!((got - naive_codec(&cols, &y)).abs() < 1e-9, "d={d}");
        }
    }
}

#[test]
fn codec_numerator_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let cols = [uniform(&mut rng, 200), uniform(&mut rng, 200)];
        let y: Vec<f64> = (0..200).map(|i| (cols[0][i] * cols[1][i] * 10.0).round()).collect();
        let x = Matrix::from_columns(&[&cols[0], &cols[1]]);
        let ranks = compute_ranks(&y);
        let nn = predictor_neighbors(&x);
        let exact = codec_numerator(&ranks, &nn) as f64;
        assert!((exact - codec_numerator_regrouped(&ranks, &nn)).abs() <= 1e-12 * exact.abs().max(1.0));
    }
}

fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    if m.len() == 1 {
        return m[0][0];
    }
    (0..m.len())
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * cofactor_det(&minor)
        })
        .sum()
}

#[test]
fn volume_matches_cofactor_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for k in 1..=4 {
        for _ in 0..10 {
            let origin = uniform(&mut rng, k);
            let corners: Vec<Vec<f64>> = (0..k).map(|_| uniform(&mut rng, k)).collect();
            let edges: Vec<Vec<f64>> =
                corners.iter().map(|c| c.iter().zip(&origin).map(|(a, b)| a - b).collect()).collect();
            let refs: Vec<&[f64]> = corners.iter().map(Vec::as_slice).collect();
            let got = parallelepiped_volume(&origin, &refs);
            let want = cofactor_det(&edges).abs();
            assert!((got - want).abs() <= 1e-10 * want.max(1.0), "k={k}: {got} vs {want}");
        }
    }
}

/// Solves the normal equations `A^T A c = A^T y` by Gaussian elimination.
fn normal_equations(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = a[0].len();
    let mut m = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in a.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                m[i][j] += row[i] * row[j];
            }
            m[i][p] += row[i] * yi;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap()).unwrap();
        m.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=p {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    (0..p).map(|i| m[i][p] / m[i][i]).collect()
}

#[test]
fn poly_fit_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| uniform(&mut rng, 2)).collect();
    let y: Vec<f64> = rows.iter().map(|r| (r[0] + 2.0).ln() * r[1].exp()).collect();
    let ds = Dataset::new(Matrix::from_rows(&rows), y.clone()).unwrap();
    let monos = monomials(2, 2);
    let dm = design_matrix(&ds, &monos);
    let a: Vec<Vec<f64>> = (0..dm.nrows()).map(|i| (0..dm.ncols()).map(|j| dm[(i, j)]).collect()).collect();
    let want = normal_equations(&a, &y);
    let fit = fit_poly(&ds, 2).unwrap();
    for ((e, c), w) in fit.terms.iter().zip(&want) {
        assert!((c - w).abs() < 1e-8, "{e:?}: {c} vs {w}");
    }
}

#[test]
fn nrmse_matches_definition() {
    let y = [1.0, -2.0, 0.5, 4.0];
    let yhat = [1.5, -2.0, 0.0, 3.0];
    let want = ((0.25 + 0.0 + 0.25 + 1.0) / (1.0 + 4.0 + 0.25 + 16.0_f64)).sqrt();
    assert!((nrmse(&y, &yhat).unwrap() - want).abs() < 1e-15);
}

#[test]
fn noise_has_requested_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let y = uniform(&mut rng, 20_000);
    let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    for gamma in [0.01, 0.1] {
        let z = add_noise(&y, gamma, 5);
        let e: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
        let sd = (e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt();
        assert!((sd / (gamma * rms) - 1.0).abs() < 0.03, "gamma={gamma}: {sd}");
    }
}

#[test]
fn washburn_formula_parses_to_expected_shape() {
    let f = parse("sqrt(x1*x2*x3*cos(x4)/(2*x5))").unwrap();
    assert_eq!(symreduce_core::expr::simplify(&f).to_text(), "sqrt(0.5*(x1*(x2*(x3*cos(x4))))/x5)");
}
