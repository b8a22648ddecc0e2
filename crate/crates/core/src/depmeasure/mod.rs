//! Rank-based dependence measures: how well is `y` a function of `x`?
//!
//! All measures are close to 1 when `y` is a measurable function of `x` and
//! close to 0 when the two are independent, at large sample sizes.

mod neighbors;
mod ranks;

pub use neighbors::{k_nearest, k_nearest_bruteforce, nearest_neighbors, KdTree};
pub use ranks::{compute_ranks, RankVectors};

use core::fmt;
use core::str::FromStr;

use crate::matrix::{standardize, Matrix};
use crate::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Chatterjee's rank correlation; single predictor only.
    Xi,
    /// Azadkia–Chatterjee conditional dependence coefficient.
    Codec,
    /// Kernel measure of association with a Gaussian kernel.
    Kmac,
    /// Mean nearest-neighbour parallelepiped volume in the joint space.
    Volume,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Xi => "xi",
            Measure::Codec => "codec",
            Measure::Kmac => "kmac",
            Measure::Volume => "volume",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xi" => Ok(Measure::Xi),
            "codec" => Ok(Measure::Codec),
            "kmac" => Ok(Measure::Kmac),
            "volume" => Ok(Measure::Volume),
            _ => Err(format!("unknown measure '{s}' (expected xi, codec, kmac or volume)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DependenceScore {
    pub value: f64,
    pub measure: Measure,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DepError {
    #[error("all response values are equal")]
    DegenerateY,
    #[error("{measure} needs at least {needed} rows, got {n}")]
    TooFewRows { measure: Measure, n: usize, needed: usize },
    #[error("xi takes a single predictor, got {0}")]
    Multivariate(usize),
    #[error("x has {x} rows but y has {y}")]
    LengthMismatch { x: usize, y: usize },
}

fn check_shape(x: &Matrix, y: &[f64], measure: Measure, needed: usize) -> Result<(), DepError> {
    if x.nrows() != y.len() {
        return Err(DepError::LengthMismatch { x: x.nrows(), y: y.len() });
    }
    if y.len() < needed {
        return Err(DepError::TooFewRows { measure, n: y.len(), needed });
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(DepError::DegenerateY);
    }
    Ok(())
}

/// Scores `y` against the columns of `x`.
pub fn score(measure: Measure, x: &Matrix, y: &[f64]) -> Result<DependenceScore, DepError> {
    match measure {
        Measure::Xi => {
            if x.ncols() != 1 {
                return Err(DepError::Multivariate(x.ncols()));
            }
            chatterjee_xi(&x.column(0), y)
        }
        Measure::Codec => codec(x, y),
        Measure::Kmac => kmac(x, y, None),
        Measure::Volume => volume_score(x, y),
    }
}

/// Chatterjee's xi with the general tie correction.
pub fn chatterjee_xi(x: &[f64], y: &[f64]) -> Result<DependenceScore, DepError> {
    let xm = Matrix::from_columns(&[x]);
    check_shape(&xm, y, Measure::Xi, 2)?;
    let n = y.len();
    let ranks = compute_ranks(y);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: ties in x keep their input order.
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let jumps: u64 = order
        .windows(2)
        .map(|w| ranks.r[w[0]].abs_diff(ranks.r[w[1]]) as u64)
        .sum();
    let denom = ranks.tie_denominator();
    if denom == 0 {
        return Err(DepError::DegenerateY);
    }
    let value = 1.0 - (n as f64 * jumps as f64) / (2.0 * denom as f64);
    Ok(DependenceScore { value, measure: Measure::Xi })
}

/// CODEC numerator, `sum_i (n min(r_i, r_nu(i)) - l_i^2)`, in exact integer
/// arithmetic.
pub fn codec_numerator(ranks: &RankVectors, nn: &[usize]) -> i128 {
    let n = ranks.len() as i128;
    (0..ranks.len())
        .map(|i| {
            let m = ranks.r[i].min(ranks.r[nn[i]]) as i128;
            let l = ranks.l[i] as i128;
            n * m - l * l
        })
        .sum()
}

/// The same numerator regrouped as `(n/2)(R + S - sum |r_i - r_nu(i)|) - L`
/// with `R = sum r_i`, `S = sum r_nu(i)` and `L = sum l_i^2`.
pub fn codec_numerator_regrouped(ranks: &RankVectors, nn: &[usize]) -> f64 {
    let n = ranks.len() as f64;
    let mut r_sum = 0.0;
    let mut s_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut l_sq = 0.0;
    for i in 0..ranks.len() {
        let (a, b) = (ranks.r[i] as f64, ranks.r[nn[i]] as f64);
        r_sum += a;
        s_sum += b;
        abs_sum += (a - b).abs();
        l_sq += (ranks.l[i] as f64).powi(2);
    }
    0.5 * n * (r_sum + s_sum - abs_sum) - l_sq
}

/// CODEC from precomputed response ranks and nearest-neighbour map.
pub fn codec_from_parts(ranks: &RankVectors, nn: &[usize]) -> Result<f64, DepError> {
    let denom = ranks.tie_denominator();
    if denom == 0 {
        return Err(DepError::DegenerateY);
    }
    Ok(codec_numerator(ranks, nn) as f64 / denom as f64)
}

/// Nearest-neighbour map in standardized coordinates.
pub fn predictor_neighbors(x: &Matrix) -> Vec<usize> {
    nearest_neighbors(&x.standardized())
}

pub fn codec(x: &Matrix, y: &[f64]) -> Result<DependenceScore, DepError> {
    check_shape(x, y, Measure::Codec, 2)?;
    let nn = predictor_neighbors(x);
    let value = codec_from_parts(&compute_ranks(y), &nn)?;
    Ok(DependenceScore { value, measure: Measure::Codec })
}

#[inline]
fn gauss(a: f64, b: f64, inv_two_h2: f64) -> f64 {
    (-(a - b) * (a - b) * inv_two_h2).exp()
}

fn evenly_spaced(n: usize, m: usize) -> Vec<usize> {
    if n <= m {
        (0..n).collect()
    } else {
        (0..m).map(|k| k * n / m).collect()
    }
}

const BANDWIDTH_SAMPLE: usize = 500;
const CROSS_TERM_SAMPLE: usize = 2000;

/// Median absolute pairwise difference of `y` on an evenly spaced subsample
/// of at most 500 points, falling back to the standard deviation.
pub fn median_bandwidth(y: &[f64]) -> f64 {
    let idx = evenly_spaced(y.len(), BANDWIDTH_SAMPLE);
    let mut diffs = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            diffs.push((y[i] - y[j]).abs());
        }
    }
    let mut h = 0.0;
    if !diffs.is_empty() {
        let mid = diffs.len() / 2;
        let (_, m, _) = diffs.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        h = *m;
    }
    if h > 0.0 && h.is_finite() {
        return h;
    }
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// KMAc from a precomputed nearest-neighbour map.
pub fn kmac_from_parts(y: &[f64], nn: &[usize], bandwidth: f64) -> Result<f64, DepError> {
    let n = y.len();
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(DepError::DegenerateY);
    }
    let c = 1.0 / (2.0 * bandwidth * bandwidth);
    let near = (0..n).map(|i| gauss(y[i], y[nn[i]], c)).sum::<f64>() / n as f64;
    // The mean over distinct pairs is a U-statistic; on an evenly spaced
    // subsample it stays unbiased.
    let idx = evenly_spaced(n, CROSS_TERM_SAMPLE);
    let m = idx.len();
    let mut cross = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            cross += gauss(y[i], y[j], c);
        }
    }
    let cross = 2.0 * cross / (m as f64 * (m as f64 - 1.0));
    let denom = 1.0 - cross;
    if denom.abs() < 1e-15 {
        return Err(DepError::DegenerateY);
    }
    Ok((near - cross) / denom)
}

/// KMAc with a Gaussian kernel. `bandwidth` defaults to
/// [`median_bandwidth`].
pub fn kmac(x: &Matrix, y: &[f64], bandwidth: Option<f64>) -> Result<DependenceScore, DepError> {
    check_shape(x, y, Measure::Kmac, 2)?;
    let h = bandwidth.unwrap_or_else(|| median_bandwidth(y));
    let nn = predictor_neighbors(x);
    let value = kmac_from_parts(y, &nn, h)?;
    Ok(DependenceScore { value, measure: Measure::Kmac })
}

/// Absolute volume of the parallelepiped spanned by `corners[k] - origin`.
/// Needs as many corners as coordinates.
pub fn parallelepiped_volume(origin: &[f64], corners: &[&[f64]]) -> f64 {
    let k = origin.len();
    assert_eq!(corners.len(), k, "need one corner per dimension");
    let mut data = Vec::with_capacity(k * k);
    for c in corners {
        data.extend(c.iter().zip(origin).map(|(a, b)| a - b));
    }
    nalgebra::DMatrix::from_row_slice(k, k, &data).determinant().abs()
}

/// Baseline score `1 / (1 + mean volume)` where the volume at each point is
/// spanned by its `d + 1` nearest neighbours in the standardized joint
/// `(x, y)` space. Functional data lies on a `d`-dimensional surface, so
/// the volumes shrink towards zero.
pub fn volume_score(x: &Matrix, y: &[f64]) -> Result<DependenceScore, DepError> {
    let d = x.ncols();
    check_shape(x, y, Measure::Volume, d + 2)?;
    let joint = x.standardized().with_column(&standardize(y));
    let nbrs = k_nearest(&joint, d + 1);
    let total: f64 = (0..joint.nrows())
        .map(|i| {
            let corners: Vec<&[f64]> = nbrs[i].iter().map(|&j| joint.row(j)).collect();
            parallelepiped_volume(joint.row(i), &corners)
        })
        .sum();
    let mean = total / joint.nrows() as f64;
    Ok(DependenceScore { value: 1.0 / (1.0 + mean), measure: Measure::Volume })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_monotone_closed_form() {
        for n in [4usize, 10, 100] {
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let y: Vec<f64> = x.iter().map(|v| v * v * v + 1.0).collect();
            let s = chatterjee_xi(&x, &y).unwrap().value;
            assert!((s - (1.0 - 3.0 / (n as f64 + 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_rejects_constant_y() {
        assert_eq!(chatterjee_xi(&[1.0, 2.0, 3.0], &[5.0; 3]), Err(DepError::DegenerateY));
        let x = Matrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(score(Measure::Xi, &x, &[1.0, 2.0]), Err(DepError::Multivariate(2)));
    }

    #[test]
    fn unit_parallelepiped() {
        let v = parallelepiped_volume(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kmac_matches_naive_formula() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 61) as f64 / 7.0).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.3).sin() + 0.1 * v).collect();
        let xm = Matrix::from_columns(&[&x]);
        let h = 0.7;
        let got = kmac(&xm, &y, Some(h)).unwrap().value;
        let nn = nearest_neighbors(&xm.standardized());
        let k = |a: f64, b: f64| (-(a - b).powi(2) / (2.0 * h * h)).exp();
        let n = y.len() as f64;
        let near: f64 = (0..y.len()).map(|i| k(y[i], y[nn[i]])).sum::<f64>() / n;
        let mut cross = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if i != j {
                    cross += k(y[i], y[j]);
                }
            }
        }
        cross /= n * (n - 1.0);
        let want = (near - cross) / (1.0 - cross);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn measure_names_round_trip() {
        for m in [Measure::Xi, Measure::Codec, Measure::Kmac, Measure::Volume] {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
        }
    }
}
