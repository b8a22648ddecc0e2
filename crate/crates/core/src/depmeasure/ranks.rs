use crate::prelude::*;

/// Rank statistics of a response: `r[i] = #{j : y_j <= y_i}` and
/// `l[i] = #{j : y_j >= y_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankVectors {
    pub r: Vec<usize>,
    pub l: Vec<usize>,
}

impl RankVectors {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `sum l_i (n - l_i)`; zero exactly when all responses are equal.
    pub fn tie_denominator(&self) -> u64 {
        let n = self.len() as u64;
        self.l.iter().map(|&l| l as u64 * (n - l as u64)).sum()
    }
}

pub fn compute_ranks(y: &[f64]) -> RankVectors {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut r = vec![0; n];
    let mut l = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[order[end]] == y[order[start]] {
            end += 1;
        }
        for &i in &order[start..end] {
            r[i] = end;
            l[i] = n - start;
        }
        start = end;
    }
    RankVectors { r, l }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        let rv = compute_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(rv.r, vec![4, 1, 4, 2]);
        assert_eq!(rv.l, vec![2, 4, 2, 3]);
    }
}
