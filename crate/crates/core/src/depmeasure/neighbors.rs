//! Nearest neighbours under Euclidean distance, ties broken by lower index.

use crate::matrix::Matrix;
use crate::prelude::*;

const LEAF_SIZE: usize = 8;
/// Above this dimension the tree prunes too little to beat brute force.
const MAX_TREE_DIM: usize = 16;

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

enum KdNode {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

pub struct KdTree<'a> {
    pts: &'a Matrix,
    idx: Vec<usize>,
    nodes: Vec<KdNode>,
}

/// The `k` best `(squared distance, index)` pairs seen so far, ascending.
struct Best {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Best {
    fn bound(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    fn offer(&mut self, d: f64, j: usize) {
        let key = (d, j);
        if self.items.len() == self.k {
            let w = self.items[self.k - 1];
            if (key.0, key.1) >= (w.0, w.1) {
                return;
            }
            self.items.pop();
        }
        let pos = self
            .items
            .partition_point(|&(e, i)| e < key.0 || (e == key.0 && i < key.1));
        self.items.insert(pos, key);
    }
}

impl<'a> KdTree<'a> {
    pub fn build(pts: &'a Matrix) -> Self {
        let mut t = KdTree { pts, idx: (0..pts.nrows()).collect(), nodes: Vec::new() };
        if pts.nrows() > 0 {
            t.build_range(0, pts.nrows());
        }
        t
    }

    fn build_range(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let d = self.pts.ncols();
        let mut dim = 0;
        let mut spread = -1.0;
        for j in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.idx[start..end] {
                let v = self.pts.get(i, j);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > spread {
                spread = hi - lo;
                dim = j;
            }
        }
        let mid = start + (end - start) / 2;
        let pts = self.pts;
        self.idx[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| pts.get(a, dim).total_cmp(&pts.get(b, dim)));
        let value = pts.get(self.idx[mid], dim);
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build_range(start, mid);
        let right = self.build_range(mid, end);
        self.nodes[id] = KdNode::Split { dim, value, left, right };
        id
    }

    /// The `k` nearest other points of point `i`.
    pub fn k_nearest(&self, i: usize, k: usize) -> Vec<usize> {
        let mut best = Best { k, items: Vec::with_capacity(k + 1) };
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, self.pts.row(i), i, &mut best);
        }
        best.items.into_iter().map(|(_, j)| j).collect()
    }

    fn search(&self, node: usize, q: &[f64], skip: usize, best: &mut Best) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &j in &self.idx[start..end] {
                    if j != skip {
                        best.offer(dist2(q, self.pts.row(j)), j);
                    }
                }
            }
            KdNode::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, skip, best);
                // Equal bounds are visited: a tie may have a lower index.
                if diff * diff <= best.bound() {
                    self.search(far, q, skip, best);
                }
            }
        }
    }
}

/// Reference implementation by exhaustive comparison.
pub fn k_nearest_bruteforce(pts: &Matrix, k: usize) -> Vec<Vec<usize>> {
    (0..pts.nrows())
        .map(|i| {
            let mut best = Best { k, items: Vec::with_capacity(k + 1) };
            if k > 0 {
                for j in 0..pts.nrows() {
                    if j != i {
                        best.offer(dist2(pts.row(i), pts.row(j)), j);
                    }
                }
            }
            best.items.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// The `k` nearest other points of every point.
pub fn k_nearest(pts: &Matrix, k: usize) -> Vec<Vec<usize>> {
    if pts.ncols() > MAX_TREE_DIM || pts.nrows() <= 2 * LEAF_SIZE {
        return k_nearest_bruteforce(pts, k);
    }
    let t = KdTree::build(pts);
    (0..pts.nrows()).map(|i| t.k_nearest(i, k)).collect()
}

/// Index of the nearest other point of every point (`i` itself if alone).
pub fn nearest_neighbors(pts: &Matrix) -> Vec<usize> {
    k_nearest(pts, 1)
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.first().copied().unwrap_or(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_matches_bruteforce_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [1, 2, 3, 5] {
            // Integer grid coordinates produce many exact ties.
            let data: Vec<f64> = (0..300 * d).map(|_| rng.random_range(0..6) as f64).collect();
            let m = Matrix::from_row_major(300, d, data);
            let t = KdTree::build(&m);
            let brute = k_nearest_bruteforce(&m, 3);
            for i in 0..300 {
                assert_eq!(t.k_nearest(i, 3), brute[i], "d={d} i={i}");
            }
        }
    }
}
