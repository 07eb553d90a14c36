//! Profile (skyline) Cholesky factorization with reverse Cuthill–McKee ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

/// Reverse Cuthill–McKee permutation: `perm[new] = old`. Each connected component is started
/// from a pseudo-peripheral vertex.
pub fn rcm_order(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_last = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (last vertex of the deepest level, depth)
        let mut seen = visited.to_vec();
        let mut level = vec![start];
        seen[start] = true;
        let mut depth = 0;
        loop {
            let mut next = Vec::new();
            for &v in &level {
                for &u in a.row(v).0 {
                    if !seen[u] {
                        seen[u] = true;
                        next.push(u);
                    }
                }
            }
            if next.is_empty() {
                let best = *level.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
                return (best, depth);
            }
            depth += 1;
            level = next;
        }
    };
    for s in 0..n {
        if visited[s] {
            continue;
        }
        // pseudo-peripheral start
        let (mut root, mut depth) = bfs_last(s, &visited);
        for _ in 0..4 {
            let (far, d) = bfs_last(root, &visited);
            if d <= depth {
                break;
            }
            root = far;
            depth = d;
        }
        let mut queue = VecDeque::new();
        queue.push_back(root);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = a.row(v).0.iter().copied().filter(|&u| !visited[u]).collect();
            nb.sort_by_key(|&u| (degree[u], u));
            for u in nb {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Lower-triangular Cholesky factor in skyline storage, in a permuted ordering.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    perm: Vec<usize>,
    /// first column stored in each row
    first: Vec<usize>,
    /// offset of row i's first stored entry
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors `a` (symmetric positive definite).
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let perm = rcm_order(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new_i, &old_i) in perm.iter().enumerate() {
            for &old_j in a.row(old_i).0 {
                let j = inv[old_j];
                if j < first[new_i] {
                    first[new_i] = j;
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0; start[n]];
        for (new_i, &old_i) in perm.iter().enumerate() {
            let (c, v) = a.row(old_i);
            for k in 0..c.len() {
                let j = inv[c[k]];
                if j <= new_i {
                    vals[start[new_i] + j - first[new_i]] = v[k];
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..=i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = vals[si + j - fi];
                for k in k0..j {
                    s -= vals[si + k - fi] * vals[sj + k - fj];
                }
                if j < i {
                    vals[si + j - fi] = s / vals[sj + j - fj];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(perm[i]));
                    }
                    vals[si + i - fi] = s.sqrt();
                }
            }
        }
        Ok(SkylineCholesky {
            n,
            perm,
            first,
            start,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries of the factor.
    pub fn profile(&self) -> usize {
        self.vals.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.vals[si + k - fi] * y[k];
            }
            y[i] = s / self.vals[si + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            y[i] /= self.vals[si + i - fi];
            let xi = y[i];
            for k in fi..i {
                y[k] -= self.vals[si + k - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
