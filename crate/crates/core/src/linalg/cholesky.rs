//! Envelope (profile) Cholesky factorization behind a reverse Cuthill–McKee
//! ordering. At desk scale the envelope of a 2D FEM matrix stays narrow
//! enough that this beats anything fancier on setup cost.

use std::collections::VecDeque;

use super::sparse::SubMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `first[i]` = first column stored in row `i` of L (permuted indices).
    first: Vec<usize>,
    /// Start offset of row `i` in `vals`; row holds columns `first[i]..=i`.
    offset: Vec<usize>,
    vals: Vec<f64>,
}

/// Reverse Cuthill–McKee ordering of a symmetric pattern. Returns `perm[new] = old`.
pub fn rcm_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited node");
        let start = pseudo_peripheral(adj, &degree, seed);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(adj, current);
        let max_level = levels
            .iter()
            .copied()
            .filter(|&l| l != usize::MAX)
            .max()
            .unwrap_or(0);
        if max_level <= ecc && current != seed {
            break;
        }
        ecc = max_level;
        let candidate = (0..adj.len())
            .filter(|&i| levels[i] == max_level)
            .min_by_key(|&i| (degree[i], i))
            .unwrap_or(current);
        if candidate == current {
            break;
        }
        current = candidate;
    }
    current
}

impl EnvelopeCholesky {
    /// Factorizes a symmetric positive definite matrix.
    pub fn factor(a: &SubMatrix) -> Result<Self> {
        let n = a.n_rows();
        let adj: Vec<Vec<usize>> = a
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|&(j, _)| j).filter(|&j| j != i).collect())
            .collect();
        let perm = rcm_order(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (old, row) in a.rows.iter().enumerate() {
            let i = inv[old];
            for &(old_j, _) in row {
                let j = inv[old_j];
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        let mut vals = vec![0.0; total];
        for (old, row) in a.rows.iter().enumerate() {
            let i = inv[old];
            for &(old_j, v) in row {
                let j = inv[old_j];
                if j <= i {
                    vals[offset[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = vals[offset[i] + j - fi];
                let ri = &vals[offset[i] + k0 - fi..offset[i] + j - fi];
                let rj = &vals[offset[j] + k0 - fj..offset[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if j < i {
                    let d = vals[offset[j] + j - fj];
                    vals[offset[i] + j - fi] = s / d;
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Solver(format!(
                            "matrix not positive definite: pivot {s:e} at row {i} of {n}"
                        )));
                    }
                    vals[offset[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            perm,
            first,
            offset,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.vals[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row[..i - fi]
                .iter()
                .zip(&y[fi..i])
                .map(|(l, v)| l * v)
                .sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.vals[self.offset[i]..self.offset[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (l, v) in row[..i - fi].iter().zip(&mut y[fi..i]) {
                *v -= l * xi;
            }
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SubMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.insert(0, (i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        SubMatrix { rows }
    }

    #[test]
    fn solves_tridiagonal_exactly() {
        let a = laplace_1d(50);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = chol.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = SubMatrix {
            rows: vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 2.0), (1, 1.0)]],
        };
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::Solver(_))));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplace_1d(17);
        let adj: Vec<Vec<usize>> = a
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|&(j, _)| j).filter(|&j| j != i).collect())
            .collect();
        let mut p = rcm_order(&adj);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }
}
