//! Compressed sparse row storage for the symmetric FEM matrices.

use std::collections::BTreeSet;

/// Square matrix in CSR format with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a zero matrix whose pattern is the node adjacency of the given cells.
    pub fn from_cells(n: usize, cells: &[[usize; 3]]) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for c in cells {
            for &a in c {
                for &b in c {
                    adj[a].insert(b);
                }
            }
        }
        for (i, row) in adj.iter_mut().enumerate() {
            row.insert(i);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &adj {
            col_idx.extend(row.iter().copied());
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            vals: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.vals[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.vals[p])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    /// Returns `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut r = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.vals[p] * y[self.col_idx[p]];
            }
            s += x[i] * r;
        }
        s
    }

    /// Extracts the block `A[rows, cols]` where `rows`/`cols` map global
    /// indices to local ones (`None` = dropped).
    pub fn submatrix(&self, rows: &[Option<usize>], cols: &[Option<usize>]) -> SubMatrix {
        let n_rows = rows.iter().filter(|r| r.is_some()).count();
        let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for (i, ri) in rows.iter().enumerate() {
            if let Some(li) = ri {
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    if let Some(lj) = cols[self.col_idx[p]] {
                        entries[*li].push((lj, self.vals[p]));
                    }
                }
            }
        }
        for e in &mut entries {
            e.sort_by_key(|&(j, _)| j);
        }
        SubMatrix { rows: entries }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `self + s * other`; both matrices must share a pattern.
    pub fn add_scaled(&self, s: f64, other: &CsrMatrix) -> Self {
        assert_eq!(self.col_idx, other.col_idx, "pattern mismatch");
        let mut m = self.clone();
        for (a, b) in m.vals.iter_mut().zip(&other.vals) {
            *a += s * b;
        }
        m
    }
}

/// Row lists of an extracted block, local indices.
#[derive(Debug, Clone)]
pub struct SubMatrix {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SubMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (yi, r) in y.iter_mut().zip(&self.rows) {
            *yi = r.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(x)
            .map(|(r, xi)| xi * r.iter().map(|&(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().find(|&&(j, _)| j == i).map_or(0.0, |&(_, v)| v))
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
