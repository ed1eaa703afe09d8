//! Smallest eigenpairs of the symmetric pencil `K x = λ M x`.
//!
//! Large problems run a block Krylov iteration on the shift-invert operator
//! `K⁻¹M` with full M-reorthogonalization, followed by Rayleigh–Ritz on the
//! pencil itself. The block start (rather than a single vector) matters on
//! the disk, whose Laplace spectrum has multiplicity-two eigenvalues that
//! a discrete mesh only splits slightly.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cholesky::EnvelopeCholesky;
use super::sparse::{axpy, dot, SubMatrix};
use crate::error::{Error, Result};

/// Below this size the pencil is reduced densely.
pub const DENSE_LIMIT: usize = 400;

const BLOCK: usize = 8;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// Worst relative residual `|Kφ − λMφ| / |Kφ|` over the returned pairs.
    pub worst_residual: f64,
    /// Dimension of the final search space.
    pub search_dim: usize,
}

fn residual(k: &SubMatrix, m: &SubMatrix, lambda: f64, phi: &[f64]) -> f64 {
    let kphi = k.mul_vec(phi);
    let mphi = m.mul_vec(phi);
    let num: f64 = kphi
        .iter()
        .zip(&mphi)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let den = dot(&kphi, &kphi).sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn smallest_eigenpairs(
    k: &SubMatrix,
    m: &SubMatrix,
    k_factor: &EnvelopeCholesky,
    nev: usize,
    tol: f64,
) -> Result<EigenPairs> {
    let n = k.n_rows();
    if nev == 0 || nev > n {
        return Err(Error::Parameter(format!(
            "requested {nev} eigenpairs from a problem of size {n}"
        )));
    }
    if n <= DENSE_LIMIT {
        return dense_eigenpairs(k, m, nev);
    }
    krylov_eigenpairs(k, m, k_factor, nev, tol)
}

/// Dense reduction through the Cholesky factor of `M`.
pub fn dense_eigenpairs(k: &SubMatrix, m: &SubMatrix, nev: usize) -> Result<EigenPairs> {
    let n = k.n_rows();
    let to_dense = |a: &SubMatrix| {
        let mut d = DMatrix::<f64>::zeros(n, n);
        for (i, r) in a.rows.iter().enumerate() {
            for &(j, v) in r {
                d[(i, j)] = v;
            }
        }
        d
    };
    let kd = to_dense(k);
    let md = to_dense(m);
    let chol = md
        .cholesky()
        .ok_or_else(|| Error::Solver("mass matrix not positive definite".into()))?;
    let l = chol.l();
    let linv_k = l
        .solve_lower_triangular(&kd)
        .ok_or_else(|| Error::Solver("singular mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::Solver("singular mass factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(nev);
    let mut vectors = Vec::with_capacity(nev);
    let mut worst = 0.0f64;
    for &i in idx.iter().take(nev) {
        let y = eig.eigenvectors.column(i).into_owned();
        let x = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Solver("singular mass factor".into()))?;
        let x: Vec<f64> = x.iter().copied().collect();
        let lambda = eig.eigenvalues[i];
        worst = worst.max(residual(k, m, lambda, &x));
        values.push(lambda);
        vectors.push(x);
    }
    Ok(EigenPairs {
        values,
        vectors,
        worst_residual: worst,
        search_dim: n,
    })
}

struct Basis {
    q: Vec<Vec<f64>>,
    mq: Vec<Vec<f64>>,
    kq: Vec<Vec<f64>>,
}

impl Basis {
    /// M-orthogonalizes `v` against the basis and itself; appends it unless it
    /// collapses. Returns whether a vector was added.
    fn push(&mut self, k: &SubMatrix, m: &SubMatrix, mut v: Vec<f64>) -> bool {
        let mut mv = m.mul_vec(&v);
        let norm0 = dot(&v, &mv).max(0.0).sqrt();
        if norm0 == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for (q, mq) in self.q.iter().zip(&self.mq) {
                let c = dot(mq, &v);
                axpy(-c, q, &mut v);
            }
            mv = m.mul_vec(&v);
        }
        let norm = dot(&v, &mv).max(0.0).sqrt();
        if norm < 1e-10 * norm0 {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        mv.iter_mut().for_each(|x| *x /= norm);
        self.kq.push(k.mul_vec(&v));
        self.q.push(v);
        self.mq.push(mv);
        true
    }
}

fn krylov_eigenpairs(
    k: &SubMatrix,
    m: &SubMatrix,
    k_factor: &EnvelopeCholesky,
    nev: usize,
    tol: f64,
) -> Result<EigenPairs> {
    let n = k.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1234_abcd_0001);
    let mut basis = Basis {
        q: Vec::new(),
        mq: Vec::new(),
        kq: Vec::new(),
    };
    let mut block: Vec<Vec<f64>> = Vec::new();
    for _ in 0..BLOCK {
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        if basis.push(k, m, v) {
            block.push(basis.q.last().unwrap().clone());
        }
    }

    let max_dim = n.min(12 * nev + 240);
    let mut check_at = (2 * nev + 2 * BLOCK).min(max_dim);
    let mut steps = 0usize;
    let mut last_worst = f64::INFINITY;

    loop {
        while basis.q.len() < check_at && !block.is_empty() {
            steps += 1;
            let mut next = Vec::with_capacity(block.len());
            for v in &block {
                let w = k_factor.solve(&m.mul_vec(v));
                if basis.push(k, m, w) {
                    next.push(basis.q.last().unwrap().clone());
                }
            }
            if next.is_empty() {
                // Invariant subspace: restart with fresh random directions.
                for _ in 0..BLOCK {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
                    if basis.push(k, m, v) {
                        next.push(basis.q.last().unwrap().clone());
                    }
                }
            }
            block = next;
        }

        let dim = basis.q.len();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = dot(&basis.q[i], &basis.kq[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..dim).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut values = Vec::with_capacity(nev);
        let mut vectors = Vec::with_capacity(nev);
        let mut worst = 0.0f64;
        for &c in idx.iter().take(nev) {
            let y = eig.eigenvectors.column(c);
            let lambda = eig.eigenvalues[c];
            let mut phi = vec![0.0; n];
            let mut kphi = vec![0.0; n];
            let mut mphi = vec![0.0; n];
            for (j, &yj) in y.iter().enumerate() {
                axpy(yj, &basis.q[j], &mut phi);
                axpy(yj, &basis.kq[j], &mut kphi);
                axpy(yj, &basis.mq[j], &mut mphi);
            }
            let num = kphi
                .iter()
                .zip(&mphi)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            let den = dot(&kphi, &kphi).sqrt().max(f64::MIN_POSITIVE);
            worst = worst.max(num / den);
            values.push(lambda);
            vectors.push(phi);
        }
        last_worst = last_worst.min(worst);

        if worst <= tol || dim >= n {
            return Ok(EigenPairs {
                values,
                vectors,
                worst_residual: worst,
                search_dim: dim,
            });
        }
        if dim >= max_dim || block.is_empty() {
            return Err(Error::EigenNonConvergence {
                iterations: steps,
                worst_residual: last_worst,
            });
        }
        check_at = (dim + 4 * BLOCK).min(max_dim);
    }
}
