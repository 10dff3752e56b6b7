//! Sparse matrices and a Jacobi-preconditioned conjugate gradient solver.

use crate::error::{Error, Result};
use rayon::prelude::*;
use sprs::{CsMat, TriMat};

pub type SparseMatrix = CsMat<f64>;

/// Reductions are split into fixed chunks so results do not depend on the
/// thread count.
const CHUNK: usize = 4096;

/// Builds a CSR matrix, summing duplicate entries in insertion order.
pub fn csr_from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> SparseMatrix {
    let mut t = TriMat::with_capacity((n, n), entries.len());
    for &(i, j, v) in entries {
        t.add_triplet(i, j, v);
    }
    t.to_csr()
}

pub fn zeros(n: usize) -> SparseMatrix {
    CsMat::zero((n, n)).to_csr()
}

/// `y = A x`.
pub fn matvec(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    matvec_into(a, x, &mut y);
    y
}

pub fn matvec_into(a: &SparseMatrix, x: &[f64], y: &mut [f64]) {
    debug_assert!(a.is_csr());
    let (ip, ind, val) = (a.indptr(), a.indices(), a.data());
    let ip = ip.raw_storage();
    let row = |i: usize| {
        let mut s = 0.0;
        for k in ip[i]..ip[i + 1] {
            s += val[k] * x[ind[k]];
        }
        s
    };
    if y.len() >= 2 * CHUNK {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
    } else {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = row(i);
        }
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 * CHUNK {
        return x.iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let parts: Vec<f64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum())
        .collect();
    parts.iter().sum()
}

/// `xᵀ A y`.
pub fn quad_form(a: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &matvec(a, y))
}

pub fn diagonal(a: &SparseMatrix) -> Vec<f64> {
    let mut d = vec![0.0; a.rows()];
    for (i, row) in a.outer_iterator().enumerate() {
        d[i] = row.get(i).copied().unwrap_or(0.0);
    }
    d
}

/// `alpha A + beta B`.
pub fn add_scaled(alpha: f64, a: &SparseMatrix, beta: f64, b: &SparseMatrix) -> SparseMatrix {
    let sa = a.map(|v| alpha * v);
    let sb = b.map(|v| beta * v);
    &sa + &sb
}

/// Largest `|A_ij - A_ji|`.
pub fn asymmetry(a: &SparseMatrix) -> f64 {
    let t = a.transpose_view().to_csr();
    let d = &a.map(|v| *v) - &t;
    d.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Rows and columns picked by the index maps (`None` drops the index).
pub fn restrict(
    a: &SparseMatrix,
    rows: &[Option<usize>],
    cols: &[Option<usize>],
    shape: (usize, usize),
) -> SparseMatrix {
    let mut t = TriMat::new(shape);
    for (i, row) in a.outer_iterator().enumerate() {
        let Some(ri) = rows[i] else { continue };
        for (j, &v) in row.iter() {
            if let Some(cj) = cols[j] {
                t.add_triplet(ri, cj, v);
            }
        }
    }
    t.to_csr()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// Iteration cap; `None` means `20 * sqrt(n)` (at least 50).
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

impl CgOptions {
    pub fn cap(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((20.0 * (n as f64).sqrt()).ceil() as usize).max(50))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final `‖b − A x‖ / ‖b‖`.
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x`.
pub fn pcg(a: &SparseMatrix, b: &[f64], x: &mut [f64], opts: &CgOptions) -> Result<CgReport> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = diagonal(a)
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = matvec(a, x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = dot(&r, &r).sqrt() / bnorm;
    if res <= opts.rel_tol {
        return Ok(CgReport {
            iterations: 0,
            relative_residual: res,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = opts.cap(n);
    for it in 1..=cap {
        matvec_into(a, &p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        if res <= opts.rel_tol {
            return Ok(CgReport {
                iterations: it,
                relative_residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: cap,
        residual: res,
    })
}
