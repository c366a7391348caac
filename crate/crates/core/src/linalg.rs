//! Sparse assembly and direct solves backed by faer.

use crate::error::{Error, Result};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        if v != 0.0 {
            self.entries.push((r, c, v));
        }
    }

    pub fn extend_shifted(&mut self, other: &Triplets, dr: usize, dc: usize, scale: f64) {
        for &(r, c, v) in &other.entries {
            self.add(r + dr, c + dc, scale * v);
        }
    }

    pub fn to_csr(&self) -> Csr {
        Csr::from_entries(self.rows, self.cols, &self.entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Compressed sparse rows with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { rows, cols, row_ptr, col_idx, vals }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k] * x[self.col_idx[k]]).sum()
            })
            .collect()
    }

    pub fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[k]] += self.vals[k] * x[r];
            }
        }
        out
    }

    /// x^T A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.vals[k]))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                d[r][c] = v;
            }
        }
        d
    }

    /// Principal submatrix on the index set `keep` (in the given order).
    pub fn principal(&self, keep: &[usize]) -> Csr {
        let mut map = vec![usize::MAX; self.cols];
        for (k, &c) in keep.iter().enumerate() {
            map[c] = k;
        }
        let mut t = Triplets::new(keep.len(), keep.len());
        for (r, &row) in keep.iter().enumerate() {
            for (c, v) in self.row(row) {
                if map[c] != usize::MAX {
                    t.add(r, map[c], v);
                }
            }
        }
        t.to_csr()
    }

    /// self + scale * diag(d).
    pub fn add_diagonal(&self, d: &[f64], scale: f64) -> Csr {
        let mut t = Triplets::new(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.add(r, c, v);
            }
            t.add(r, r, scale * d[r]);
        }
        t.to_csr()
    }

    pub fn scaled(&self, a: f64) -> Csr {
        Csr { vals: self.vals.iter().map(|v| a * v).collect(), ..self.clone() }
    }

    /// a * self + b * other for matrices of equal shape.
    pub fn combine(&self, a: f64, other: &Csr, b: f64) -> Csr {
        let mut t = Triplets::new(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.add(r, c, a * v);
            }
            for (c, v) in other.row(r) {
                t.add(r, c, b * v);
            }
        }
        t.to_csr()
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.vals.len());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.push(Triplet::new(r, c, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.rows, self.cols, &t)
            .map_err(|e| Error::Solver(format!("sparse assembly: {e:?}")))
    }
}

/// Sparse LU factorisation reusable for several right-hand sides.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &Csr) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Solver("LU of a non-square matrix".into()));
        }
        let m = a.to_faer()?;
        let lu = m.sp_lu().map_err(|e| Error::Solver(format!("sparse LU: {e:?}")))?;
        Ok(Self { lu, n: a.rows })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        use faer::prelude::Solve;
        if b.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: b.len() });
        }
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Solver("non-finite solution (singular system)".into()))
        }
    }
}

pub fn sparse_solve(a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    SparseLu::new(a)?.solve(b)
}

/// Dense row-major matrix helpers.
pub fn dense_to_faer(a: &[Vec<f64>]) -> Mat<f64> {
    let n = a.len();
    let m = if n == 0 { 0 } else { a[0].len() };
    Mat::from_fn(n, m, |i, j| a[i][j])
}

pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    use faer::prelude::Solve;
    let n = a.len();
    let m = dense_to_faer(a);
    let lu = m.partial_piv_lu();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Solver("singular dense system".into()))
    }
}

/// Eigenpairs of a symmetric matrix in ascending order; eigenvectors are the
/// columns of the returned row-major matrix.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let m = dense_to_faer(a);
    let e = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Solver(format!("symmetric eigensolver: {e:?}")))?;
    let s = e.S();
    let u = e.U();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let vecs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
