//! Sparse and dense linear-algebra primitives.
//!
//! [`SparseMatrix`] stores data in compressed sparse column (CSC) form with
//! 0-based indices and strictly increasing row indices inside each column, the
//! layout used by the ECOS and SCS solvers. [`LinearOperator`] is the
//! matrix-free interface every derivative map in the crate implements.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

/// A linear map `R^in_dim -> R^out_dim` given only by its action and the
/// action of its adjoint.
pub trait LinearOperator {
    /// `(out_dim, in_dim)`
    fn shape(&self) -> (usize, usize);

    /// Writes `op(x)` into `out`. Panics if the slice lengths do not match
    /// [`shape`](Self::shape).
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// Writes `op^T(y)` into `out`. Panics on length mismatch.
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = self.shape();
        check_len("linear operator input", n, x.len())?;
        let mut out = vec![0.0; m];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = self.shape();
        check_len("linear operator adjoint input", m, y.len())?;
        let mut out = vec![0.0; n];
        self.apply_adjoint_into(y, &mut out);
        Ok(out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint_into(y, out)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(out.len(), self.nrows());
        out.fill(0.0);
        for (j, xj) in x.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self[(i, j)] * xj;
            }
        }
    }

    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.nrows());
        assert_eq!(out.len(), self.ncols());
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.column(j).iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }
}

/// Identity map on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn shape(&self) -> (usize, usize) {
        (self.0, self.0)
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSC arrays, validating every structural
    /// invariant. Duplicate or unsorted row indices within a column are
    /// rejected.
    pub fn new(
        rows: usize,
        cols: usize,
        colptr: Vec<usize>,
        rowidx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self> {
        if colptr.len() != cols + 1 {
            return Err(Error::InvalidMatrix(format!(
                "colptr has length {}, expected cols+1 = {}",
                colptr.len(),
                cols + 1
            )));
        }
        if colptr[0] != 0 {
            return Err(Error::InvalidMatrix("colptr[0] must be 0".into()));
        }
        if rowidx.len() != vals.len() {
            return Err(Error::InvalidMatrix(format!(
                "rowidx has length {} but vals has length {}",
                rowidx.len(),
                vals.len()
            )));
        }
        if colptr[cols] != vals.len() {
            return Err(Error::InvalidMatrix(format!(
                "colptr[cols] = {} does not equal the number of entries {}",
                colptr[cols],
                vals.len()
            )));
        }
        for j in 0..cols {
            let (start, end) = (colptr[j], colptr[j + 1]);
            if start > end {
                return Err(Error::InvalidMatrix(format!(
                    "colptr decreases at column {j}"
                )));
            }
            for k in start..end {
                if rowidx[k] >= rows {
                    return Err(Error::InvalidMatrix(format!(
                        "row index {} out of range in column {j}",
                        rowidx[k]
                    )));
                }
                if k > start && rowidx[k] <= rowidx[k - 1] {
                    return Err(Error::InvalidMatrix(format!(
                        "row indices in column {j} are not strictly increasing"
                    )));
                }
            }
        }
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite entry {v}")));
        }
        Ok(Self {
            rows,
            cols,
            colptr,
            rowidx,
            vals,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate positions are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<_> = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (j, i));
        let mut colptr = vec![0usize; cols + 1];
        let mut rowidx = Vec::with_capacity(sorted.len());
        let mut vals = Vec::with_capacity(sorted.len());
        for &(i, j, v) in &sorted {
            if j >= cols {
                return Err(Error::InvalidMatrix(format!(
                    "column index {j} out of range"
                )));
            }
            colptr[j + 1] += 1;
            rowidx.push(i);
            vals.push(v);
        }
        for j in 0..cols {
            colptr[j + 1] += colptr[j];
        }
        Self::new(rows, cols, colptr, rowidx, vals)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            colptr: vec![0; cols + 1],
            rowidx: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            colptr: (0..=n).collect(),
            rowidx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let mut colptr = vec![0];
        let mut rowidx = Vec::new();
        let mut vals = Vec::new();
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let v = dense[(i, j)];
                if v != 0.0 {
                    rowidx.push(i);
                    vals.push(v);
                }
            }
            colptr.push(vals.len());
        }
        Self {
            rows: dense.nrows(),
            cols: dense.ncols(),
            colptr,
            rowidx,
            vals,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }
    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }
    pub fn vals(&self) -> &[f64] {
        &self.vals
    }
    pub fn vals_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    /// `(row indices, values)` of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.colptr[j]..self.colptr[j + 1];
        (&self.rowidx[r.clone()], &self.vals[r])
    }

    /// Storage position of entry `(i, j)`, if it is structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (start, end) = (self.colptr[j], self.colptr[j + 1]);
        self.rowidx[start..end]
            .binary_search(&i)
            .ok()
            .map(|k| start + k)
    }

    /// Adds `delta` to entry `(i, j)`, inserting it into the structure if it
    /// is not already present.
    pub fn add_to_entry(&mut self, i: usize, j: usize, delta: f64) {
        assert!(i < self.rows && j < self.cols);
        if let Some(k) = self.position(i, j) {
            self.vals[k] += delta;
            return;
        }
        let (start, end) = (self.colptr[j], self.colptr[j + 1]);
        let k = start + self.rowidx[start..end].partition_point(|&r| r < i);
        self.rowidx.insert(k, i);
        self.vals.insert(k, delta);
        for p in &mut self.colptr[j + 1..] {
            *p += 1;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.vals)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            let (ri, vs) = self.column(j);
            for (&i, &v) in ri.iter().zip(vs) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// `out += alpha * A x`, no length checks beyond debug assertions.
    pub(crate) fn gemv_acc(&self, alpha: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let a = alpha * xj;
            for k in self.colptr[j]..self.colptr[j + 1] {
                out[self.rowidx[k]] += a * self.vals[k];
            }
        }
    }

    /// `out += alpha * A^T y`
    pub(crate) fn gemv_t_acc(&self, alpha: f64, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.colptr[j]..self.colptr[j + 1] {
                s += self.vals[k] * y[self.rowidx[k]];
            }
            *o += alpha * s;
        }
    }
}

/// Sparse matrix-vector product `A x`.
pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    check_len("spmv input", a.cols, x.len())?;
    let mut out = vec![0.0; a.rows];
    a.gemv_acc(1.0, x, &mut out);
    Ok(out)
}

/// Transposed sparse matrix-vector product `A^T y`.
pub fn spmv_t(a: &SparseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_len("spmv_t input", a.rows, y.len())?;
    let mut out = vec![0.0; a.cols];
    a.gemv_t_acc(1.0, y, &mut out);
    Ok(out)
}

impl LinearOperator for SparseMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        out.fill(0.0);
        self.gemv_acc(1.0, x, out);
    }
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        self.gemv_t_acc(1.0, y, out);
    }
}

/// Eigendecomposition `X = U diag(λ) U^T` of a symmetric matrix with
/// eigenvalues in ascending order. Column `i` of `eigenvectors` pairs with
/// `eigenvalues[i]`; eigenvector signs are arbitrary.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `U diag(f(λ)) U^T`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fl = f(l);
            scaled.column_mut(j).scale_mut(fl);
        }
        &scaled * self.eigenvectors.transpose()
    }
}

/// Symmetric eigendecomposition. The input must be symmetric to within
/// `1e-12` relative to its largest entry.
pub fn sym_eig(x: &DMatrix<f64>) -> Result<EigenDecomposition> {
    if !x.is_square() {
        return Err(Error::DimensionMismatch {
            context: "sym_eig (square matrix)",
            expected: x.nrows(),
            got: x.ncols(),
        });
    }
    let n = x.nrows();
    let scale = x.amax().max(1.0);
    let mut asym = 0.0_f64;
    for j in 0..n {
        for i in 0..j {
            asym = asym.max((x[(i, j)] - x[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sym_eig input"));
    }
    let eig = x.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
