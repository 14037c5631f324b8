//! Positive semidefinite cone in scaled lower-triangle coordinates.
//!
//! A symmetric `n x n` matrix is stored column by column as its lower
//! triangle, with off-diagonal entries multiplied by `sqrt(2)`. With this
//! scaling the Euclidean inner product of vectors equals the Frobenius
//! inner product of the matrices.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::sym_eig;

pub fn psd_vec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Unpacks a scaled lower triangle into a full symmetric matrix.
pub fn vec_to_mat(n: usize, v: &[f64]) -> DMatrix<f64> {
    assert_eq!(v.len(), psd_vec_len(n));
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let a = v[k] / SQRT_2;
            m[(i, j)] = a;
            m[(j, i)] = a;
            k += 1;
        }
    }
    m
}

/// Packs the lower triangle of a symmetric matrix, scaling off-diagonals.
pub fn mat_to_vec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(psd_vec_len(n));
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in j + 1..n {
            // symmetrize so slightly asymmetric products pack consistently
            out.push(SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

pub(super) fn project(n: usize, v: &[f64], out: &mut [f64]) -> Result<()> {
    let x = vec_to_mat(n, v);
    let eig = sym_eig(&x)?;
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        out.copy_from_slice(v);
        return Ok(());
    }
    let p = eig.reconstruct_with(|l| l.max(0.0));
    out.copy_from_slice(&mat_to_vec(&p));
    Ok(())
}

/// `X~ -> U (B o (U^T X~ U)) U^T`, with `B` built from the eigenvalues.
#[derive(Debug, Clone)]
pub(super) struct PsdJacobian {
    n: usize,
    u: DMatrix<f64>,
    b: DMatrix<f64>,
    kind: Shortcut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shortcut {
    Identity,
    Zero,
    General,
}

/// Weight matrix of the Hadamard product. For a pair of eigenvalues this is
/// `(l_i+ + l_j+) / (|l_i| + |l_j|)`: 1 for two positive eigenvalues, 0 for
/// two negative ones, `l+ / (l+ + |l-|)` for a mixed pair. When both
/// eigenvalues are zero the weight is 1/2.
pub(super) fn hadamard_weights(lambda: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (lambda[i], lambda[j]);
        let den = a.abs() + b.abs();
        if den == 0.0 {
            0.5
        } else {
            (a.max(0.0) + b.max(0.0)) / den
        }
    })
}

impl PsdJacobian {
    pub(super) fn new(n: usize, v: &[f64]) -> Result<Self> {
        let x = vec_to_mat(n, v);
        let eig = sym_eig(&x)?;
        let lam = eig.eigenvalues.as_slice();
        let kind = if lam.iter().all(|&l| l > 0.0) {
            Shortcut::Identity
        } else if lam.iter().all(|&l| l < 0.0) {
            Shortcut::Zero
        } else {
            Shortcut::General
        };
        Ok(Self {
            n,
            b: hadamard_weights(lam),
            u: eig.eigenvectors,
            kind,
        })
    }

    pub(super) fn apply(&self, d: &[f64], out: &mut [f64]) {
        match self.kind {
            Shortcut::Identity => out.copy_from_slice(d),
            Shortcut::Zero => out.fill(0.0),
            Shortcut::General => {
                let dx = vec_to_mat(self.n, d);
                let rotated = self.u.transpose() * dx * &self.u;
                let weighted = rotated.component_mul(&self.b);
                let back = &self.u * weighted * self.u.transpose();
                out.copy_from_slice(&mat_to_vec(&back));
            }
        }
    }
}
