//! Projections onto primitive cones, their duals, and Cartesian products of
//! them, together with matrix-free projection derivatives.
//!
//! Every primitive cone is handled in its own coordinates; a [`ConeSpec`]
//! lays the blocks out in the fixed order zero, nonnegative, second-order,
//! semidefinite, primal exponential, dual exponential.

mod exp;
mod psd;
mod soc;

pub use exp::{
    exp_case, exp_kkt_residual, in_exp_cone, in_exp_polar, project_exp, ExpCase,
    ExpProjectionResult,
};
pub use psd::{mat_to_vec, psd_vec_len, vec_to_mat};

use nalgebra::{DMatrix, Matrix3};

use crate::error::{check_len, Error, Result};
use crate::linalg::LinearOperator;

/// A single closed convex cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimitiveCone {
    /// `{0}^d`
    Zero(usize),
    /// `R^d`
    Free(usize),
    /// `R_+^d`
    NonNeg(usize),
    /// `{(t, x) in R x R^(d-1) : ||x|| <= t}`
    SecondOrder(usize),
    /// Positive semidefinite matrices of the given order, stored as a
    /// scaled lower triangle.
    PsdTriangle(usize),
    ExpPrimal,
    ExpDual,
}

impl PrimitiveCone {
    pub fn dim(&self) -> usize {
        match *self {
            Self::Zero(d) | Self::Free(d) | Self::NonNeg(d) | Self::SecondOrder(d) => d,
            Self::PsdTriangle(n) => psd_vec_len(n),
            Self::ExpPrimal | Self::ExpDual => 3,
        }
    }

    /// The dual cone `K*` as a primitive cone.
    pub fn dual(&self) -> Self {
        match *self {
            Self::Zero(d) => Self::Free(d),
            Self::Free(d) => Self::Zero(d),
            Self::ExpPrimal => Self::ExpDual,
            Self::ExpDual => Self::ExpPrimal,
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero(0) | Self::Free(0) | Self::NonNeg(0) | Self::SecondOrder(0) => Err(
                Error::InvalidCone(format!("{self:?} must have dimension at least 1")),
            ),
            Self::PsdTriangle(0) => Err(Error::InvalidCone(
                "semidefinite cone must have matrix order at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Ordered Cartesian product of primitive cones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeSpec {
    pub zero: usize,
    pub nonneg: usize,
    pub soc: Vec<usize>,
    pub psd: Vec<usize>,
    pub exp_primal: usize,
    pub exp_dual: usize,
}

impl ConeSpec {
    pub fn total_dim(&self) -> usize {
        self.zero
            + self.nonneg
            + self.soc.iter().sum::<usize>()
            + self.psd.iter().map(|&n| psd_vec_len(n)).sum::<usize>()
            + 3 * (self.exp_primal + self.exp_dual)
    }

    pub fn validate(&self) -> Result<()> {
        if self.soc.contains(&0) {
            return Err(Error::InvalidCone(
                "second-order cone sizes must be at least 1".into(),
            ));
        }
        if self.psd.contains(&0) {
            return Err(Error::InvalidCone(
                "semidefinite cone orders must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Blocks in canonical order. Empty zero/nonnegative parts are omitted.
    pub fn blocks(&self) -> Vec<PrimitiveCone> {
        let mut out = Vec::new();
        if self.zero > 0 {
            out.push(PrimitiveCone::Zero(self.zero));
        }
        if self.nonneg > 0 {
            out.push(PrimitiveCone::NonNeg(self.nonneg));
        }
        out.extend(self.soc.iter().map(|&d| PrimitiveCone::SecondOrder(d)));
        out.extend(self.psd.iter().map(|&n| PrimitiveCone::PsdTriangle(n)));
        out.extend(std::iter::repeat_n(
            PrimitiveCone::ExpPrimal,
            self.exp_primal,
        ));
        out.extend(std::iter::repeat_n(PrimitiveCone::ExpDual, self.exp_dual));
        out
    }

    /// Blocks of the dual cone `K*`, in the same coordinate layout.
    pub fn dual_blocks(&self) -> Vec<PrimitiveCone> {
        self.blocks().iter().map(PrimitiveCone::dual).collect()
    }
}

pub(crate) fn project_into(cone: PrimitiveCone, x: &[f64], out: &mut [f64]) -> Result<()> {
    match cone {
        PrimitiveCone::Zero(_) => out.fill(0.0),
        PrimitiveCone::Free(_) => out.copy_from_slice(x),
        PrimitiveCone::NonNeg(_) => {
            for (o, v) in out.iter_mut().zip(x) {
                *o = v.max(0.0);
            }
        }
        PrimitiveCone::SecondOrder(_) => soc::project(x, out),
        PrimitiveCone::PsdTriangle(n) => psd::project(n, x, out)?,
        PrimitiveCone::ExpPrimal => {
            let r = project_exp([x[0], x[1], x[2]])?;
            out.copy_from_slice(&r.point);
        }
        PrimitiveCone::ExpDual => {
            // Moreau: project onto K* is x + project onto K at -x
            let r = project_exp([-x[0], -x[1], -x[2]])?;
            for k in 0..3 {
                out[k] = x[k] + r.point[k];
            }
        }
    }
    Ok(())
}

/// Euclidean projection onto `cone`.
pub fn project(cone: PrimitiveCone, x: &[f64]) -> Result<Vec<f64>> {
    cone.validate()?;
    check_len("cone projection", cone.dim(), x.len())?;
    let mut out = vec![0.0; x.len()];
    project_into(cone, x, &mut out)?;
    Ok(out)
}

/// Euclidean projection onto the dual cone of `cone`.
pub fn project_dual(cone: PrimitiveCone, x: &[f64]) -> Result<Vec<f64>> {
    project(cone.dual(), x)
}

/// `D Pi(x)[dx]` for the projection onto `cone`.
pub fn d_project_apply(cone: PrimitiveCone, x: &[f64], dx: &[f64]) -> Result<Vec<f64>> {
    cone.validate()?;
    check_len("cone derivative point", cone.dim(), x.len())?;
    check_len("cone derivative direction", cone.dim(), dx.len())?;
    let jac = BlockJacobian::new(cone, x)?;
    let mut out = vec![0.0; x.len()];
    jac.apply(dx, &mut out);
    Ok(out)
}

/// `D Pi_{K*}(x)[dx]`.
pub fn d_project_dual_apply(cone: PrimitiveCone, x: &[f64], dx: &[f64]) -> Result<Vec<f64>> {
    d_project_apply(cone.dual(), x, dx)
}

pub(crate) fn project_blocks_into(
    blocks: &[PrimitiveCone],
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let mut off = 0;
    for &b in blocks {
        let d = b.dim();
        project_into(b, &x[off..off + d], &mut out[off..off + d])?;
        off += d;
    }
    Ok(())
}

/// Blockwise projection onto the product cone described by `spec`.
pub fn project_product(spec: &ConeSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    check_len("product cone projection", spec.total_dim(), x.len())?;
    let mut out = vec![0.0; x.len()];
    project_blocks_into(&spec.blocks(), x, &mut out)?;
    Ok(out)
}

/// Blockwise projection onto the dual of the product cone.
pub fn project_product_dual(spec: &ConeSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    check_len("product cone projection", spec.total_dim(), x.len())?;
    let mut out = vec![0.0; x.len()];
    project_blocks_into(&spec.dual_blocks(), x, &mut out)?;
    Ok(out)
}

/// Blockwise `D Pi(x)[dx]` for the product cone.
pub fn d_project_product_apply(spec: &ConeSpec, x: &[f64], dx: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    check_len("product cone derivative point", spec.total_dim(), x.len())?;
    check_len(
        "product cone derivative direction",
        spec.total_dim(),
        dx.len(),
    )?;
    let jac = ProjectionJacobian::new(&spec.blocks(), x)?;
    jac.forward(dx)
}

/// Derivative of a single block's projection at a fixed point, with any
/// expensive factorization done up front.
#[derive(Debug, Clone)]
enum BlockJacobian {
    Zero,
    Identity,
    Diagonal(Vec<f64>),
    Soc(soc::SocJacobian),
    Psd(psd::PsdJacobian),
    Dense3(Matrix3<f64>),
}

impl BlockJacobian {
    fn new(cone: PrimitiveCone, x: &[f64]) -> Result<Self> {
        Ok(match cone {
            PrimitiveCone::Zero(_) => Self::Zero,
            PrimitiveCone::Free(_) => Self::Identity,
            PrimitiveCone::NonNeg(_) => {
                Self::Diagonal(x.iter().map(|&v| 0.5 * (sign(v) + 1.0)).collect())
            }
            PrimitiveCone::SecondOrder(_) => Self::Soc(soc::SocJacobian::new(x)),
            PrimitiveCone::PsdTriangle(n) => Self::Psd(psd::PsdJacobian::new(n, x)?),
            PrimitiveCone::ExpPrimal => Self::Dense3(exp::jacobian([x[0], x[1], x[2]])?),
            PrimitiveCone::ExpDual => {
                let j = exp::jacobian([-x[0], -x[1], -x[2]])?;
                Self::Dense3(Matrix3::identity() - j)
            }
        })
    }

    fn apply(&self, dx: &[f64], out: &mut [f64]) {
        match self {
            Self::Zero => out.fill(0.0),
            Self::Identity => out.copy_from_slice(dx),
            Self::Diagonal(d) => {
                for ((o, di), v) in out.iter_mut().zip(d).zip(dx) {
                    *o = di * v;
                }
            }
            Self::Soc(j) => j.apply(dx, out),
            Self::Psd(j) => j.apply(dx, out),
            Self::Dense3(m) => {
                for i in 0..3 {
                    out[i] = m[(i, 0)] * dx[0] + m[(i, 1)] * dx[1] + m[(i, 2)] * dx[2];
                }
            }
        }
    }
}

/// `sign` with `sign(0) = 0`.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Derivative of a product-cone projection at a fixed point. The operator is
/// block diagonal and self-adjoint.
#[derive(Debug, Clone)]
pub struct ProjectionJacobian {
    blocks: Vec<(usize, usize, BlockJacobian)>,
    dim: usize,
}

impl ProjectionJacobian {
    pub fn new(blocks: &[PrimitiveCone], x: &[f64]) -> Result<Self> {
        let dim: usize = blocks.iter().map(PrimitiveCone::dim).sum();
        check_len("projection jacobian point", dim, x.len())?;
        let mut out = Vec::with_capacity(blocks.len());
        let mut off = 0;
        for &b in blocks {
            b.validate()?;
            let d = b.dim();
            out.push((off, d, BlockJacobian::new(b, &x[off..off + d])?));
            off += d;
        }
        Ok(Self { blocks: out, dim })
    }

    /// Dense matrix of the derivative; intended for tests and diagnostics.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut e = vec![0.0; self.dim];
        let mut col = vec![0.0; self.dim];
        for j in 0..self.dim {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            m.set_column(j, &nalgebra::DVector::from_column_slice(&col));
            e[j] = 0.0;
        }
        m
    }
}

impl LinearOperator for ProjectionJacobian {
    fn shape(&self) -> (usize, usize) {
        (self.dim, self.dim)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for (off, d, j) in &self.blocks {
            j.apply(&x[*off..off + d], &mut out[*off..off + d]);
        }
    }

    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_into(y, out)
    }
}
