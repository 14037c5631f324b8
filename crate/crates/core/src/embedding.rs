//! Homogeneous self-dual embedding of a conic program.
//!
//! For a program with `A in R^{m x n}` the embedding lives in `R^{n+m+1}`:
//!
//! ```text
//!     [  0   A^T   c ]
//! Q = [ -A    0    b ]          cone  = R^n x K* x R_+
//!     [ -c^T -b^T  0 ]
//! ```
//!
//! A point `z` is scored by the residual `R(z) = (Q - I) Pi(z) + z` and the
//! normalized residual `N(z) = R(z) / |w|`, where `w` is the last coordinate
//! of `z`. `N(z) = 0` exactly when `z` encodes a solution or a certificate.

use crate::cones::{sign, PrimitiveCone, ProjectionJacobian};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, LinearOperator};
use crate::problems::{kkt_residuals, ConeProgram, ProblemKind, ResidualSummary};

/// Default tolerance on normalized residuals used by [`Embedding::recover`].
pub const DEFAULT_RECOVERY_TOL: f64 = 1e-8;

/// Embedding of a [`ConeProgram`]. Immutable and cheap to construct.
#[derive(Debug, Clone)]
pub struct Embedding<'a> {
    program: &'a ConeProgram,
    blocks: Vec<PrimitiveCone>,
}

/// Named view of a point of the embedding.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddedPoint<'z> {
    z: &'z [f64],
    n: usize,
}

impl<'z> EmbeddedPoint<'z> {
    /// First `n` coordinates.
    pub fn u1(&self) -> &'z [f64] {
        &self.z[..self.n]
    }

    /// Middle `m` coordinates.
    pub fn u2(&self) -> &'z [f64] {
        &self.z[self.n..self.z.len() - 1]
    }

    /// Homogenizing coordinate.
    pub fn w(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    pub fn as_slice(&self) -> &'z [f64] {
        self.z
    }
}

/// What a point of the embedding says about the program.
#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Optimal {
        x: Vec<f64>,
        y: Vec<f64>,
        s: Vec<f64>,
    },
    /// `A^T y = 0`, `b^T y = -1`, `y in K*`.
    PrimalInfeasible {
        y: Vec<f64>,
    },
    /// `Ax + s = 0`, `c^T x = -1`, `s in K`.
    DualInfeasible {
        x: Vec<f64>,
        s: Vec<f64>,
    },
    Indeterminate,
}

impl Classification {
    /// Generator kind that produces this classification.
    pub fn kind(&self) -> Option<ProblemKind> {
        match self {
            Self::Optimal { .. } => Some(ProblemKind::Feasible),
            Self::PrimalInfeasible { .. } => Some(ProblemKind::Infeasible),
            Self::DualInfeasible { .. } => Some(ProblemKind::Unbounded),
            Self::Indeterminate => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Optimal { .. } => "optimal",
            Self::PrimalInfeasible { .. } => "primal_infeasible",
            Self::DualInfeasible { .. } => "dual_infeasible",
            Self::Indeterminate => "indeterminate",
        }
    }
}

/// Result of [`Embedding::recover`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub classification: Classification,
    /// Measured residuals of the conditions the classification claims;
    /// `None` for [`Classification::Indeterminate`].
    pub residuals: Option<ResidualSummary>,
    /// Every normalized residual is within the tolerance.
    pub certified: bool,
    /// Both `b^T u2 < 0` and `c^T u1 < 0`, and both resulting certificates
    /// are valid: the program is degenerate. The primal infeasibility
    /// certificate is reported.
    pub degenerate: bool,
    pub tau: f64,
    pub kappa: f64,
}

impl<'a> Embedding<'a> {
    pub fn new(program: &'a ConeProgram) -> Result<Self> {
        program.validate()?;
        let mut blocks = Vec::new();
        if program.n() > 0 {
            blocks.push(PrimitiveCone::Free(program.n()));
        }
        blocks.extend(program.cones.dual_blocks());
        blocks.push(PrimitiveCone::NonNeg(1));
        Ok(Self { program, blocks })
    }

    pub fn program(&self) -> &'a ConeProgram {
        self.program
    }

    /// `m + n + 1`.
    pub fn total_dim(&self) -> usize {
        self.program.m() + self.program.n() + 1
    }

    /// Blocks of the embedded cone `R^n x K* x R_+`.
    pub fn cone_blocks(&self) -> &[PrimitiveCone] {
        &self.blocks
    }

    fn check(&self, context: &'static str, z: &[f64]) -> Result<()> {
        check_len(context, self.total_dim(), z.len())
    }

    pub fn point<'z>(&self, z: &'z [f64]) -> Result<EmbeddedPoint<'z>> {
        self.check("embedded point", z)?;
        Ok(EmbeddedPoint {
            z,
            n: self.program.n(),
        })
    }

    /// `Qu`, assembled from products with `A` and `A^T`.
    pub fn apply_q(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check("Q input", u)?;
        let mut out = vec![0.0; u.len()];
        self.q_into(u, &mut out);
        Ok(out)
    }

    /// `Q^T u = -Qu`.
    pub fn apply_q_adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply_q(u)?;
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(out)
    }

    /// `Q` as a [`LinearOperator`].
    pub fn q_operator(&self) -> QOperator<'_, 'a> {
        QOperator { emb: self }
    }

    fn q_into(&self, u: &[f64], out: &mut [f64]) {
        let p = self.program;
        let (n, m) = (p.n(), p.m());
        let (u1, rest) = u.split_at(n);
        let (u2, w) = (&rest[..m], rest[m]);
        let (o1, orest) = out.split_at_mut(n);
        let (o2, olast) = orest.split_at_mut(m);
        for (o, c) in o1.iter_mut().zip(&p.c) {
            *o = c * w;
        }
        p.a.gemv_t_acc(1.0, u2, o1);
        for (o, b) in o2.iter_mut().zip(&p.b) {
            *o = b * w;
        }
        p.a.gemv_acc(-1.0, u1, o2);
        olast[0] = -dot(&p.c, u1) - dot(&p.b, u2);
    }

    /// Projection onto `R^n x K* x R_+`.
    pub fn project_embedded(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check("embedded projection", z)?;
        let mut out = vec![0.0; z.len()];
        crate::cones::project_blocks_into(&self.blocks, z, &mut out)?;
        Ok(out)
    }

    /// `R(z) = (Q - I) Pi(z) + z`.
    pub fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let pz = self.project_embedded(z)?;
        let mut r = vec![0.0; z.len()];
        self.q_into(&pz, &mut r);
        for ((ri, pi), zi) in r.iter_mut().zip(&pz).zip(z) {
            *ri += zi - pi;
        }
        Ok(r)
    }

    /// `N(z) = R(z) / |w|`. Errors when `w = 0`.
    pub fn normalized_residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let w = self.point(z)?.w();
        if w == 0.0 {
            return Err(Error::ZeroHomogenizer);
        }
        let mut r = self.residual(z)?;
        let inv = 1.0 / w.abs();
        r.iter_mut().for_each(|v| *v *= inv);
        Ok(r)
    }

    /// `DR(z)[v] = (Q - I) DPi(z)[v] + v`.
    pub fn d_residual(&self, z: &[f64]) -> Result<ResidualJacobian<'_, 'a>> {
        self.check("residual derivative point", z)?;
        Ok(ResidualJacobian {
            emb: self,
            dpi: ProjectionJacobian::new(&self.blocks, z)?,
        })
    }

    /// Derivative of `N` at `z`:
    ///
    /// `DN(z)[v] = DR(z)[v] / |w| - sign(w) v_w R(z) / w^2`,
    ///
    /// with adjoint `DN(z)^T u = DR(z)^T u / |w| - sign(w) <R(z), u> / w^2 e`,
    /// where `e` is the last unit vector.
    pub fn d_normalized_residual(&self, z: &[f64]) -> Result<NormalizedResidualJacobian<'_, 'a>> {
        let w = self.point(z)?.w();
        if w == 0.0 {
            return Err(Error::ZeroHomogenizer);
        }
        Ok(NormalizedResidualJacobian {
            dr: self.d_residual(z)?,
            r: self.residual(z)?,
            w,
        })
    }

    /// Minty parametrization `z -> (Pi(z), Pi(z) - z)`.
    pub fn minty(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let u = self.project_embedded(z)?;
        let v = u.iter().zip(z).map(|(a, b)| a - b).collect();
        Ok((u, v))
    }

    /// Inverse of [`minty`](Self::minty): `u - v`.
    pub fn minty_inverse(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check("minty u", u)?;
        self.check("minty v", v)?;
        Ok(u.iter().zip(v).map(|(a, b)| a - b).collect())
    }

    /// Reads off a solution or certificate from `z` and measures how well it
    /// satisfies its conditions.
    ///
    /// With `(u, v) = M(z)`, `tau = u_last`, `kappa = v_last`:
    /// `tau > kappa, tau > 0` gives `(u1, u2, v2) / tau`; otherwise, if
    /// `kappa > 0`, `b^T u2 < 0` gives `y = -u2 / b^T u2` and `c^T u1 < 0`
    /// gives `x = -u1 / c^T u1`, `s = -v2 / c^T u1`. The signs make
    /// `b^T y = -1` and `c^T x = -1`. When both tests pass, the certificate
    /// with the smaller normalized residual is reported.
    pub fn recover(&self, z: &[f64], tol: f64) -> Result<Recovery> {
        let p = self.program;
        let n = p.n();
        let (u, v) = self.minty(z)?;
        let last = u.len() - 1;
        let (tau, kappa) = (u[last], v[last]);
        let u1 = &u[..n];
        let u2 = &u[n..last];
        let v2 = &v[n..last];
        let bu = dot(&p.b, u2);
        let cu = dot(&p.c, u1);
        let scaled = |x: &[f64], f: f64| x.iter().map(|v| v * f).collect::<Vec<_>>();

        let primal_cert = || Classification::PrimalInfeasible {
            y: scaled(u2, -1.0 / bu),
        };
        let dual_cert = || Classification::DualInfeasible {
            x: scaled(u1, -1.0 / cu),
            s: scaled(v2, -1.0 / cu),
        };
        let measure = |c: Classification| -> Result<(Classification, Option<ResidualSummary>)> {
            let r = kkt_residuals(p, &c)?;
            Ok((c, Some(r)))
        };

        let mut degenerate = false;
        let (classification, residuals) = if tau > kappa && tau > 0.0 {
            measure(Classification::Optimal {
                x: scaled(u1, 1.0 / tau),
                y: scaled(u2, 1.0 / tau),
                s: scaled(v2, 1.0 / tau),
            })?
        } else if kappa > 0.0 && bu < 0.0 && cu < 0.0 {
            // Both tests pass. Rounding alone can make one of them slightly
            // negative, so keep the candidate that satisfies its conditions
            // better; only a pair of valid certificates is degenerate.
            let (pc, pr) = measure(primal_cert())?;
            let (dc, dr) = measure(dual_cert())?;
            let (pr, dr) = (pr.expect("measured"), dr.expect("measured"));
            degenerate = pr.passes(tol) && dr.passes(tol);
            if degenerate || pr.max_normalized() <= dr.max_normalized() {
                (pc, Some(pr))
            } else {
                (dc, Some(dr))
            }
        } else if kappa > 0.0 && bu < 0.0 {
            measure(primal_cert())?
        } else if kappa > 0.0 && cu < 0.0 {
            measure(dual_cert())?
        } else {
            (Classification::Indeterminate, None)
        };

        let certified = residuals.as_ref().is_some_and(|r| r.passes(tol));
        Ok(Recovery {
            classification,
            residuals,
            certified,
            degenerate,
            tau,
            kappa,
        })
    }

    /// Embeds a solution or certificate as `z = u - v`:
    /// optimal `(x, y - s, 1)`, primal infeasible `(0, y, -1)`,
    /// dual infeasible `(x, -s, -1)`.
    pub fn embed_solution(&self, cls: &Classification) -> Result<Vec<f64>> {
        embed_solution(self.program, cls)
    }
}

/// See [`Embedding::embed_solution`].
pub fn embed_solution(program: &ConeProgram, cls: &Classification) -> Result<Vec<f64>> {
    let (m, n) = (program.m(), program.n());
    let mut z = Vec::with_capacity(m + n + 1);
    match cls {
        Classification::Optimal { x, y, s } => {
            check_len("x", n, x.len())?;
            check_len("y", m, y.len())?;
            check_len("s", m, s.len())?;
            z.extend_from_slice(x);
            z.extend(y.iter().zip(s).map(|(a, b)| a - b));
            z.push(1.0);
        }
        Classification::PrimalInfeasible { y } => {
            check_len("y", m, y.len())?;
            z.resize(n, 0.0);
            z.extend_from_slice(y);
            z.push(-1.0);
        }
        Classification::DualInfeasible { x, s } => {
            check_len("x", n, x.len())?;
            check_len("s", m, s.len())?;
            z.extend_from_slice(x);
            z.extend(s.iter().map(|v| -v));
            z.push(-1.0);
        }
        Classification::Indeterminate => return Err(Error::Indeterminate),
    }
    Ok(z)
}

/// `Q` as a matrix-free operator. `Q^T = -Q`.
#[derive(Debug, Clone, Copy)]
pub struct QOperator<'e, 'a> {
    emb: &'e Embedding<'a>,
}

impl LinearOperator for QOperator<'_, '_> {
    fn shape(&self) -> (usize, usize) {
        let d = self.emb.total_dim();
        (d, d)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.emb.total_dim());
        assert_eq!(out.len(), self.emb.total_dim());
        self.emb.q_into(x, out);
    }

    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_into(y, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
}

/// `DR(z)` at a fixed point.
#[derive(Debug, Clone)]
pub struct ResidualJacobian<'e, 'a> {
    emb: &'e Embedding<'a>,
    dpi: ProjectionJacobian,
}

impl LinearOperator for ResidualJacobian<'_, '_> {
    fn shape(&self) -> (usize, usize) {
        let d = self.emb.total_dim();
        (d, d)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut dp = vec![0.0; x.len()];
        self.dpi.apply_into(x, &mut dp);
        self.emb.q_into(&dp, out);
        for ((o, d), xi) in out.iter_mut().zip(&dp).zip(x) {
            *o += xi - d;
        }
    }

    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        // DPi((-Q - I) y) + y
        let mut t = vec![0.0; y.len()];
        self.emb.q_into(y, &mut t);
        for (ti, yi) in t.iter_mut().zip(y) {
            *ti = -*ti - yi;
        }
        self.dpi.apply_into(&t, out);
        for (o, yi) in out.iter_mut().zip(y) {
            *o += yi;
        }
    }
}

/// `DN(z)` at a fixed point.
#[derive(Debug, Clone)]
pub struct NormalizedResidualJacobian<'e, 'a> {
    dr: ResidualJacobian<'e, 'a>,
    r: Vec<f64>,
    w: f64,
}

impl NormalizedResidualJacobian<'_, '_> {
    /// `R(z)` at the linearization point.
    pub fn residual(&self) -> &[f64] {
        &self.r
    }
}

impl LinearOperator for NormalizedResidualJacobian<'_, '_> {
    fn shape(&self) -> (usize, usize) {
        self.dr.shape()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.dr.apply_into(x, out);
        let inv = 1.0 / self.w.abs();
        let coef = sign(self.w) * x[x.len() - 1] / (self.w * self.w);
        for (o, ri) in out.iter_mut().zip(&self.r) {
            *o = *o * inv - coef * ri;
        }
    }

    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.dr.apply_adjoint_into(y, out);
        let inv = 1.0 / self.w.abs();
        out.iter_mut().for_each(|o| *o *= inv);
        let last = out.len() - 1;
        out[last] -= sign(self.w) * dot(&self.r, y) / (self.w * self.w);
    }
}
