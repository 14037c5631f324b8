//! Damped LSQR (Paige and Saunders) for
//! `min ||rhs - A x||^2 + damping^2 ||x||^2` over an abstract operator.
//!
//! The iteration follows the original algorithm: Golub-Kahan
//! bidiagonalization, a plane rotation eliminating the damping term, and a
//! second rotation for the bidiagonal least-squares problem. No restarts or
//! preconditioning.
//!
//! Optionally the Lanczos vectors are kept and each new one is
//! reorthogonalized against the previous ones. Without this, loss of
//! orthogonality makes a truncated iterate depend chaotically on rounding
//! in the input.

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm2, scale, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqrOptions {
    pub max_iters: usize,
    /// `sqrt(lambda)` in the regularized objective.
    pub damping: f64,
    pub atol: f64,
    pub btol: f64,
    /// Stop once the condition estimate of the operator exceeds this.
    pub conlim: f64,
    /// Full reorthogonalization of both Lanczos bases.
    pub reorthogonalize: bool,
}

impl Default for LsqrOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            damping: 0.0,
            atol: 1e-12,
            btol: 1e-12,
            conlim: 1e8,
            reorthogonalize: true,
        }
    }
}

impl LsqrOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "LSQR needs at least one iteration".into(),
            ));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "LSQR damping must be finite and nonnegative, got {}",
                self.damping
            )));
        }
        if !(self.atol >= 0.0 && self.btol >= 0.0 && self.conlim > 0.0) {
            return Err(Error::InvalidParameter(
                "LSQR tolerances must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `rhs = 0` or `A^T rhs = 0`; the solution is zero.
    ZeroSolution,
    /// The residual is small relative to `atol`/`btol`.
    Compatible,
    /// The normal-equations residual is small relative to `atol`.
    LeastSquares,
    /// The condition estimate exceeded `conlim`.
    ConditionLimit,
    /// One of the tests hit machine precision.
    MachinePrecision,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqrResult {
    pub solution: Vec<f64>,
    pub iterations_used: usize,
    /// Estimates of `sqrt(||rhs - Ax||^2 + damping^2 ||x||^2)`, starting with
    /// `||rhs||` before the first iteration.
    pub residual_history: Vec<f64>,
    pub stop_reason: StopReason,
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Two passes of modified Gram-Schmidt against an orthonormal basis.
fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(x, b);
            axpy(-c, b, x);
        }
    }
}

pub fn lsqr_solve<Op: LinearOperator + ?Sized>(
    op: &Op,
    rhs: &[f64],
    opts: &LsqrOptions,
) -> Result<LsqrResult> {
    opts.validate()?;
    let (m, n) = op.shape();
    check_len("LSQR right-hand side", m, rhs.len())?;
    if !finite(rhs) {
        return Err(Error::NonFinite("LSQR right-hand side"));
    }

    let damp = opts.damping;
    let dampsq = damp * damp;
    let ctol = if opts.conlim > 0.0 {
        1.0 / opts.conlim
    } else {
        0.0
    };
    let eps = f64::EPSILON;

    let mut x = vec![0.0; n];
    let mut u = rhs.to_vec();
    let bnorm = norm2(&u);
    let mut beta = bnorm;
    let mut v = vec![0.0; n];
    let mut alpha = 0.0;
    if beta > 0.0 {
        scale(1.0 / beta, &mut u);
        op.apply_adjoint_into(&u, &mut v);
        alpha = norm2(&v);
    }
    if alpha > 0.0 {
        scale(1.0 / alpha, &mut v);
    }
    let mut history = vec![beta];
    if alpha * beta == 0.0 {
        return Ok(LsqrResult {
            solution: x,
            iterations_used: 0,
            residual_history: history,
            stop_reason: StopReason::ZeroSolution,
        });
    }
    if !alpha.is_finite() {
        return Err(Error::NonFinite("LSQR operator adjoint"));
    }

    let keep = opts.reorthogonalize;
    let mut ubasis = if keep { vec![u.clone()] } else { Vec::new() };
    let mut vbasis = if keep { vec![v.clone()] } else { Vec::new() };

    let mut w = v.clone();
    let mut rhobar = alpha;
    let mut phibar = beta;
    let mut anorm: f64 = 0.0;
    let mut ddnorm = 0.0;
    let mut res2 = 0.0;
    let mut xxnorm = 0.0;
    let mut z = 0.0;
    let mut cs2 = -1.0;
    let mut sn2 = 0.0;
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];

    let mut itn = 0;
    let stop = loop {
        itn += 1;

        // bidiagonalization: beta u = A v - alpha u, alpha v = A^T u - beta v
        op.apply_into(&v, &mut tmp_m);
        for (ui, ti) in u.iter_mut().zip(&tmp_m) {
            *ui = ti - alpha * *ui;
        }
        if keep {
            orthogonalize(&mut u, &ubasis);
        }
        beta = norm2(&u);
        if beta > 0.0 {
            scale(1.0 / beta, &mut u);
            if keep {
                ubasis.push(u.clone());
            }
            anorm = (anorm * anorm + alpha * alpha + beta * beta + dampsq).sqrt();
            op.apply_adjoint_into(&u, &mut tmp_n);
            for (vi, ti) in v.iter_mut().zip(&tmp_n) {
                *vi = ti - beta * *vi;
            }
            if keep {
                orthogonalize(&mut v, &vbasis);
            }
            alpha = norm2(&v);
            if alpha > 0.0 {
                scale(1.0 / alpha, &mut v);
                if keep {
                    vbasis.push(v.clone());
                }
            }
        }
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::NonFinite("LSQR bidiagonalization"));
        }

        // rotation eliminating the damping term
        let (rhobar1, psi) = if damp > 0.0 {
            let rhobar1 = rhobar.hypot(damp);
            let cs1 = rhobar / rhobar1;
            let sn1 = damp / rhobar1;
            let psi = sn1 * phibar;
            phibar *= cs1;
            (rhobar1, psi)
        } else {
            (rhobar, 0.0)
        };

        // rotation for the lower bidiagonal system
        let rho = rhobar1.hypot(beta);
        let cs = rhobar1 / rho;
        let sn = beta / rho;
        let theta = sn * alpha;
        rhobar = -cs * alpha;
        let phi = cs * phibar;
        phibar *= sn;
        let tau = sn * phi;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        ddnorm += norm2(&w).powi(2) / (rho * rho);
        axpy(t1, &w, &mut x);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi + t2 * *wi;
        }

        // estimate of ||x|| via the second rotation
        let delta = sn2 * rho;
        let gambar = -cs2 * rho;
        let rhs_z = phi - delta * z;
        let zbar = rhs_z / gambar;
        let xnorm = (xxnorm + zbar * zbar).sqrt();
        let gamma = gambar.hypot(theta);
        cs2 = gambar / gamma;
        sn2 = theta / gamma;
        z = rhs_z / gamma;
        xxnorm += z * z;

        let acond = anorm * ddnorm.sqrt();
        res2 += psi * psi;
        let rnorm = (phibar * phibar + res2).sqrt();
        let arnorm = alpha * tau.abs();
        history.push(rnorm);

        if !finite(&x) {
            return Err(Error::NonFinite("LSQR iterate"));
        }

        let test1 = rnorm / bnorm;
        let test2 = arnorm / (anorm * rnorm + eps);
        let test3 = 1.0 / (acond + eps);
        let t1 = test1 / (1.0 + anorm * xnorm / bnorm);
        let rtol = opts.btol + opts.atol * anorm * xnorm / bnorm;

        if 1.0 + test3 <= 1.0 || 1.0 + test2 <= 1.0 || 1.0 + t1 <= 1.0 {
            break StopReason::MachinePrecision;
        }
        if test3 <= ctol {
            break StopReason::ConditionLimit;
        }
        if test2 <= opts.atol {
            break StopReason::LeastSquares;
        }
        if test1 <= rtol {
            break StopReason::Compatible;
        }
        if itn >= opts.max_iters {
            break StopReason::IterationLimit;
        }
    };

    Ok(LsqrResult {
        solution: x,
        iterations_used: itn,
        residual_history: history,
        stop_reason: stop,
    })
}
