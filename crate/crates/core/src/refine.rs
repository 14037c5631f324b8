//! Levenberg-Marquardt refinement of a point of the embedding.
//!
//! One step solves `min ||N(z) + DN(z) d||^2 + lambda ||d||^2` approximately
//! with a fixed number of LSQR iterations, then backtracks `t = 1, 1/2, ...`
//! until `||N(z + t d)|| < ||N(z)||`. Steps can be iterated; the point is
//! rescaled to `|w| = 1` before the first step and after each accepted one,
//! which leaves `N` unchanged.

use std::time::{Duration, Instant};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::lsqr::{lsqr_solve, LsqrOptions, StopReason};

/// Residual norms at or below this are treated as exact.
pub const SHORT_CIRCUIT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    pub lsqr_iters: usize,
    pub lambda: f64,
    pub max_backtracks: usize,
    pub refine_iters: usize,
    /// Print one line per step to stderr.
    pub verbose: bool,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            lsqr_iters: 30,
            lambda: 1e-8,
            max_backtracks: 10,
            refine_iters: 2,
            verbose: false,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.lsqr_iters == 0 || self.max_backtracks == 0 || self.refine_iters == 0 {
            return Err(Error::InvalidParameter(
                "lsqr_iters, max_backtracks and refine_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub residual_before: f64,
    pub residual_after: f64,
    /// Accepted step length, 0 on failure.
    pub step_size: f64,
    /// Number of rejected trial steps.
    pub backtracks: usize,
    pub lsqr_iters: usize,
    pub lsqr_stop: StopReason,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub steps: Vec<StepRecord>,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// `initial / final`; 1 when nothing changed, infinite if the final
    /// residual is exactly zero.
    pub refinement_factor: f64,
    /// Stopped because the residual was already below [`SHORT_CIRCUIT_TOL`].
    pub short_circuited: bool,
    pub wall_time: Duration,
}

fn residual_norm(emb: &Embedding, z: &[f64]) -> Result<f64> {
    Ok(norm2(&emb.normalized_residual(z)?))
}

/// One Levenberg-Marquardt step with backtracking. On failure the input is
/// returned unchanged with `failed = true`.
pub fn refine_step(
    emb: &Embedding,
    z: &[f64],
    cfg: &RefinementConfig,
) -> Result<(Vec<f64>, StepRecord)> {
    cfg.validate()?;
    let n0 = emb.normalized_residual(z)?;
    let before = norm2(&n0);
    let dn = emb.d_normalized_residual(z)?;
    let rhs: Vec<f64> = n0.iter().map(|v| -v).collect();
    let opts = LsqrOptions {
        max_iters: cfg.lsqr_iters,
        damping: cfg.lambda.sqrt(),
        ..Default::default()
    };
    let sol = lsqr_solve(&dn, &rhs, &opts)?;
    let delta = sol.solution;
    let last = z.len() - 1;

    let mut t = 1.0;
    let mut cand = vec![0.0; z.len()];
    for p in 0..=cfg.max_backtracks {
        for ((c, zi), di) in cand.iter_mut().zip(z).zip(&delta) {
            *c = zi + t * di;
        }
        // a trial whose residual cannot be evaluated counts as rejected
        if cand[last] != 0.0 {
            if let Ok(after) = residual_norm(emb, &cand) {
                if after < before {
                    let rec = StepRecord {
                        residual_before: before,
                        residual_after: after,
                        step_size: t,
                        backtracks: p,
                        lsqr_iters: sol.iterations_used,
                        lsqr_stop: sol.stop_reason,
                        failed: false,
                    };
                    return Ok((cand, rec));
                }
            }
        }
        t *= 0.5;
    }
    let rec = StepRecord {
        residual_before: before,
        residual_after: before,
        step_size: 0.0,
        backtracks: cfg.max_backtracks + 1,
        lsqr_iters: sol.iterations_used,
        lsqr_stop: sol.stop_reason,
        failed: true,
    };
    Ok((z.to_vec(), rec))
}

fn normalize(z: &mut [f64]) {
    let w = z[z.len() - 1].abs();
    z.iter_mut().for_each(|v| *v /= w);
}

/// Up to `cfg.refine_iters` refinement steps. Stops early on a failed step
/// (every later step would repeat it) or when `||N||` is below
/// [`SHORT_CIRCUIT_TOL`]. If no step is accepted, `z0` is returned as is.
pub fn refine(
    emb: &Embedding,
    z0: &[f64],
    cfg: &RefinementConfig,
) -> Result<(Vec<f64>, RefinementReport)> {
    let start = Instant::now();
    cfg.validate()?;
    let initial = residual_norm(emb, z0)?;
    let mut z = z0.to_vec();
    normalize(&mut z);
    let mut current = initial;
    let mut steps = Vec::new();
    let mut short_circuited = false;

    for k in 0..cfg.refine_iters {
        if current <= SHORT_CIRCUIT_TOL {
            short_circuited = true;
            break;
        }
        let (mut next, rec) = refine_step(emb, &z, cfg)?;
        if cfg.verbose {
            eprintln!(
                "step {k}: |N| {:.3e} -> {:.3e}, t = {}, backtracks {}, lsqr iters {}{}",
                rec.residual_before,
                rec.residual_after,
                rec.step_size,
                rec.backtracks,
                rec.lsqr_iters,
                if rec.failed { " (failed)" } else { "" }
            );
        }
        let failed = rec.failed;
        current = rec.residual_after;
        steps.push(rec);
        if failed {
            break;
        }
        normalize(&mut next);
        z = next;
    }

    if steps.iter().all(|s| s.failed) {
        z = z0.to_vec();
    }
    let factor = if current == initial {
        1.0
    } else if current == 0.0 {
        f64::INFINITY
    } else {
        initial / current
    };
    Ok((
        z,
        RefinementReport {
            steps,
            initial_residual: initial,
            final_residual: current,
            refinement_factor: factor,
            short_circuited,
            wall_time: start.elapsed(),
        },
    ))
}
