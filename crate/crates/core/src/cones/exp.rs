//! Exponential cone
//! `K = cl{(x, y, z) : y > 0, y exp(x / y) <= z}`
//! and its projection and projection derivative.
//!
//! Outside the three closed-form regions the projection lies on the smooth
//! part of the boundary, `(x*, y*, z*) = y* (rho, 1, exp(rho))`, and solves
//! the KKT system
//!
//! ```text
//! x* - x + mu exp(x*/y*)              = 0
//! y* - y + mu exp(x*/y*) (1 - x*/y*)  = 0
//! z* - z - mu                         = 0
//! y* exp(x*/y*) - z*                  = 0
//! ```
//!
//! Eliminating `y*` and `mu` leaves one scalar equation in `rho`, which is
//! bracketed and bisected; a damped Newton iteration on the four KKT
//! equations then polishes the result.

use std::f64::consts::E;

use nalgebra::{Matrix3, Matrix4, Vector4};

use crate::error::{Error, Result};

/// Which closed-form region (or the Newton region) a point falls in. When
/// several regions apply, the first listed wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExpCase {
    /// The point is in the cone; the projection is the identity.
    InCone,
    /// The point is in the polar cone `-K*`; the projection is zero.
    InPolar,
    /// `x <= 0, y <= 0`; the projection is `(x, 0, max(z, 0))`.
    ThirdQuadrant,
    /// Projection onto the smooth boundary via the KKT system.
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpProjectionResult {
    pub point: [f64; 3],
    /// KKT multiplier; zero outside the Newton case.
    pub multiplier: f64,
    pub case_id: ExpCase,
}

const NEWTON_TOL: f64 = 1e-12;
const ACCEPT_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 200;

pub fn in_exp_cone(v: [f64; 3]) -> bool {
    let [x, y, z] = v;
    (y > 0.0 && y * (x / y).exp() <= z) || (x <= 0.0 && y == 0.0 && z >= 0.0)
}

/// Membership in `-K*`, using the closed-form description of the dual cone
/// `K* = cl{(u, v, w) : u < 0, -u exp(v / u) <= e w}`.
pub fn in_exp_polar(v: [f64; 3]) -> bool {
    let [x, y, z] = v;
    (x > 0.0 && x * (y / x).exp() <= -E * z) || (x == 0.0 && y <= 0.0 && z <= 0.0)
}

pub fn exp_case(v: [f64; 3]) -> ExpCase {
    if in_exp_cone(v) {
        ExpCase::InCone
    } else if in_exp_polar(v) {
        ExpCase::InPolar
    } else if v[0] <= 0.0 && v[1] <= 0.0 {
        ExpCase::ThirdQuadrant
    } else {
        ExpCase::Newton
    }
}

/// Euclidean norm of the KKT residual at `(point, mu)` for input `v`.
pub fn exp_kkt_residual(v: [f64; 3], point: [f64; 3], mu: f64) -> f64 {
    let f = kkt(v, [point[0], point[1], point[2], mu]);
    f.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn kkt(v: [f64; 3], s: [f64; 4]) -> [f64; 4] {
    let [xs, ys, zs, mu] = s;
    let rho = xs / ys;
    let e = rho.exp();
    [
        xs - v[0] + mu * e,
        ys - v[1] + mu * e * (1.0 - rho),
        zs - v[2] - mu,
        ys * e - zs,
    ]
}

/// Jacobian of the KKT map with respect to `(x*, y*, z*, mu)`. It is also the
/// matrix whose inverse, restricted to its leading 3x3 block, is the
/// projection derivative.
fn kkt_matrix(s: [f64; 4]) -> Matrix4<f64> {
    let [xs, ys, _, mu] = s;
    let rho = xs / ys;
    let e = rho.exp();
    let off = -mu * xs * e / (ys * ys);
    Matrix4::new(
        1.0 + mu * e / ys,
        off,
        0.0,
        e,
        off,
        1.0 + mu * xs * xs * e / (ys * ys * ys),
        0.0,
        (1.0 - rho) * e,
        0.0,
        0.0,
        1.0,
        -1.0,
        e,
        (1.0 - rho) * e,
        -1.0,
        0.0,
    )
}

fn norm4(f: &[f64; 4]) -> f64 {
    f.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `a * exp(r)` for `a >= 0`, evaluated in log space so that a tiny `a` and
/// a huge `r` do not overflow.
fn mul_exp(a: f64, r: f64) -> f64 {
    if a > 0.0 {
        (a.ln() + r).exp()
    } else if a == 0.0 {
        0.0
    } else {
        a * r.exp()
    }
}

/// A point on the boundary ray parametrized by `rho = x*/y*`, holding `y*`
/// and the multiplier scaled by `exp(rho)`.
///
/// With `q = rho^2 - rho + 1 > 0`, eliminating the other KKT unknowns gives
/// `y* = ((rho - 1) x + y) / q` and `m = (x - rho y) / q`. The feasible
/// interval of `rho` ends where `y*` vanishes (lower end, only when `x > 0`)
/// or where `m` vanishes (upper end, only when `y > 0`); near those ends the
/// vanishing quantity is computed from the offset to avoid cancellation.
#[derive(Debug, Clone, Copy)]
struct RayPoint {
    rho: f64,
    ys: f64,
    m: f64,
}

#[derive(Debug, Clone, Copy)]
enum Param {
    Rho,
    /// `rho = lo + eps`
    FromLower(f64),
    /// `rho = hi - eps`
    FromUpper(f64),
}

impl RayPoint {
    fn new(v: [f64; 3], param: Param, t: f64) -> Self {
        let [x, y, _] = v;
        let rho = match param {
            Param::Rho => t,
            Param::FromLower(lo) => lo + t,
            Param::FromUpper(hi) => hi - t,
        };
        let q = rho * rho - rho + 1.0;
        let ys = match param {
            Param::FromLower(_) => x * t / q,
            _ => ((rho - 1.0) * x + y) / q,
        };
        let m = match param {
            Param::FromUpper(_) => y * t / q,
            _ => (x - rho * y) / q,
        };
        Self { rho, ys, m }
    }

    /// Residual of the remaining scalar KKT equation, increasing in `rho`.
    fn equation(&self, z: f64) -> f64 {
        mul_exp(self.ys, self.rho) - mul_exp(self.m, -self.rho) - z
    }
}

/// Interval of `rho` on which both `y*` and the multiplier are positive.
fn rho_interval(v: [f64; 3]) -> (f64, f64) {
    let [x, y, _] = v;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    // y* > 0  <=>  (rho - 1) x + y > 0
    if x > 0.0 {
        lo = lo.max(1.0 - y / x);
    } else if x < 0.0 {
        hi = hi.min(1.0 - y / x);
    }
    // multiplier > 0  <=>  x - rho y > 0
    if y > 0.0 {
        hi = hi.min(x / y);
    } else if y < 0.0 {
        lo = lo.max(x / y);
    }
    (lo, hi)
}

/// Bisection on `[lo, hi]` for the sign change of `f`, assuming
/// `f(lo) < 0 <= f(hi)`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, increasing: bool) -> (f64, f64) {
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.is_nan() {
            break;
        }
        if (fm < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

fn solve_ray(v: [f64; 3]) -> RayPoint {
    let z = v[2];
    let g = |r: f64| RayPoint::new(v, Param::Rho, r).equation(z);
    let (lo_b, hi_b) = rho_interval(v);
    let lo = if lo_b.is_finite() {
        lo_b
    } else {
        let anchor = if hi_b.is_finite() { hi_b } else { 0.0 };
        let mut step = 1.0;
        while g(anchor - step) >= 0.0 && step < 1e6 {
            step *= 2.0;
        }
        anchor - step
    };
    let hi = if hi_b.is_finite() {
        hi_b
    } else {
        let mut step = 1.0;
        // a NaN value also keeps the search going
        while g(lo + step).partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) && step < 1e6 {
            step *= 2.0;
        }
        lo + step
    };
    let (lo1, hi1) = bisect(lo, hi, g, true);
    let rho = 0.5 * (lo1 + hi1);

    // Refine in offset coordinates when the root hugs an end of the interval.
    let near = |end: f64| (rho - end).abs() <= 1e-2 * (1.0 + rho.abs());
    if lo_b.is_finite() && near(lo_b) {
        let param = Param::FromLower(lo_b);
        let f = |e: f64| RayPoint::new(v, param, e).equation(z);
        let (a, b) = bisect(0.0, (hi1 - lo_b).max(0.0), f, true);
        RayPoint::new(v, param, 0.5 * (a + b))
    } else if hi_b.is_finite() && near(hi_b) {
        let param = Param::FromUpper(hi_b);
        let f = |e: f64| RayPoint::new(v, param, e).equation(z);
        // decreasing in eps
        let (a, b) = bisect(0.0, (hi_b - lo1).max(0.0), f, false);
        RayPoint::new(v, param, 0.5 * (a + b))
    } else {
        RayPoint::new(v, Param::Rho, rho)
    }
}

fn project_boundary(v: [f64; 3]) -> Result<([f64; 3], f64)> {
    let scale = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1.0);
    let ray = solve_ray(v);
    let ys = ray.ys.max(0.0);
    let zs = mul_exp(ys, ray.rho);
    if ys < f64::MIN_POSITIVE * 1e16 || !ray.rho.is_finite() || ray.rho > 700.0 {
        // the boundary point is within rounding of the face
        // {x <= 0, y = 0, z >= 0}; project onto that face instead
        return Ok(([v[0].min(0.0), 0.0, v[2].max(0.0)], 0.0));
    }
    // mu enters the KKT system as mu * exp(rho): for rho > 0 take it from the
    // scaled multiplier, otherwise from z* - z, which cannot underflow
    let mu = if ray.rho > 0.0 {
        mul_exp(ray.m, -ray.rho)
    } else {
        zs - v[2]
    };
    let mut s = [ray.rho * ys, ys, zs, mu];

    let mut f = kkt(v, s);
    let mut r = norm4(&f);
    let mut iters = 0;
    while r > NEWTON_TOL * scale && iters < MAX_NEWTON {
        iters += 1;
        let rhs = -Vector4::from(f);
        let Some(step) = kkt_matrix(s).lu().solve(&rhs) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = [
                s[0] + t * step[0],
                s[1] + t * step[1],
                s[2] + t * step[2],
                s[3] + t * step[3],
            ];
            if cand[1] > 0.0 {
                let fc = kkt(v, cand);
                let rc = norm4(&fc);
                if rc < r {
                    s = cand;
                    f = fc;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r.is_finite() && r <= ACCEPT_TOL * scale {
        Ok(([s[0], s[1], s[2]], s[3]))
    } else {
        Err(Error::ExpProjection {
            iterate: s,
            residual: r,
        })
    }
}

/// Projection onto the exponential cone.
pub fn project_exp(v: [f64; 3]) -> Result<ExpProjectionResult> {
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("exponential cone projection"));
    }
    let case_id = exp_case(v);
    let (point, multiplier) = match case_id {
        ExpCase::InCone => (v, 0.0),
        ExpCase::InPolar => ([0.0; 3], 0.0),
        ExpCase::ThirdQuadrant => ([v[0], 0.0, v[2].max(0.0)], 0.0),
        ExpCase::Newton => project_boundary(v)?,
    };
    Ok(ExpProjectionResult {
        point,
        multiplier,
        case_id,
    })
}

/// Derivative of the projection at `v` as a dense 3x3 matrix.
pub(super) fn jacobian(v: [f64; 3]) -> Result<Matrix3<f64>> {
    let r = project_exp(v)?;
    Ok(match r.case_id {
        ExpCase::InCone => Matrix3::identity(),
        ExpCase::InPolar => Matrix3::zeros(),
        ExpCase::ThirdQuadrant => Matrix3::from_diagonal(&nalgebra::Vector3::new(
            1.0,
            0.0,
            0.5 * (1.0 + super::sign(v[2])),
        )),
        ExpCase::Newton if r.point[1] == 0.0 => ray_limit(v),
        ExpCase::Newton => {
            let [xs, ys, zs] = r.point;
            let d = kkt_matrix([xs, ys, zs, r.multiplier]);
            let lu = d.lu();
            let mut j = Matrix3::zeros();
            for k in 0..3 {
                let mut e = Vector4::zeros();
                e[k] = 1.0;
                let col = lu
                    .solve(&e)
                    .ok_or(Error::Singular("exponential cone derivative"))?;
                for i in 0..3 {
                    j[(i, k)] = col[i];
                }
            }
            if j.iter().all(|x| x.is_finite()) {
                j
            } else {
                // the point is so close to the ray that the system overflows
                ray_limit(v)
            }
        }
    })
}

/// Derivative in the limit where the projection approaches the face
/// `{x <= 0, y = 0, z >= 0}`: locally the projection is
/// `(min(x, 0), 0, max(z, 0))`.
fn ray_limit(v: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(
        0.5 * (1.0 - super::sign(v[0])),
        0.0,
        0.5 * (1.0 + super::sign(v[2])),
    ))
}
