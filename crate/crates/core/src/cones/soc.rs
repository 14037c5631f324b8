//! Second-order (Lorentz) cone.

use crate::linalg::{dot, norm2};

pub(super) fn project(v: &[f64], out: &mut [f64]) {
    let t = v[0];
    let x = &v[1..];
    let nx = norm2(x);
    if nx <= t {
        out.copy_from_slice(v);
    } else if nx <= -t {
        out.fill(0.0);
    } else {
        let a = 0.5 * (t + nx);
        out[0] = a;
        for (o, xi) in out[1..].iter_mut().zip(x) {
            *o = a * xi / nx;
        }
    }
}

#[derive(Debug, Clone)]
pub(super) enum SocJacobian {
    Identity,
    Zero,
    /// Derivative on the region `|t| < ||x||`; also used on the boundary
    /// `||x|| = |t|` when `x != 0`.
    Boundary {
        t: f64,
        norm: f64,
        unit: Vec<f64>,
    },
    /// `t = 0, x = 0`: no direction is defined, use half the identity.
    Origin,
}

impl SocJacobian {
    pub(super) fn new(v: &[f64]) -> Self {
        let t = v[0];
        let x = &v[1..];
        let nx = norm2(x);
        if nx < t {
            Self::Identity
        } else if nx < -t {
            Self::Zero
        } else if nx == 0.0 {
            Self::Origin
        } else {
            Self::Boundary {
                t,
                norm: nx,
                unit: x.iter().map(|xi| xi / nx).collect(),
            }
        }
    }

    pub(super) fn apply(&self, d: &[f64], out: &mut [f64]) {
        match self {
            Self::Identity => out.copy_from_slice(d),
            Self::Zero => out.fill(0.0),
            Self::Origin => {
                for (o, v) in out.iter_mut().zip(d) {
                    *o = 0.5 * v;
                }
            }
            Self::Boundary { t, norm, unit } => {
                let dt = d[0];
                let dx = &d[1..];
                let proj = dot(unit, dx);
                out[0] = 0.5 * (dt + proj);
                let diag = (t + norm) / (2.0 * norm);
                let rank1 = 0.5 * dt - t / (2.0 * norm) * proj;
                for ((o, ui), dxi) in out[1..].iter_mut().zip(unit).zip(dx) {
                    *o = diag * dxi + rank1 * ui;
                }
            }
        }
    }
}
