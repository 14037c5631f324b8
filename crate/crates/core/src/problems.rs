//! Conic program data, random instance generation with known solutions or
//! certificates, and KKT / certificate residual evaluation.
//!
//! # Generator
//!
//! Instances are drawn from a [`ChaCha8Rng`] seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. The draw order is fixed:
//!
//! 1. cone sizes: zero, nonnegative, number of second-order cones then each
//!    size, number of semidefinite cones then each order, number of primal
//!    exponential cones, number of dual exponential cones;
//! 2. `n` uniform in `1..=m`;
//! 3. density uniform in `[0.1, 0.3]`;
//! 4. for each entry of `A` in column-major order, a uniform `[0, 1)` draw
//!    decides whether it is nonzero, followed by its value in `[-1, 1]` if so;
//! 5. `x` (length `n`) then `r` (length `m`), entries uniform in `[-1, 1]`;
//! 6. the kind (feasible / infeasible / unbounded with probabilities
//!    0.8 / 0.1 / 0.1);
//! 7. `c` for infeasible instances or `b` for unbounded ones.
//!
//! `A` is scaled to unit Frobenius norm before `b` and `c` are formed, and
//! `s = Pi_K(r)`, `y = s - r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cones::{project_product, project_product_dual, ConeSpec};
use crate::embedding::Classification;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm2, norm_inf, spmv, spmv_t, SparseMatrix};

/// `min c^T x  s.t.  Ax + s = b, s in K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConeProgram {
    pub fn new(a: SparseMatrix, b: Vec<f64>, c: Vec<f64>, cones: ConeSpec) -> Result<Self> {
        let p = Self { a, b, c, cones };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.cones.validate()?;
        check_len("b (rows of A)", self.a.rows(), self.b.len())?;
        check_len("c (columns of A)", self.a.cols(), self.c.len())?;
        check_len(
            "cone dimension (rows of A)",
            self.a.rows(),
            self.cones.total_dim(),
        )?;
        if self.b.iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("problem vectors b, c"));
        }
        Ok(())
    }

    /// Number of constraints.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.a.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Feasible,
    Infeasible,
    Unbounded,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Feasible => "feasible",
            Self::Infeasible => "infeasible",
            Self::Unbounded => "unbounded",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "feasible" => Ok(Self::Feasible),
            "infeasible" => Ok(Self::Infeasible),
            "unbounded" => Ok(Self::Unbounded),
            other => Err(format!(
                "unknown problem kind '{other}' (expected feasible, infeasible or unbounded)"
            )),
        }
    }
}

/// Inclusive ranges for the random cone sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeProfile {
    pub zero: (usize, usize),
    pub nonneg: (usize, usize),
    pub soc_count: (usize, usize),
    pub soc_size: (usize, usize),
    pub psd_count: (usize, usize),
    pub psd_order: (usize, usize),
    pub exp_primal: (usize, usize),
    pub exp_dual: (usize, usize),
}

impl SizeProfile {
    /// Full-size instances: `m` is typically in the low thousands.
    pub fn paper() -> Self {
        Self {
            zero: (10, 50),
            nonneg: (20, 100),
            soc_count: (2, 100),
            soc_size: (5, 20),
            psd_count: (5, 20),
            psd_order: (2, 10),
            exp_primal: (2, 10),
            exp_dual: (2, 10),
        }
    }

    /// Small instances (`m` between 14 and 45) containing every cone type.
    pub fn tiny() -> Self {
        Self {
            zero: (1, 3),
            nonneg: (2, 6),
            soc_count: (1, 2),
            soc_size: (2, 5),
            psd_count: (1, 2),
            psd_order: (2, 3),
            exp_primal: (1, 2),
            exp_dual: (1, 2),
        }
    }
}

impl std::str::FromStr for SizeProfile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" => Ok(Self::paper()),
            "tiny" => Ok(Self::tiny()),
            other => Err(format!(
                "unknown size profile '{other}' (expected tiny or paper)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub program: ConeProgram,
    pub kind: ProblemKind,
    /// The exact solution or certificate used to build the instance.
    pub witness: Classification,
    pub seed: u64,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

fn uniform_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn random_cones(rng: &mut ChaCha8Rng, p: &SizeProfile) -> ConeSpec {
    let zero = draw(rng, p.zero);
    let nonneg = draw(rng, p.nonneg);
    let nsoc = draw(rng, p.soc_count);
    let soc = (0..nsoc).map(|_| draw(rng, p.soc_size)).collect();
    let npsd = draw(rng, p.psd_count);
    let psd = (0..npsd).map(|_| draw(rng, p.psd_order)).collect();
    let exp_primal = draw(rng, p.exp_primal);
    let exp_dual = draw(rng, p.exp_dual);
    ConeSpec {
        zero,
        nonneg,
        soc,
        psd,
        exp_primal,
        exp_dual,
    }
}

fn random_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut colptr = vec![0];
    let mut rowidx = Vec::new();
    let mut vals = Vec::new();
    for _ in 0..n {
        for i in 0..m {
            if rng.random::<f64>() < density {
                rowidx.push(i);
                vals.push(rng.random_range(-1.0..=1.0));
            }
        }
        colptr.push(vals.len());
    }
    let mut a = SparseMatrix::new(m, n, colptr, rowidx, vals).expect("valid by construction");
    while a.nnz() == 0 || a.frobenius_norm() == 0.0 {
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..n);
        a.add_to_entry(i, j, rng.random_range(-1.0..=1.0));
    }
    a
}

/// Draws a random instance. Deterministic in `seed`. If `kind` is given it
/// overrides the randomly drawn kind (the draw still happens, so the rest of
/// the random stream is unchanged).
pub fn generate(seed: u64, profile: &SizeProfile, kind: Option<ProblemKind>) -> GeneratedInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cones = random_cones(&mut rng, profile);
    let m = cones.total_dim();
    let n = rng.random_range(1..=m);
    let density = rng.random_range(0.1..=0.3);
    let mut a = random_sparse(&mut rng, m, n, density);
    let fro = a.frobenius_norm();
    for v in a.vals_mut() {
        *v /= fro;
    }
    let x = uniform_vec(&mut rng, n);
    let r = uniform_vec(&mut rng, m);
    let s = project_product(&cones, &r).expect("dimensions agree by construction");
    let y: Vec<f64> = s.iter().zip(&r).map(|(si, ri)| si - ri).collect();

    let u: f64 = rng.random();
    let drawn = if u < 0.8 {
        ProblemKind::Feasible
    } else if u < 0.9 {
        ProblemKind::Infeasible
    } else {
        ProblemKind::Unbounded
    };
    let kind = kind.unwrap_or(drawn);

    let (program, witness) = match kind {
        ProblemKind::Feasible => {
            let p = make_feasible(a, cones, &x, &s, &y);
            (p, Classification::Optimal { x, y, s })
        }
        ProblemKind::Infeasible => {
            let p = make_infeasible(a, cones, &y, &mut rng);
            (p, Classification::PrimalInfeasible { y })
        }
        ProblemKind::Unbounded => {
            let mut x = x;
            let p = make_unbounded(a, cones, &mut x, &s, &mut rng);
            (p, Classification::DualInfeasible { x, s })
        }
    };
    GeneratedInstance {
        program,
        kind,
        witness,
        seed,
    }
}

/// `b = Ax + s`, `c = -A^T y`, so that `(x, y, s)` is primal-dual optimal
/// whenever `s in K`, `y in K*` and `s^T y = 0`.
pub fn make_feasible(
    a: SparseMatrix,
    cones: ConeSpec,
    x: &[f64],
    s: &[f64],
    y: &[f64],
) -> ConeProgram {
    let mut b = spmv(&a, x).expect("x has n entries");
    for (bi, si) in b.iter_mut().zip(s) {
        *bi += si;
    }
    let c: Vec<f64> = spmv_t(&a, y)
        .expect("y has m entries")
        .into_iter()
        .map(|v| -v)
        .collect();
    ConeProgram { a, b, c, cones }
}

/// Adjusts one entry per column so that `A^T y = 0`, then sets
/// `b = -y / ||y||^2` and draws `c` uniformly in `[-1, 1]`.
///
/// In each column the first stored entry whose row has `y_i != 0` is
/// adjusted; columns without such an entry already satisfy `(A^T y)_j = 0`.
pub fn make_infeasible(
    mut a: SparseMatrix,
    cones: ConeSpec,
    y: &[f64],
    rng: &mut impl Rng,
) -> ConeProgram {
    let aty = spmv_t(&a, y).expect("y has m entries");
    for (j, &atyj) in aty.iter().enumerate() {
        let start = a.colptr()[j];
        let (rows, _) = a.column(j);
        if let Some(k) = rows.iter().position(|&i| y[i] != 0.0) {
            let i = rows[k];
            a.vals_mut()[start + k] -= atyj / y[i];
        }
    }
    let yy = dot(y, y);
    let b = y.iter().map(|v| -v / yy).collect();
    let c = (0..a.cols())
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    ConeProgram { a, b, c, cones }
}

/// Replaces zero entries of `x` by one, adjusts one entry per row so that
/// `Ax + s = 0`, then sets `c = -x / ||x||^2` and draws `b` uniformly in
/// `[-1, 1]`.
///
/// In each row the stored entry with the smallest column index is adjusted;
/// an empty row gets a new entry in column 0.
pub fn make_unbounded(
    mut a: SparseMatrix,
    cones: ConeSpec,
    x: &mut [f64],
    s: &[f64],
    rng: &mut impl Rng,
) -> ConeProgram {
    for v in x.iter_mut() {
        if *v == 0.0 {
            *v = 1.0;
        }
    }
    let mut resid = spmv(&a, x).expect("x has n entries");
    for (ri, si) in resid.iter_mut().zip(s) {
        *ri += si;
    }
    let m = a.rows();
    let mut first_col: Vec<Option<usize>> = vec![None; m];
    for j in 0..a.cols() {
        for &i in a.column(j).0 {
            if first_col[i].is_none() {
                first_col[i] = Some(j);
            }
        }
    }
    for i in 0..m {
        let j = first_col[i].unwrap_or(0);
        a.add_to_entry(i, j, -resid[i] / x[j]);
    }
    let xx = dot(x, x);
    let c = x.iter().map(|v| -v / xx).collect();
    let b = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    ConeProgram { a, b, c, cones }
}

/// `z + noise * (||z|| / sqrt(len)) * g` with `g` standard Gaussian: noise
/// relative to the root-mean-square entry of `z`.
pub fn perturb(z: &[f64], noise: f64, rng: &mut impl Rng) -> Vec<f64> {
    let rms = norm2(z) / (z.len().max(1) as f64).sqrt();
    z.iter()
        .map(|v| v + noise * rms * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Residual of one group of optimality or certificate conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResidual {
    pub name: &'static str,
    pub two_norm: f64,
    pub max_abs: f64,
    /// `max_abs / (1 + reference)`, where the reference is the size of the
    /// data the condition is measured against.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSummary {
    pub conditions: Vec<ConditionResidual>,
}

impl ResidualSummary {
    pub fn max_normalized(&self) -> f64 {
        self.conditions
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.normalized))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.conditions.iter().all(|c| c.normalized <= tol)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionResidual> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn condition(name: &'static str, r: &[f64], reference: f64) -> ConditionResidual {
    let max_abs = norm_inf(r);
    ConditionResidual {
        name,
        two_norm: norm2(r),
        max_abs,
        normalized: max_abs / (1.0 + reference),
    }
}

fn scalar_condition(name: &'static str, r: f64, reference: f64) -> ConditionResidual {
    condition(name, &[r], reference)
}

fn distance_to(v: &[f64], proj: &[f64]) -> Vec<f64> {
    v.iter().zip(proj).map(|(a, b)| a - b).collect()
}

/// Residuals of the optimality conditions or of the certificate conditions,
/// depending on the classification. Cone membership is measured as the
/// distance `v - Pi(v)`.
pub fn kkt_residuals(program: &ConeProgram, cls: &Classification) -> Result<ResidualSummary> {
    let (m, n) = (program.m(), program.n());
    let cones = &program.cones;
    let conditions = match cls {
        Classification::Optimal { x, y, s } => {
            check_len("x", n, x.len())?;
            check_len("y", m, y.len())?;
            check_len("s", m, s.len())?;
            let mut primal = spmv(&program.a, x)?;
            for ((p, si), bi) in primal.iter_mut().zip(s).zip(&program.b) {
                *p += si - bi;
            }
            let mut dual = spmv_t(&program.a, y)?;
            for (d, ci) in dual.iter_mut().zip(&program.c) {
                *d += ci;
            }
            let cx = dot(&program.c, x);
            let by = dot(&program.b, y);
            let obj_scale = cx.abs().max(by.abs());
            vec![
                condition("primal residual Ax+s-b", &primal, norm_inf(&program.b)),
                condition("dual residual A'y+c", &dual, norm_inf(&program.c)),
                scalar_condition("complementarity s'y", dot(s, y), obj_scale),
                scalar_condition("duality gap c'x+b'y", cx + by, obj_scale),
                condition(
                    "s in K",
                    &distance_to(s, &project_product(cones, s)?),
                    norm_inf(s),
                ),
                condition(
                    "y in K*",
                    &distance_to(y, &project_product_dual(cones, y)?),
                    norm_inf(y),
                ),
            ]
        }
        Classification::PrimalInfeasible { y } => {
            check_len("y", m, y.len())?;
            vec![
                condition("A'y", &spmv_t(&program.a, y)?, norm_inf(y)),
                scalar_condition("b'y+1", dot(&program.b, y) + 1.0, 0.0),
                condition(
                    "y in K*",
                    &distance_to(y, &project_product_dual(cones, y)?),
                    norm_inf(y),
                ),
            ]
        }
        Classification::DualInfeasible { x, s } => {
            check_len("x", n, x.len())?;
            check_len("s", m, s.len())?;
            let mut r = spmv(&program.a, x)?;
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += si;
            }
            vec![
                condition("Ax+s", &r, norm_inf(s)),
                scalar_condition("c'x+1", dot(&program.c, x) + 1.0, 0.0),
                condition(
                    "s in K",
                    &distance_to(s, &project_product(cones, s)?),
                    norm_inf(s),
                ),
            ]
        }
        Classification::Indeterminate => return Err(Error::Indeterminate),
    };
    Ok(ResidualSummary { conditions })
}
